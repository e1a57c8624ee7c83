#include "routeworks/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "routeworks/params.hpp"

namespace routeworks {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

Tensor::Tensor(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (static_cast<std::size_t>(rows_) * cols_ != data_.size()) {
        throw ContractViolation("Tensor: data length must equal the shape product");
    }
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t.data()[0] = v;
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor(1, n, std::move(v));
}

double Tensor::value() const {
    if (size() != 1) throw ContractViolation("Tensor::value: tensor is not scalar");
    return data_[0];
}

void Gradients::accumulate(const Gradients& other) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t k = 0; k < g[i].size(); ++k) g[i][k] += other.g[i][k];
    }
}

void Gradients::scale(double s) {
    for (auto& gi : g)
        for (auto& v : gi) v *= s;
}

double Gradients::norm() const {
    double acc = 0.0;
    for (const auto& gi : g)
        for (const double v : gi) acc += v * v;
    return std::sqrt(acc);
}

namespace {

ECMap map_of(const Tensor& t) { return ECMap(t.data(), t.rows(), t.cols()); }

}  // namespace

// The backward callable receives the id of its own node; output gradients
// are guaranteed allocated before the call.
struct TapeBackwardAccess {
    static const std::vector<double>& out_grad(Tape& t, int self);
    static const Tensor& val(Tape& t, int id);
    static std::vector<double>& parent_grad(Tape& t, int id);
};

Var Tape::push(Tensor val, std::function<void(Tape&)> back) {
    Node node;
    node.val = std::move(val);
    if (recording_) node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor t) { return push(std::move(t), {}); }

Var Tape::param(const ParamStore& store, int param_index) {
    Node node;
    node.val = store.value(param_index);
    node.val.grad.clear();
    node.param_index = param_index;
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const int am = trans_a ? ta.cols() : ta.rows();
    const int ak = trans_a ? ta.rows() : ta.cols();
    const int bk = trans_b ? tb.cols() : tb.rows();
    const int bn = trans_b ? tb.rows() : tb.cols();
    if (ak != bk) throw ContractViolation("matmul: inner dimensions disagree");

    Tensor out(am, bn);
    {
        EMap c(out.data(), am, bn);
        const auto ma = map_of(ta);
        const auto mb = map_of(tb);
        if (!trans_a && !trans_b) c.noalias() = ma * mb;
        else if (!trans_a && trans_b) c.noalias() = ma * mb.transpose();
        else if (trans_a && !trans_b) c.noalias() = ma.transpose() * mb;
        else c.noalias() = ma.transpose() * mb.transpose();
    }
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, b, trans_a, trans_b, self_id](Tape& t) {
        const Tensor& tc = t.nodes_[self_id].val;
        ECMap dc(tc.grad.data(), tc.rows(), tc.cols());
        const auto ma = map_of(t.nodes_[a.id].val);
        const auto mb = map_of(t.nodes_[b.id].val);
        {
            auto& ga = t.grad_of(a.id);
            EMap da(ga.data(), t.nodes_[a.id].val.rows(), t.nodes_[a.id].val.cols());
            if (!trans_a && !trans_b) da.noalias() += dc * mb.transpose();
            else if (!trans_a && trans_b) da.noalias() += dc * mb;
            else if (trans_a && !trans_b) da.noalias() += mb * dc.transpose();
            else da.noalias() += mb.transpose() * dc.transpose();
        }
        {
            auto& gb = t.grad_of(b.id);
            EMap db(gb.data(), t.nodes_[b.id].val.rows(), t.nodes_[b.id].val.cols());
            if (!trans_a && !trans_b) db.noalias() += ma.transpose() * dc;
            else if (!trans_a && trans_b) db.noalias() += dc.transpose() * ma;
            else if (trans_a && !trans_b) db.noalias() += ma * dc;
            else db.noalias() += dc.transpose() * ma.transpose();
        }
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rows() != tb.rows() || ta.cols() != tb.cols()) {
        throw ContractViolation("add: shape mismatch");
    }
    Tensor out(ta.rows(), ta.cols());
    for (int i = 0; i < ta.size(); ++i) out.data()[i] = ta.data()[i] + tb.data()[i];
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, b, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i];
        auto& gb = t.grad_of(b.id);
        for (std::size_t i = 0; i < dc.size(); ++i) gb[i] += dc[i];
    });
}

Var Tape::add_rowvec(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (tb.rows() != 1 || tb.cols() != ta.cols()) {
        throw ContractViolation("add_rowvec: expected [m,n] + [1,n]");
    }
    Tensor out(ta.rows(), ta.cols());
    for (int r = 0; r < ta.rows(); ++r)
        for (int c = 0; c < ta.cols(); ++c) out.at(r, c) = ta.at(r, c) + tb.at(0, c);
    const int self_id = static_cast<int>(nodes_.size());
    const int rows = ta.rows(), cols = ta.cols();
    return push(std::move(out), [a, b, rows, cols, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i];
        auto& gb = t.grad_of(b.id);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) gb[c] += dc[static_cast<std::size_t>(r) * cols + c];
    });
}

Var Tape::scale(Var a, double s) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), ta.cols());
    for (int i = 0; i < ta.size(); ++i) out.data()[i] = ta.data()[i] * s;
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, s, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * s;
    });
}

Var Tape::relu(Var a) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), ta.cols());
    for (int i = 0; i < ta.size(); ++i) out.data()[i] = std::max(0.0, ta.data()[i]);
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        const Tensor& ta = t.nodes_[a.id].val;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) {
            if (ta.data()[i] > 0.0) ga[i] += dc[i];
        }
    });
}

Var Tape::tanh_clip(Var a, double c) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), ta.cols());
    for (int i = 0; i < ta.size(); ++i) out.data()[i] = c * std::tanh(ta.data()[i]);
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, c, self_id](Tape& t) {
        const Tensor& tc = t.nodes_[self_id].val;
        const auto& dc = tc.grad;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) {
            const double y = tc.data()[i] / c;
            ga[i] += dc[i] * c * (1.0 - y * y);
        }
    });
}

Var Tape::softmax(Var a, const std::vector<std::uint8_t>* mask) {
    const Tensor& ta = value(a);
    const int rows = ta.rows(), cols = ta.cols();
    if (mask && static_cast<int>(mask->size()) != cols) {
        throw ContractViolation("softmax: mask length must equal the column count");
    }
    Tensor out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < cols; ++c) {
            if (mask && !(*mask)[c]) continue;
            mx = std::max(mx, ta.at(r, c));
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw ContractViolation("softmax: fully masked slice");
        }
        double denom = 0.0;
        for (int c = 0; c < cols; ++c) {
            if (mask && !(*mask)[c]) {
                out.at(r, c) = 0.0;
                continue;
            }
            const double e = std::exp(ta.at(r, c) - mx);
            out.at(r, c) = e;
            denom += e;
        }
        for (int c = 0; c < cols; ++c) out.at(r, c) /= denom;
    }
    const int self_id = static_cast<int>(nodes_.size());
    std::vector<std::uint8_t> mask_copy = mask ? *mask : std::vector<std::uint8_t>();
    return push(std::move(out), [a, rows, cols, mask_copy, self_id](Tape& t) {
        const Tensor& tp = t.nodes_[self_id].val;
        const auto& dp = tp.grad;
        auto& ga = t.grad_of(a.id);
        for (int r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) {
                dot += dp[static_cast<std::size_t>(r) * cols + c] * tp.at(r, c);
            }
            for (int c = 0; c < cols; ++c) {
                if (!mask_copy.empty() && !mask_copy[c]) continue;
                const std::size_t i = static_cast<std::size_t>(r) * cols + c;
                ga[i] += tp.data()[i] * (dp[i] - dot);
            }
        }
    });
}

Var Tape::instance_norm(Var x, Var gain, Var bias, double eps) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    const int rows = tx.rows(), cols = tx.cols();
    if (tg.rows() != 1 || tg.cols() != cols || tb.rows() != 1 || tb.cols() != cols) {
        throw ContractViolation("instance_norm: gain/bias must be [1,n]");
    }
    // per-column normalization across rows (features over the node set)
    Tensor out(rows, cols);
    std::vector<double> mean(cols, 0.0), inv_std(cols, 0.0);
    for (int c = 0; c < cols; ++c) {
        double mu = 0.0;
        for (int r = 0; r < rows; ++r) mu += tx.at(r, c);
        mu /= rows;
        double var = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double d = tx.at(r, c) - mu;
            var += d * d;
        }
        var /= rows;
        mean[c] = mu;
        inv_std[c] = 1.0 / std::sqrt(var + eps);
        for (int r = 0; r < rows; ++r) {
            out.at(r, c) = tg.at(0, c) * (tx.at(r, c) - mu) * inv_std[c] + tb.at(0, c);
        }
    }
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out),
                [x, gain, bias, rows, cols, mean, inv_std, self_id](Tape& t) {
        const auto& dy = t.nodes_[self_id].val.grad;
        const Tensor& tx = t.nodes_[x.id].val;
        const Tensor& tg = t.nodes_[gain.id].val;
        auto& gx = t.grad_of(x.id);
        auto& gg = t.grad_of(gain.id);
        auto& gb = t.grad_of(bias.id);
        for (int c = 0; c < cols; ++c) {
            const double g = tg.at(0, c);
            const double is = inv_std[c];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int r = 0; r < rows; ++r) {
                const std::size_t i = static_cast<std::size_t>(r) * cols + c;
                const double xhat = (tx.data()[i] - mean[c]) * is;
                const double dxhat = dy[i] * g;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                gg[c] += dy[i] * xhat;
                gb[c] += dy[i];
            }
            for (int r = 0; r < rows; ++r) {
                const std::size_t i = static_cast<std::size_t>(r) * cols + c;
                const double xhat = (tx.data()[i] - mean[c]) * is;
                const double dxhat = dy[i] * g;
                gx[i] += is * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / rows);
            }
        }
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractViolation("concat_cols: no parts");
    const int rows = value(parts[0]).rows();
    int cols = 0;
    for (const Var p : parts) {
        if (value(p).rows() != rows) throw ContractViolation("concat_cols: row mismatch");
        cols += value(p).cols();
    }
    Tensor out(rows, cols);
    int off = 0;
    for (const Var p : parts) {
        const Tensor& tp = value(p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < tp.cols(); ++c) out.at(r, off + c) = tp.at(r, c);
        off += tp.cols();
    }
    const int self_id = static_cast<int>(nodes_.size());
    std::vector<Var> parts_copy = parts;
    return push(std::move(out), [parts_copy, rows, cols, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        int off = 0;
        for (const Var p : parts_copy) {
            const int pc = t.nodes_[p.id].val.cols();
            auto& gp = t.grad_of(p.id);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < pc; ++c)
                    gp[static_cast<std::size_t>(r) * pc + c] +=
                        dc[static_cast<std::size_t>(r) * cols + off + c];
            off += pc;
        }
    });
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    const Tensor& ta = value(a);
    if (c0 < 0 || c1 > ta.cols() || c0 >= c1) throw ContractViolation("slice_cols: bad range");
    const int rows = ta.rows(), cols = c1 - c0, full = ta.cols();
    Tensor out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = ta.at(r, c0 + c);
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, c0, rows, cols, full, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                ga[static_cast<std::size_t>(r) * full + c0 + c] +=
                    dc[static_cast<std::size_t>(r) * cols + c];
    });
}

Var Tape::row(Var a, int r) {
    const Tensor& ta = value(a);
    if (r < 0 || r >= ta.rows()) throw ContractViolation("row: index out of range");
    const int cols = ta.cols();
    Tensor out(1, cols);
    for (int c = 0; c < cols; ++c) out.at(0, c) = ta.at(r, c);
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, r, cols, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (int c = 0; c < cols; ++c) ga[static_cast<std::size_t>(r) * cols + c] += dc[c];
    });
}

Var Tape::mean_rows(Var a) {
    const Tensor& ta = value(a);
    const int rows = ta.rows(), cols = ta.cols();
    Tensor out(1, cols);
    for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += ta.at(r, c);
        out.at(0, c) = s / rows;
    }
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, rows, cols, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        auto& ga = t.grad_of(a.id);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                ga[static_cast<std::size_t>(r) * cols + c] += dc[c] / rows;
    });
}

Var Tape::sum(Var a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (int i = 0; i < ta.size(); ++i) s += ta.data()[i];
    const int self_id = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(s), [a, self_id](Tape& t) {
        const double dc = t.nodes_[self_id].val.grad[0];
        auto& ga = t.grad_of(a.id);
        for (auto& v : ga) v += dc;
    });
}

Var Tape::pick(Var a, int r, int c) {
    const Tensor& ta = value(a);
    if (r < 0 || r >= ta.rows() || c < 0 || c >= ta.cols()) {
        throw ContractViolation("pick: index out of range");
    }
    const int cols = ta.cols();
    const int self_id = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(ta.at(r, c)), [a, r, c, cols, self_id](Tape& t) {
        const double dc = t.nodes_[self_id].val.grad[0];
        t.grad_of(a.id)[static_cast<std::size_t>(r) * cols + c] += dc;
    });
}

Var Tape::log(Var a) {
    const Tensor& ta = value(a);
    Tensor out(ta.rows(), ta.cols());
    for (int i = 0; i < ta.size(); ++i) out.data()[i] = std::log(ta.data()[i]);
    const int self_id = static_cast<int>(nodes_.size());
    return push(std::move(out), [a, self_id](Tape& t) {
        const auto& dc = t.nodes_[self_id].val.grad;
        const Tensor& ta = t.nodes_[a.id].val;
        auto& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] / ta.data()[i];
    });
}

void Tape::backward(Var loss, Gradients& grads) {
    if (!recording_) throw ContractViolation("backward: tape is not recording");
    if (backward_done_) throw ContractViolation("backward: already run on this tape");
    if (value(loss).size() != 1) throw ContractViolation("backward: loss must be scalar");
    backward_done_ = true;

    grad_of(loss.id)[0] = 1.0;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& node = nodes_[id];
        if (node.val.grad.empty()) continue;  // nothing downstream touched it
        if (node.param_index >= 0) {
            if (node.param_index >= static_cast<int>(grads.g.size())) {
                throw ContractViolation("backward: gradient buffer does not match the param store");
            }
            auto& sink = grads.g[node.param_index];
            for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += node.val.grad[i];
        }
        if (node.back) node.back(*this);
    }
}

}  // namespace routeworks

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "routeworks/common.hpp"

namespace routeworks {

// Dense row-major matrix of 64-bit floats with an optional gradient slot.
// Vectors are 1 x n, scalars 1 x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
    Tensor(int rows, int cols, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor row(std::vector<double> v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    std::vector<int> shape() const { return {rows_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double value() const;  // 1x1 only

    bool has_grad() const { return !grad.empty(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data_.size(), 0.0);
    }

    std::vector<double> grad;  // same length as data when present

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

class ParamStore;

// Per-parameter gradient accumulator, aligned with ParamStore order.
struct Gradients {
    std::vector<std::vector<double>> g;

    void accumulate(const Gradients& other);
    void scale(double s);
    double norm() const;
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape.  One tape per forward pass; backward may run once, then
// the graph is dead.  A non-recording tape computes values only.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Var constant(Tensor t);
    Var param(const ParamStore& store, int param_index);

    const Tensor& value(Var v) const { return nodes_[v.id].val; }

    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var b);  // [m,n] + [1,n]
    Var scale(Var a, double s);
    Var relu(Var a);
    Var tanh_clip(Var a, double c);  // c * tanh(a)
    // Row-wise softmax; `mask` (per column, nonzero = keep) zeroes masked
    // entries exactly.  Throws on a fully masked row.
    Var softmax(Var a, const std::vector<std::uint8_t>* mask = nullptr);
    Var instance_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var a, int c0, int c1);
    Var row(Var a, int r);
    Var mean_rows(Var a);
    Var sum(Var a);
    Var pick(Var a, int r, int c);
    Var log(Var a);

    // Accumulates d(loss)/d(param) into `grads` for every param leaf.
    void backward(Var loss, Gradients& grads);

    std::size_t mark() const { return nodes_.size(); }
    void truncate(std::size_t mark) { nodes_.resize(mark); }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        std::function<void(Tape&)> back;  // empty for leaves / non-recording
        int param_index = -1;
    };

    Var push(Tensor val, std::function<void(Tape&)> back);
    std::vector<double>& grad_of(int id) {
        nodes_[id].val.ensure_grad();
        return nodes_[id].val.grad;
    }

    std::vector<Node> nodes_;
    bool recording_ = true;
    bool backward_done_ = false;
    Gradients* sink_ = nullptr;

    friend struct TapeBackwardAccess;
};

}  // namespace routeworks

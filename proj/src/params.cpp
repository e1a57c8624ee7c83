#include "routeworks/params.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace routeworks {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

int ParamStore::add(const std::string& name, Tensor value) {
    if (index_of(name) >= 0) throw ContractViolation("ParamStore: duplicate parameter " + name);
    Entry e;
    e.name = name;
    e.m = Tensor(value.rows(), value.cols());
    e.v = Tensor(value.rows(), value.cols());
    e.value = std::move(value);
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Tensor& ParamStore::value(const std::string& name) {
    const int i = index_of(name);
    if (i < 0) throw ContractViolation("ParamStore: unknown parameter " + name);
    return entries_[i].value;
}

std::int64_t ParamStore::parameter_count() const {
    std::int64_t total = 0;
    for (const auto& e : entries_) total += e.value.size();
    return total;
}

Gradients ParamStore::zero_grads() const {
    Gradients g;
    g.g.resize(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        g.g[i].assign(static_cast<std::size_t>(entries_[i].value.size()), 0.0);
    }
    return g;
}

void ParamStore::adam_step(const Gradients& grads, const AdamConfig& cfg) {
    if (grads.g.size() != entries_.size()) {
        throw ContractViolation("adam_step: gradient buffer does not match the store");
    }
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        Entry& e = entries_[i];
        const auto& g = grads.g[i];
        for (int k = 0; k < e.value.size(); ++k) {
            double& m = e.m.data()[k];
            double& v = e.v.data()[k];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[k];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[k] * g[k];
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            e.value.data()[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

namespace {

constexpr char kMagic[] = "routeworks-ckpt-v1\n";

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    write_i64(out, static_cast<std::int64_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_i64(out, t.rows());
    write_i64(out, t.cols());
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::istream& in) {
    const std::int64_t len = read_i64(in);
    std::string name(static_cast<std::size_t>(len), '\0');
    in.read(name.data(), len);
    const std::int64_t rows = read_i64(in);
    const std::int64_t cols = read_i64(in);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw ContractViolation("checkpoint: truncated tensor " + name);
    return {std::move(name), std::move(t)};
}

}  // namespace

void ParamStore::save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic) - 1);
    write_i64(out, static_cast<std::int64_t>(entries_.size()));
    write_i64(out, adam_t_);
    for (const auto& e : entries_) write_tensor(out, e.name, e.value);
    for (const auto& e : entries_) write_tensor(out, "adam.m:" + e.name, e.m);
    for (const auto& e : entries_) write_tensor(out, "adam.v:" + e.name, e.v);
}

ParamStore ParamStore::load(std::istream& in) {
    std::string magic(sizeof(kMagic) - 1, '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (magic != kMagic) throw ContractViolation("checkpoint: bad version header");
    const std::int64_t count = read_i64(in);
    ParamStore store;
    store.adam_t_ = read_i64(in);
    for (std::int64_t i = 0; i < count; ++i) {
        auto [name, value] = read_tensor(in);
        store.add(name, std::move(value));
    }
    for (std::int64_t i = 0; i < count; ++i) {
        auto [name, value] = read_tensor(in);
        if (name != "adam.m:" + store.entries_[i].name) {
            throw ContractViolation("checkpoint: moment order mismatch at " + name);
        }
        store.entries_[i].m = std::move(value);
    }
    for (std::int64_t i = 0; i < count; ++i) {
        auto [name, value] = read_tensor(in);
        if (name != "adam.v:" + store.entries_[i].name) {
            throw ContractViolation("checkpoint: moment order mismatch at " + name);
        }
        store.entries_[i].v = std::move(value);
    }
    return store;
}

void ParamStore::save_file(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ContractViolation("checkpoint: cannot open " + tmp);
        save(out);
        if (!out) throw ContractViolation("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ContractViolation("checkpoint: rename failed for " + path);
    }
}

ParamStore ParamStore::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractViolation("checkpoint: cannot open " + path);
    return load(in);
}

}  // namespace routeworks

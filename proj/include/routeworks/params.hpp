#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "routeworks/tensor.hpp"

namespace routeworks {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Named parameter set with Adam moments.  Registration order is the
// iteration order everywhere, so runs are reproducible.
class ParamStore {
public:
    int add(const std::string& name, Tensor value);
    int index_of(const std::string& name) const;  // -1 when absent
    int count() const { return static_cast<int>(entries_.size()); }
    const std::string& name(int i) const { return entries_[i].name; }
    Tensor& value(int i) { return entries_[i].value; }
    const Tensor& value(int i) const { return entries_[i].value; }
    Tensor& value(const std::string& name);

    std::int64_t parameter_count() const;

    Gradients zero_grads() const;
    void adam_step(const Gradients& grads, const AdamConfig& cfg);
    std::int64_t adam_t() const { return adam_t_; }

    // Checkpoint: version header, then a named list of shaped tensors as raw
    // little-endian doubles (parameters, then Adam moments).
    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;  // write-then-rename
    static ParamStore load(std::istream& in);
    static ParamStore load_file(const std::string& path);

private:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor m;
        Tensor v;
    };
    std::vector<Entry> entries_;
    std::int64_t adam_t_ = 0;
};

}  // namespace routeworks

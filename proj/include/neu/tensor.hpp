#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "neu/common.hpp"

namespace neu::nn {

// Dense row-major array of doubles. Gradient storage lives next to the
// values; it is empty until a trainable owner allocates it.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;  // values, row-major
    std::vector<double> g;  // gradient; empty or same size as v

    Tensor() = default;
    explicit Tensor(std::vector<size_t> sh) : shape(std::move(sh)) {
        v.assign(count(shape), 0.0);
    }
    Tensor(std::vector<size_t> sh, std::vector<double> vals)
        : shape(std::move(sh)), v(std::move(vals)) {
        if (v.size() != count(shape)) fail("Tensor: values length does not match shape");
    }

    static size_t count(const std::vector<size_t>& sh) {
        size_t n = 1;
        for (size_t d : sh) n *= d;
        return n;
    }

    size_t size() const { return v.size(); }
    size_t dim(size_t i) const { return shape.at(i); }

    void alloc_grad() { g.assign(v.size(), 0.0); }
    void zero_grad() {
        if (g.size() != v.size()) g.assign(v.size(), 0.0);
        else std::fill(g.begin(), g.end(), 0.0);
    }
    bool has_grad() const { return g.size() == v.size(); }

    double& at(size_t r, size_t c) { return v[r * shape[1] + c]; }
    double at(size_t r, size_t c) const { return v[r * shape[1] + c]; }
};

// Named tensors with a trainable flag and a version tag. Names are unique;
// every trainable tensor keeps a grad slot. Storage is a deque so Tensor
// references stay stable as parameters are added.
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        bool trainable = true;
    };

    explicit ParameterSet(std::string version = "neu.params.v1") : version_(std::move(version)) {}

    Tensor& add(const std::string& name, std::vector<size_t> shape, bool trainable = true);

    // Glorot-uniform initialized parameter.
    Tensor& add_init(const std::string& name, std::vector<size_t> shape, Rng& rng,
                     bool trainable = true);

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    void zero_grads();

    const std::string& version() const { return version_; }
    void set_version(std::string v) { version_ = std::move(v); }

    std::deque<Entry>& entries() { return entries_; }
    const std::deque<Entry>& entries() const { return entries_; }

private:
    std::string version_;
    std::deque<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

// Checkpoint container: version tag, step counter, named tensors. JSON with
// 17-significant-digit doubles, which round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParameterSet& params, long step,
                     const std::unordered_map<std::string, std::string>& meta = {});

struct Checkpoint {
    long step = 0;
    std::unordered_map<std::string, std::string> meta;
};

// Loads tensors into `params`. Every tensor in the file must already exist in
// `params` with the same shape, and vice versa; the version tags must match.
Checkpoint load_checkpoint(const std::string& path, ParameterSet& params);

}  // namespace neu::nn

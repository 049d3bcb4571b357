#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "neu/common.hpp"
#include "neu/tensor.hpp"

namespace neu::nn {

// One value in a dynamic computation graph. Gradients are allocated lazily:
// a node whose grad buffer is still empty after backward never influenced
// the loss.
struct Node {
    Tensor val;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;

    size_t size() const { return val.size(); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
    void add_grad(size_t i, double g) {
        ensure_grad();
        grad[i] += g;
    }
};

using Var = std::shared_ptr<Node>;

// Tape of nodes in creation order, which is also a topological order; the
// backward pass walks it in reverse. Constructed with want_grad=false the
// graph computes values only and stores nothing.
//
// Parameter tensors are consumed by reference (embed / affine / conv1d_same)
// so large tables are never copied; their gradients accumulate straight into
// Tensor::g when it is allocated.
class Graph {
public:
    explicit Graph(bool want_grad = true) : want_grad_(want_grad) {}

    bool grad_enabled() const { return want_grad_; }

    Var input(Tensor t);
    Var scalar(double x) { return input(Tensor({1}, {x})); }
    Var zeros(size_t n) { return input(Tensor({n})); }

    // rows of `table` selected by ids; [len × d]. update=false freezes the
    // table (no gradient flows into it).
    Var embed(Tensor& table, const std::vector<int>& ids, bool update = true);

    // y = W x (+ b); W [m×n], x [n] -> [m]. b may be null.
    Var affine(Tensor& W, Tensor* b, const Var& x);

    Var add(const Var& a, const Var& b);
    Var sub(const Var& a, const Var& b);
    Var mul(const Var& a, const Var& b);
    Var emin(const Var& a, const Var& b);
    Var emax(const Var& a, const Var& b);
    Var scale(const Var& a, double s);
    Var add_scalar(const Var& a, double c);

    Var concat(const std::vector<Var>& parts);
    Var slice(const Var& a, size_t offset, size_t len);

    Var relu(const Var& a);
    Var tanh_(const Var& a);
    Var sigmoid(const Var& a);

    Var sum(const Var& a);
    Var logsumexp(const Var& a);
    Var dot(const Var& a, const Var& b);
    // cosine similarity of two equal-length vectors; 0 when either norm is 0
    Var cosine(const Var& a, const Var& b);

    // X [T×d] stacked from per-row vars
    Var stack_rows(const std::vector<Var>& rows);
    Var mean_rows(const Var& X);
    Var max_rows(const Var& X);

    // 1-D convolution over rows with zero "same" padding (left pad (w-1)/2).
    // X [L×Cin], K [Kn×w×Cin], b [Kn] -> [L×Kn]
    Var conv1d_same(Tensor& K, Tensor* b, const Var& X);

    // Inverted dropout; identity when p == 0.
    Var dropout(const Var& a, double p, Rng& rng);

    // Escape hatch for module-specific ops (CRF NLL lives in ner.cpp).
    Var custom(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back);

    // Seeds d(loss)/d(loss)=1 and runs the tape in reverse. `loss` must be
    // scalar and belong to this graph.
    void backward(const Var& loss);

    size_t node_count() const { return order_.size(); }

private:
    Var make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back);

    bool want_grad_;
    std::vector<Var> order_;
};

}  // namespace neu::nn

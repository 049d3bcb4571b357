#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neu/autograd.hpp"

namespace neu::nn {

// ---- layer builders -------------------------------------------------------
// Parameters are registered under a name prefix; the run functions look the
// same names up again, so a layer is (ParameterSet, prefix).

void lstm_init(ParameterSet& ps, const std::string& prefix, size_t in_dim, size_t hidden,
               Rng& rng);
std::vector<Var> lstm_run(Graph& g, ParameterSet& ps, const std::string& prefix,
                          const std::vector<Var>& xs, bool reverse);

// forward and backward halves concatenated per step: [T] vars of size 2h
void bilstm_init(ParameterSet& ps, const std::string& prefix, size_t in_dim, size_t hidden,
                 Rng& rng);
std::vector<Var> bilstm_run(Graph& g, ParameterSet& ps, const std::string& prefix,
                            const std::vector<Var>& xs);

// affine + ReLU per hidden layer, affine output
void mlp_init(ParameterSet& ps, const std::string& prefix, size_t in_dim,
              const std::vector<size_t>& hidden, size_t out_dim, Rng& rng);
Var mlp_run(Graph& g, ParameterSet& ps, const std::string& prefix, const Var& x);

// Stacked 1-D char convolutions: per kernel width, conv -> ReLU -> conv,
// then a global max-pool per kernel, concatenated across widths. Inputs
// shorter than the largest width are zero-padded. Output dim is
// widths.size() * kernels regardless of input length.
struct ConvSpec {
    std::vector<size_t> widths{3, 4, 5};
    size_t kernels = 100;
};
void char_conv_init(ParameterSet& ps, const std::string& prefix, size_t in_dim,
                    const ConvSpec& spec, Rng& rng);
Var char_conv_pool(Graph& g, ParameterSet& ps, const std::string& prefix, const Var& chars,
                   const ConvSpec& spec);

// ---- optimizer ------------------------------------------------------------

// Adam with bias correction. end_epoch() applies the scheduled decay to the
// learning rate; call it at whatever boundary the training loop uses.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr_decay = 0.99;
    long step_count = 0;

    void step(ParameterSet& ps);
    void end_epoch() { lr *= lr_decay; }

    std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

// ---- gradient checking ----------------------------------------------------

// `loss(want_grad)` must recompute the loss at the current parameters; when
// want_grad is true it must also populate gradients (zeroed here first).
// Returns max over checked coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// with central differences. Coordinates are sampled per tensor when
// max_coords_per_tensor > 0 and a tensor is larger than that.
double grad_check(const std::function<double(bool want_grad)>& loss, ParameterSet& ps,
                  double epsilon = 1e-4, size_t max_coords_per_tensor = 0, Rng* rng = nullptr);

}  // namespace neu::nn

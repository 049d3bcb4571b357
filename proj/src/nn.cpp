#include "neu/nn.hpp"

#include <algorithm>
#include <cmath>

namespace neu::nn {

void lstm_init(ParameterSet& ps, const std::string& prefix, size_t in_dim, size_t hidden,
               Rng& rng) {
    ps.add_init(prefix + ".Wx", {4 * hidden, in_dim}, rng);
    ps.add_init(prefix + ".Wh", {4 * hidden, hidden}, rng);
    Tensor& b = ps.add(prefix + ".b", {4 * hidden});
    // forget gate bias starts at 1
    for (size_t i = hidden; i < 2 * hidden; ++i) b.v[i] = 1.0;
}

std::vector<Var> lstm_run(Graph& g, ParameterSet& ps, const std::string& prefix,
                          const std::vector<Var>& xs, bool reverse) {
    Tensor& Wx = ps.get(prefix + ".Wx");
    Tensor& Wh = ps.get(prefix + ".Wh");
    Tensor& b = ps.get(prefix + ".b");
    const size_t h = Wh.shape[1];
    Var hv = g.zeros(h);
    Var cv = g.zeros(h);
    std::vector<Var> out(xs.size());
    for (size_t step = 0; step < xs.size(); ++step) {
        const size_t t = reverse ? xs.size() - 1 - step : step;
        Var gates = g.add(g.affine(Wx, &b, xs[t]), g.affine(Wh, nullptr, hv));
        Var in_g = g.sigmoid(g.slice(gates, 0, h));
        Var forget_g = g.sigmoid(g.slice(gates, h, h));
        Var cand = g.tanh_(g.slice(gates, 2 * h, h));
        Var out_g = g.sigmoid(g.slice(gates, 3 * h, h));
        cv = g.add(g.mul(forget_g, cv), g.mul(in_g, cand));
        hv = g.mul(out_g, g.tanh_(cv));
        out[t] = hv;
    }
    return out;
}

void bilstm_init(ParameterSet& ps, const std::string& prefix, size_t in_dim, size_t hidden,
                 Rng& rng) {
    lstm_init(ps, prefix + ".fwd", in_dim, hidden, rng);
    lstm_init(ps, prefix + ".bwd", in_dim, hidden, rng);
}

std::vector<Var> bilstm_run(Graph& g, ParameterSet& ps, const std::string& prefix,
                            const std::vector<Var>& xs) {
    auto fwd = lstm_run(g, ps, prefix + ".fwd", xs, false);
    auto bwd = lstm_run(g, ps, prefix + ".bwd", xs, true);
    std::vector<Var> out(xs.size());
    for (size_t t = 0; t < xs.size(); ++t) out[t] = g.concat({fwd[t], bwd[t]});
    return out;
}

void mlp_init(ParameterSet& ps, const std::string& prefix, size_t in_dim,
              const std::vector<size_t>& hidden, size_t out_dim, Rng& rng) {
    size_t d = in_dim;
    size_t li = 0;
    for (size_t hdim : hidden) {
        ps.add_init(prefix + ".l" + std::to_string(li) + ".W", {hdim, d}, rng);
        ps.add(prefix + ".l" + std::to_string(li) + ".b", {hdim});
        d = hdim;
        ++li;
    }
    ps.add_init(prefix + ".out.W", {out_dim, d}, rng);
    ps.add(prefix + ".out.b", {out_dim});
}

Var mlp_run(Graph& g, ParameterSet& ps, const std::string& prefix, const Var& x) {
    Var h = x;
    for (size_t li = 0;; ++li) {
        const std::string name = prefix + ".l" + std::to_string(li) + ".W";
        if (!ps.contains(name)) break;
        h = g.relu(g.affine(ps.get(name), &ps.get(prefix + ".l" + std::to_string(li) + ".b"), h));
    }
    return g.affine(ps.get(prefix + ".out.W"), &ps.get(prefix + ".out.b"), h);
}

void char_conv_init(ParameterSet& ps, const std::string& prefix, size_t in_dim,
                    const ConvSpec& spec, Rng& rng) {
    for (size_t w : spec.widths) {
        const std::string wp = prefix + ".w" + std::to_string(w);
        ps.add_init(wp + ".c0.K", {spec.kernels, w, in_dim}, rng);
        ps.add(wp + ".c0.b", {spec.kernels});
        ps.add_init(wp + ".c1.K", {spec.kernels, w, spec.kernels}, rng);
        ps.add(wp + ".c1.b", {spec.kernels});
    }
}

// zero-pads X with extra rows so L >= target
static Var pad_rows(Graph& g, const Var& X, size_t target) {
    const size_t L = X->val.shape[0], d = X->val.shape[1];
    if (L >= target) return X;
    Tensor out({target, d});
    std::copy(X->val.v.begin(), X->val.v.end(), out.v.begin());
    Var xc = X;
    return g.custom(std::move(out), {X}, [xc](Node& self) {
        for (size_t i = 0; i < xc->size(); ++i) xc->add_grad(i, self.grad[i]);
    });
}

Var char_conv_pool(Graph& g, ParameterSet& ps, const std::string& prefix, const Var& chars,
                   const ConvSpec& spec) {
    if (chars->val.shape.size() != 2 || chars->val.shape[0] == 0)
        fail("char_conv_pool: input must be a non-empty [L×d] matrix");
    size_t maxw = 0;
    for (size_t w : spec.widths) maxw = std::max(maxw, w);
    Var X = pad_rows(g, chars, maxw);
    std::vector<Var> pooled;
    pooled.reserve(spec.widths.size());
    for (size_t w : spec.widths) {
        const std::string wp = prefix + ".w" + std::to_string(w);
        Var h1 = g.relu(g.conv1d_same(ps.get(wp + ".c0.K"), &ps.get(wp + ".c0.b"), X));
        Var h2 = g.conv1d_same(ps.get(wp + ".c1.K"), &ps.get(wp + ".c1.b"), h1);
        pooled.push_back(g.max_rows(h2));
    }
    return g.concat(pooled);
}

void AdamState::step(ParameterSet& ps) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (auto& e : ps.entries()) {
        if (!e.trainable) continue;
        Tensor& t = e.tensor;
        if (!t.has_grad()) fail("adam_step: parameter '", e.name, "' has no gradient");
        auto& [m, v] = moments[e.name];
        if (m.size() != t.size()) {
            m.assign(t.size(), 0.0);
            v.assign(t.size(), 0.0);
        }
        for (size_t i = 0; i < t.size(); ++i) {
            const double gi = t.g[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double grad_check(const std::function<double(bool)>& loss, ParameterSet& ps, double epsilon,
                  size_t max_coords_per_tensor, Rng* rng) {
    ps.zero_grads();
    const double base = loss(true);
    if (!std::isfinite(base)) fail("grad_check: loss is not finite");
    double max_rel = 0.0;
    for (auto& e : ps.entries()) {
        if (!e.trainable) continue;
        Tensor& t = e.tensor;
        std::vector<size_t> coords;
        if (max_coords_per_tensor == 0 || t.size() <= max_coords_per_tensor) {
            coords.resize(t.size());
            for (size_t i = 0; i < t.size(); ++i) coords[i] = i;
        } else {
            if (!rng) fail("grad_check: sampling requested but no rng given");
            for (size_t i = 0; i < max_coords_per_tensor; ++i)
                coords.push_back(rng->uniform_index(t.size()));
        }
        for (size_t i : coords) {
            const double orig = t.v[i];
            t.v[i] = orig + epsilon;
            const double lp = loss(false);
            t.v[i] = orig - epsilon;
            const double lm = loss(false);
            t.v[i] = orig;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                fail("grad_check: perturbed loss is not finite at '", e.name, "'[", i, "]");
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double analytic = t.g[i];
            const double rel = std::fabs(analytic - numeric) /
                               std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace neu::nn

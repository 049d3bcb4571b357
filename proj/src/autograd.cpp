#include "neu/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace neu::nn {

Var Graph::make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    if (want_grad_) {
        n->parents = std::move(parents);
        n->back = std::move(back);
        order_.push_back(n);
    }
    return n;
}

Var Graph::input(Tensor t) { return make(std::move(t), {}, nullptr); }

Var Graph::embed(Tensor& table, const std::vector<int>& ids, bool update) {
    if (table.shape.size() != 2) fail("embed: table must be 2-D");
    const size_t V = table.shape[0], d = table.shape[1];
    Tensor out({ids.size(), d});
    for (size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<size_t>(id) >= V)
            fail("embed: id ", id, " out of range [0, ", V, ")");
        std::copy_n(table.v.begin() + static_cast<size_t>(id) * d, d, out.v.begin() + i * d);
    }
    Tensor* tp = (update && table.has_grad()) ? &table : nullptr;
    std::vector<int> ids_copy = ids;
    return make(std::move(out), {}, [tp, ids_copy, d](Node& self) {
        if (!tp) return;
        for (size_t i = 0; i < ids_copy.size(); ++i) {
            double* dst = tp->g.data() + static_cast<size_t>(ids_copy[i]) * d;
            const double* src = self.grad.data() + i * d;
            for (size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

Var Graph::affine(Tensor& W, Tensor* b, const Var& x) {
    if (W.shape.size() != 2) fail("affine: weight must be 2-D");
    const size_t m = W.shape[0], n = W.shape[1];
    if (x->size() != n) fail("affine: input size ", x->size(), " != ", n);
    Tensor out({m});
    const double* xv = x->val.v.data();
    for (size_t i = 0; i < m; ++i) {
        const double* wr = W.v.data() + i * n;
        double acc = b ? b->v[i] : 0.0;
        for (size_t j = 0; j < n; ++j) acc += wr[j] * xv[j];
        out.v[i] = acc;
    }
    Tensor* Wp = W.has_grad() ? &W : nullptr;
    Tensor* bp = (b && b->has_grad()) ? b : nullptr;
    const Tensor* Wv = &W;
    Var xc = x;
    return make(std::move(out), {x}, [Wp, bp, Wv, xc, m, n](Node& self) {
        const double* go = self.grad.data();
        xc->ensure_grad();
        double* gx = xc->grad.data();
        const double* xv = xc->val.v.data();
        for (size_t i = 0; i < m; ++i) {
            const double gi = go[i];
            if (gi == 0.0) continue;
            const double* wr = Wv->v.data() + i * n;
            for (size_t j = 0; j < n; ++j) gx[j] += gi * wr[j];
            if (Wp) {
                double* gw = Wp->g.data() + i * n;
                for (size_t j = 0; j < n; ++j) gw[j] += gi * xv[j];
            }
            if (bp) bp->g[i] += gi;
        }
    });
}

static void check_same_size(const Var& a, const Var& b, const char* op) {
    if (a->size() != b->size()) fail(op, ": size mismatch ", a->size(), " vs ", b->size());
}

Var Graph::add(const Var& a, const Var& b) {
    check_same_size(a, b, "add");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
    Var ac = a, bc = b;
    return make(std::move(out), {a, b}, [ac, bc](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) {
            ac->add_grad(i, self.grad[i]);
            bc->add_grad(i, self.grad[i]);
        }
    });
}

Var Graph::sub(const Var& a, const Var& b) {
    check_same_size(a, b, "sub");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
    Var ac = a, bc = b;
    return make(std::move(out), {a, b}, [ac, bc](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) {
            ac->add_grad(i, self.grad[i]);
            bc->add_grad(i, -self.grad[i]);
        }
    });
}

Var Graph::mul(const Var& a, const Var& b) {
    check_same_size(a, b, "mul");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
    Var ac = a, bc = b;
    return make(std::move(out), {a, b}, [ac, bc](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) {
            ac->add_grad(i, self.grad[i] * bc->val.v[i]);
            bc->add_grad(i, self.grad[i] * ac->val.v[i]);
        }
    });
}

Var Graph::emin(const Var& a, const Var& b) {
    check_same_size(a, b, "emin");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = std::min(a->val.v[i], b->val.v[i]);
    Var ac = a, bc = b;
    return make(std::move(out), {a, b}, [ac, bc](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) {
            if (ac->val.v[i] <= bc->val.v[i]) ac->add_grad(i, self.grad[i]);
            else bc->add_grad(i, self.grad[i]);
        }
    });
}

Var Graph::emax(const Var& a, const Var& b) {
    check_same_size(a, b, "emax");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = std::max(a->val.v[i], b->val.v[i]);
    Var ac = a, bc = b;
    return make(std::move(out), {a, b}, [ac, bc](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) {
            if (ac->val.v[i] >= bc->val.v[i]) ac->add_grad(i, self.grad[i]);
            else bc->add_grad(i, self.grad[i]);
        }
    });
}

Var Graph::scale(const Var& a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x *= s;
    Var ac = a;
    return make(std::move(out), {a}, [ac, s](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) ac->add_grad(i, self.grad[i] * s);
    });
}

Var Graph::add_scalar(const Var& a, double c) {
    Tensor out = a->val;
    for (double& x : out.v) x += c;
    Var ac = a;
    return make(std::move(out), {a}, [ac](Node& self) {
        for (size_t i = 0; i < self.size(); ++i) ac->add_grad(i, self.grad[i]);
    });
}

Var Graph::concat(const std::vector<Var>& parts) {
    if (parts.empty()) fail("concat: no parts");
    size_t total = 0;
    for (const auto& p : parts) total += p->size();
    Tensor out({total});
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->val.v.begin(), p->val.v.end(), out.v.begin() + off);
        off += p->size();
    }
    std::vector<Var> ps = parts;
    return make(std::move(out), parts, [ps](Node& self) {
        size_t off = 0;
        for (const auto& p : ps) {
            for (size_t i = 0; i < p->size(); ++i) p->add_grad(i, self.grad[off + i]);
            off += p->size();
        }
    });
}

Var Graph::slice(const Var& a, size_t offset, size_t len) {
    if (offset + len > a->size()) fail("slice: out of range");
    Tensor out({len});
    std::copy_n(a->val.v.begin() + offset, len, out.v.begin());
    Var ac = a;
    return make(std::move(out), {a}, [ac, offset, len](Node& self) {
        for (size_t i = 0; i < len; ++i) ac->add_grad(offset + i, self.grad[i]);
    });
}

Var Graph::relu(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::max(0.0, x);
    Var ac = a;
    return make(std::move(out), {a}, [ac](Node& self) {
        for (size_t i = 0; i < self.size(); ++i)
            if (ac->val.v[i] > 0.0) ac->add_grad(i, self.grad[i]);
    });
}

Var Graph::tanh_(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::tanh(x);
    Var ac = a;
    Tensor saved = out;
    return make(std::move(out), {a}, [ac, saved](Node& self) {
        for (size_t i = 0; i < self.size(); ++i)
            ac->add_grad(i, self.grad[i] * (1.0 - saved.v[i] * saved.v[i]));
    });
}

Var Graph::sigmoid(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    Var ac = a;
    Tensor saved = out;
    return make(std::move(out), {a}, [ac, saved](Node& self) {
        for (size_t i = 0; i < self.size(); ++i)
            ac->add_grad(i, self.grad[i] * saved.v[i] * (1.0 - saved.v[i]));
    });
}

Var Graph::sum(const Var& a) {
    double s = 0.0;
    for (double x : a->val.v) s += x;
    Var ac = a;
    return make(Tensor({1}, {s}), {a}, [ac](Node& self) {
        for (size_t i = 0; i < ac->size(); ++i) ac->add_grad(i, self.grad[0]);
    });
}

Var Graph::logsumexp(const Var& a) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : a->val.v) m = std::max(m, x);
    double s = 0.0;
    for (double x : a->val.v) s += std::exp(x - m);
    const double lse = m + std::log(s);
    Var ac = a;
    return make(Tensor({1}, {lse}), {a}, [ac, lse](Node& self) {
        const double g = self.grad[0];
        for (size_t i = 0; i < ac->size(); ++i)
            ac->add_grad(i, g * std::exp(ac->val.v[i] - lse));
    });
}

Var Graph::dot(const Var& a, const Var& b) {
    check_same_size(a, b, "dot");
    double s = 0.0;
    for (size_t i = 0; i < a->size(); ++i) s += a->val.v[i] * b->val.v[i];
    Var ac = a, bc = b;
    return make(Tensor({1}, {s}), {a, b}, [ac, bc](Node& self) {
        const double g = self.grad[0];
        for (size_t i = 0; i < ac->size(); ++i) {
            ac->add_grad(i, g * bc->val.v[i]);
            bc->add_grad(i, g * ac->val.v[i]);
        }
    });
}

Var Graph::cosine(const Var& a, const Var& b) {
    check_same_size(a, b, "cosine");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (size_t i = 0; i < a->size(); ++i) {
        ab += a->val.v[i] * b->val.v[i];
        aa += a->val.v[i] * a->val.v[i];
        bb += b->val.v[i] * b->val.v[i];
    }
    const double na = std::sqrt(aa), nb = std::sqrt(bb);
    const bool degenerate = (na == 0.0 || nb == 0.0);
    const double cos = degenerate ? 0.0 : ab / (na * nb);
    Var ac = a, bc = b;
    return make(Tensor({1}, {cos}), {a, b}, [ac, bc, na, nb, cos, degenerate](Node& self) {
        if (degenerate) return;  // cosine pinned to 0, no gradient
        const double g = self.grad[0];
        for (size_t i = 0; i < ac->size(); ++i) {
            const double av = ac->val.v[i], bv = bc->val.v[i];
            ac->add_grad(i, g * (bv / (na * nb) - cos * av / (na * na)));
            bc->add_grad(i, g * (av / (na * nb) - cos * bv / (nb * nb)));
        }
    });
}

Var Graph::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) fail("stack_rows: no rows");
    const size_t d = rows[0]->size();
    for (const auto& r : rows)
        if (r->size() != d) fail("stack_rows: ragged rows");
    Tensor out({rows.size(), d});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i]->val.v.begin(), rows[i]->val.v.end(), out.v.begin() + i * d);
    std::vector<Var> rs = rows;
    return make(std::move(out), rows, [rs, d](Node& self) {
        for (size_t i = 0; i < rs.size(); ++i)
            for (size_t j = 0; j < d; ++j) rs[i]->add_grad(j, self.grad[i * d + j]);
    });
}

Var Graph::mean_rows(const Var& X) {
    if (X->val.shape.size() != 2) fail("mean_rows: input must be 2-D");
    const size_t n = X->val.shape[0], d = X->val.shape[1];
    Tensor out({d});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) out.v[j] += X->val.v[i * d + j];
    for (double& x : out.v) x /= static_cast<double>(n);
    Var xc = X;
    return make(std::move(out), {X}, [xc, n, d](Node& self) {
        const double inv = 1.0 / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) xc->add_grad(i * d + j, self.grad[j] * inv);
    });
}

Var Graph::max_rows(const Var& X) {
    if (X->val.shape.size() != 2) fail("max_rows: input must be 2-D");
    const size_t n = X->val.shape[0], d = X->val.shape[1];
    if (n == 0) fail("max_rows: empty input");
    Tensor out({d});
    std::vector<size_t> arg(d, 0);
    for (size_t j = 0; j < d; ++j) {
        double best = X->val.v[j];
        size_t bi = 0;
        for (size_t i = 1; i < n; ++i) {
            const double x = X->val.v[i * d + j];
            if (x > best) {
                best = x;
                bi = i;
            }
        }
        out.v[j] = best;
        arg[j] = bi;
    }
    Var xc = X;
    return make(std::move(out), {X}, [xc, arg, d](Node& self) {
        for (size_t j = 0; j < d; ++j) xc->add_grad(arg[j] * d + j, self.grad[j]);
    });
}

Var Graph::conv1d_same(Tensor& K, Tensor* b, const Var& X) {
    if (K.shape.size() != 3) fail("conv1d_same: kernel must be [Kn×w×Cin]");
    if (X->val.shape.size() != 2) fail("conv1d_same: input must be 2-D");
    const size_t Kn = K.shape[0], w = K.shape[1], Cin = K.shape[2];
    const size_t L = X->val.shape[0];
    if (X->val.shape[1] != Cin)
        fail("conv1d_same: input channels ", X->val.shape[1], " != kernel channels ", Cin);
    const long left = static_cast<long>((w - 1) / 2);
    Tensor out({L, Kn});
    const double* xv = X->val.v.data();
    for (size_t t = 0; t < L; ++t) {
        for (size_t k = 0; k < Kn; ++k) {
            double acc = b ? b->v[k] : 0.0;
            const double* kr = K.v.data() + k * w * Cin;
            for (size_t dt = 0; dt < w; ++dt) {
                const long src = static_cast<long>(t) + static_cast<long>(dt) - left;
                if (src < 0 || src >= static_cast<long>(L)) continue;
                const double* xr = xv + static_cast<size_t>(src) * Cin;
                const double* kc = kr + dt * Cin;
                for (size_t c = 0; c < Cin; ++c) acc += xr[c] * kc[c];
            }
            out.v[t * Kn + k] = acc;
        }
    }
    Tensor* Kp = K.has_grad() ? &K : nullptr;
    Tensor* bp = (b && b->has_grad()) ? b : nullptr;
    const Tensor* Kv = &K;
    Var xc = X;
    return make(std::move(out), {X}, [Kp, bp, Kv, xc, Kn, w, Cin, L, left](Node& self) {
        xc->ensure_grad();
        const double* xv = xc->val.v.data();
        double* gx = xc->grad.data();
        for (size_t t = 0; t < L; ++t) {
            for (size_t k = 0; k < Kn; ++k) {
                const double go = self.grad[t * Kn + k];
                if (go == 0.0) continue;
                const double* kr = Kv->v.data() + k * w * Cin;
                double* gkr = Kp ? Kp->g.data() + k * w * Cin : nullptr;
                for (size_t dt = 0; dt < w; ++dt) {
                    const long src = static_cast<long>(t) + static_cast<long>(dt) - left;
                    if (src < 0 || src >= static_cast<long>(L)) continue;
                    const size_t row = static_cast<size_t>(src) * Cin;
                    for (size_t c = 0; c < Cin; ++c) {
                        gx[row + c] += go * kr[dt * Cin + c];
                        if (gkr) gkr[dt * Cin + c] += go * xv[row + c];
                    }
                }
                if (bp) bp->g[k] += go;
            }
        }
    });
}

Var Graph::dropout(const Var& a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) fail("dropout: p must be < 1");
    const double keep = 1.0 - p;
    std::vector<uint8_t> mask(a->size());
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) {
        mask[i] = rng.uniform() < keep ? 1 : 0;
        out.v[i] = mask[i] ? out.v[i] / keep : 0.0;
    }
    Var ac = a;
    return make(std::move(out), {a}, [ac, mask, keep](Node& self) {
        for (size_t i = 0; i < self.size(); ++i)
            if (mask[i]) ac->add_grad(i, self.grad[i] / keep);
    });
}

Var Graph::custom(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    return make(std::move(val), std::move(parents), std::move(back));
}

void Graph::backward(const Var& loss) {
    if (!want_grad_) fail("backward: graph was built with want_grad=false");
    if (loss->size() != 1) fail("backward: loss must be scalar");
    loss->grad.assign(1, 1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty() || !n.back) continue;
        n.back(n);
    }
}

}  // namespace neu::nn

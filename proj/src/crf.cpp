#include "neu/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace neu::crf {

static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const double* xs, size_t n) {
    double m = kNegInf;
    for (size_t i = 0; i < n; ++i) m = std::max(m, xs[i]);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += std::exp(xs[i] - m);
    return m + std::log(s);
}

static void check_labels(const Lattice& lat, const std::vector<int>& labels) {
    if (labels.size() != lat.T)
        fail("crf: label sequence length ", labels.size(), " != token count ", lat.T);
    for (int y : labels)
        if (y < 0 || static_cast<size_t>(y) >= lat.L) fail("crf: unknown label id ", y);
}

double score(const Lattice& lat, const std::vector<int>& labels) {
    check_labels(lat, labels);
    // accumulation order mirrors beam_topk's so equal paths score bit-equal
    double s = lat.trans(lat.start(), labels[0]) + lat.emis(0, labels[0]);
    for (size_t t = 1; t < lat.T; ++t) s += lat.trans(labels[t - 1], labels[t]) + lat.emis(t, labels[t]);
    s += lat.trans(labels[lat.T - 1], lat.stop());
    return s;
}

double log_partition(const Lattice& lat) {
    if (lat.T == 0) fail("crf: empty utterance");
    const size_t L = lat.L;
    std::vector<double> alpha(L), next(L), work(L);
    for (size_t k = 0; k < L; ++k) alpha[k] = lat.trans(lat.start(), k) + lat.emis(0, k);
    for (size_t t = 1; t < lat.T; ++t) {
        for (size_t k = 0; k < L; ++k) {
            for (size_t j = 0; j < L; ++j) work[j] = alpha[j] + lat.trans(j, k);
            next[k] = logsumexp(work.data(), L) + lat.emis(t, k);
        }
        alpha.swap(next);
    }
    for (size_t k = 0; k < L; ++k) work[k] = alpha[k] + lat.trans(k, lat.stop());
    return logsumexp(work.data(), L);
}

double p_seq(const Lattice& lat, const std::vector<int>& labels) {
    return std::exp(score(lat, labels) - log_partition(lat));
}

ScoredSequence viterbi(const Lattice& lat) {
    if (lat.T == 0) fail("crf: empty utterance");
    const size_t L = lat.L;
    // suffix[t][k]: best score of the suffix starting at t given label k,
    // including emis(t,k) and the final STOP transition. Reconstructing
    // forward and taking the smallest label on ties yields the
    // lexicographically smallest optimal sequence.
    std::vector<std::vector<double>> suffix(lat.T, std::vector<double>(L, kNegInf));
    for (size_t k = 0; k < L; ++k)
        suffix[lat.T - 1][k] = lat.emis(lat.T - 1, k) + lat.trans(k, lat.stop());
    for (size_t t = lat.T - 1; t-- > 0;) {
        for (size_t k = 0; k < L; ++k) {
            double best = kNegInf;
            for (size_t j = 0; j < L; ++j)
                best = std::max(best, lat.trans(k, j) + suffix[t + 1][j]);
            suffix[t][k] = best == kNegInf ? kNegInf : lat.emis(t, k) + best;
        }
    }
    ScoredSequence out;
    out.labels.resize(lat.T);
    double best = kNegInf;
    int pick = -1;
    for (size_t k = 0; k < L; ++k) {
        const double s = lat.trans(lat.start(), k) + suffix[0][k];
        if (s > best) {
            best = s;
            pick = static_cast<int>(k);
        }
    }
    if (pick < 0) fail("crf: no feasible sequence (all transitions masked)");
    out.labels[0] = pick;
    for (size_t t = 1; t < lat.T; ++t) {
        const int prev = out.labels[t - 1];
        pick = -1;
        double bestj = kNegInf;
        for (size_t j = 0; j < L; ++j) {
            const double s = lat.trans(prev, j) + suffix[t][j];
            if (s > bestj) {
                bestj = s;
                pick = static_cast<int>(j);
            }
        }
        out.labels[t] = pick;
    }
    out.score = score(lat, out.labels);
    return out;
}

std::vector<ScoredSequence> beam_topk(const Lattice& lat, size_t beam) {
    if (beam == 0) fail("crf: beam width must be >= 1");
    if (lat.T == 0) fail("crf: empty utterance");
    const size_t L = lat.L;
    struct Partial {
        std::vector<int> labels;
        double score;
    };
    auto order = [](const Partial& a, const Partial& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.labels < b.labels;
    };
    std::vector<Partial> cur;
    for (size_t k = 0; k < L; ++k) {
        const double s = lat.trans(lat.start(), k) + lat.emis(0, k);
        if (s == kNegInf) continue;
        cur.push_back({{static_cast<int>(k)}, s});
    }
    std::sort(cur.begin(), cur.end(), order);
    if (cur.size() > beam) cur.resize(beam);
    for (size_t t = 1; t < lat.T; ++t) {
        std::vector<Partial> next;
        next.reserve(cur.size() * L);
        for (const auto& p : cur) {
            for (size_t k = 0; k < L; ++k) {
                const double s = p.score + (lat.trans(p.labels.back(), k) + lat.emis(t, k));
                if (s == kNegInf) continue;
                Partial q;
                q.labels = p.labels;
                q.labels.push_back(static_cast<int>(k));
                q.score = s;
                next.push_back(std::move(q));
            }
        }
        std::sort(next.begin(), next.end(), order);
        if (next.size() > beam) next.resize(beam);
        cur = std::move(next);
    }
    std::vector<ScoredSequence> out;
    out.reserve(cur.size() + 1);
    for (auto& p : cur) {
        const double s = p.score + lat.trans(p.labels.back(), lat.stop());
        if (s == kNegInf) continue;
        out.push_back({std::move(p.labels), s});
    }
    auto seq_order = [](const ScoredSequence& a, const ScoredSequence& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.labels < b.labels;
    };
    std::sort(out.begin(), out.end(), seq_order);
    ScoredSequence vit = viterbi(lat);
    bool have_vit = false;
    for (const auto& h : out)
        if (h.labels == vit.labels) {
            have_vit = true;
            break;
        }
    if (!have_vit) {
        out.push_back(vit);
        std::sort(out.begin(), out.end(), seq_order);
    }
    if (out.size() > beam) out.resize(beam);
    return out;
}

double constrained_log_partition(const Lattice& lat,
                                 const std::vector<std::vector<uint8_t>>& allowed) {
    if (allowed.size() != lat.T) fail("crf: allowed mask length mismatch");
    const size_t L = lat.L;
    std::vector<double> alpha(L, kNegInf), next(L), work(L);
    for (size_t k = 0; k < L; ++k)
        if (allowed[0][k]) alpha[k] = lat.trans(lat.start(), k) + lat.emis(0, k);
    for (size_t t = 1; t < lat.T; ++t) {
        for (size_t k = 0; k < L; ++k) {
            if (!allowed[t][k]) {
                next[k] = kNegInf;
                continue;
            }
            for (size_t j = 0; j < L; ++j) work[j] = alpha[j] + lat.trans(j, k);
            const double lse = logsumexp(work.data(), L);
            next[k] = lse == kNegInf ? kNegInf : lse + lat.emis(t, k);
        }
        alpha.swap(next);
    }
    for (size_t k = 0; k < L; ++k) work[k] = alpha[k] + lat.trans(k, lat.stop());
    return logsumexp(work.data(), L);
}

double mention_mass(const Lattice& lat, size_t start, size_t end, int b_label, int i_label) {
    if (start >= end || end > lat.T) fail("crf: mention span [", start, ",", end, ") out of range");
    std::vector<std::vector<uint8_t>> allowed(lat.T, std::vector<uint8_t>(lat.L, 1));
    for (size_t k = 0; k < lat.L; ++k) allowed[start][k] = (static_cast<int>(k) == b_label);
    for (size_t t = start + 1; t < end; ++t)
        for (size_t k = 0; k < lat.L; ++k) allowed[t][k] = (static_cast<int>(k) == i_label);
    if (end < lat.T && i_label >= 0) allowed[end][static_cast<size_t>(i_label)] = 0;
    const double num = constrained_log_partition(lat, allowed);
    if (num == kNegInf) return 0.0;
    return std::exp(num - log_partition(lat));
}

double nll_grad(const Lattice& lat, const std::vector<int>& gold, double grad_scale,
                std::vector<double>& emis_grad, std::vector<double>& trans_grad) {
    check_labels(lat, gold);
    const size_t L = lat.L, T = lat.T;
    if (emis_grad.size() != T * L || trans_grad.size() != (L + 2) * (L + 2))
        fail("crf: gradient buffer size mismatch");

    std::vector<std::vector<double>> alpha(T, std::vector<double>(L)),
        beta(T, std::vector<double>(L));
    std::vector<double> work(L);
    for (size_t k = 0; k < L; ++k) alpha[0][k] = lat.trans(lat.start(), k) + lat.emis(0, k);
    for (size_t t = 1; t < T; ++t)
        for (size_t k = 0; k < L; ++k) {
            for (size_t j = 0; j < L; ++j) work[j] = alpha[t - 1][j] + lat.trans(j, k);
            const double lse = logsumexp(work.data(), L);
            alpha[t][k] = lse == kNegInf ? kNegInf : lse + lat.emis(t, k);
        }
    for (size_t k = 0; k < L; ++k) beta[T - 1][k] = lat.trans(k, lat.stop());
    for (size_t t = T - 1; t-- > 0;)
        for (size_t j = 0; j < L; ++j) {
            for (size_t k = 0; k < L; ++k)
                work[k] = lat.trans(j, k) + lat.emis(t + 1, k) + beta[t + 1][k];
            beta[t][j] = logsumexp(work.data(), L);
        }
    for (size_t k = 0; k < L; ++k) work[k] = alpha[T - 1][k] + beta[T - 1][k];
    const double logZ = logsumexp(work.data(), L);
    if (!std::isfinite(logZ)) fail("crf: partition function is not finite");

    // d logZ / d emis, d logZ / d trans are the marginals
    for (size_t t = 0; t < T; ++t)
        for (size_t k = 0; k < L; ++k) {
            const double m = std::exp(alpha[t][k] + beta[t][k] - logZ);
            if (m != 0.0) emis_grad[t * L + k] += grad_scale * m;
        }
    const size_t S = L + 2;
    for (size_t k = 0; k < L; ++k) {
        const double m0 = std::exp(alpha[0][k] + beta[0][k] - logZ);
        if (m0 != 0.0) trans_grad[lat.start() * S + k] += grad_scale * m0;
        const double mT = std::exp(alpha[T - 1][k] + beta[T - 1][k] - logZ);
        if (mT != 0.0) trans_grad[k * S + lat.stop()] += grad_scale * mT;
    }
    for (size_t t = 0; t + 1 < T; ++t)
        for (size_t j = 0; j < L; ++j) {
            if (alpha[t][j] == kNegInf) continue;
            for (size_t k = 0; k < L; ++k) {
                const double tr = lat.trans(j, k);
                if (tr == kNegInf) continue;
                const double m =
                    std::exp(alpha[t][j] + tr + lat.emis(t + 1, k) + beta[t + 1][k] - logZ);
                if (m != 0.0) trans_grad[j * S + k] += grad_scale * m;
            }
        }

    // minus the gold path indicator
    emis_grad[0 * L + gold[0]] -= grad_scale;
    trans_grad[lat.start() * S + gold[0]] -= grad_scale;
    for (size_t t = 1; t < T; ++t) {
        emis_grad[t * L + gold[t]] -= grad_scale;
        trans_grad[gold[t - 1] * S + gold[t]] -= grad_scale;
    }
    trans_grad[gold[T - 1] * S + lat.stop()] -= grad_scale;

    return logZ - score(lat, gold);
}

}  // namespace neu::crf

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "neu/common.hpp"

namespace neu::crf {

// Per-utterance CRF scores: emissions [T×L] plus a transition matrix over
// L+2 states where index L is START and L+1 is STOP. Structural constraints
// (e.g. BIO masking) are encoded as -inf transition entries.
struct Lattice {
    size_t T = 0;  // tokens
    size_t L = 0;  // labels
    std::vector<double> emissions;    // T×L row-major
    std::vector<double> transitions;  // (L+2)×(L+2) row-major

    Lattice() = default;
    Lattice(size_t t, size_t l)
        : T(t), L(l), emissions(t * l, 0.0), transitions((l + 2) * (l + 2), 0.0) {}

    double emis(size_t t, size_t y) const { return emissions[t * L + y]; }
    double& emis(size_t t, size_t y) { return emissions[t * L + y]; }
    double trans(size_t from, size_t to) const { return transitions[from * (L + 2) + to]; }
    double& trans(size_t from, size_t to) { return transitions[from * (L + 2) + to]; }
    size_t start() const { return L; }
    size_t stop() const { return L + 1; }
};

struct ScoredSequence {
    std::vector<int> labels;
    double score = 0.0;
};

// s(y) = phi(START,y_0) + psi_0(y_0) + sum_t [phi(y_{t-1},y_t) + psi_t(y_t)]
//        + phi(y_{T-1},STOP)
double score(const Lattice& lat, const std::vector<int>& labels);

// log sum over all label sequences of exp(score), forward DP in log space
double log_partition(const Lattice& lat);

double p_seq(const Lattice& lat, const std::vector<int>& labels);

// Max-scoring sequence; ties resolved toward the lexicographically smallest
// label-id sequence so that it agrees with beam_topk's ordering.
ScoredSequence viterbi(const Lattice& lat);

// Approximate top-k by beam search over prefixes, exact when beam >= L^T.
// Sorted by score descending, ties by lexicographic label ids. The Viterbi
// path is force-included, so the first element is always the exact argmax.
// Sequences with -inf score (masked transitions) are dropped.
std::vector<ScoredSequence> beam_topk(const Lattice& lat, size_t beam);

// log sum of exp(score) restricted to sequences where position t draws its
// label from allowed[t]; -inf when the constraint admits nothing.
double constrained_log_partition(const Lattice& lat,
                                 const std::vector<std::vector<uint8_t>>& allowed);

// Total probability mass of sequences containing the exact maximal span
// [start,end) labeled b_label / i_label: the span's labels are fixed and the
// token at `end` (when inside the utterance) must not continue it.
double mention_mass(const Lattice& lat, size_t start, size_t end, int b_label, int i_label);

// NLL = logZ - score(gold) plus gradients via forward-backward marginals.
// Gradient buffers must already be sized T*L and (L+2)^2; contributions are
// accumulated. Entries reached only through -inf transitions get none.
double nll_grad(const Lattice& lat, const std::vector<int>& gold, double grad_scale,
                std::vector<double>& emis_grad, std::vector<double>& trans_grad);

double logsumexp(const double* xs, size_t n);

}  // namespace neu::crf

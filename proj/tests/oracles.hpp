#pragma once

// Independent reference implementations the unit and acceptance suites check
// the real code against. Everything here is brute force and shares nothing
// with the implementation paths it verifies beyond basic string utilities.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "neu/crf.hpp"
#include "neu/kb.hpp"
#include "neu/text.hpp"

namespace oracle {

// ---- CRF by full enumeration -------------------------------------------------

struct EnumSeq {
    std::vector<int> labels;
    double score;
};

// score accumulated left to right, same grouping as the DP route
inline double seq_score(const neu::crf::Lattice& lat, const std::vector<int>& y) {
    double s = lat.trans(lat.start(), y[0]) + lat.emis(0, y[0]);
    for (size_t t = 1; t < lat.T; ++t) s += lat.trans(y[t - 1], y[t]) + lat.emis(t, y[t]);
    s += lat.trans(y[lat.T - 1], lat.stop());
    return s;
}

inline std::vector<EnumSeq> enumerate_all(const neu::crf::Lattice& lat) {
    std::vector<EnumSeq> out;
    std::vector<int> y(lat.T, 0);
    while (true) {
        out.push_back({y, seq_score(lat, y)});
        size_t t = 0;
        while (t < lat.T) {
            if (++y[t] < static_cast<int>(lat.L)) break;
            y[t] = 0;
            ++t;
        }
        if (t == lat.T) break;
    }
    return out;
}

inline std::vector<EnumSeq> enumerate_sorted(const neu::crf::Lattice& lat) {
    auto all = enumerate_all(lat);
    std::sort(all.begin(), all.end(), [](const EnumSeq& a, const EnumSeq& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.labels < b.labels;
    });
    return all;
}

inline double log_partition(const neu::crf::Lattice& lat) {
    const auto all = enumerate_all(lat);
    double m = -1e300;
    for (const auto& s : all) m = std::max(m, s.score);
    double acc = 0.0;
    for (const auto& s : all) acc += std::exp(s.score - m);
    return m + std::log(acc);
}

inline double p_seq(const neu::crf::Lattice& lat, const std::vector<int>& y) {
    return std::exp(seq_score(lat, y) - oracle::log_partition(lat));
}

// mass of sequences carrying the exact maximal span: fixed labels inside,
// no same-type I continuation at the right boundary
inline double mention_mass(const neu::crf::Lattice& lat, size_t start, size_t end, int b_label,
                           int i_label) {
    const auto all = enumerate_all(lat);
    double m = -1e300;
    for (const auto& s : all) m = std::max(m, s.score);
    double num = 0.0, den = 0.0;
    for (const auto& s : all) {
        den += std::exp(s.score - m);
        bool match = s.labels[start] == b_label;
        for (size_t t = start + 1; t < end && match; ++t) match = s.labels[t] == i_label;
        if (match && end < lat.T && s.labels[end] == i_label) match = false;
        if (match) num += std::exp(s.score - m);
    }
    return num / den;
}

// ---- retrieval by scoring every entity ----------------------------------------

struct BruteWeights {
    double w_tfidf = 1.0;
    double w_pop = 0.3;
    double synonym_weight = 0.5;
    double correction_confidence = 0.9;
};

struct BruteCandidate {
    std::string id;
    double score;
};

inline std::vector<std::string> ngrams(const std::vector<std::string>& toks) {
    std::vector<std::string> out;
    for (size_t len = 1; len <= 3; ++len)
        for (size_t i = 0; i + len <= toks.size(); ++i) {
            std::string t;
            for (size_t j = 0; j < len; ++j) {
                if (j) t += ' ';
                t += toks[i + j];
            }
            out.push_back(t);
        }
    return out;
}

// literal re-implementation of the query pipeline and scoring formula
inline std::vector<BruteCandidate> brute_retrieve(const neu::kb::KnowledgeBase& kb,
                                                  const std::string& query,
                                                  const std::vector<std::string>& type_filter,
                                                  size_t c, const BruteWeights& w) {
    using neu::text::normalize_tokens;

    // correction: longest match left to right, chains resolved, threshold
    auto tokens = normalize_tokens(query);
    size_t max_len = 1;
    for (const auto& [from, _] : kb.correction_table())
        max_len = std::max(max_len, 1 + static_cast<size_t>(std::count(from.begin(), from.end(), ' ')));
    std::vector<std::string> corrected;
    size_t i = 0;
    while (i < tokens.size()) {
        size_t used = 0;
        std::string replacement;
        for (size_t len = std::min(max_len, tokens.size() - i); len >= 1; --len) {
            std::string phrase;
            for (size_t j = 0; j < len; ++j) {
                if (j) phrase += ' ';
                phrase += tokens[i + j];
            }
            std::string cur = phrase;
            int hops = 0;
            bool any = false;
            while (hops++ < 8) {
                auto it = kb.correction_table().find(cur);
                if (it == kb.correction_table().end() ||
                    it->second.confidence < w.correction_confidence)
                    break;
                cur = it->second.to;
                any = true;
            }
            if (any) {
                replacement = cur;
                used = len;
                break;
            }
        }
        if (used) {
            for (const auto& t : normalize_tokens(replacement)) corrected.push_back(t);
            i += used;
        } else {
            corrected.push_back(tokens[i]);
            ++i;
        }
    }

    // query terms with weights: n-grams plus unigram synonym expansions
    std::vector<std::pair<std::string, double>> qterms;
    for (const auto& t : ngrams(corrected)) qterms.push_back({t, 1.0});
    for (const auto& t : ngrams(corrected)) {
        if (t.find(' ') != std::string::npos) continue;
        if (const auto* syns = kb.synonyms(t))
            for (const auto& s : *syns) qterms.push_back({s, w.synonym_weight});
    }

    // per-entity documents and document frequencies
    const size_t N = kb.size();
    std::vector<std::map<std::string, double>> docs;
    std::map<std::string, size_t> df;
    for (const auto& e : kb.entities()) {
        std::map<std::string, double> tf;
        for (const auto& t : ngrams(normalize_tokens(e.canonical_name))) tf[t] += 1.0;
        for (const auto& a : e.aliases)
            for (const auto& t : ngrams(normalize_tokens(a))) tf[t] += 1.0;
        for (const auto& [t, _] : tf) df[t] += 1;
        docs.push_back(std::move(tf));
    }

    std::vector<BruteCandidate> scored;
    for (size_t d = 0; d < N; ++d) {
        const auto& e = kb.entities()[d];
        if (!type_filter.empty() && std::find(type_filter.begin(), type_filter.end(),
                                              e.entity_type) == type_filter.end())
            continue;
        double tfidf = 0.0;
        bool matched = false;
        for (const auto& [term, weight] : qterms) {
            auto it = docs[d].find(term);
            if (it == docs[d].end()) continue;
            matched = true;
            const double idf =
                std::log((1.0 + static_cast<double>(N)) / (1.0 + static_cast<double>(df[term]))) +
                1.0;
            tfidf += weight * it->second * idf;
        }
        if (!matched) continue;  // entities matching no term are not candidates
        scored.push_back({e.id, w.w_tfidf * tfidf + w.w_pop * std::log1p(e.popularity)});
    }
    std::sort(scored.begin(), scored.end(), [](const BruteCandidate& a, const BruteCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > c) scored.resize(c);
    return scored;
}

// ---- small numeric oracles -----------------------------------------------------

// sliding-window convolution with zero "same" padding, left pad (w-1)/2
inline std::vector<double> conv1d_same(const std::vector<double>& x, size_t L, size_t Cin,
                                       const std::vector<double>& K, size_t Kn, size_t w,
                                       const std::vector<double>& bias) {
    std::vector<double> out(L * Kn, 0.0);
    const long left = static_cast<long>((w - 1) / 2);
    for (size_t t = 0; t < L; ++t)
        for (size_t k = 0; k < Kn; ++k) {
            double acc = bias.empty() ? 0.0 : bias[k];
            for (size_t dt = 0; dt < w; ++dt) {
                const long src = static_cast<long>(t) + static_cast<long>(dt) - left;
                if (src < 0 || src >= static_cast<long>(L)) continue;
                for (size_t ci = 0; ci < Cin; ++ci)
                    acc += x[static_cast<size_t>(src) * Cin + ci] * K[(k * w + dt) * Cin + ci];
            }
            out[t * Kn + k] = acc;
        }
    return out;
}

// plain matrix MLP: ReLU hidden layers, affine output
inline std::vector<double> mlp(const std::vector<std::vector<double>>& Ws,
                               const std::vector<std::vector<double>>& bs,
                               const std::vector<size_t>& rows, std::vector<double> x) {
    for (size_t l = 0; l < Ws.size(); ++l) {
        const size_t m = rows[l], n = x.size();
        std::vector<double> y(m, 0.0);
        for (size_t i = 0; i < m; ++i) {
            double acc = bs[l][i];
            for (size_t j = 0; j < n; ++j) acc += Ws[l][i * n + j] * x[j];
            y[i] = acc;
        }
        if (l + 1 < Ws.size())
            for (double& v : y) v = std::max(0.0, v);
        x = std::move(y);
    }
    return x;
}

}  // namespace oracle

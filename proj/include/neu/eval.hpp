#pragma once

#include <map>
#include <string>
#include <vector>

#include "neu/bio.hpp"

namespace neu::eval {

struct Counts {
    size_t tp = 0, fp = 0, fn = 0;
};

struct Metric {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    Counts counts;
};

// F1 = 2PR/(P+R), 0 when P+R = 0
Metric metric_from(const Counts& c);

// A predicted mention matches a gold mention iff span and type are exactly
// equal; each gold mention is consumed at most once.
Metric ner_f1(const std::vector<std::vector<std::string>>& pred_labels,
              const std::vector<bio::Utterance>& gold);

struct ScoredLabels {
    std::vector<std::string> labels;
    double score = 0.0;
};

// Per utterance, the hypothesis among the top-k with the best utterance-level
// F1 (ties: higher model score, then earlier index) enters the corpus counts.
Metric oracle_topk_f1(const std::vector<std::vector<ScoredLabels>>& beams,
                      const std::vector<bio::Utterance>& gold, size_t k);

// Strict entity linking: span, type and entity id must all be correct.
// Every gold mention must carry a link.
Metric el_f1(const std::vector<std::vector<bio::Link>>& pred_links,
             const std::vector<bio::Utterance>& gold);

// indices of utterances carrying a tag; empty (with a stderr warning) when
// the tag never occurs
std::vector<size_t> subset_indices(const std::vector<bio::Utterance>& gold,
                                   const std::string& tag);

template <typename T>
std::vector<T> select(const std::vector<T>& xs, const std::vector<size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(xs[i]);
    return out;
}

// named metrics plus per-tag breakdowns, serializable for reports
struct Report {
    std::map<std::string, Metric> metrics;                          // metric name -> values
    std::map<std::string, std::map<std::string, Metric>> subsets;   // tag -> metric -> values
};

}  // namespace neu::eval

#pragma once

#include <string>
#include <vector>

#include "neu/bio.hpp"
#include "neu/el.hpp"
#include "neu/ner.hpp"

namespace neu::task {

// f_r for one token: a blocks of p_i-scaled type one-hots in NER beam order.
// Type codes include O (code 0), so each block has num_token_codes entries.
// Blocks past the available hypotheses stay zero.
std::vector<double> featurize_ner(const bio::LabelSet& labels,
                                  const std::vector<ner::Hypothesis>& beam, size_t token_index,
                                  size_t a);

// one re-ranked alternative, reduced to what f_u needs
struct RerankedAlt {
    std::vector<int> label_ids;
    double p_seq = 0.0;
    std::vector<double> token_sim;  // per token: cosine of its mention's link, else 0
};

RerankedAlt to_alt(const el::RankedHypothesis& rh, size_t T);

// f_u for one token: per alternative (EL-score order), p_i-scaled one-hot
// then s_i-scaled one-hot; dim 2a * num_token_codes.
std::vector<double> featurize_neu(const bio::LabelSet& labels,
                                  const std::vector<RerankedAlt>& reranked, size_t token_index,
                                  size_t a);

// ---- toy domain classifier --------------------------------------------------

struct DomainExample {
    std::vector<std::string> tokens;
    std::string domain;
    std::vector<std::vector<double>> extra;  // per-token f_r / f_u, may be empty
};

struct ClassifierConfig {
    size_t word_dim = 16;
    size_t hidden = 24;
    double lr = 5e-3;
    size_t epochs = 12;
    size_t batch_size = 8;
    uint64_t seed = 1;
};

// Word embeddings (plus any extra per-token features) through a single LSTM;
// the final state feeds a softmax over domains. Returns test accuracy.
double toy_domain_classifier(const std::vector<DomainExample>& train,
                             const std::vector<DomainExample>& test,
                             const ClassifierConfig& cfg);

}  // namespace neu::task

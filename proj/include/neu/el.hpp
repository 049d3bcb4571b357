#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neu/bio.hpp"
#include "neu/kb.hpp"
#include "neu/ner.hpp"
#include "neu/nn.hpp"
#include "neu/retrieval.hpp"
#include "neu/vocab.hpp"

namespace neu::el {

struct ElConfig {
    size_t char_dim = 25;
    nn::ConvSpec conv;                        // 100 kernels of widths 3, 4, 5
    std::vector<size_t> sim_hidden{1024, 256};
    size_t sim_out = 64;
    std::vector<size_t> score_hidden{256, 64};
    std::string sim_mode = "mlp";        // "mlp" | "cosine"
    std::string aggregation = "concat";  // "concat" | "average" of mention blocks
    bool use_relation = true;
    double margin_link = 0.5;
    double margin_ner = 1.0;
    size_t negatives = 8;
    size_t candidates = 25;  // top-c retrieval per mention
    size_t pad_slots = 5;
    double lr = 1e-3;
    double lr_decay = 0.99;
    size_t batch_size = 32;
    size_t epochs = 5;
    uint64_t seed = 1;
};

struct LinkedMention {
    size_t start = 0;
    size_t end = 0;
    std::string type;
    std::string surface;
    double p_men = 0.0;
    std::string entity_id;  // empty when no candidate was available
    std::string canonical;
    double popularity = 0.0;
};

// One entity-linking hypothesis: an NER prediction plus one linked entity per
// mention. Mention slots beyond pad_slots are truncated at featurization and
// padded slots are explicit zeros, so scores never depend on masked content.
struct Hypothesis {
    int ner_index = -1;  // position in the NER beam; -1 for gold-derived
    std::vector<std::string> labels;
    double p_seq = 0.0;
    std::vector<LinkedMention> mentions;
    bool relation_exists = false;  // OR of kb::related over linked entity pairs

    bool same_ner(const Hypothesis& other) const { return labels == other.labels; }
    bool same_links(const Hypothesis& other) const;
    bool identical(const Hypothesis& other) const {
        return same_ner(other) && same_links(other);
    }
};

// gamma(y_hat, y_star): 0 when identical, margin_link when only entity ids
// differ, margin_ner when the NER labels differ
double adaptive_margin(const Hypothesis& y_hat, const Hypothesis& y_star, double margin_link,
                       double margin_ner);

// mean over pairs of [gamma + s(y_hat) - s(y_star)]_+
double el_loss(const std::vector<double>& gold_scores, const std::vector<double>& neg_scores,
               const std::vector<double>& margins);

class Model {
public:
    Model(const bio::LabelSet& labels, Vocab char_vocab, const Vocab& word_vocab,
          const nn::Tensor& word_table, const ElConfig& cfg);

    const ElConfig& config() const { return cfg_; }
    ElConfig& mutable_config() { return cfg_; }
    nn::ParameterSet& params() { return params_; }
    const bio::LabelSet& labels() const { return labels_; }
    double popularity_scale() const { return pop_scale_; }
    void set_popularity_scale(double s) { pop_scale_ = s; }

    size_t name_dim() const { return cfg_.conv.widths.size() * cfg_.conv.kernels; }
    size_t feature_dim() const;

    // char-CNN name embedding; mention and entity names share the kernels
    nn::Var name_embed(nn::Graph& g, const std::string& name_text);

    // cosine scalar or MLP features over (m, e, m+e, m-e, min, max, m*e)
    nn::Var similarity_features(nn::Graph& g, const nn::Var& m_emb, const nn::Var& e_emb);

    // per-graph cache so repeated names / pairs are embedded once
    struct ScoreContext {
        nn::Graph* g = nullptr;
        std::unordered_map<std::string, nn::Var> names;
        std::unordered_map<std::string, nn::Var> sims;
    };

    nn::Var score(ScoreContext& ctx, const Hypothesis& hyp,
                  const std::vector<std::string>& utterance_tokens);
    double score_value(const Hypothesis& hyp, const std::vector<std::string>& utterance_tokens);

    // cosine between mention and linked entity name embeddings (downstream s_i)
    double name_cosine(const std::string& mention, const std::string& entity_name);

    void save(const std::string& path, long step) const;
    static Model load(const std::string& path, const ner::Model& ner_model);

private:
    std::vector<double> f_utter(const std::vector<std::string>& tokens) const;
    std::vector<double> f_ner(const Hypothesis& hyp) const;
    std::vector<double> f_cr(const Hypothesis& hyp) const;

    bio::LabelSet labels_;
    Vocab char_vocab_;
    const Vocab* word_vocab_;        // shared, frozen
    const nn::Tensor* word_table_;   // shared, frozen (utterance features only)
    ElConfig cfg_;
    double pop_scale_ = 1.0;
    nn::ParameterSet params_;
};

// candidate lists per mention of one NER hypothesis
using CandidateLists = std::vector<std::vector<retrieval::Candidate>>;

struct PreparedExample {
    std::vector<std::string> tokens;
    std::vector<ner::Hypothesis> beam;
    std::vector<CandidateLists> beam_candidates;  // aligned with beam
    Hypothesis gold;
    bool gold_retrievable = false;
};

PreparedExample prepare_example(const ner::Model& ner_model, const retrieval::InvertedIndex& index,
                                const kb::KnowledgeBase& kb, const bio::Utterance& utt,
                                const ElConfig& cfg, const retrieval::Weights& weights);

// uniform over {beam x per-mention candidate assignments} minus the gold;
// weighting by assignment count keeps the draw uniform across hypotheses.
// Returns fewer than n (possibly none) when the pool is empty.
std::vector<Hypothesis> sample_negatives(const kb::KnowledgeBase& kb, const PreparedExample& ex,
                                         size_t n, Rng& rng);

struct TrainStats {
    std::vector<double> epoch_loss;
    size_t skipped_unretrievable = 0;  // gold entity not in top-c: recall ceiling
    size_t used_examples = 0;
};

Model train(const ner::Model& ner_model, const retrieval::InvertedIndex& index,
            const kb::KnowledgeBase& kb, const std::vector<bio::Utterance>& corpus,
            const ElConfig& cfg, const retrieval::Weights& weights, TrainStats* stats = nullptr);

struct RankedHypothesis {
    ner::Hypothesis ner;
    int ner_index = 0;
    std::vector<LinkedMention> links;
    double el_score = 0.0;
    std::vector<double> link_cosines;  // per mention, 0 when unlinked
};

// Scores every beam hypothesis with its best link assignment (per-mention
// argmax plus one round-robin refinement pass) and orders them by EL score.
// The first element is both the reranked NER output and the EL output.
std::vector<RankedHypothesis> rerank(const ner::Model& ner_model, Model& el_model,
                                     const retrieval::InvertedIndex& index,
                                     const kb::KnowledgeBase& kb,
                                     const std::vector<std::string>& tokens,
                                     const retrieval::Weights& weights);

}  // namespace neu::el

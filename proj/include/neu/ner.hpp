#pragma once

#include <string>
#include <vector>

#include "neu/bio.hpp"
#include "neu/crf.hpp"
#include "neu/kb.hpp"
#include "neu/nn.hpp"
#include "neu/vocab.hpp"

namespace neu::ner {

struct NerConfig {
    size_t word_dim = 200;
    size_t char_dim = 100;
    size_t char_hidden = 50;   // char feature is 2*char_hidden
    size_t hidden = 350;
    size_t gazetteer_dim = 32;
    double dropout = 0.5;
    double lr = 1e-3;
    double lr_decay = 0.99;
    bool decay_per_step = false;  // default: per epoch
    size_t batch_size = 256;
    size_t epochs = 20;
    size_t beam = 5;
    uint64_t seed = 1;
    std::string word_vectors;  // optional pre-trained vector file
};

// Token-level gazetteer flags: per entity type, {inside, begins, ends} of the
// longest KB surface-form match starting at each position.
class Gazetteer {
public:
    Gazetteer() = default;
    Gazetteer(const kb::KnowledgeBase& kb, const bio::LabelSet& labels);

    // [T x 3*num_types] row-major
    std::vector<double> featurize(const std::vector<std::string>& tokens) const;
    size_t feature_dim() const { return 3 * num_types_; }

private:
    struct Surface {
        std::vector<std::string> tokens;
        size_t type_index;
    };
    size_t num_types_ = 0;
    std::unordered_map<std::string, std::vector<Surface>> by_first_token_;
};

struct Mention {
    size_t start = 0;
    size_t end = 0;
    std::string type;
    std::string surface;  // joined source tokens
    double p_men = 0.0;
};

struct Hypothesis {
    std::vector<int> label_ids;
    std::vector<std::string> labels;
    double score = 0.0;  // CRF sequence score
    double p_seq = 0.0;
    std::vector<Mention> mentions;
};

// biLSTM-CRF tagger. Emissions come from a char-biLSTM feature concatenated
// with word embeddings and a gazetteer projection, passed through a word
// biLSTM. Structural BIO constraints are -inf entries merged into the learned
// transition matrix, so decoded sequences are always well formed.
class Model {
public:
    Model(const kb::KnowledgeBase& kb, const bio::LabelSet& labels, Vocab word_vocab,
          Vocab char_vocab, const NerConfig& cfg);

    const bio::LabelSet& labels() const { return labels_; }
    const Vocab& word_vocab() const { return word_vocab_; }
    const Vocab& char_vocab() const { return char_vocab_; }
    const NerConfig& config() const { return cfg_; }
    nn::ParameterSet& params() { return params_; }
    const nn::Tensor& word_table() const { return params_.get("word.table"); }

    // emission/transition lattice for an utterance; no gradients
    crf::Lattice lattice(const std::vector<std::string>& tokens) const;

    double sequence_score(const std::vector<std::string>& tokens,
                          const std::vector<int>& label_ids) const;
    double log_partition(const std::vector<std::string>& tokens) const;
    double p_seq(const std::vector<std::string>& tokens, const std::vector<int>& label_ids) const;
    double mention_confidence(const std::vector<std::string>& tokens, size_t start, size_t end,
                              const std::string& type) const;

    // top-l hypotheses, score descending; hypothesis mentions carry p_men
    std::vector<Hypothesis> decode(const std::vector<std::string>& tokens, size_t beam) const;
    std::vector<Hypothesis> decode_lattice(const crf::Lattice& lat,
                                           const std::vector<std::string>& tokens,
                                           size_t beam) const;

    void save(const std::string& path, long step) const;
    static Model load(const std::string& path, const kb::KnowledgeBase& kb);

    // training-time graph construction (shared with train_ner and grad checks)
    nn::Var build_nll(nn::Graph& g, const std::vector<std::string>& tokens,
                      const std::vector<int>& gold, double scale, bool train_mode, Rng* dropout_rng);

private:
    std::vector<int> word_ids(const std::vector<std::string>& tokens) const;
    std::vector<nn::Var> emission_rows(nn::Graph& g, const std::vector<std::string>& tokens,
                                       bool train_mode, Rng* dropout_rng);

    bio::LabelSet labels_;
    Vocab word_vocab_;
    Vocab char_vocab_;
    NerConfig cfg_;
    Gazetteer gazetteer_;
    std::vector<uint8_t> transition_mask_;
    nn::ParameterSet params_;
};

struct TrainStats {
    std::vector<double> epoch_loss;  // mean NLL per example
    long steps = 0;
};

Model train(const kb::KnowledgeBase& kb, const std::vector<bio::Utterance>& corpus,
            const NerConfig& cfg, TrainStats* stats = nullptr);

// GloVe-style text file: token then word_dim reals per line. Rows for words
// missing from the vocab are skipped; dimension mismatches are errors.
void load_word_vectors(const std::string& path, const Vocab& vocab, nn::Tensor& table);

}  // namespace neu::ner

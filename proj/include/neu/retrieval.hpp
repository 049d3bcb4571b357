#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "neu/kb.hpp"

namespace neu::retrieval {

struct Weights {
    double w_tfidf = 1.0;
    double w_pop = 0.3;
    double synonym_weight = 0.5;          // expansion terms count at half weight
    double correction_confidence = 0.9;   // phrase substitutions below this are ignored
};

struct Posting {
    uint32_t entity = 0;  // dense index, ascending entity id order
    double weight = 0.0;  // tf * idf
};

// n-gram -> posting list over entity documents (canonical name + aliases).
// tf is the raw term count in the document, idf = ln((1+N)/(1+df)) + 1.
// Immutable once built; concurrent reads are safe.
class InvertedIndex {
public:
    static InvertedIndex build(const kb::KnowledgeBase& kb);

    size_t doc_count() const { return N_; }
    size_t term_count() const { return postings_.size(); }
    size_t doc_frequency(const std::string& term) const;
    const std::vector<Posting>* postings(const std::string& term) const;

    // dense index <-> entity id (ids sorted ascending)
    const std::vector<std::string>& entity_ids() const { return entity_ids_; }
    int entity_index(const std::string& id) const;

    // per-entity term statistics (term -> tf), kept for inspection
    const std::map<std::string, uint32_t>& entity_terms(size_t dense_index) const;

    double idf(const std::string& term) const;

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

private:
    size_t N_ = 0;
    std::vector<std::string> entity_ids_;
    std::unordered_map<std::string, int> id_to_index_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, uint32_t> df_;
    std::vector<std::map<std::string, uint32_t>> entity_terms_;
};

struct Candidate {
    std::string entity_id;
    double tfidf = 0.0;       // aggregate over matched terms
    double popularity = 0.0;
    double final_score = 0.0;  // w_tfidf*tfidf + w_pop*log(1+popularity)
    std::vector<std::string> matched_terms;
};

// all contiguous 1-, 2- and 3-grams joined by single spaces; duplicates kept
std::vector<std::string> extract_ngrams(const std::vector<std::string>& tokens);

// confidence-thresholded longest-match phrase substitution, one pass.
// Chained table entries are resolved at load so the result is idempotent.
std::string correct_query(const kb::KnowledgeBase& kb, const std::string& query,
                          double confidence_threshold = 0.9);

struct QueryTerm {
    std::string term;
    double weight = 1.0;  // < 1 for synonym expansions
};

// originals kept, unigram synonyms appended at the expansion weight
std::vector<QueryTerm> expand_synonyms(const kb::KnowledgeBase& kb,
                                       const std::vector<std::string>& terms,
                                       double synonym_weight = 0.5);

// Full pipeline: correct -> n-grams -> synonym expansion -> tf-idf
// accumulation -> popularity blend -> type filter -> top-c by (score desc,
// entity id asc). An empty type filter admits every type.
std::vector<Candidate> retrieve(const InvertedIndex& index, const kb::KnowledgeBase& kb,
                                const std::string& query,
                                const std::vector<std::string>& type_filter, size_t c,
                                const Weights& w = {});

}  // namespace neu::retrieval

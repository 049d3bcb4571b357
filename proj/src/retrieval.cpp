#include "neu/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "neu/text.hpp"

namespace neu::retrieval {

using nlohmann::json;

static constexpr const char* kIndexVersion = "neu.index.v1";

std::vector<std::string> extract_ngrams(const std::vector<std::string>& tokens) {
    std::vector<std::string> terms;
    const size_t n = tokens.size();
    for (size_t len = 1; len <= 3; ++len) {
        for (size_t i = 0; i + len <= n; ++i) {
            std::string t = tokens[i];
            for (size_t j = 1; j < len; ++j) {
                t += ' ';
                t += tokens[i + j];
            }
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

InvertedIndex InvertedIndex::build(const kb::KnowledgeBase& kb) {
    InvertedIndex idx;
    idx.N_ = kb.size();
    idx.entity_ids_.reserve(kb.size());
    for (const auto& e : kb.entities()) idx.entity_ids_.push_back(e.id);
    std::sort(idx.entity_ids_.begin(), idx.entity_ids_.end());
    for (size_t i = 0; i < idx.entity_ids_.size(); ++i)
        idx.id_to_index_[idx.entity_ids_[i]] = static_cast<int>(i);

    // document = canonical name + aliases; n-grams never cross surface forms
    idx.entity_terms_.resize(idx.N_);
    for (const auto& e : kb.entities()) {
        const size_t dense = static_cast<size_t>(idx.id_to_index_.at(e.id));
        auto& terms = idx.entity_terms_[dense];
        auto ingest = [&](const std::string& surface) {
            for (auto& t : extract_ngrams(text::normalize_tokens(surface))) ++terms[t];
        };
        ingest(e.canonical_name);
        for (const auto& a : e.aliases) ingest(a);
    }
    for (size_t dense = 0; dense < idx.N_; ++dense)
        for (const auto& [term, _] : idx.entity_terms_[dense]) ++idx.df_[term];
    for (size_t dense = 0; dense < idx.N_; ++dense)
        for (const auto& [term, tf] : idx.entity_terms_[dense])
            idx.postings_[term].push_back(
                {static_cast<uint32_t>(dense), static_cast<double>(tf) * idx.idf(term)});
    // dense indices follow ascending entity id, so lists are already sorted;
    // keep the invariant explicit anyway
    for (auto& [_, list] : idx.postings_)
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.entity < b.entity; });
    return idx;
}

size_t InvertedIndex::doc_frequency(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

int InvertedIndex::entity_index(const std::string& id) const {
    auto it = id_to_index_.find(id);
    return it == id_to_index_.end() ? -1 : it->second;
}

const std::map<std::string, uint32_t>& InvertedIndex::entity_terms(size_t dense_index) const {
    if (dense_index >= entity_terms_.size()) fail("entity index ", dense_index, " out of range");
    return entity_terms_[dense_index];
}

double InvertedIndex::idf(const std::string& term) const {
    return std::log((1.0 + static_cast<double>(N_)) /
                    (1.0 + static_cast<double>(doc_frequency(term)))) +
           1.0;
}

void InvertedIndex::save(const std::string& path) const {
    json j;
    j["version"] = kIndexVersion;
    j["doc_count"] = N_;
    j["entity_ids"] = entity_ids_;
    json df = json::object();
    for (const auto& [term, n] : df_) df[term] = n;
    j["df"] = std::move(df);
    json postings = json::object();
    for (const auto& [term, list] : postings_) {
        json arr = json::array();
        for (const auto& p : list) arr.push_back({p.entity, p.weight});
        postings[term] = std::move(arr);
    }
    j["postings"] = std::move(postings);
    json et = json::array();
    for (const auto& terms : entity_terms_) {
        json o = json::object();
        for (const auto& [term, tf] : terms) o[term] = tf;
        et.push_back(std::move(o));
    }
    j["entity_terms"] = std::move(et);
    std::ofstream os(path);
    if (!os) fail("cannot write index '", path, "'");
    os << j.dump() << "\n";
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open index '", path, "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("index '", path, "' is not valid JSON: ", e.what());
    }
    const std::string version = j.value("version", std::string());
    if (version != kIndexVersion)
        fail("index '", path, "' has version '", version, "', expected '", kIndexVersion, "'");
    InvertedIndex idx;
    idx.N_ = j.at("doc_count").get<size_t>();
    idx.entity_ids_ = j.at("entity_ids").get<std::vector<std::string>>();
    for (size_t i = 0; i < idx.entity_ids_.size(); ++i)
        idx.id_to_index_[idx.entity_ids_[i]] = static_cast<int>(i);
    for (auto& [term, n] : j.at("df").items()) idx.df_[term] = n.get<uint32_t>();
    for (auto& [term, arr] : j.at("postings").items()) {
        auto& list = idx.postings_[term];
        for (const auto& p : arr)
            list.push_back({p.at(0).get<uint32_t>(), p.at(1).get<double>()});
    }
    for (const auto& o : j.at("entity_terms")) {
        std::map<std::string, uint32_t> terms;
        for (auto& [term, tf] : o.items()) terms[term] = tf.get<uint32_t>();
        idx.entity_terms_.push_back(std::move(terms));
    }
    return idx;
}

// Follows chains (a -> b, b -> c) so one substitution pass is idempotent.
// Only entries at or above the threshold participate.
static const std::string* resolve_correction(const kb::KnowledgeBase& kb, const std::string& key,
                                             double threshold) {
    const auto& table = kb.correction_table();
    auto it = table.find(key);
    if (it == table.end() || it->second.confidence < threshold) return nullptr;
    const std::string* out = &it->second.to;
    for (int depth = 0; depth < 8; ++depth) {
        auto next = table.find(*out);
        if (next == table.end() || next->second.confidence < threshold ||
            &next->second.to == out)
            break;
        out = &next->second.to;
    }
    return out;
}

std::string correct_query(const kb::KnowledgeBase& kb, const std::string& query,
                          double confidence_threshold) {
    const auto tokens = text::normalize_tokens(query);
    size_t max_key_len = 0;
    for (const auto& [from, _] : kb.correction_table()) {
        size_t len = 1 + static_cast<size_t>(std::count(from.begin(), from.end(), ' '));
        max_key_len = std::max(max_key_len, len);
    }
    std::vector<std::string> out;
    size_t i = 0;
    while (i < tokens.size()) {
        const std::string* replacement = nullptr;
        size_t matched = 0;
        const size_t longest = std::min(max_key_len, tokens.size() - i);
        for (size_t len = longest; len >= 1; --len) {
            std::string phrase = tokens[i];
            for (size_t j = 1; j < len; ++j) {
                phrase += ' ';
                phrase += tokens[i + j];
            }
            if (const std::string* to = resolve_correction(kb, phrase, confidence_threshold)) {
                replacement = to;
                matched = len;
                break;
            }
        }
        if (replacement) {
            for (auto& t : text::normalize_tokens(*replacement)) out.push_back(std::move(t));
            i += matched;
        } else {
            out.push_back(tokens[i]);
            ++i;
        }
    }
    return text::join(out);
}

std::vector<QueryTerm> expand_synonyms(const kb::KnowledgeBase& kb,
                                       const std::vector<std::string>& terms,
                                       double synonym_weight) {
    std::vector<QueryTerm> out;
    out.reserve(terms.size());
    for (const auto& t : terms) out.push_back({t, 1.0});
    for (const auto& t : terms) {
        if (t.find(' ') != std::string::npos) continue;  // unigrams only
        if (const auto* syns = kb.synonyms(t))
            for (const auto& s : *syns) out.push_back({s, synonym_weight});
    }
    return out;
}

std::vector<Candidate> retrieve(const InvertedIndex& index, const kb::KnowledgeBase& kb,
                                const std::string& query,
                                const std::vector<std::string>& type_filter, size_t c,
                                const Weights& w) {
    if (index.doc_count() == 0) fail("retrieve: empty index");
    if (c == 0) fail("retrieve: c must be >= 1");
    const std::string corrected = correct_query(kb, query, w.correction_confidence);
    const auto terms = extract_ngrams(text::normalize_tokens(corrected));
    const auto qterms = expand_synonyms(kb, terms, w.synonym_weight);

    // entities matching no query term are not candidates
    std::unordered_map<uint32_t, Candidate> acc;
    for (const auto& qt : qterms) {
        const auto* list = index.postings(qt.term);
        if (!list) continue;
        for (const auto& p : *list) {
            auto& cand = acc[p.entity];
            cand.tfidf += qt.weight * p.weight;
            cand.matched_terms.push_back(qt.term);
        }
    }
    std::vector<Candidate> scored;
    scored.reserve(acc.size());
    for (auto& [dense, cand] : acc) {
        cand.entity_id = index.entity_ids()[dense];
        const auto& e = kb.entity(cand.entity_id);
        if (!type_filter.empty() &&
            std::find(type_filter.begin(), type_filter.end(), e.entity_type) == type_filter.end())
            continue;
        cand.popularity = e.popularity;
        cand.final_score = w.w_tfidf * cand.tfidf + w.w_pop * std::log1p(e.popularity);
        scored.push_back(std::move(cand));
    }
    auto better = [](const Candidate& a, const Candidate& b) {
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        return a.entity_id < b.entity_id;
    };
    // top-c selection, identical to full sort + truncate
    if (scored.size() > c) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(c), scored.end(),
                          better);
        scored.resize(c);
    } else {
        std::sort(scored.begin(), scored.end(), better);
    }
    return scored;
}

}  // namespace neu::retrieval

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "neu/common.hpp"

namespace neu::bio {

// Closed BIO2 label inventory: O is id 0, then B-X / I-X per entity type in
// sorted type order.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(const std::set<std::string>& types);

    size_t size() const { return names_.size(); }
    size_t num_types() const { return types_.size(); }
    const std::vector<std::string>& types() const { return types_; }

    static constexpr int kO = 0;
    int b_id(const std::string& type) const;
    int i_id(const std::string& type) const;
    int id(const std::string& label_name) const;
    const std::string& name(int id) const;

    bool is_b(int id) const { return id > 0 && (id - 1) % 2 == 0; }
    bool is_i(int id) const { return id > 0 && (id - 1) % 2 == 1; }
    // index into types() for B-/I- labels, -1 for O
    int type_index(int id) const { return id == 0 ? -1 : (id - 1) / 2; }
    const std::string& type_name(int id) const;

    // token-level code with O included: O -> 0, type i -> i + 1
    int token_code(int label_id) const { return label_id == 0 ? 0 : type_index(label_id) + 1; }
    size_t num_token_codes() const { return types_.size() + 1; }

    // (L+2)^2 mask, 1 = structurally allowed; I-X only after B-X/I-X,
    // nothing enters START, everything may stop.
    std::vector<uint8_t> transition_mask() const;

private:
    std::vector<std::string> types_;
    std::vector<std::string> names_;
};

struct Mention {
    size_t start = 0;
    size_t end = 0;  // [start, end)
    std::string type;

    friend bool operator==(const Mention& a, const Mention& b) {
        return a.start == b.start && a.end == b.end && a.type == b.type;
    }
    friend bool operator<(const Mention& a, const Mention& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.end != b.end) return a.end < b.end;
        return a.type < b.type;
    }
};

bool bio_valid(const std::vector<std::string>& labels);
std::vector<Mention> decode_mentions(const std::vector<std::string>& labels);
std::vector<Mention> decode_mentions(const LabelSet& ls, const std::vector<int>& label_ids);

struct Link {
    size_t start = 0;
    size_t end = 0;
    std::string type;
    std::string entity_id;
};

struct Utterance {
    std::vector<std::string> tokens;
    std::vector<std::string> labels;
    std::vector<Link> links;
    std::vector<std::string> tags;

    bool has_tag(const std::string& tag) const;
};

// JSON Lines {tokens, labels, links?, tags?}; labels must be BIO-valid and
// every link must coincide with a gold mention.
std::vector<Utterance> load_corpus(const std::string& path);
void save_corpus(const std::vector<Utterance>& corpus, const std::string& path);

}  // namespace neu::bio

#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neu/common.hpp"

namespace neu::kb {

struct Entity {
    std::string id;
    std::string canonical_name;
    std::string entity_type;
    std::vector<std::string> aliases;
    double popularity = 0.0;  // non-negative prior usage probability, unnormalized
    std::vector<std::string> related_ids;
};

struct Correction {
    std::string to;
    double confidence = 0.0;  // in [0, 1]
};

// Immutable after load; safe for concurrent reads. All text is case-folded
// at ingestion. The relation file is directed; related() applies the
// symmetric closure.
class KnowledgeBase {
public:
    const Entity& entity(const std::string& id) const;
    const Entity* find(const std::string& id) const;
    const std::vector<Entity>& entities() const { return entities_; }
    size_t size() const { return entities_.size(); }

    const std::set<std::string>& type_inventory() const { return type_inventory_; }

    // true iff b is listed by a or a is listed by b; unknown ids are errors
    bool related(const std::string& a, const std::string& b) const;

    const std::vector<std::string>* synonyms(const std::string& term) const;
    const std::unordered_map<std::string, std::vector<std::string>>& synonym_table() const {
        return synonym_table_;
    }
    const std::unordered_map<std::string, Correction>& correction_table() const {
        return correction_table_;
    }

    // builders (used by load_kb and the synthetic generator)
    void add_entity(Entity e);
    void add_synonym(const std::string& term, std::vector<std::string> syns);
    void add_correction(const std::string& from, const std::string& to, double confidence);
    void validate() const;  // dangling related_ids, invariants

private:
    std::vector<Entity> entities_;
    std::unordered_map<std::string, size_t> by_id_;
    std::set<std::string> type_inventory_;
    std::unordered_map<std::string, std::vector<std::string>> synonym_table_;
    std::unordered_map<std::string, Correction> correction_table_;
};

// JSON-Lines loaders. Entity lines must carry exactly
// {id, canonical_name, entity_type, aliases, popularity, related_ids};
// unknown or missing fields are rejected with the offending line number.
KnowledgeBase load_kb(const std::string& path);
void load_synonyms(KnowledgeBase& kb, const std::string& path);   // {term, synonyms}
void load_corrections(KnowledgeBase& kb, const std::string& path);  // {from, to, confidence}

void save_kb(const KnowledgeBase& kb, const std::string& kb_path,
             const std::string& synonyms_path, const std::string& corrections_path);

}  // namespace neu::kb

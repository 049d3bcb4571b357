#include "neu/kb.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "neu/text.hpp"

namespace neu::kb {

using nlohmann::json;

const Entity& KnowledgeBase::entity(const std::string& id) const {
    const Entity* e = find(id);
    if (!e) fail("unknown entity id '", id, "'");
    return *e;
}

const Entity* KnowledgeBase::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entities_[it->second];
}

bool KnowledgeBase::related(const std::string& a, const std::string& b) const {
    const Entity& ea = entity(a);
    const Entity& eb = entity(b);
    auto lists = [](const Entity& x, const std::string& id) {
        return std::find(x.related_ids.begin(), x.related_ids.end(), id) != x.related_ids.end();
    };
    return lists(ea, b) || lists(eb, a);
}

const std::vector<std::string>* KnowledgeBase::synonyms(const std::string& term) const {
    auto it = synonym_table_.find(term);
    return it == synonym_table_.end() ? nullptr : &it->second;
}

void KnowledgeBase::add_entity(Entity e) {
    if (e.id.empty()) fail("entity with empty id");
    if (by_id_.count(e.id)) fail("duplicate entity id '", e.id, "'");
    if (e.canonical_name.empty()) fail("entity '", e.id, "' has empty canonical_name");
    if (e.popularity < 0.0) fail("entity '", e.id, "' has negative popularity");
    e.canonical_name = text::casefold(e.canonical_name);
    for (auto& a : e.aliases) a = text::casefold(a);
    type_inventory_.insert(e.entity_type);
    by_id_[e.id] = entities_.size();
    entities_.push_back(std::move(e));
}

void KnowledgeBase::add_synonym(const std::string& term, std::vector<std::string> syns) {
    for (auto& s : syns) s = text::casefold(s);
    synonym_table_[text::casefold(term)] = std::move(syns);
}

void KnowledgeBase::add_correction(const std::string& from, const std::string& to,
                                   double confidence) {
    if (confidence < 0.0 || confidence > 1.0)
        fail("correction '", from, "' has confidence ", confidence, " outside [0, 1]");
    correction_table_[text::casefold(from)] = Correction{text::casefold(to), confidence};
}

void KnowledgeBase::validate() const {
    for (const auto& e : entities_)
        for (const auto& rid : e.related_ids)
            if (!by_id_.count(rid))
                fail("entity '", e.id, "' lists related_id '", rid, "' which does not exist");
}

namespace {

void check_fields(const json& j, const std::vector<std::string>& allowed, const std::string& path,
                  size_t lineno) {
    for (auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(path, ":", lineno, ": unknown field '", key, "'");
    for (const auto& key : allowed)
        if (!j.contains(key)) fail(path, ":", lineno, ": missing field '", key, "'");
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
    std::ifstream is(path);
    if (!is) fail("cannot open '", path, "'");
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(path, ":", lineno, ": JSON parse error: ", e.what());
        }
        fn(j, lineno);
    }
}

}  // namespace

KnowledgeBase load_kb(const std::string& path) {
    KnowledgeBase kb;
    for_each_jsonl(path, [&](const json& j, size_t lineno) {
        check_fields(j, {"id", "canonical_name", "entity_type", "aliases", "popularity",
                         "related_ids"},
                     path, lineno);
        Entity e;
        try {
            e.id = j.at("id").get<std::string>();
            e.canonical_name = j.at("canonical_name").get<std::string>();
            e.entity_type = j.at("entity_type").get<std::string>();
            e.aliases = j.at("aliases").get<std::vector<std::string>>();
            e.popularity = j.at("popularity").get<double>();
            e.related_ids = j.at("related_ids").get<std::vector<std::string>>();
        } catch (const json::exception& ex) {
            fail(path, ":", lineno, ": bad entity record: ", ex.what());
        }
        try {
            kb.add_entity(std::move(e));
        } catch (const Error& ex) {
            fail(path, ":", lineno, ": ", ex.what());
        }
    });
    kb.validate();
    return kb;
}

void load_synonyms(KnowledgeBase& kb, const std::string& path) {
    for_each_jsonl(path, [&](const json& j, size_t lineno) {
        check_fields(j, {"term", "synonyms"}, path, lineno);
        try {
            kb.add_synonym(j.at("term").get<std::string>(),
                           j.at("synonyms").get<std::vector<std::string>>());
        } catch (const json::exception& ex) {
            fail(path, ":", lineno, ": bad synonym record: ", ex.what());
        }
    });
}

void load_corrections(KnowledgeBase& kb, const std::string& path) {
    for_each_jsonl(path, [&](const json& j, size_t lineno) {
        check_fields(j, {"from", "to", "confidence"}, path, lineno);
        try {
            kb.add_correction(j.at("from").get<std::string>(), j.at("to").get<std::string>(),
                              j.at("confidence").get<double>());
        } catch (const json::exception& ex) {
            fail(path, ":", lineno, ": bad correction record: ", ex.what());
        } catch (const Error& ex) {
            fail(path, ":", lineno, ": ", ex.what());
        }
    });
}

void save_kb(const KnowledgeBase& kb, const std::string& kb_path,
             const std::string& synonyms_path, const std::string& corrections_path) {
    {
        std::ofstream os(kb_path);
        if (!os) fail("cannot write '", kb_path, "'");
        for (const auto& e : kb.entities()) {
            json j;
            j["id"] = e.id;
            j["canonical_name"] = e.canonical_name;
            j["entity_type"] = e.entity_type;
            j["aliases"] = e.aliases;
            j["popularity"] = e.popularity;
            j["related_ids"] = e.related_ids;
            os << j.dump() << "\n";
        }
    }
    {
        std::ofstream os(synonyms_path);
        if (!os) fail("cannot write '", synonyms_path, "'");
        std::vector<std::string> terms;
        for (const auto& [term, _] : kb.synonym_table()) terms.push_back(term);
        std::sort(terms.begin(), terms.end());
        for (const auto& term : terms) {
            json j;
            j["term"] = term;
            j["synonyms"] = kb.synonym_table().at(term);
            os << j.dump() << "\n";
        }
    }
    {
        std::ofstream os(corrections_path);
        if (!os) fail("cannot write '", corrections_path, "'");
        std::vector<std::string> froms;
        for (const auto& [from, _] : kb.correction_table()) froms.push_back(from);
        std::sort(froms.begin(), froms.end());
        for (const auto& from : froms) {
            const auto& c = kb.correction_table().at(from);
            json j;
            j["from"] = from;
            j["to"] = c.to;
            j["confidence"] = c.confidence;
            os << j.dump() << "\n";
        }
    }
}

}  // namespace neu::kb

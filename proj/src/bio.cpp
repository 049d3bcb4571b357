#include "neu/bio.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace neu::bio {

using nlohmann::json;

LabelSet::LabelSet(const std::set<std::string>& types) {
    types_.assign(types.begin(), types.end());  // std::set iterates sorted
    names_.push_back("O");
    for (const auto& t : types_) {
        names_.push_back("B-" + t);
        names_.push_back("I-" + t);
    }
}

int LabelSet::b_id(const std::string& type) const {
    auto it = std::lower_bound(types_.begin(), types_.end(), type);
    if (it == types_.end() || *it != type) fail("unknown entity type '", type, "'");
    return 1 + 2 * static_cast<int>(it - types_.begin());
}

int LabelSet::i_id(const std::string& type) const { return b_id(type) + 1; }

int LabelSet::id(const std::string& label_name) const {
    auto it = std::find(names_.begin(), names_.end(), label_name);
    if (it == names_.end()) fail("unknown label '", label_name, "'");
    return static_cast<int>(it - names_.begin());
}

const std::string& LabelSet::name(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= names_.size()) fail("label id ", id, " out of range");
    return names_[static_cast<size_t>(id)];
}

const std::string& LabelSet::type_name(int id) const {
    const int ti = type_index(id);
    if (ti < 0) fail("label ", id, " has no entity type");
    return types_[static_cast<size_t>(ti)];
}

std::vector<uint8_t> LabelSet::transition_mask() const {
    const size_t L = size(), S = L + 2, start = L, stop = L + 1;
    std::vector<uint8_t> mask(S * S, 0);
    auto allow = [&](size_t from, size_t to) { mask[from * S + to] = 1; };
    for (size_t from = 0; from < L; ++from) {
        for (size_t to = 0; to < L; ++to) {
            if (is_i(static_cast<int>(to))) {
                // I-X follows only B-X or I-X of the same type (O has index -1)
                if (type_index(static_cast<int>(from)) == type_index(static_cast<int>(to)))
                    allow(from, to);
            } else {
                allow(from, to);
            }
        }
        allow(from, stop);
    }
    for (size_t to = 0; to < L; ++to)
        if (!is_i(static_cast<int>(to))) allow(start, to);
    return mask;
}

bool bio_valid(const std::vector<std::string>& labels) {
    std::string prev = "O";
    for (const auto& lab : labels) {
        if (lab == "O") {
            prev = lab;
            continue;
        }
        if (lab.size() < 3 || (lab[0] != 'B' && lab[0] != 'I') || lab[1] != '-') return false;
        if (lab[0] == 'I') {
            if (prev.size() < 3 || (prev[0] != 'B' && prev[0] != 'I')) return false;
            if (prev.substr(2) != lab.substr(2)) return false;
        }
        prev = lab;
    }
    return true;
}

std::vector<Mention> decode_mentions(const std::vector<std::string>& labels) {
    std::vector<Mention> out;
    for (size_t t = 0; t < labels.size(); ++t) {
        if (labels[t].size() > 2 && labels[t][0] == 'B') {
            Mention m;
            m.start = t;
            m.type = labels[t].substr(2);
            size_t e = t + 1;
            while (e < labels.size() && labels[e] == "I-" + m.type) ++e;
            m.end = e;
            out.push_back(std::move(m));
            t = e - 1;
        }
    }
    return out;
}

std::vector<Mention> decode_mentions(const LabelSet& ls, const std::vector<int>& label_ids) {
    std::vector<std::string> names;
    names.reserve(label_ids.size());
    for (int id : label_ids) names.push_back(ls.name(id));
    return decode_mentions(names);
}

bool Utterance::has_tag(const std::string& tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

std::vector<Utterance> load_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open corpus '", path, "'");
    std::vector<Utterance> out;
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
        for (auto& [key, _] : j.items())
            if (key != "tokens" && key != "labels" && key != "links" && key != "tags")
                fail(path, ":", lineno, ": unknown field '", key, "'");
        Utterance u;
        try {
            u.tokens = j.at("tokens").get<std::vector<std::string>>();
            u.labels = j.at("labels").get<std::vector<std::string>>();
            if (j.contains("tags")) u.tags = j.at("tags").get<std::vector<std::string>>();
            if (j.contains("links")) {
                for (const auto& lj : j.at("links")) {
                    Link l;
                    l.start = lj.at("start").get<size_t>();
                    l.end = lj.at("end").get<size_t>();
                    l.type = lj.at("type").get<std::string>();
                    l.entity_id = lj.at("entity_id").get<std::string>();
                    u.links.push_back(std::move(l));
                }
            }
        } catch (const json::exception& e) {
            fail(path, ":", lineno, ": bad utterance record: ", e.what());
        }
        if (u.labels.size() != u.tokens.size())
            fail(path, ":", lineno, ": ", u.labels.size(), " labels for ", u.tokens.size(),
                 " tokens");
        if (!bio_valid(u.labels)) fail(path, ":", lineno, ": labels are not BIO-well-formed");
        auto mentions = decode_mentions(u.labels);
        for (const auto& l : u.links) {
            Mention want{l.start, l.end, l.type};
            if (std::find(mentions.begin(), mentions.end(), want) == mentions.end())
                fail(path, ":", lineno, ": link span [", l.start, ",", l.end, ") type '", l.type,
                     "' does not match any gold mention");
        }
        out.push_back(std::move(u));
    }
    return out;
}

void save_corpus(const std::vector<Utterance>& corpus, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("cannot write corpus '", path, "'");
    for (const auto& u : corpus) {
        json j;
        j["tokens"] = u.tokens;
        j["labels"] = u.labels;
        if (!u.links.empty()) {
            json links = json::array();
            for (const auto& l : u.links) {
                json lj;
                lj["start"] = l.start;
                lj["end"] = l.end;
                lj["type"] = l.type;
                lj["entity_id"] = l.entity_id;
                links.push_back(std::move(lj));
            }
            j["links"] = std::move(links);
        }
        if (!u.tags.empty()) j["tags"] = u.tags;
        os << j.dump() << "\n";
    }
}

}  // namespace neu::bio

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "neu/common.hpp"

namespace neu {

// Append-only symbol table. When constructed with an <unk> entry, lookups of
// unseen symbols map there instead of failing.
class Vocab {
public:
    explicit Vocab(bool with_unk = true) {
        if (with_unk) unk_ = add("<unk>");
    }

    int add(const std::string& s) {
        auto it = index_.find(s);
        if (it != index_.end()) return it->second;
        const int id = static_cast<int>(items_.size());
        index_[s] = id;
        items_.push_back(s);
        return id;
    }

    int id(const std::string& s) const {
        auto it = index_.find(s);
        if (it != index_.end()) return it->second;
        if (unk_ < 0) fail("vocab: unknown symbol '", s, "' and no <unk> entry");
        return unk_;
    }

    bool contains(const std::string& s) const { return index_.count(s) > 0; }
    size_t size() const { return items_.size(); }
    const std::vector<std::string>& items() const { return items_; }
    int unk() const { return unk_; }

    static Vocab from_items(const std::vector<std::string>& items, bool with_unk) {
        Vocab v(false);
        for (const auto& s : items) v.add(s);
        if (with_unk) {
            if (!v.contains("<unk>")) fail("vocab: serialized items lack <unk>");
            v.unk_ = v.id("<unk>");
        }
        return v;
    }

private:
    std::vector<std::string> items_;
    std::unordered_map<std::string, int> index_;
    int unk_ = -1;
};

}  // namespace neu

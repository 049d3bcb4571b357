#include "neu/eval.hpp"

#include <algorithm>
#include <iostream>
#include <set>

namespace neu::eval {

Metric metric_from(const Counts& c) {
    Metric m;
    m.counts = c;
    const double p_den = static_cast<double>(c.tp + c.fp);
    const double r_den = static_cast<double>(c.tp + c.fn);
    m.precision = p_den > 0.0 ? static_cast<double>(c.tp) / p_den : 0.0;
    m.recall = r_den > 0.0 ? static_cast<double>(c.tp) / r_den : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// exact-equality matching: tp is the multiset intersection size
static Counts span_counts(const std::vector<bio::Mention>& pred,
                          const std::vector<bio::Mention>& gold) {
    Counts c;
    std::multiset<bio::Mention> gold_left(gold.begin(), gold.end());
    for (const auto& m : pred) {
        auto it = gold_left.find(m);
        if (it != gold_left.end()) {
            ++c.tp;
            gold_left.erase(it);
        } else {
            ++c.fp;
        }
    }
    c.fn = gold_left.size();
    return c;
}

static void accumulate(Counts& into, const Counts& c) {
    into.tp += c.tp;
    into.fp += c.fp;
    into.fn += c.fn;
}

Metric ner_f1(const std::vector<std::vector<std::string>>& pred_labels,
              const std::vector<bio::Utterance>& gold) {
    if (pred_labels.size() != gold.size())
        fail("ner_f1: ", pred_labels.size(), " predictions for ", gold.size(), " gold utterances");
    Counts total;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (pred_labels[i].size() != gold[i].tokens.size())
            fail("ner_f1: utterance ", i, " has ", pred_labels[i].size(), " labels for ",
                 gold[i].tokens.size(), " tokens");
        accumulate(total, span_counts(bio::decode_mentions(pred_labels[i]),
                                      bio::decode_mentions(gold[i].labels)));
    }
    return metric_from(total);
}

Metric oracle_topk_f1(const std::vector<std::vector<ScoredLabels>>& beams,
                      const std::vector<bio::Utterance>& gold, size_t k) {
    if (beams.size() != gold.size())
        fail("oracle_topk_f1: ", beams.size(), " beams for ", gold.size(), " gold utterances");
    Counts total;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (beams[i].empty()) fail("oracle_topk_f1: empty beam at utterance ", i);
        const auto gold_mentions = bio::decode_mentions(gold[i].labels);
        const size_t limit = std::min(k, beams[i].size());
        Counts best_counts;
        double best_f1 = -1.0, best_score = 0.0;
        for (size_t h = 0; h < limit; ++h) {
            const Counts c = span_counts(bio::decode_mentions(beams[i][h].labels), gold_mentions);
            const double f1 = metric_from(c).f1;
            if (f1 > best_f1 || (f1 == best_f1 && beams[i][h].score > best_score)) {
                best_f1 = f1;
                best_score = beams[i][h].score;
                best_counts = c;
            }
        }
        accumulate(total, best_counts);
    }
    return metric_from(total);
}

struct LinkKey {
    size_t start, end;
    std::string type, entity;
    bool operator<(const LinkKey& o) const {
        if (start != o.start) return start < o.start;
        if (end != o.end) return end < o.end;
        if (type != o.type) return type < o.type;
        return entity < o.entity;
    }
};

Metric el_f1(const std::vector<std::vector<bio::Link>>& pred_links,
             const std::vector<bio::Utterance>& gold) {
    if (pred_links.size() != gold.size())
        fail("el_f1: ", pred_links.size(), " predictions for ", gold.size(), " gold utterances");
    Counts total;
    for (size_t i = 0; i < gold.size(); ++i) {
        const auto gold_mentions = bio::decode_mentions(gold[i].labels);
        if (gold_mentions.size() != gold[i].links.size())
            fail("el_f1: utterance ", i, " has ", gold_mentions.size(), " gold mentions but ",
                 gold[i].links.size(), " gold links");
        std::multiset<LinkKey> gold_left;
        for (const auto& l : gold[i].links)
            gold_left.insert({l.start, l.end, l.type, l.entity_id});
        Counts c;
        for (const auto& l : pred_links[i]) {
            LinkKey key{l.start, l.end, l.type, l.entity_id};
            auto it = gold_left.find(key);
            if (it != gold_left.end()) {
                ++c.tp;
                gold_left.erase(it);
            } else {
                ++c.fp;
            }
        }
        c.fn = gold_left.size();
        accumulate(total, c);
    }
    return metric_from(total);
}

std::vector<size_t> subset_indices(const std::vector<bio::Utterance>& gold,
                                   const std::string& tag) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < gold.size(); ++i)
        if (gold[i].has_tag(tag)) idx.push_back(i);
    if (idx.empty())
        std::cerr << "warning: no utterances carry tag '" << tag << "'; report is empty\n";
    return idx;
}

}  // namespace neu::eval

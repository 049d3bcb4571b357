#include "neu/el.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "neu/config.hpp"
#include "neu/text.hpp"

namespace neu::el {

using nlohmann::json;

static constexpr const char* kVersion = "neu.el.v1";

bool Hypothesis::same_links(const Hypothesis& other) const {
    if (mentions.size() != other.mentions.size()) return false;
    for (size_t i = 0; i < mentions.size(); ++i)
        if (mentions[i].entity_id != other.mentions[i].entity_id) return false;
    return true;
}

double adaptive_margin(const Hypothesis& y_hat, const Hypothesis& y_star, double margin_link,
                       double margin_ner) {
    if (!y_hat.same_ner(y_star)) return margin_ner;
    if (!y_hat.same_links(y_star)) return margin_link;
    return 0.0;
}

double el_loss(const std::vector<double>& gold_scores, const std::vector<double>& neg_scores,
               const std::vector<double>& margins) {
    if (gold_scores.size() != neg_scores.size() || margins.size() != neg_scores.size())
        fail("el_loss: mismatched inputs");
    if (neg_scores.empty()) return 0.0;
    double total = 0.0;
    for (size_t i = 0; i < neg_scores.size(); ++i)
        total += std::max(0.0, margins[i] + neg_scores[i] - gold_scores[i]);
    return total / static_cast<double>(neg_scores.size());
}

Model::Model(const bio::LabelSet& labels, Vocab char_vocab, const Vocab& word_vocab,
             const nn::Tensor& word_table, const ElConfig& cfg)
    : labels_(labels),
      char_vocab_(std::move(char_vocab)),
      word_vocab_(&word_vocab),
      word_table_(&word_table),
      cfg_(cfg),
      params_(kVersion) {
    if (cfg_.sim_mode != "mlp" && cfg_.sim_mode != "cosine")
        fail("el: unknown sim_mode '", cfg_.sim_mode, "'");
    if (cfg_.aggregation != "concat" && cfg_.aggregation != "average")
        fail("el: unknown aggregation '", cfg_.aggregation, "'");
    Rng rng(cfg.seed ^ 0xe1e1e1e1ULL);
    params_.add_init("char.table", {char_vocab_.size(), cfg_.char_dim}, rng);
    nn::char_conv_init(params_, "name.conv", cfg_.char_dim, cfg_.conv, rng);
    if (cfg_.sim_mode == "mlp")
        nn::mlp_init(params_, "sim", 7 * name_dim(), cfg_.sim_hidden, cfg_.sim_out, rng);
    nn::mlp_init(params_, "score", feature_dim(), cfg_.score_hidden, 1, rng);
}

size_t Model::feature_dim() const {
    const size_t word_dim = word_table_->shape[1];
    const size_t n_types = labels_.num_types();
    const size_t sim_dim = cfg_.sim_mode == "mlp" ? cfg_.sim_out : 1;
    const size_t block = sim_dim + 2 * name_dim();
    const size_t blocks = cfg_.aggregation == "concat" ? cfg_.pad_slots : 1;
    return word_dim + (1 + cfg_.pad_slots * (n_types + 1)) + (cfg_.pad_slots + 1) +
           blocks * block;
}

nn::Var Model::name_embed(nn::Graph& g, const std::string& name_text) {
    const std::string norm = text::join(text::normalize_tokens(name_text));
    const auto chars = text::char_split(norm);
    if (chars.empty()) fail("name_embed: empty text after normalization");
    std::vector<int> ids;
    ids.reserve(chars.size());
    for (const auto& ch : chars) ids.push_back(char_vocab_.id(ch));
    nn::Var rows = g.embed(params_.get("char.table"), ids);
    return nn::char_conv_pool(g, params_, "name.conv", rows, cfg_.conv);
}

nn::Var Model::similarity_features(nn::Graph& g, const nn::Var& m_emb, const nn::Var& e_emb) {
    if (cfg_.sim_mode == "cosine") return g.cosine(m_emb, e_emb);
    nn::Var in = g.concat({m_emb, e_emb, g.add(m_emb, e_emb), g.sub(m_emb, e_emb),
                           g.emin(m_emb, e_emb), g.emax(m_emb, e_emb), g.mul(m_emb, e_emb)});
    return nn::mlp_run(g, params_, "sim", in);
}

std::vector<double> Model::f_utter(const std::vector<std::string>& tokens) const {
    const size_t d = word_table_->shape[1];
    std::vector<double> out(d, 0.0);
    if (tokens.empty()) return out;
    for (const auto& tok : tokens) {
        const size_t row = static_cast<size_t>(word_vocab_->id(text::normalize_token(tok)));
        for (size_t j = 0; j < d; ++j) out[j] += word_table_->v[row * d + j];
    }
    for (double& x : out) x /= static_cast<double>(tokens.size());
    return out;
}

std::vector<double> Model::f_ner(const Hypothesis& hyp) const {
    const size_t n_types = labels_.num_types();
    std::vector<double> out(1 + cfg_.pad_slots * (n_types + 1), 0.0);
    out[0] = hyp.p_seq;
    const auto& types = labels_.types();
    for (size_t j = 0; j < cfg_.pad_slots && j < hyp.mentions.size(); ++j) {
        const auto& m = hyp.mentions[j];
        auto it = std::lower_bound(types.begin(), types.end(), m.type);
        if (it == types.end() || *it != m.type) fail("el: mention type '", m.type, "' not in inventory");
        const size_t ti = static_cast<size_t>(it - types.begin());
        out[1 + j * (n_types + 1) + ti] = 1.0;
        out[1 + j * (n_types + 1) + n_types] = m.p_men;
    }
    return out;
}

std::vector<double> Model::f_cr(const Hypothesis& hyp) const {
    std::vector<double> out(cfg_.pad_slots + 1, 0.0);
    for (size_t j = 0; j < cfg_.pad_slots && j < hyp.mentions.size(); ++j)
        if (!hyp.mentions[j].entity_id.empty())
            out[j] = std::log1p(hyp.mentions[j].popularity) / pop_scale_;
    out[cfg_.pad_slots] = (cfg_.use_relation && hyp.relation_exists) ? 1.0 : 0.0;
    return out;
}

nn::Var Model::score(ScoreContext& ctx, const Hypothesis& hyp,
                     const std::vector<std::string>& utterance_tokens) {
    nn::Graph& g = *ctx.g;
    const size_t block_dim = (cfg_.sim_mode == "mlp" ? cfg_.sim_out : 1) + 2 * name_dim();

    auto cached_name = [&](const std::string& s) {
        auto it = ctx.names.find(s);
        if (it != ctx.names.end()) return it->second;
        nn::Var v = name_embed(g, s);
        ctx.names.emplace(s, v);
        return v;
    };

    // one block per pad slot, in mention order; unlinked or padded slots are
    // zero so masked content can never influence the score
    std::vector<nn::Var> blocks(cfg_.pad_slots);
    std::vector<nn::Var> linked;
    for (size_t j = 0; j < cfg_.pad_slots; ++j) {
        if (j >= hyp.mentions.size()) {
            blocks[j] = g.zeros(block_dim);
            continue;
        }
        const auto& m = hyp.mentions[j];
        if (m.entity_id.empty() || m.surface.empty() || m.canonical.empty()) {
            blocks[j] = g.zeros(block_dim);
            continue;
        }
        nn::Var me = cached_name(m.surface);
        nn::Var ee = cached_name(m.canonical);
        const std::string sim_key = m.surface + '\x1f' + m.canonical;
        nn::Var sim;
        auto it = ctx.sims.find(sim_key);
        if (it != ctx.sims.end()) {
            sim = it->second;
        } else {
            sim = similarity_features(g, me, ee);
            ctx.sims.emplace(sim_key, sim);
        }
        blocks[j] = g.concat({sim, me, ee});
        linked.push_back(blocks[j]);
    }

    nn::Var agg;
    if (cfg_.aggregation == "concat") {
        agg = g.concat(blocks);
    } else {  // average over linked slots
        if (linked.empty()) {
            agg = g.zeros(block_dim);
        } else {
            nn::Var acc = linked[0];
            for (size_t i = 1; i < linked.size(); ++i) acc = g.add(acc, linked[i]);
            agg = g.scale(acc, 1.0 / static_cast<double>(linked.size()));
        }
    }

    nn::Var features = g.concat({g.input(nn::Tensor({word_table_->shape[1]}, f_utter(utterance_tokens))),
                                 g.input(nn::Tensor({1 + cfg_.pad_slots * (labels_.num_types() + 1)},
                                                    f_ner(hyp))),
                                 g.input(nn::Tensor({cfg_.pad_slots + 1}, f_cr(hyp))), agg});
    return nn::mlp_run(g, params_, "score", features);
}

double Model::score_value(const Hypothesis& hyp, const std::vector<std::string>& utterance_tokens) {
    nn::Graph g(false);
    ScoreContext ctx{&g, {}, {}};
    return score(ctx, hyp, utterance_tokens)->val.v[0];
}

double Model::name_cosine(const std::string& mention, const std::string& entity_name) {
    nn::Graph g(false);
    nn::Var m = name_embed(g, mention);
    nn::Var e = name_embed(g, entity_name);
    return g.cosine(m, e)->val.v[0];
}

void Model::save(const std::string& path, long step) const {
    std::unordered_map<std::string, std::string> meta;
    meta["char_vocab"] = json(char_vocab_.items()).dump();
    meta["pop_scale"] = json(pop_scale_).dump();
    meta["config"] = config::el_to_json(cfg_).dump();
    nn::save_checkpoint(path, params_, step, meta);
}

Model Model::load(const std::string& path, const ner::Model& ner_model) {
    std::ifstream is(path);
    if (!is) fail("cannot open EL checkpoint '", path, "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("EL checkpoint '", path, "' is not valid JSON: ", e.what());
    }
    if (j.value("version", std::string()) != kVersion)
        fail("EL checkpoint '", path, "' has version '", j.value("version", std::string()),
             "', expected '", kVersion, "'");
    const auto& meta = j.at("meta");
    auto cv = json::parse(meta.at("char_vocab").get<std::string>())
                  .get<std::vector<std::string>>();
    ElConfig cfg = config::el_from_json(json::parse(meta.at("config").get<std::string>()));
    Model model(ner_model.labels(), Vocab::from_items(cv, true), ner_model.word_vocab(),
                ner_model.word_table(), cfg);
    model.pop_scale_ = json::parse(meta.at("pop_scale").get<std::string>()).get<double>();
    nn::load_checkpoint(path, model.params_);
    return model;
}

// ---- example preparation ----------------------------------------------------

static std::string span_surface(const std::vector<std::string>& tokens, size_t start, size_t end) {
    std::vector<std::string> span(tokens.begin() + static_cast<long>(start),
                                  tokens.begin() + static_cast<long>(end));
    return text::join(text::normalize_tokens(span));
}

static bool compute_relation(const kb::KnowledgeBase& kb,
                             const std::vector<LinkedMention>& mentions) {
    for (size_t i = 0; i < mentions.size(); ++i) {
        if (mentions[i].entity_id.empty()) continue;
        for (size_t j = i + 1; j < mentions.size(); ++j) {
            if (mentions[j].entity_id.empty()) continue;
            if (kb.related(mentions[i].entity_id, mentions[j].entity_id)) return true;
        }
    }
    return false;
}

static Hypothesis from_ner(const ner::Hypothesis& h, int index) {
    Hypothesis out;
    out.ner_index = index;
    out.labels = h.labels;
    out.p_seq = h.p_seq;
    for (const auto& m : h.mentions) {
        LinkedMention lm;
        lm.start = m.start;
        lm.end = m.end;
        lm.type = m.type;
        lm.surface = m.surface;
        lm.p_men = m.p_men;
        out.mentions.push_back(std::move(lm));
    }
    return out;
}

PreparedExample prepare_example(const ner::Model& ner_model, const retrieval::InvertedIndex& index,
                                const kb::KnowledgeBase& kb, const bio::Utterance& utt,
                                const ElConfig& cfg, const retrieval::Weights& weights) {
    PreparedExample ex;
    ex.tokens = utt.tokens;
    ex.beam = ner_model.decode(utt.tokens, ner_model.config().beam);
    for (const auto& h : ex.beam) {
        CandidateLists lists;
        for (const auto& m : h.mentions) {
            if (m.surface.empty()) {
                lists.push_back({});
                continue;
            }
            lists.push_back(retrieval::retrieve(index, kb, m.surface, {m.type}, cfg.candidates,
                                                weights));
        }
        ex.beam_candidates.push_back(std::move(lists));
    }

    // gold hypothesis from the annotated labels and links
    const auto lat = ner_model.lattice(utt.tokens);
    std::vector<int> gold_ids;
    for (const auto& lab : utt.labels) gold_ids.push_back(ner_model.labels().id(lab));
    ex.gold.ner_index = -1;
    ex.gold.labels = utt.labels;
    ex.gold.p_seq = crf::p_seq(lat, gold_ids);
    ex.gold_retrievable = true;
    for (const auto& m : bio::decode_mentions(utt.labels)) {
        LinkedMention lm;
        lm.start = m.start;
        lm.end = m.end;
        lm.type = m.type;
        lm.surface = span_surface(utt.tokens, m.start, m.end);
        lm.p_men = crf::mention_mass(lat, m.start, m.end, ner_model.labels().b_id(m.type),
                                     ner_model.labels().i_id(m.type));
        for (const auto& l : utt.links)
            if (l.start == m.start && l.end == m.end && l.type == m.type) {
                lm.entity_id = l.entity_id;
                break;
            }
        if (!lm.entity_id.empty()) {
            const auto& e = kb.entity(lm.entity_id);
            lm.canonical = e.canonical_name;
            lm.popularity = e.popularity;
            bool found = false;
            if (!lm.surface.empty())
                for (const auto& c :
                     retrieval::retrieve(index, kb, lm.surface, {m.type}, cfg.candidates, weights))
                    if (c.entity_id == lm.entity_id) {
                        found = true;
                        break;
                    }
            if (!found) ex.gold_retrievable = false;
        }
        ex.gold.mentions.push_back(std::move(lm));
    }
    ex.gold.relation_exists = compute_relation(kb, ex.gold.mentions);
    return ex;
}

// assignment counts per hypothesis; unlinked mention slots count as one way
static std::vector<uint64_t> assignment_counts(const PreparedExample& ex) {
    std::vector<uint64_t> counts(ex.beam.size(), 1);
    for (size_t h = 0; h < ex.beam.size(); ++h)
        for (const auto& lists : ex.beam_candidates[h])
            counts[h] *= std::max<uint64_t>(1, lists.size());
    return counts;
}

static Hypothesis assemble(const kb::KnowledgeBase& kb, const PreparedExample& ex, size_t h,
                           const std::vector<size_t>& choice) {
    Hypothesis hyp = from_ner(ex.beam[h], static_cast<int>(h));
    for (size_t j = 0; j < hyp.mentions.size(); ++j) {
        const auto& cands = ex.beam_candidates[h][j];
        if (cands.empty()) continue;
        const auto& c = cands[choice[j]];
        hyp.mentions[j].entity_id = c.entity_id;
        hyp.mentions[j].canonical = kb.entity(c.entity_id).canonical_name;
        hyp.mentions[j].popularity = c.popularity;
    }
    hyp.relation_exists = compute_relation(kb, hyp.mentions);
    return hyp;
}

std::vector<Hypothesis> sample_negatives(const kb::KnowledgeBase& kb, const PreparedExample& ex,
                                         size_t n, Rng& rng) {
    const auto counts = assignment_counts(ex);
    uint64_t total = 0;
    for (uint64_t c : counts) total += c;
    if (total == 0) return {};
    std::vector<Hypothesis> out;
    const size_t max_attempts = 64 * std::max<size_t>(1, n);
    size_t attempts = 0;
    while (out.size() < n && attempts < max_attempts) {
        ++attempts;
        uint64_t r = rng.next_u64() % total;
        size_t h = 0;
        while (r >= counts[h]) {
            r -= counts[h];
            ++h;
        }
        // mixed-radix decode of the per-mention candidate choice
        std::vector<size_t> choice(ex.beam_candidates[h].size(), 0);
        for (size_t j = 0; j < choice.size(); ++j) {
            const uint64_t base = std::max<uint64_t>(1, ex.beam_candidates[h][j].size());
            choice[j] = static_cast<size_t>(r % base);
            r /= base;
        }
        Hypothesis hyp = assemble(kb, ex, h, choice);
        if (hyp.identical(ex.gold)) continue;  // gold never sampled
        out.push_back(std::move(hyp));
    }
    return out;
}

// ---- training ---------------------------------------------------------------

static Vocab build_char_vocab(const kb::KnowledgeBase& kb,
                              const std::vector<bio::Utterance>& corpus) {
    Vocab v(true);
    for (const auto& e : kb.entities()) {
        for (const auto& ch : text::char_split(e.canonical_name)) v.add(ch);
        for (const auto& a : e.aliases)
            for (const auto& ch : text::char_split(a)) v.add(ch);
    }
    for (const auto& u : corpus)
        for (const auto& t : u.tokens)
            for (const auto& ch : text::char_split(text::normalize_token(t))) v.add(ch);
    return v;
}

Model train(const ner::Model& ner_model, const retrieval::InvertedIndex& index,
            const kb::KnowledgeBase& kb, const std::vector<bio::Utterance>& corpus,
            const ElConfig& cfg, const retrieval::Weights& weights, TrainStats* stats) {
    if (corpus.empty()) fail("train_el: empty corpus");
    Model model(ner_model.labels(), build_char_vocab(kb, corpus), ner_model.word_vocab(),
                ner_model.word_table(), cfg);
    double pop_scale = 1.0;
    for (const auto& e : kb.entities()) pop_scale = std::max(pop_scale, std::log1p(e.popularity));
    model.set_popularity_scale(pop_scale);

    std::vector<PreparedExample> examples;
    size_t skipped = 0;
    for (const auto& u : corpus) {
        if (u.tokens.empty()) continue;
        PreparedExample ex = prepare_example(ner_model, index, kb, u, cfg, weights);
        if (!ex.gold_retrievable) {
            ++skipped;
            continue;
        }
        examples.push_back(std::move(ex));
    }
    if (stats) {
        stats->skipped_unretrievable = skipped;
        stats->used_examples = examples.size();
    }
    if (examples.empty()) fail("train_el: no usable examples (gold entities unretrievable)");

    nn::AdamState adam;
    adam.lr = cfg.lr;
    adam.lr_decay = cfg.lr_decay;
    Rng order_rng(cfg.seed ^ 0xabcddcbaULL);
    Rng neg_rng(cfg.seed ^ 0x1234fedcULL);
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t counted = 0, done = 0;
        while (done < order.size()) {
            const size_t batch = std::min(cfg.batch_size, order.size() - done);
            model.params().zero_grads();
            nn::Graph g(true);
            Model::ScoreContext ctx{&g, {}, {}};
            std::vector<nn::Var> terms;
            for (size_t b = 0; b < batch; ++b) {
                const auto& ex = examples[order[done + b]];
                auto negs = sample_negatives(kb, ex, cfg.negatives, neg_rng);
                if (negs.empty()) continue;
                nn::Var s_star = model.score(ctx, ex.gold, ex.tokens);
                std::vector<nn::Var> hinges;
                for (const auto& neg : negs) {
                    const double margin =
                        adaptive_margin(neg, ex.gold, cfg.margin_link, cfg.margin_ner);
                    nn::Var s_neg = model.score(ctx, neg, ex.tokens);
                    hinges.push_back(g.relu(g.add_scalar(g.sub(s_neg, s_star), margin)));
                }
                nn::Var ex_loss =
                    g.scale(g.sum(g.concat(hinges)), 1.0 / static_cast<double>(hinges.size()));
                terms.push_back(ex_loss);
                ++counted;
            }
            done += batch;
            if (terms.empty()) continue;
            nn::Var loss =
                g.scale(g.sum(g.concat(terms)), 1.0 / static_cast<double>(terms.size()));
            g.backward(loss);
            adam.step(model.params());
            epoch_loss += loss->val.v[0] * static_cast<double>(terms.size());
        }
        adam.end_epoch();
        if (stats)
            stats->epoch_loss.push_back(counted ? epoch_loss / static_cast<double>(counted) : 0.0);
    }
    return model;
}

// ---- reranking --------------------------------------------------------------

std::vector<RankedHypothesis> rerank(const ner::Model& ner_model, Model& el_model,
                                     const retrieval::InvertedIndex& index,
                                     const kb::KnowledgeBase& kb,
                                     const std::vector<std::string>& tokens,
                                     const retrieval::Weights& weights) {
    const ElConfig& cfg = el_model.config();
    bio::Utterance utt;
    utt.tokens = tokens;
    utt.labels.assign(tokens.size(), "O");
    PreparedExample ex = prepare_example(ner_model, index, kb, utt, cfg, weights);

    nn::Graph g(false);
    Model::ScoreContext ctx{&g, {}, {}};
    std::vector<RankedHypothesis> ranked;
    for (size_t h = 0; h < ex.beam.size(); ++h) {
        const auto& lists = ex.beam_candidates[h];
        std::vector<size_t> choice(lists.size(), 0);  // retrieval top-1 start
        Hypothesis hyp = assemble(kb, ex, h, choice);
        double best_score = el_model.score(ctx, hyp, tokens)->val.v[0];
        // one round-robin pass: per-mention argmax with the rest held fixed
        for (size_t j = 0; j < lists.size(); ++j) {
            if (lists[j].size() <= 1) continue;
            size_t best_c = choice[j];
            for (size_t c = 0; c < lists[j].size(); ++c) {
                if (c == choice[j]) continue;
                std::vector<size_t> trial = choice;
                trial[j] = c;
                Hypothesis cand = assemble(kb, ex, h, trial);
                const double s = el_model.score(ctx, cand, tokens)->val.v[0];
                if (s > best_score) {
                    best_score = s;
                    best_c = c;
                }
            }
            choice[j] = best_c;
        }
        Hypothesis final_hyp = assemble(kb, ex, h, choice);
        RankedHypothesis rh;
        rh.ner = ex.beam[h];
        rh.ner_index = static_cast<int>(h);
        rh.links = final_hyp.mentions;
        rh.el_score = el_model.score(ctx, final_hyp, tokens)->val.v[0];
        for (const auto& m : final_hyp.mentions)
            rh.link_cosines.push_back(
                m.entity_id.empty() || m.surface.empty() || m.canonical.empty()
                    ? 0.0
                    : el_model.name_cosine(m.surface, m.canonical));
        ranked.push_back(std::move(rh));
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedHypothesis& a, const RankedHypothesis& b) {
        if (a.el_score != b.el_score) return a.el_score > b.el_score;
        return a.ner_index < b.ner_index;
    });
    return ranked;
}

}  // namespace neu::el

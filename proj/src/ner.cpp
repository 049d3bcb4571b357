#include "neu/ner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "neu/text.hpp"

namespace neu::ner {

using nlohmann::json;

static constexpr double kNegInf = -std::numeric_limits<double>::infinity();
static constexpr const char* kVersion = "neu.ner.v1";

Gazetteer::Gazetteer(const kb::KnowledgeBase& kb, const bio::LabelSet& labels) {
    num_types_ = labels.num_types();
    const auto& types = labels.types();
    for (const auto& e : kb.entities()) {
        auto it = std::lower_bound(types.begin(), types.end(), e.entity_type);
        if (it == types.end() || *it != e.entity_type) continue;
        const size_t ti = static_cast<size_t>(it - types.begin());
        auto ingest = [&](const std::string& surface) {
            auto toks = text::normalize_tokens(surface);
            if (toks.empty()) return;
            by_first_token_[toks[0]].push_back({std::move(toks), ti});
        };
        ingest(e.canonical_name);
        for (const auto& a : e.aliases) ingest(a);
    }
}

std::vector<double> Gazetteer::featurize(const std::vector<std::string>& tokens) const {
    std::vector<std::string> toks(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) toks[i] = text::normalize_token(tokens[i]);
    const size_t T = toks.size(), D = feature_dim();
    std::vector<double> out(T * D, 0.0);
    for (size_t t = 0; t < T; ++t) {
        auto it = by_first_token_.find(toks[t]);
        if (it == by_first_token_.end()) continue;
        // longest match per type starting here
        std::map<size_t, size_t> best_len;
        for (const auto& s : it->second) {
            if (s.tokens.size() > T - t) continue;
            bool match = true;
            for (size_t j = 1; j < s.tokens.size(); ++j)
                if (s.tokens[j] != toks[t + j]) {
                    match = false;
                    break;
                }
            if (!match) continue;
            auto& len = best_len[s.type_index];
            len = std::max(len, s.tokens.size());
        }
        for (const auto& [ti, len] : best_len) {
            for (size_t j = t; j < t + len; ++j) out[j * D + ti * 3 + 0] = 1.0;
            out[t * D + ti * 3 + 1] = 1.0;
            out[(t + len - 1) * D + ti * 3 + 2] = 1.0;
        }
    }
    return out;
}

Model::Model(const kb::KnowledgeBase& kb, const bio::LabelSet& labels, Vocab word_vocab,
             Vocab char_vocab, const NerConfig& cfg)
    : labels_(labels),
      word_vocab_(std::move(word_vocab)),
      char_vocab_(std::move(char_vocab)),
      cfg_(cfg),
      gazetteer_(kb, labels),
      transition_mask_(labels.transition_mask()),
      params_(kVersion) {
    Rng rng(cfg.seed);
    params_.add_init("word.table", {word_vocab_.size(), cfg.word_dim}, rng);
    params_.add_init("char.table", {char_vocab_.size(), cfg.char_dim}, rng);
    nn::bilstm_init(params_, "char.lstm", cfg.char_dim, cfg.char_hidden, rng);
    params_.add_init("gaz.W", {cfg.gazetteer_dim, gazetteer_.feature_dim()}, rng);
    params_.add("gaz.b", {cfg.gazetteer_dim});
    const size_t token_dim = 2 * cfg.char_hidden + cfg.word_dim + cfg.gazetteer_dim;
    nn::bilstm_init(params_, "word.lstm", token_dim, cfg.hidden, rng);
    params_.add_init("emit.W", {labels_.size(), 2 * cfg.hidden}, rng);
    params_.add("emit.b", {labels_.size()});
    const size_t S = labels_.size() + 2;
    params_.add("crf.trans", {S, S});
    if (!cfg.word_vectors.empty())
        load_word_vectors(cfg.word_vectors, word_vocab_, params_.get("word.table"));
}

std::vector<int> Model::word_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(word_vocab_.id(text::normalize_token(t)));
    return ids;
}

std::vector<nn::Var> Model::emission_rows(nn::Graph& g, const std::vector<std::string>& tokens,
                                          bool train_mode, Rng* dropout_rng) {
    if (tokens.empty()) fail("ner: empty utterance");
    auto& ps = params_;
    nn::Tensor& word_table = ps.get("word.table");
    nn::Tensor& char_table = ps.get("char.table");
    const auto wids = word_ids(tokens);
    const auto gaz = gazetteer_.featurize(tokens);
    const size_t gdim = gazetteer_.feature_dim();

    std::vector<nn::Var> inputs(tokens.size());
    for (size_t t = 0; t < tokens.size(); ++t) {
        std::vector<int> cids;
        for (const auto& ch : text::char_split(text::normalize_token(tokens[t])))
            cids.push_back(char_vocab_.id(ch));
        if (cids.empty()) cids.push_back(char_vocab_.unk());
        std::vector<nn::Var> char_rows;
        char_rows.reserve(cids.size());
        nn::Var char_mat = g.embed(char_table, cids);
        for (size_t i = 0; i < cids.size(); ++i)
            char_rows.push_back(g.slice(char_mat, i * cfg_.char_dim, cfg_.char_dim));
        auto char_states = nn::bilstm_run(g, ps, "char.lstm", char_rows);
        // final forward state + final backward state
        nn::Var char_feat =
            g.concat({g.slice(char_states.back(), 0, cfg_.char_hidden),
                      g.slice(char_states.front(), cfg_.char_hidden, cfg_.char_hidden)});
        nn::Var word_emb = g.embed(word_table, {wids[t]});
        nn::Tensor gc({gdim});
        std::copy_n(gaz.begin() + t * gdim, gdim, gc.v.begin());
        nn::Var gaz_proj = g.affine(ps.get("gaz.W"), &ps.get("gaz.b"), g.input(std::move(gc)));
        nn::Var x = g.concat({char_feat, word_emb, gaz_proj});
        if (train_mode && cfg_.dropout > 0.0) x = g.dropout(x, cfg_.dropout, *dropout_rng);
        inputs[t] = x;
    }
    auto states = nn::bilstm_run(g, ps, "word.lstm", inputs);
    std::vector<nn::Var> rows(tokens.size());
    for (size_t t = 0; t < tokens.size(); ++t) {
        nn::Var h = states[t];
        if (train_mode && cfg_.dropout > 0.0) h = g.dropout(h, cfg_.dropout, *dropout_rng);
        rows[t] = g.affine(ps.get("emit.W"), &ps.get("emit.b"), h);
    }
    return rows;
}

crf::Lattice Model::lattice(const std::vector<std::string>& tokens) const {
    nn::Graph g(false);
    auto rows = const_cast<Model*>(this)->emission_rows(g, tokens, false, nullptr);
    crf::Lattice lat(tokens.size(), labels_.size());
    for (size_t t = 0; t < tokens.size(); ++t)
        std::copy(rows[t]->val.v.begin(), rows[t]->val.v.end(), lat.emissions.begin() + t * labels_.size());
    const nn::Tensor& trans = params_.get("crf.trans");
    for (size_t i = 0; i < trans.size(); ++i)
        lat.transitions[i] = transition_mask_[i] ? trans.v[i] : kNegInf;
    return lat;
}

double Model::sequence_score(const std::vector<std::string>& tokens,
                             const std::vector<int>& label_ids) const {
    return crf::score(lattice(tokens), label_ids);
}

double Model::log_partition(const std::vector<std::string>& tokens) const {
    return crf::log_partition(lattice(tokens));
}

double Model::p_seq(const std::vector<std::string>& tokens,
                    const std::vector<int>& label_ids) const {
    return crf::p_seq(lattice(tokens), label_ids);
}

double Model::mention_confidence(const std::vector<std::string>& tokens, size_t start, size_t end,
                                 const std::string& type) const {
    const auto lat = lattice(tokens);
    return crf::mention_mass(lat, start, end, labels_.b_id(type), labels_.i_id(type));
}

std::vector<Hypothesis> Model::decode_lattice(const crf::Lattice& lat,
                                              const std::vector<std::string>& tokens,
                                              size_t beam) const {
    const double log_z = crf::log_partition(lat);
    auto seqs = crf::beam_topk(lat, beam);
    std::vector<Hypothesis> out;
    out.reserve(seqs.size());
    std::map<std::tuple<size_t, size_t, std::string>, double> p_men_cache;
    for (auto& s : seqs) {
        Hypothesis h;
        h.label_ids = std::move(s.labels);
        h.score = s.score;
        h.p_seq = std::exp(s.score - log_z);
        for (int id : h.label_ids) h.labels.push_back(labels_.name(id));
        for (const auto& m : bio::decode_mentions(labels_, h.label_ids)) {
            Mention men;
            men.start = m.start;
            men.end = m.end;
            men.type = m.type;
            std::vector<std::string> span(tokens.begin() + static_cast<long>(m.start),
                                          tokens.begin() + static_cast<long>(m.end));
            men.surface = text::join(text::normalize_tokens(span));
            auto key = std::make_tuple(m.start, m.end, m.type);
            auto it = p_men_cache.find(key);
            if (it == p_men_cache.end()) {
                const double mass =
                    crf::mention_mass(lat, m.start, m.end, labels_.b_id(m.type), labels_.i_id(m.type));
                it = p_men_cache.emplace(key, mass).first;
            }
            men.p_men = it->second;
            h.mentions.push_back(std::move(men));
        }
        out.push_back(std::move(h));
    }
    return out;
}

std::vector<Hypothesis> Model::decode(const std::vector<std::string>& tokens, size_t beam) const {
    return decode_lattice(lattice(tokens), tokens, beam);
}

nn::Var Model::build_nll(nn::Graph& g, const std::vector<std::string>& tokens,
                         const std::vector<int>& gold, double scale, bool train_mode,
                         Rng* dropout_rng) {
    auto rows = emission_rows(g, tokens, train_mode, dropout_rng);
    nn::Tensor& trans = params_.get("crf.trans");
    const size_t T = tokens.size(), L = labels_.size(), S = L + 2;

    crf::Lattice lat(T, L);
    for (size_t t = 0; t < T; ++t)
        std::copy(rows[t]->val.v.begin(), rows[t]->val.v.end(), lat.emissions.begin() + t * L);
    for (size_t i = 0; i < trans.size(); ++i)
        lat.transitions[i] = transition_mask_[i] ? trans.v[i] : kNegInf;

    std::vector<double> emis_grad(T * L, 0.0), trans_grad(S * S, 0.0);
    const double nll = crf::nll_grad(lat, gold, 1.0, emis_grad, trans_grad);

    nn::Tensor* trans_p = trans.has_grad() ? &trans : nullptr;
    const auto* mask = &transition_mask_;
    return g.custom(nn::Tensor({1}, {scale * nll}), rows,
                    [rows, emis_grad, trans_grad, trans_p, mask, scale, T, L, S](nn::Node& self) {
                        const double go = self.grad[0] * scale;
                        for (size_t t = 0; t < T; ++t)
                            for (size_t k = 0; k < L; ++k)
                                if (emis_grad[t * L + k] != 0.0)
                                    rows[t]->add_grad(k, go * emis_grad[t * L + k]);
                        if (trans_p)
                            for (size_t i = 0; i < S * S; ++i)
                                if ((*mask)[i] && trans_grad[i] != 0.0)
                                    trans_p->g[i] += go * trans_grad[i];
                    });
}

void Model::save(const std::string& path, long step) const {
    json wv = word_vocab_.items();
    json cv = char_vocab_.items();
    json types = labels_.types();
    json dims;
    dims["word_dim"] = cfg_.word_dim;
    dims["char_dim"] = cfg_.char_dim;
    dims["char_hidden"] = cfg_.char_hidden;
    dims["hidden"] = cfg_.hidden;
    dims["gazetteer_dim"] = cfg_.gazetteer_dim;
    std::unordered_map<std::string, std::string> meta;
    meta["word_vocab"] = wv.dump();
    meta["char_vocab"] = cv.dump();
    meta["types"] = types.dump();
    meta["dims"] = dims.dump();
    nn::save_checkpoint(path, params_, step, meta);
}

Model Model::load(const std::string& path, const kb::KnowledgeBase& kb) {
    // read meta first to rebuild shapes, then load tensors for real
    std::ifstream is(path);
    if (!is) fail("cannot open NER checkpoint '", path, "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("NER checkpoint '", path, "' is not valid JSON: ", e.what());
    }
    if (j.value("version", std::string()) != kVersion)
        fail("NER checkpoint '", path, "' has version '", j.value("version", std::string()),
             "', expected '", kVersion, "'");
    const auto& meta = j.at("meta");
    auto wv = json::parse(meta.at("word_vocab").get<std::string>())
                  .get<std::vector<std::string>>();
    auto cvj = json::parse(meta.at("char_vocab").get<std::string>())
                   .get<std::vector<std::string>>();
    auto types_v =
        json::parse(meta.at("types").get<std::string>()).get<std::vector<std::string>>();
    auto dims = json::parse(meta.at("dims").get<std::string>());

    NerConfig cfg;
    cfg.word_dim = dims.at("word_dim").get<size_t>();
    cfg.char_dim = dims.at("char_dim").get<size_t>();
    cfg.char_hidden = dims.at("char_hidden").get<size_t>();
    cfg.hidden = dims.at("hidden").get<size_t>();
    cfg.gazetteer_dim = dims.at("gazetteer_dim").get<size_t>();

    std::set<std::string> types(types_v.begin(), types_v.end());
    Model model(kb, bio::LabelSet(types), Vocab::from_items(wv, true),
                Vocab::from_items(cvj, true), cfg);
    nn::load_checkpoint(path, model.params_);
    return model;
}

static Vocab build_word_vocab(const std::vector<bio::Utterance>& corpus) {
    Vocab v(true);
    for (const auto& u : corpus)
        for (const auto& t : u.tokens) v.add(text::normalize_token(t));
    return v;
}

static Vocab build_char_vocab(const std::vector<bio::Utterance>& corpus,
                              const kb::KnowledgeBase& kb) {
    Vocab v(true);
    for (const auto& u : corpus)
        for (const auto& t : u.tokens)
            for (const auto& ch : text::char_split(text::normalize_token(t))) v.add(ch);
    for (const auto& e : kb.entities()) {
        for (const auto& ch : text::char_split(e.canonical_name)) v.add(ch);
        for (const auto& a : e.aliases)
            for (const auto& ch : text::char_split(a)) v.add(ch);
    }
    return v;
}

Model train(const kb::KnowledgeBase& kb, const std::vector<bio::Utterance>& corpus,
            const NerConfig& cfg, TrainStats* stats) {
    if (corpus.empty()) fail("train_ner: empty corpus");
    bio::LabelSet labels(kb.type_inventory());
    for (const auto& u : corpus) {
        if (!bio::bio_valid(u.labels)) fail("train_ner: corpus labels are not BIO-valid");
        for (const auto& lab : u.labels) labels.id(lab);  // unknown label -> error
    }
    Model model(kb, labels, build_word_vocab(corpus), build_char_vocab(corpus, kb), cfg);

    std::vector<std::vector<int>> gold(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i)
        for (const auto& lab : corpus[i].labels) gold[i].push_back(labels.id(lab));

    nn::AdamState adam;
    adam.lr = cfg.lr;
    adam.lr_decay = cfg.lr_decay;
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng dropout_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    long steps = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_nll = 0.0;
        size_t done = 0;
        while (done < order.size()) {
            const size_t batch = std::min(cfg.batch_size, order.size() - done);
            model.params().zero_grads();
            nn::Graph g(true);
            std::vector<nn::Var> losses;
            losses.reserve(batch);
            for (size_t b = 0; b < batch; ++b) {
                const auto& u = corpus[order[done + b]];
                losses.push_back(model.build_nll(g, u.tokens, gold[order[done + b]],
                                                 1.0 / static_cast<double>(batch), true,
                                                 &dropout_rng));
            }
            nn::Var loss = losses.size() == 1 ? losses[0] : g.sum(g.concat(losses));
            g.backward(loss);
            adam.step(model.params());
            if (cfg.decay_per_step) adam.end_epoch();
            epoch_nll += loss->val.v[0] * static_cast<double>(batch);
            done += batch;
            ++steps;
        }
        if (!cfg.decay_per_step) adam.end_epoch();
        if (stats) stats->epoch_loss.push_back(epoch_nll / static_cast<double>(corpus.size()));
    }
    if (stats) stats->steps = steps;
    return model;
}

void load_word_vectors(const std::string& path, const Vocab& vocab, nn::Tensor& table) {
    std::ifstream is(path);
    if (!is) fail("cannot open word vectors '", path, "'");
    const size_t dim = table.shape.at(1);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (!vocab.contains(word)) continue;
        const size_t row = static_cast<size_t>(vocab.id(word));
        std::vector<double> vals;
        double x;
        while (ls >> x) vals.push_back(x);
        if (vals.size() != dim)
            fail(path, ":", lineno, ": expected ", dim, " values, got ", vals.size());
        std::copy(vals.begin(), vals.end(), table.v.begin() + row * dim);
    }
}

}  // namespace neu::ner

#include "neu/config.hpp"

#include <fstream>
#include <set>

namespace neu::config {

using nlohmann::json;

namespace {

// strict object reader: every key must be consumed exactly once
class Strict {
public:
    Strict(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) fail("config: ", where_, " must be a JSON object");
    }
    ~Strict() = default;

    template <typename T>
    void get(const char* key, T& out) {
        if (j_.contains(key)) {
            try {
                out = j_.at(key).get<T>();
            } catch (const json::exception& e) {
                fail("config: bad value for ", where_, ".", key, ": ", e.what());
            }
        }
        seen_.insert(key);
    }

    const json* section(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (auto& [key, _] : j_.items())
            if (!seen_.count(key)) fail("config: unknown key '", where_, ".", key, "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void read_paths(const json& j, Paths& p) {
    Strict s(j, "paths");
    s.get("out_dir", p.out_dir);
    s.get("kb", p.kb);
    s.get("synonyms", p.synonyms);
    s.get("corrections", p.corrections);
    s.get("train", p.train);
    s.get("dev", p.dev);
    s.get("test", p.test);
    s.get("index", p.index);
    s.get("ner_model", p.ner_model);
    s.get("el_model", p.el_model);
    s.get("predictions", p.predictions);
    s.get("report", p.report);
    s.finish();
}

void read_ner(const json& j, ner::NerConfig& c) {
    Strict s(j, "ner");
    s.get("word_dim", c.word_dim);
    s.get("char_dim", c.char_dim);
    s.get("char_hidden", c.char_hidden);
    s.get("hidden", c.hidden);
    s.get("gazetteer_dim", c.gazetteer_dim);
    s.get("dropout", c.dropout);
    s.get("lr", c.lr);
    s.get("lr_decay", c.lr_decay);
    s.get("decay_per_step", c.decay_per_step);
    s.get("batch_size", c.batch_size);
    s.get("epochs", c.epochs);
    s.get("beam", c.beam);
    s.get("seed", c.seed);
    s.get("word_vectors", c.word_vectors);
    s.finish();
}

void read_el(const json& j, el::ElConfig& c) {
    Strict s(j, "el");
    s.get("char_dim", c.char_dim);
    s.get("conv_kernels", c.conv.kernels);
    s.get("conv_widths", c.conv.widths);
    s.get("sim_hidden", c.sim_hidden);
    s.get("sim_out", c.sim_out);
    s.get("score_hidden", c.score_hidden);
    s.get("sim_mode", c.sim_mode);
    s.get("aggregation", c.aggregation);
    s.get("use_relation", c.use_relation);
    s.get("margin_link", c.margin_link);
    s.get("margin_ner", c.margin_ner);
    s.get("negatives", c.negatives);
    s.get("candidates", c.candidates);
    s.get("pad_slots", c.pad_slots);
    s.get("lr", c.lr);
    s.get("lr_decay", c.lr_decay);
    s.get("batch_size", c.batch_size);
    s.get("epochs", c.epochs);
    s.get("seed", c.seed);
    s.finish();
}

void read_retrieval(const json& j, retrieval::Weights& w) {
    Strict s(j, "retrieval");
    s.get("w_tfidf", w.w_tfidf);
    s.get("w_pop", w.w_pop);
    s.get("synonym_weight", w.synonym_weight);
    s.get("correction_confidence", w.correction_confidence);
    s.finish();
}

void read_noise(const json& j, datagen::NoiseSpec& n) {
    Strict s(j, "generate.noise");
    s.get("char_sub", n.char_sub);
    s.get("transpose", n.transpose);
    s.get("truncate", n.truncate);
    s.get("alias", n.alias);
    s.get("homophone", n.homophone);
    s.finish();
    for (double p : {n.char_sub, n.transpose, n.truncate, n.alias, n.homophone})
        if (p < 0.0 || p > 1.0) fail("config: noise probabilities must lie in [0, 1]");
}

void read_generate(const json& j, datagen::GenConfig& g) {
    Strict s(j, "generate");
    s.get("n", g.n);
    s.get("seed", g.seed);
    s.get("noisy_fraction", g.noisy_fraction);
    s.get("split", g.split);
    s.get("persons", g.persons);
    s.get("artists", g.artists);
    s.get("songs", g.songs);
    s.get("movies", g.movies);
    s.get("shows", g.shows);
    s.get("leagues", g.leagues);
    s.get("teams_per_league", g.teams_per_league);
    s.get("ambiguous_movies", g.ambiguous_movies);
    s.get("sibling_artists", g.sibling_artists);
    s.get("entity_split", g.entity_split);
    if (const json* n = s.section("noise")) read_noise(*n, g.noise);
    s.finish();
}

}  // namespace

PipelineConfig from_json(const json& j) {
    PipelineConfig cfg;
    Strict s(j, "<root>");
    s.get("seed", cfg.seed);
    if (const json* p = s.section("paths")) read_paths(*p, cfg.paths);
    if (const json* p = s.section("ner")) read_ner(*p, cfg.ner);
    if (const json* p = s.section("el")) read_el(*p, cfg.el);
    if (const json* p = s.section("retrieval")) read_retrieval(*p, cfg.retrieval);
    if (const json* p = s.section("generate")) read_generate(*p, cfg.generate);
    s.finish();
    return cfg;
}

PipelineConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open config '", path, "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("config '", path, "' is not valid JSON: ", e.what());
    }
    return from_json(j);
}

json ner_to_json(const ner::NerConfig& c) {
    json j;
    j["word_dim"] = c.word_dim;
    j["char_dim"] = c.char_dim;
    j["char_hidden"] = c.char_hidden;
    j["hidden"] = c.hidden;
    j["gazetteer_dim"] = c.gazetteer_dim;
    j["dropout"] = c.dropout;
    j["lr"] = c.lr;
    j["lr_decay"] = c.lr_decay;
    j["decay_per_step"] = c.decay_per_step;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["beam"] = c.beam;
    j["seed"] = c.seed;
    j["word_vectors"] = c.word_vectors;
    return j;
}

ner::NerConfig ner_from_json(const json& j) {
    ner::NerConfig c;
    read_ner(j, c);
    return c;
}

json el_to_json(const el::ElConfig& c) {
    json j;
    j["char_dim"] = c.char_dim;
    j["conv_kernels"] = c.conv.kernels;
    j["conv_widths"] = c.conv.widths;
    j["sim_hidden"] = c.sim_hidden;
    j["sim_out"] = c.sim_out;
    j["score_hidden"] = c.score_hidden;
    j["sim_mode"] = c.sim_mode;
    j["aggregation"] = c.aggregation;
    j["use_relation"] = c.use_relation;
    j["margin_link"] = c.margin_link;
    j["margin_ner"] = c.margin_ner;
    j["negatives"] = c.negatives;
    j["candidates"] = c.candidates;
    j["pad_slots"] = c.pad_slots;
    j["lr"] = c.lr;
    j["lr_decay"] = c.lr_decay;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    return j;
}

el::ElConfig el_from_json(const json& j) {
    el::ElConfig c;
    read_el(j, c);
    return c;
}

json to_json(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    json p;
    p["out_dir"] = cfg.paths.out_dir;
    p["kb"] = cfg.paths.kb;
    p["synonyms"] = cfg.paths.synonyms;
    p["corrections"] = cfg.paths.corrections;
    p["train"] = cfg.paths.train;
    p["dev"] = cfg.paths.dev;
    p["test"] = cfg.paths.test;
    p["index"] = cfg.paths.index;
    p["ner_model"] = cfg.paths.ner_model;
    p["el_model"] = cfg.paths.el_model;
    p["predictions"] = cfg.paths.predictions;
    p["report"] = cfg.paths.report;
    j["paths"] = std::move(p);
    j["ner"] = ner_to_json(cfg.ner);
    j["el"] = el_to_json(cfg.el);
    json r;
    r["w_tfidf"] = cfg.retrieval.w_tfidf;
    r["w_pop"] = cfg.retrieval.w_pop;
    r["synonym_weight"] = cfg.retrieval.synonym_weight;
    r["correction_confidence"] = cfg.retrieval.correction_confidence;
    j["retrieval"] = std::move(r);
    json g;
    g["n"] = cfg.generate.n;
    g["seed"] = cfg.generate.seed;
    g["noisy_fraction"] = cfg.generate.noisy_fraction;
    g["split"] = cfg.generate.split;
    g["persons"] = cfg.generate.persons;
    g["artists"] = cfg.generate.artists;
    g["songs"] = cfg.generate.songs;
    g["movies"] = cfg.generate.movies;
    g["shows"] = cfg.generate.shows;
    g["leagues"] = cfg.generate.leagues;
    g["teams_per_league"] = cfg.generate.teams_per_league;
    g["ambiguous_movies"] = cfg.generate.ambiguous_movies;
    g["sibling_artists"] = cfg.generate.sibling_artists;
    g["entity_split"] = cfg.generate.entity_split;
    json noise;
    noise["char_sub"] = cfg.generate.noise.char_sub;
    noise["transpose"] = cfg.generate.noise.transpose;
    noise["truncate"] = cfg.generate.noise.truncate;
    noise["alias"] = cfg.generate.noise.alias;
    noise["homophone"] = cfg.generate.noise.homophone;
    g["noise"] = std::move(noise);
    j["generate"] = std::move(g);
    return j;
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        fail("override '", assignment, "' must look like section.key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json j = to_json(cfg);
    json* node = &j;
    size_t pos = 0;
    while (true) {
        const size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!node->contains(part)) fail("override: unknown config key '", key, "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    // parse the value with the type of the existing entry
    try {
        if (node->is_string()) *node = value;
        else *node = json::parse(value);
    } catch (const json::exception& e) {
        fail("override: bad value '", value, "' for '", key, "': ", e.what());
    }
    cfg = from_json(j);
}

}  // namespace neu::config

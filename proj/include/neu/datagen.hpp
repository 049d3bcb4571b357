#pragma once

#include <map>
#include <string>
#include <vector>

#include "neu/bio.hpp"
#include "neu/kb.hpp"

namespace neu::datagen {

// per-operation probabilities applied when an utterance is selected for noise
struct NoiseSpec {
    double char_sub = 0.35;
    double transpose = 0.2;
    double truncate = 0.25;
    double alias = 0.35;
    double homophone = 0.3;
};

struct GenConfig {
    size_t n = 2000;
    uint64_t seed = 7;
    double noisy_fraction = 0.3;  // utterances selected for noise ops (and tagged)
    NoiseSpec noise;
    std::vector<double> split{0.8, 0.1, 0.1};  // train/dev/test

    // knowledge-base shape
    size_t persons = 30;
    size_t artists = 30;
    size_t songs = 45;
    size_t movies = 35;
    size_t shows = 25;
    size_t leagues = 3;
    size_t teams_per_league = 6;
    size_t ambiguous_movies = 8;   // movie titles that double as person names
    size_t sibling_artists = 8;    // near-duplicate artist name pairs

    // sample disjoint entity sets for train vs test (entity-separable corpora)
    bool entity_split = false;
};

struct Template {
    std::string domain;
    std::vector<std::string> pattern;  // tokens; "{type}" marks an entity slot
};

// music / movie / person / sports / tv analogs with shared carrier phrases,
// so entity type (not the carrier) decides the domain
std::vector<Template> builtin_templates();

// per-type entity id pools; empty pool for a type present in templates is an error
using EntityPools = std::map<std::string, std::vector<std::string>>;

std::vector<bio::Utterance> generate_corpus(const kb::KnowledgeBase& kb,
                                            const std::vector<Template>& templates,
                                            const NoiseSpec& noise, double noisy_fraction,
                                            size_t n, uint64_t seed,
                                            const EntityPools* pools = nullptr);

struct Generated {
    kb::KnowledgeBase kb;
    std::vector<bio::Utterance> train, dev, test;
};

kb::KnowledgeBase synth_kb(const GenConfig& cfg, Rng& rng);

// KB + corpus splits; with entity_split the test split draws from entities
// never used by train/dev
Generated generate(const GenConfig& cfg);

}  // namespace neu::datagen

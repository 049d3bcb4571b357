#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "neu/datagen.hpp"
#include "neu/el.hpp"
#include "neu/ner.hpp"
#include "neu/retrieval.hpp"

namespace neu::config {

struct Paths {
    std::string out_dir = "out";
    std::string kb = "out/kb.jsonl";
    std::string synonyms = "out/synonyms.jsonl";
    std::string corrections = "out/corrections.jsonl";
    std::string train = "out/train.jsonl";
    std::string dev = "out/dev.jsonl";
    std::string test = "out/test.jsonl";
    std::string index = "out/index.json";
    std::string ner_model = "out/ner.ckpt.json";
    std::string el_model = "out/el.ckpt.json";
    std::string predictions = "out/predictions.jsonl";
    std::string report = "out/report.json";
};

// Defaults mirror the reference hyperparameters (lr 0.001, decay 0.99, LSTM
// hidden 350, batch 256, dropout 0.5, word dim 200, NER char dim 100, EL char
// dim 25, beam 5, c 25, pad 5, margins 0.5/1.0). Unknown keys anywhere in the
// file are rejected.
struct PipelineConfig {
    uint64_t seed = 1;
    Paths paths;
    ner::NerConfig ner;
    el::ElConfig el;
    retrieval::Weights retrieval;
    datagen::GenConfig generate;
};

PipelineConfig load(const std::string& path);
PipelineConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);

nlohmann::json ner_to_json(const ner::NerConfig& cfg);
ner::NerConfig ner_from_json(const nlohmann::json& j);
nlohmann::json el_to_json(const el::ElConfig& cfg);
el::ElConfig el_from_json(const nlohmann::json& j);

// "section.key=value" overrides applied on top of a loaded config
void apply_override(PipelineConfig& cfg, const std::string& assignment);

}  // namespace neu::config

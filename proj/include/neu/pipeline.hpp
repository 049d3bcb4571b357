#pragma once

#include <string>
#include <vector>

#include "neu/config.hpp"
#include "neu/eval.hpp"

namespace neu::pipeline {

// Options beyond the config file that individual commands accept.
struct CommandArgs {
    std::string input;   // annotate: utterances to annotate
    std::string pred;    // eval: predictions file (defaults to paths.predictions)
    std::string gold;    // eval: gold corpus (defaults to paths.test)
    std::string mode;    // featurize: "ner" | "neu"
    std::string subset;  // eval: restrict the report to one tag
    std::string out;     // output override (predictions / features / report)
    size_t alternatives = 3;  // featurize: a
};

int cmd_generate(const config::PipelineConfig& cfg);
int cmd_index(const config::PipelineConfig& cfg);
int cmd_train_ner(const config::PipelineConfig& cfg);
int cmd_train_el(const config::PipelineConfig& cfg);
int cmd_annotate(const config::PipelineConfig& cfg, const CommandArgs& args);
int cmd_eval(const config::PipelineConfig& cfg, const CommandArgs& args);
int cmd_featurize(const config::PipelineConfig& cfg, const CommandArgs& args);

int run(const config::PipelineConfig& cfg, const std::string& command, const CommandArgs& args);

// ---- prediction file schema --------------------------------------------------
// JSON Lines: {utterance, hypotheses: [{labels, p_seq, score, links: [{start,
// end, type, entity_id, canonical_name}]}]} with hypotheses in reranked order.

struct PredHypothesis {
    std::vector<std::string> labels;
    double p_seq = 0.0;
    double score = 0.0;
    std::vector<bio::Link> links;
    std::vector<std::string> canonical_names;  // aligned with links
};

struct Prediction {
    std::string utterance;
    std::vector<PredHypothesis> hypotheses;  // reranked order, best first
};

void save_predictions(const std::vector<Prediction>& preds, const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path);

// Full metric block from a prediction file against gold: top-1 NER F1 (by
// p_seq), reranked NER F1 (file order), oracle top-k F1, strict EL F1.
eval::Report evaluate_predictions(const std::vector<Prediction>& preds,
                                  const std::vector<bio::Utterance>& gold, size_t beam,
                                  const std::vector<std::string>& subset_tags);

std::string report_table(const eval::Report& report);
void save_report(const eval::Report& report, const std::string& path);

}  // namespace neu::pipeline

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neu/pipeline.hpp"

using neu::config::PipelineConfig;

int main(int argc, char** argv) {
    CLI::App app{"neu: joint named entity recognition and linking over noisy utterances"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "pipeline config file (JSON)");
    app.add_option("--seed", seed, "override the global seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--set", overrides, "override a config value, e.g. --set ner.epochs=3");

    neu::pipeline::CommandArgs args;
    std::string subset_out;

    std::string index_kb, index_out;
    auto* generate = app.add_subcommand("generate", "synthesize KB + corpora");
    auto* index = app.add_subcommand("index", "build the retrieval index from the KB");
    index->add_option("--kb", index_kb, "KB file (JSON Lines)");
    index->add_option("--out", index_out, "index output path");
    auto* train_ner = app.add_subcommand("train-ner", "train the biLSTM-CRF tagger");
    auto* train_el = app.add_subcommand("train-el", "train the joint linking reranker");
    auto* annotate = app.add_subcommand("annotate", "run the full pipeline over utterances");
    annotate->add_option("--input", args.input, "utterances (corpus JSONL or plain text)");
    annotate->add_option("--out", args.out, "predictions output path");
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold");
    eval_cmd->add_option("--pred", args.pred, "predictions file (from annotate)");
    eval_cmd->add_option("--gold", args.gold, "gold corpus file");
    eval_cmd->add_option("--subset", args.subset, "restrict the report to one tag");
    eval_cmd->add_option("--out", args.out, "report output path");
    auto* featurize = app.add_subcommand("featurize", "dump f_r / f_u token features");
    featurize->add_option("--mode", args.mode, "ner or neu")->required();
    featurize->add_option("--input", args.input, "utterances to featurize");
    featurize->add_option("--alternatives", args.alternatives, "alternatives per token (a)");
    featurize->add_option("--out", args.out, "features output path");

    CLI11_PARSE(app, argc, argv);

    try {
        // the environment may override the config path only
        if (config_path.empty())
            if (const char* env = std::getenv("NEU_CONFIG")) config_path = env;
        PipelineConfig cfg =
            config_path.empty() ? PipelineConfig{} : neu::config::load(config_path);
        for (const auto& o : overrides) neu::config::apply_override(cfg, o);
        if (seed_set) cfg.seed = seed;
        if (!index_kb.empty()) cfg.paths.kb = index_kb;
        if (!index_out.empty()) cfg.paths.index = index_out;

        std::string command;
        for (auto* sub : {generate, index, train_ner, train_el, annotate, eval_cmd, featurize})
            if (sub->parsed()) command = sub->get_name();
        return neu::pipeline::run(cfg, command, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

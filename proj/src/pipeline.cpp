#include "neu/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neu/datagen.hpp"
#include "neu/downstream.hpp"
#include "neu/el.hpp"
#include "neu/text.hpp"

namespace neu::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

static void require_file(const std::string& path, const std::string& hint) {
    if (!fs::exists(path))
        fail("missing artifact '", path, "'; run `neu ", hint, "` first (or fix the config paths)");
}

int cmd_generate(const config::PipelineConfig& cfg) {
    fs::create_directories(cfg.paths.out_dir);
    datagen::Generated data = datagen::generate(cfg.generate);
    kb::save_kb(data.kb, cfg.paths.kb, cfg.paths.synonyms, cfg.paths.corrections);
    bio::save_corpus(data.train, cfg.paths.train);
    bio::save_corpus(data.dev, cfg.paths.dev);
    bio::save_corpus(data.test, cfg.paths.test);
    size_t noisy = 0, related = 0, mentions = 0, tokens = 0;
    for (const auto* split : {&data.train, &data.dev, &data.test})
        for (const auto& u : *split) {
            noisy += u.has_tag("noisy");
            related += u.has_tag("related");
            mentions += u.links.size();
            tokens += u.tokens.size();
        }
    const size_t total = data.train.size() + data.dev.size() + data.test.size();
    std::cout << "generated " << total << " utterances (" << data.train.size() << "/"
              << data.dev.size() << "/" << data.test.size() << " train/dev/test), "
              << data.kb.size() << " entities, " << noisy << " noisy, " << related
              << " related, avg length "
              << static_cast<double>(tokens) / static_cast<double>(total) << "\n";
    return 0;
}

static kb::KnowledgeBase load_full_kb(const config::PipelineConfig& cfg) {
    require_file(cfg.paths.kb, "generate");
    kb::KnowledgeBase kb = kb::load_kb(cfg.paths.kb);
    if (fs::exists(cfg.paths.synonyms)) kb::load_synonyms(kb, cfg.paths.synonyms);
    if (fs::exists(cfg.paths.corrections)) kb::load_corrections(kb, cfg.paths.corrections);
    return kb;
}

int cmd_index(const config::PipelineConfig& cfg) {
    const kb::KnowledgeBase kb = load_full_kb(cfg);
    retrieval::InvertedIndex index = retrieval::InvertedIndex::build(kb);
    fs::create_directories(fs::path(cfg.paths.index).parent_path());
    index.save(cfg.paths.index);
    std::cout << "indexed " << index.doc_count() << " entities, " << index.term_count()
              << " terms -> " << cfg.paths.index << "\n";
    return 0;
}

int cmd_train_ner(const config::PipelineConfig& cfg) {
    const kb::KnowledgeBase kb = load_full_kb(cfg);
    require_file(cfg.paths.train, "generate");
    const auto corpus = bio::load_corpus(cfg.paths.train);
    ner::NerConfig ncfg = cfg.ner;
    if (ncfg.seed == 1) ncfg.seed = cfg.seed;
    ner::TrainStats stats;
    ner::Model model = ner::train(kb, corpus, ncfg, &stats);
    model.save(cfg.paths.ner_model, stats.steps);
    std::cout << "trained NER on " << corpus.size() << " utterances, " << stats.steps
              << " steps; final epoch NLL "
              << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << " -> "
              << cfg.paths.ner_model << "\n";
    return 0;
}

int cmd_train_el(const config::PipelineConfig& cfg) {
    const kb::KnowledgeBase kb = load_full_kb(cfg);
    require_file(cfg.paths.train, "generate");
    require_file(cfg.paths.index, "index");
    require_file(cfg.paths.ner_model, "train-ner");
    const auto corpus = bio::load_corpus(cfg.paths.train);
    const auto index = retrieval::InvertedIndex::load(cfg.paths.index);
    const ner::Model ner_model = ner::Model::load(cfg.paths.ner_model, kb);
    el::ElConfig ecfg = cfg.el;
    if (ecfg.seed == 1) ecfg.seed = cfg.seed;
    el::TrainStats stats;
    el::Model model = el::train(ner_model, index, kb, corpus, ecfg, cfg.retrieval, &stats);
    model.save(cfg.paths.el_model, static_cast<long>(stats.used_examples));
    std::cout << "trained EL on " << stats.used_examples << " examples ("
              << stats.skipped_unretrievable << " skipped: gold unretrievable); final epoch loss "
              << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << " -> "
              << cfg.paths.el_model << "\n";
    return 0;
}

void save_predictions(const std::vector<Prediction>& preds, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("cannot write predictions '", path, "'");
    for (const auto& p : preds) {
        json j;
        j["utterance"] = p.utterance;
        json hyps = json::array();
        for (const auto& h : p.hypotheses) {
            json hj;
            hj["labels"] = h.labels;
            hj["p_seq"] = h.p_seq;
            hj["score"] = h.score;
            json links = json::array();
            for (size_t i = 0; i < h.links.size(); ++i) {
                json lj;
                lj["start"] = h.links[i].start;
                lj["end"] = h.links[i].end;
                lj["type"] = h.links[i].type;
                lj["entity_id"] = h.links[i].entity_id;
                lj["canonical_name"] = i < h.canonical_names.size() ? h.canonical_names[i] : "";
                links.push_back(std::move(lj));
            }
            hj["links"] = std::move(links);
            hyps.push_back(std::move(hj));
        }
        j["hypotheses"] = std::move(hyps);
        os << j.dump() << "\n";
    }
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open predictions '", path, "'");
    std::vector<Prediction> out;
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
        Prediction p;
        p.utterance = j.at("utterance").get<std::string>();
        for (const auto& hj : j.at("hypotheses")) {
            PredHypothesis h;
            h.labels = hj.at("labels").get<std::vector<std::string>>();
            h.p_seq = hj.at("p_seq").get<double>();
            h.score = hj.at("score").get<double>();
            for (const auto& lj : hj.at("links")) {
                bio::Link l;
                l.start = lj.at("start").get<size_t>();
                l.end = lj.at("end").get<size_t>();
                l.type = lj.at("type").get<std::string>();
                l.entity_id = lj.at("entity_id").get<std::string>();
                h.links.push_back(std::move(l));
                h.canonical_names.push_back(lj.value("canonical_name", std::string()));
            }
            p.hypotheses.push_back(std::move(h));
        }
        out.push_back(std::move(p));
    }
    return out;
}

// annotate one utterance with the full rerank pipeline
static Prediction annotate_one(const ner::Model& ner_model, el::Model& el_model,
                               const retrieval::InvertedIndex& index, const kb::KnowledgeBase& kb,
                               const retrieval::Weights& weights,
                               const std::vector<std::string>& tokens) {
    Prediction pred;
    pred.utterance = text::join(tokens);
    auto ranked = el::rerank(ner_model, el_model, index, kb, tokens, weights);
    for (const auto& rh : ranked) {
        PredHypothesis h;
        h.labels = rh.ner.labels;
        h.p_seq = rh.ner.p_seq;
        h.score = rh.el_score;
        for (const auto& m : rh.links) {
            if (m.entity_id.empty()) continue;  // unresolved mention: no link emitted
            bio::Link l;
            l.start = m.start;
            l.end = m.end;
            l.type = m.type;
            l.entity_id = m.entity_id;
            h.links.push_back(std::move(l));
            h.canonical_names.push_back(m.canonical);
        }
        pred.hypotheses.push_back(std::move(h));
    }
    return pred;
}

// input: corpus JSONL ({tokens, ...}) or plain text, one utterance per line
static std::vector<std::vector<std::string>> load_annotate_input(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open input '", path, "'");
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '{') {
            json j = json::parse(line);
            out.push_back(j.at("tokens").get<std::vector<std::string>>());
        } else {
            std::vector<std::string> toks;
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) toks.push_back(tok);
            if (!toks.empty()) out.push_back(std::move(toks));
        }
    }
    return out;
}

int cmd_annotate(const config::PipelineConfig& cfg, const CommandArgs& args) {
    const kb::KnowledgeBase kb = load_full_kb(cfg);
    require_file(cfg.paths.index, "index");
    require_file(cfg.paths.ner_model, "train-ner");
    require_file(cfg.paths.el_model, "train-el");
    const std::string input = args.input.empty() ? cfg.paths.test : args.input;
    require_file(input, "generate");
    const auto index = retrieval::InvertedIndex::load(cfg.paths.index);
    const ner::Model ner_model = ner::Model::load(cfg.paths.ner_model, kb);
    el::Model el_model = el::Model::load(cfg.paths.el_model, ner_model);

    std::vector<Prediction> preds;
    for (const auto& tokens : load_annotate_input(input))
        preds.push_back(annotate_one(ner_model, el_model, index, kb, cfg.retrieval, tokens));
    const std::string out = args.out.empty() ? cfg.paths.predictions : args.out;
    save_predictions(preds, out);
    std::cout << "annotated " << preds.size() << " utterances -> " << out << "\n";
    return 0;
}

eval::Report evaluate_predictions(const std::vector<Prediction>& preds,
                                  const std::vector<bio::Utterance>& gold, size_t beam,
                                  const std::vector<std::string>& subset_tags) {
    if (preds.size() != gold.size())
        fail("eval: ", preds.size(), " predictions for ", gold.size(), " gold utterances");

    std::vector<std::vector<std::string>> reranked_labels, top1_labels;
    std::vector<std::vector<eval::ScoredLabels>> beams;
    std::vector<std::vector<bio::Link>> pred_links;
    for (const auto& p : preds) {
        if (p.hypotheses.empty()) fail("eval: prediction with no hypotheses");
        reranked_labels.push_back(p.hypotheses.front().labels);
        // beam order within an utterance is the p_seq order (scores are
        // monotone in p_seq), so top-1 NER is the highest p_seq hypothesis
        const PredHypothesis* best = &p.hypotheses.front();
        for (const auto& h : p.hypotheses)
            if (h.p_seq > best->p_seq) best = &h;
        top1_labels.push_back(best->labels);
        std::vector<eval::ScoredLabels> b;
        for (const auto& h : p.hypotheses) b.push_back({h.labels, h.p_seq});
        std::sort(b.begin(), b.end(),
                  [](const eval::ScoredLabels& a, const eval::ScoredLabels& c) {
                      return a.score > c.score;
                  });
        beams.push_back(std::move(b));
        // every predicted mention enters EL scoring; unresolved ones keep an
        // empty id and count as false positives (strict EL <= NER invariant)
        std::vector<bio::Link> links;
        for (const auto& m : bio::decode_mentions(p.hypotheses.front().labels)) {
            bio::Link l;
            l.start = m.start;
            l.end = m.end;
            l.type = m.type;
            for (const auto& pl : p.hypotheses.front().links)
                if (pl.start == m.start && pl.end == m.end && pl.type == m.type) {
                    l.entity_id = pl.entity_id;
                    break;
                }
            links.push_back(std::move(l));
        }
        pred_links.push_back(std::move(links));
    }

    eval::Report report;
    auto compute = [&](const std::vector<size_t>& idx) {
        std::map<std::string, eval::Metric> m;
        const auto g = eval::select(gold, idx);
        m["ner_top1_f1"] = eval::ner_f1(eval::select(top1_labels, idx), g);
        m["ner_reranked_f1"] = eval::ner_f1(eval::select(reranked_labels, idx), g);
        m["ner_oracle_top" + std::to_string(beam) + "_f1"] =
            eval::oracle_topk_f1(eval::select(beams, idx), g, beam);
        m["el_f1"] = eval::el_f1(eval::select(pred_links, idx), g);
        return m;
    };
    std::vector<size_t> all(gold.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    report.metrics = compute(all);
    for (const auto& tag : subset_tags) {
        const auto idx = eval::subset_indices(gold, tag);
        report.subsets[tag] = idx.empty() ? std::map<std::string, eval::Metric>{} : compute(idx);
    }
    return report;
}

std::string report_table(const eval::Report& report) {
    std::ostringstream os;
    auto row = [&](const std::string& scope, const std::string& name, const eval::Metric& m) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s %-22s P %7.4f  R %7.4f  F1 %7.4f  (tp %zu fp %zu fn %zu)\n",
                      scope.c_str(), name.c_str(), m.precision, m.recall, m.f1, m.counts.tp,
                      m.counts.fp, m.counts.fn);
        os << buf;
    };
    for (const auto& [name, m] : report.metrics) row("all", name, m);
    for (const auto& [tag, metrics] : report.subsets)
        for (const auto& [name, m] : metrics) row(tag, name, m);
    return os.str();
}

void save_report(const eval::Report& report, const std::string& path) {
    json j;
    auto block = [](const std::map<std::string, eval::Metric>& metrics) {
        json b = json::object();
        for (const auto& [name, m] : metrics) {
            json mj;
            mj["precision"] = m.precision;
            mj["recall"] = m.recall;
            mj["f1"] = m.f1;
            mj["tp"] = m.counts.tp;
            mj["fp"] = m.counts.fp;
            mj["fn"] = m.counts.fn;
            b[name] = std::move(mj);
        }
        return b;
    };
    j["metrics"] = block(report.metrics);
    json subsets = json::object();
    for (const auto& [tag, metrics] : report.subsets) subsets[tag] = block(metrics);
    j["subsets"] = std::move(subsets);
    std::ofstream os(path);
    if (!os) fail("cannot write report '", path, "'");
    os << j.dump(2) << "\n";
}

int cmd_eval(const config::PipelineConfig& cfg, const CommandArgs& args) {
    const std::string pred_path = args.pred.empty() ? cfg.paths.predictions : args.pred;
    const std::string gold_path = args.gold.empty() ? cfg.paths.test : args.gold;
    require_file(pred_path, "annotate");
    require_file(gold_path, "generate");
    const auto preds = load_predictions(pred_path);
    const auto gold = bio::load_corpus(gold_path);

    std::vector<std::string> tags;
    if (!args.subset.empty()) {
        tags.push_back(args.subset);
    } else {
        std::set<std::string> seen;
        for (const auto& u : gold)
            for (const auto& t : u.tags) seen.insert(t);
        tags.assign(seen.begin(), seen.end());
    }
    const eval::Report report = evaluate_predictions(preds, gold, cfg.ner.beam, tags);
    std::cout << report_table(report);
    const std::string out = args.out.empty() ? cfg.paths.report : args.out;
    save_report(report, out);
    std::cout << "report -> " << out << "\n";
    return 0;
}

int cmd_featurize(const config::PipelineConfig& cfg, const CommandArgs& args) {
    if (args.mode != "ner" && args.mode != "neu")
        fail("featurize: --mode must be 'ner' or 'neu'");
    const kb::KnowledgeBase kb = load_full_kb(cfg);
    require_file(cfg.paths.ner_model, "train-ner");
    const std::string input = args.input.empty() ? cfg.paths.test : args.input;
    require_file(input, "generate");
    const ner::Model ner_model = ner::Model::load(cfg.paths.ner_model, kb);

    std::optional<retrieval::InvertedIndex> index;
    std::optional<el::Model> el_model;
    if (args.mode == "neu") {
        require_file(cfg.paths.index, "index");
        require_file(cfg.paths.el_model, "train-el");
        index = retrieval::InvertedIndex::load(cfg.paths.index);
        el_model = el::Model::load(cfg.paths.el_model, ner_model);
    }

    const std::string out_path = args.out.empty() ? cfg.paths.out_dir + "/features.jsonl" : args.out;
    std::ofstream os(out_path);
    if (!os) fail("cannot write features '", out_path, "'");
    size_t count = 0;
    for (const auto& tokens : load_annotate_input(input)) {
        json j;
        j["tokens"] = tokens;
        json feats = json::array();
        if (args.mode == "ner") {
            const auto beam = ner_model.decode(tokens, ner_model.config().beam);
            for (size_t t = 0; t < tokens.size(); ++t)
                feats.push_back(task::featurize_ner(ner_model.labels(), beam, t, args.alternatives));
        } else {
            auto ranked = el::rerank(ner_model, *el_model, *index, kb, tokens, cfg.retrieval);
            std::vector<task::RerankedAlt> alts;
            for (const auto& rh : ranked) alts.push_back(task::to_alt(rh, tokens.size()));
            for (size_t t = 0; t < tokens.size(); ++t)
                feats.push_back(task::featurize_neu(ner_model.labels(), alts, t, args.alternatives));
        }
        j["features"] = std::move(feats);
        os << j.dump() << "\n";
        ++count;
    }
    std::cout << "featurized " << count << " utterances (mode " << args.mode << ") -> "
              << out_path << "\n";
    return 0;
}

int run(const config::PipelineConfig& cfg, const std::string& command, const CommandArgs& args) {
    if (command == "generate") return cmd_generate(cfg);
    if (command == "index") return cmd_index(cfg);
    if (command == "train-ner") return cmd_train_ner(cfg);
    if (command == "train-el") return cmd_train_el(cfg);
    if (command == "annotate") return cmd_annotate(cfg, args);
    if (command == "eval") return cmd_eval(cfg, args);
    if (command == "featurize") return cmd_featurize(cfg, args);
    fail("unknown command '", command, "'");
}

}  // namespace neu::pipeline

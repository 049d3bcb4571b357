#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "neu/ner.hpp"
#include "oracles.hpp"

using namespace neu;

static kb::KnowledgeBase tiny_kb() {
    kb::KnowledgeBase kb;
    kb.add_entity({"m1", "doctor strange", "movie", {}, 9.0, {}});
    kb.add_entity({"m2", "the last echo", "movie", {"tle"}, 3.0, {}});
    kb.add_entity({"p1", "carla stone", "person", {}, 1.0, {}});
    kb.add_entity({"s1", "midnight river", "song", {}, 4.0, {}});
    kb.validate();
    return kb;
}

static ner::NerConfig tiny_cfg() {
    ner::NerConfig cfg;
    cfg.word_dim = 12;
    cfg.char_dim = 8;
    cfg.char_hidden = 6;
    cfg.hidden = 12;
    cfg.gazetteer_dim = 6;
    cfg.dropout = 0.25;
    cfg.batch_size = 4;
    cfg.epochs = 60;
    cfg.seed = 5;
    return cfg;
}

static std::vector<bio::Utterance> tiny_corpus() {
    auto utt = [](std::vector<std::string> toks, std::vector<std::string> labs) {
        bio::Utterance u;
        u.tokens = std::move(toks);
        u.labels = std::move(labs);
        return u;
    };
    return {
        utt({"play", "midnight", "river"}, {"O", "B-song", "I-song"}),
        utt({"watch", "doctor", "strange"}, {"O", "B-movie", "I-movie"}),
        utt({"call", "carla", "stone"}, {"O", "B-person", "I-person"}),
        utt({"watch", "the", "last", "echo"}, {"O", "B-movie", "I-movie", "I-movie"}),
        utt({"play", "doctor", "strange"}, {"O", "B-movie", "I-movie"}),
        utt({"call", "carla", "stone", "now"}, {"O", "B-person", "I-person", "O"}),
    };
}

TEST_CASE("gazetteer: canonical match flags, no-overlap zeros, multi-type overlap") {
    auto kb = tiny_kb();
    bio::LabelSet labels(kb.type_inventory());
    ner::Gazetteer gaz(kb, labels);
    const size_t D = gaz.feature_dim();
    REQUIRE(D == 3 * labels.num_types());

    // tokens exactly equal to a canonical name: inside/begin/end on boundaries
    const auto feats = gaz.featurize({"doctor", "strange"});
    const auto& types = labels.types();
    const size_t movie = static_cast<size_t>(
        std::find(types.begin(), types.end(), "movie") - types.begin());
    CHECK(feats[0 * D + movie * 3 + 0] == 1.0);  // inside
    CHECK(feats[0 * D + movie * 3 + 1] == 1.0);  // begins
    CHECK(feats[0 * D + movie * 3 + 2] == 0.0);
    CHECK(feats[1 * D + movie * 3 + 0] == 1.0);
    CHECK(feats[1 * D + movie * 3 + 1] == 0.0);
    CHECK(feats[1 * D + movie * 3 + 2] == 1.0);  // ends

    const auto none = gaz.featurize({"nothing", "matches", "here"});
    for (double v : none) CHECK(v == 0.0);

    // overlapping matches of two types set both channels
    kb::KnowledgeBase kb2;
    kb2.add_entity({"a", "echo storm", "song", {}, 1.0, {}});
    kb2.add_entity({"b", "storm wars", "movie", {}, 1.0, {}});
    bio::LabelSet labels2(kb2.type_inventory());
    ner::Gazetteer gaz2(kb2, labels2);
    const auto f2 = gaz2.featurize({"echo", "storm", "wars"});
    const size_t D2 = gaz2.feature_dim();
    const auto& t2 = labels2.types();
    const size_t song_i = static_cast<size_t>(
        std::find(t2.begin(), t2.end(), "song") - t2.begin());
    const size_t movie_i = static_cast<size_t>(
        std::find(t2.begin(), t2.end(), "movie") - t2.begin());
    CHECK(f2[1 * D2 + song_i * 3 + 0] == 1.0);   // "storm" inside song match
    CHECK(f2[1 * D2 + movie_i * 3 + 0] == 1.0);  // and inside movie match

    // exhaustive matcher oracle: longest match per (position, type)
    auto kb3 = tiny_kb();
    ner::Gazetteer gaz3(kb3, labels);
    std::vector<std::string> toks = {"play", "the", "last", "echo", "doctor", "strange"};
    const auto f3 = gaz3.featurize(toks);
    std::vector<double> expect(toks.size() * D, 0.0);
    std::vector<std::pair<std::vector<std::string>, std::string>> surfaces;
    for (const auto& e : kb3.entities()) {
        surfaces.push_back({text::normalize_tokens(e.canonical_name), e.entity_type});
        for (const auto& a : e.aliases) surfaces.push_back({text::normalize_tokens(a), e.entity_type});
    }
    for (size_t start = 0; start < toks.size(); ++start) {
        std::map<std::string, size_t> longest;
        for (const auto& [stoks, type] : surfaces) {
            if (stoks.empty() || stoks.size() > toks.size() - start) continue;
            bool ok = true;
            for (size_t j = 0; j < stoks.size() && ok; ++j) ok = stoks[j] == toks[start + j];
            if (ok) longest[type] = std::max(longest[type], stoks.size());
        }
        for (const auto& [type, len] : longest) {
            const size_t ti = static_cast<size_t>(
                std::find(types.begin(), types.end(), type) - types.begin());
            for (size_t j = start; j < start + len; ++j) expect[j * D + ti * 3 + 0] = 1.0;
            expect[start * D + ti * 3 + 1] = 1.0;
            expect[(start + len - 1) * D + ti * 3 + 2] = 1.0;
        }
    }
    CHECK(f3 == expect);
}

TEST_CASE("model: decode yields BIO-valid hypotheses with p_seq and p_men") {
    auto kb = tiny_kb();
    bio::LabelSet labels(kb.type_inventory());
    ner::NerConfig cfg = tiny_cfg();
    Vocab words(true), chars(true);
    for (const auto& u : tiny_corpus())
        for (const auto& t : u.tokens) {
            words.add(t);
            for (const auto& c : text::char_split(t)) chars.add(c);
        }
    ner::Model model(kb, labels, words, chars, cfg);

    const std::vector<std::string> toks = {"play", "doctor", "strange"};
    auto hyps = model.decode(toks, 5);
    REQUIRE_FALSE(hyps.empty());
    double prev = 1e300;
    for (const auto& h : hyps) {
        CHECK(bio::bio_valid(h.labels));
        CHECK(h.score <= prev);
        prev = h.score;
        CHECK(h.p_seq > 0.0);
        CHECK(h.p_seq <= 1.0 + 1e-12);
        for (const auto& m : h.mentions) {
            CHECK(m.p_men >= h.p_seq - 1e-9);  // superset of sequence mass
            CHECK(m.end > m.start);
            CHECK(m.end <= toks.size());
        }
    }
    // top-1 is the Viterbi argmax: it has max p_seq among returned hypotheses
    for (const auto& h : hyps) CHECK(hyps[0].p_seq >= h.p_seq - 1e-12);

    CHECK_THROWS_AS(model.decode({}, 5), Error);
    CHECK_THROWS_AS(model.mention_confidence(toks, 2, 5, "movie"), Error);
}

TEST_CASE("model lattice p_men matches enumeration on the real emission net") {
    auto kb = tiny_kb();
    bio::LabelSet labels(kb.type_inventory());
    Vocab words(true), chars(true);
    for (const auto& t : {"play", "doctor", "strange"}) {
        words.add(t);
        for (const auto& c : text::char_split(t)) chars.add(c);
    }
    ner::Model model(kb, labels, words, chars, tiny_cfg());
    const std::vector<std::string> toks = {"play", "doctor", "strange"};
    const auto lat = model.lattice(toks);
    const double got = model.mention_confidence(toks, 1, 3, "movie");
    const double want =
        oracle::mention_mass(lat, 1, 3, labels.b_id("movie"), labels.i_id("movie"));
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("NER NLL gradient passes finite differences at 1e-4") {
    auto kb = tiny_kb();
    bio::LabelSet labels(kb.type_inventory());
    ner::NerConfig cfg = tiny_cfg();
    cfg.word_dim = 4;
    cfg.char_dim = 3;
    cfg.char_hidden = 2;
    cfg.hidden = 3;
    cfg.gazetteer_dim = 2;
    Vocab words(true), chars(true);
    const std::vector<std::string> toks = {"play", "doctor", "strange"};
    for (const auto& t : toks) {
        words.add(t);
        for (const auto& c : text::char_split(t)) chars.add(c);
    }
    ner::Model model(kb, labels, words, chars, cfg);
    std::vector<int> gold = {0, labels.b_id("movie"), labels.i_id("movie")};
    auto loss = [&](bool want) {
        nn::Graph g(want);
        nn::Var l = model.build_nll(g, toks, gold, 1.0, false, nullptr);
        if (want) g.backward(l);
        return l->val.v[0];
    };
    Rng sample_rng(3);
    CHECK(nn::grad_check(loss, model.params(), 1e-4, 40, &sample_rng) < 1e-4);
}

TEST_CASE("train_ner overfits a repeated example: gold p_seq > 0.99") {
    auto kb = tiny_kb();
    ner::NerConfig cfg = tiny_cfg();
    cfg.epochs = 150;
    cfg.lr = 0.01;
    cfg.dropout = 0.0;
    std::vector<bio::Utterance> corpus;
    bio::Utterance u;
    u.tokens = {"play", "midnight", "river"};
    u.labels = {"O", "B-song", "I-song"};
    corpus.push_back(u);
    ner::TrainStats stats;
    ner::Model model = ner::train(kb, corpus, cfg, &stats);
    std::vector<int> gold;
    for (const auto& lab : u.labels) gold.push_back(model.labels().id(lab));
    CHECK(model.p_seq(u.tokens, gold) > 0.99);
    CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
}

TEST_CASE("train_ner: empty corpus and invalid labels are errors") {
    auto kb = tiny_kb();
    CHECK_THROWS_AS(ner::train(kb, {}, tiny_cfg()), Error);
    bio::Utterance bad;
    bad.tokens = {"x"};
    bad.labels = {"I-movie"};  // I without B
    CHECK_THROWS_AS(ner::train(kb, {bad}, tiny_cfg()), Error);
}

TEST_CASE("training is deterministic given the seed; checkpoints round-trip") {
    auto kb = tiny_kb();
    ner::NerConfig cfg = tiny_cfg();
    cfg.epochs = 4;
    auto corpus = tiny_corpus();
    ner::Model a = ner::train(kb, corpus, cfg);
    ner::Model b = ner::train(kb, corpus, cfg);
    for (const auto& ea : a.params().entries())
        CHECK(ea.tensor.v == b.params().get(ea.name).v);

    const std::string path = (std::filesystem::temp_directory_path() / "neu_ner_rt.json").string();
    a.save(path, 7);
    ner::Model loaded = ner::Model::load(path, kb);
    const std::vector<std::string> toks = {"watch", "doctor", "strange"};
    const auto ha = a.decode(toks, 5);
    const auto hl = loaded.decode(toks, 5);
    REQUIRE(ha.size() == hl.size());
    for (size_t i = 0; i < ha.size(); ++i) {
        CHECK(ha[i].labels == hl[i].labels);
        CHECK(ha[i].score == hl[i].score);  // bit-exact tensors
    }
    std::remove(path.c_str());
}

TEST_CASE("word vector file initializes matching rows") {
    const std::string path = (std::filesystem::temp_directory_path() / "neu_vecs.txt").string();
    {
        std::ofstream os(path);
        os << "play 1 2 3 4\nunknownword 9 9 9 9\n";
    }
    Vocab v(true);
    v.add("play");
    nn::Tensor table({v.size(), 4});
    ner::load_word_vectors(path, v, table);
    const size_t row = static_cast<size_t>(v.id("play"));
    CHECK(table.v[row * 4 + 0] == 1.0);
    CHECK(table.v[row * 4 + 3] == 4.0);
    {
        std::ofstream os(path);
        os << "play 1 2\n";
    }
    CHECK_THROWS_AS(ner::load_word_vectors(path, v, table), Error);
    std::remove(path.c_str());
}

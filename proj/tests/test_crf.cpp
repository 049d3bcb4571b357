#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "neu/bio.hpp"
#include "neu/crf.hpp"
#include "oracles.hpp"

using namespace neu;
using crf::Lattice;

static Lattice random_lattice(size_t T, size_t L, Rng& rng, double scale = 2.0) {
    Lattice lat(T, L);
    for (auto& v : lat.emissions) v = rng.uniform(-scale, scale);
    for (auto& v : lat.transitions) v = rng.uniform(-scale, scale);
    return lat;
}

TEST_CASE("crf_score: zero model scores zero; hand-set values sum exactly") {
    Lattice zero(3, 2);
    CHECK(crf::score(zero, {0, 1, 0}) == doctest::Approx(0.0));

    Lattice lat(2, 2);
    lat.emis(0, 0) = 1.5;
    lat.emis(1, 1) = -0.5;
    lat.trans(lat.start(), 0) = 0.25;
    lat.trans(0, 1) = 2.0;
    lat.trans(1, lat.stop()) = -1.0;
    // 0.25 + 1.5 + 2.0 + (-0.5) + (-1.0)
    CHECK(crf::score(lat, {0, 1}) == doctest::Approx(2.25));
    CHECK_THROWS_AS(crf::score(lat, {0, 5}), Error);
    CHECK_THROWS_AS(crf::score(lat, {0}), Error);
}

TEST_CASE("log_partition: zero model gives T log k; enumeration match; emission shift") {
    Lattice zero(4, 3);
    CHECK(crf::log_partition(zero) == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));

    Rng rng(101);
    for (int rep = 0; rep < 20; ++rep) {
        Lattice lat = random_lattice(3, 3, rng);
        CHECK(crf::log_partition(lat) == doctest::Approx(oracle::log_partition(lat)).epsilon(1e-9));
    }

    // adding c to every emission raises logZ by exactly T*c
    Lattice lat = random_lattice(4, 2, rng);
    const double base = crf::log_partition(lat);
    const double c = 0.731;
    for (auto& v : lat.emissions) v += c;
    CHECK(crf::log_partition(lat) == doctest::Approx(base + 4 * c).epsilon(1e-9));
}

TEST_CASE("p_seq: single label, uniform model, enumeration ratio") {
    Lattice single(5, 1);
    CHECK(crf::p_seq(single, {0, 0, 0, 0, 0}) == doctest::Approx(1.0));

    Lattice uniform(3, 4);
    CHECK(crf::p_seq(uniform, {1, 2, 3}) == doctest::Approx(std::pow(4.0, -3.0)).epsilon(1e-12));

    Rng rng(131);
    for (int rep = 0; rep < 20; ++rep) {
        Lattice lat = random_lattice(2, 2, rng);
        std::vector<int> y = {rng.uniform_int(2), rng.uniform_int(2)};
        CHECK(crf::p_seq(lat, y) == doctest::Approx(oracle::p_seq(lat, y)).epsilon(1e-9));
    }
}

TEST_CASE("p_seq sums to one over all sequences") {
    Rng rng(139);
    for (int rep = 0; rep < 10; ++rep) {
        Lattice lat = random_lattice(1 + rng.uniform_int(4), 1 + rng.uniform_int(3), rng);
        double total = 0.0;
        for (const auto& s : oracle::enumerate_all(lat)) total += crf::p_seq(lat, s.labels);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("viterbi equals enumeration argmax, lexicographic on ties") {
    Rng rng(149);
    for (int rep = 0; rep < 50; ++rep) {
        Lattice lat = random_lattice(1 + rng.uniform_int(5), 1 + rng.uniform_int(4), rng);
        auto vit = crf::viterbi(lat);
        auto top = oracle::enumerate_sorted(lat).front();
        CHECK(vit.labels == top.labels);
        CHECK(vit.score == doctest::Approx(top.score).epsilon(1e-12));
    }
    // all-tie case: the all-zeros lattice must pick the all-0 sequence
    Lattice zero(3, 3);
    CHECK(crf::viterbi(zero).labels == std::vector<int>{0, 0, 0});
}

TEST_CASE("beam_topk: full-width beam equals enumeration order exactly") {
    Rng rng(151);
    for (int rep = 0; rep < 20; ++rep) {
        const size_t T = 1 + rng.uniform_index(3), L = 1 + rng.uniform_index(3);
        Lattice lat = random_lattice(T, L, rng);
        const size_t all = static_cast<size_t>(std::pow(L, T));
        auto beam = crf::beam_topk(lat, all + 3);
        auto sorted = oracle::enumerate_sorted(lat);
        REQUIRE(beam.size() == sorted.size());
        for (size_t i = 0; i < beam.size(); ++i) {
            CHECK(beam[i].labels == sorted[i].labels);
            CHECK(beam[i].score == sorted[i].score);  // identical accumulation order
        }
    }
}

TEST_CASE("beam_topk: l=1 is exactly the Viterbi path; top-1 always Viterbi") {
    Rng rng(157);
    for (int rep = 0; rep < 30; ++rep) {
        Lattice lat = random_lattice(1 + rng.uniform_int(5), 1 + rng.uniform_int(4), rng);
        auto vit = crf::viterbi(lat);
        auto b1 = crf::beam_topk(lat, 1);
        REQUIRE(b1.size() == 1);
        CHECK(b1[0].labels == vit.labels);
        for (size_t l : {size_t(2), size_t(3)}) {
            auto bl = crf::beam_topk(lat, l);
            CHECK(bl[0].labels == vit.labels);
        }
    }
}

TEST_CASE("beam_topk: deterministic lexicographic tie-break on a zero model") {
    Lattice zero(2, 2);
    auto beam = crf::beam_topk(zero, 4);
    REQUIRE(beam.size() == 4);
    CHECK(beam[0].labels == std::vector<int>{0, 0});
    CHECK(beam[1].labels == std::vector<int>{0, 1});
    CHECK(beam[2].labels == std::vector<int>{1, 0});
    CHECK(beam[3].labels == std::vector<int>{1, 1});
}

TEST_CASE("mention_mass: forced span, enumeration equality, superset bound") {
    // two labels: 0 = B-x, 1 = I-x; only option is the span itself
    {
        Lattice lat(2, 2);
        // make B at 0 and I at 1 the only finite path
        const double ninf = -std::numeric_limits<double>::infinity();
        lat.trans(lat.start(), 1) = ninf;   // cannot start with I
        lat.trans(0, 0) = ninf;             // B cannot repeat
        lat.trans(1, 0) = ninf;
        lat.trans(1, 1) = ninf;
        CHECK(crf::mention_mass(lat, 0, 2, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }

    Rng rng(163);
    for (int rep = 0; rep < 30; ++rep) {
        // labels: 0 = O, 1 = B-a, 2 = I-a, 3 = B-b (two types, T=3)
        Lattice lat = random_lattice(3, 4, rng);
        const size_t start = rng.uniform_index(3);
        const size_t end = start + 1 + rng.uniform_index(3 - start);
        const double got = crf::mention_mass(lat, start, end, 1, 2);
        const double want = oracle::mention_mass(lat, start, end, 1, 2);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));

        // p_men(m) >= p_seq(y) for any sequence containing m exactly
        std::vector<int> y(3, 0);
        y[start] = 1;
        for (size_t t = start + 1; t < end; ++t) y[t] = 2;
        if (end < 3) y[end] = 0;
        CHECK(got >= crf::p_seq(lat, y) - 1e-12);
    }

    Rng rng2(7);
    Lattice lat = random_lattice(3, 4, rng2);
    CHECK_THROWS_AS(crf::mention_mass(lat, 2, 5, 1, 2), Error);
}

TEST_CASE("emission shift invariance: p_seq, p_men and viterbi argmax unchanged") {
    Rng rng(167);
    Lattice lat = random_lattice(4, 3, rng);
    std::vector<int> y = {0, 1, 2, 1};
    const double p0 = crf::p_seq(lat, y);
    const double m0 = crf::mention_mass(lat, 1, 3, 1, 2);
    const auto v0 = crf::viterbi(lat).labels;
    // add a constant to all emissions at position 2
    for (size_t k = 0; k < 3; ++k) lat.emis(2, k) += 5.37;
    CHECK(crf::p_seq(lat, y) == doctest::Approx(p0).epsilon(1e-9));
    CHECK(crf::mention_mass(lat, 1, 3, 1, 2) == doctest::Approx(m0).epsilon(1e-9));
    CHECK(crf::viterbi(lat).labels == v0);
}

TEST_CASE("nll_grad: loss value and gradients match finite differences") {
    Rng rng(173);
    Lattice lat = random_lattice(3, 3, rng);
    std::vector<int> gold = {2, 0, 1};

    std::vector<double> eg(lat.emissions.size(), 0.0), tg(lat.transitions.size(), 0.0);
    const double nll = crf::nll_grad(lat, gold, 1.0, eg, tg);
    CHECK(nll == doctest::Approx(-std::log(oracle::p_seq(lat, gold))).epsilon(1e-9));

    const double eps = 1e-6;
    auto loss_at = [&]() {
        return crf::log_partition(lat) - crf::score(lat, gold);
    };
    for (size_t i = 0; i < lat.emissions.size(); ++i) {
        const double orig = lat.emissions[i];
        lat.emissions[i] = orig + eps;
        const double lp = loss_at();
        lat.emissions[i] = orig - eps;
        const double lm = loss_at();
        lat.emissions[i] = orig;
        CHECK(eg[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-5));
    }
    for (size_t i = 0; i < lat.transitions.size(); ++i) {
        const double orig = lat.transitions[i];
        lat.transitions[i] = orig + eps;
        const double lp = loss_at();
        lat.transitions[i] = orig - eps;
        const double lm = loss_at();
        lat.transitions[i] = orig;
        const double numeric = (lp - lm) / (2 * eps);
        CHECK(tg[i] == doctest::Approx(numeric).epsilon(1e-5));
    }
}

TEST_CASE("BIO transition mask admits only well-formed sequences") {
    bio::LabelSet labels({"movie", "person"});
    const auto mask = labels.transition_mask();
    const size_t L = labels.size(), S = L + 2;
    Lattice lat(3, L);
    Rng rng(179);
    for (auto& v : lat.emissions) v = rng.uniform(-2.0, 2.0);
    for (size_t i = 0; i < S * S; ++i)
        lat.transitions[i] =
            mask[i] ? rng.uniform(-1.0, 1.0) : -std::numeric_limits<double>::infinity();
    for (const auto& h : crf::beam_topk(lat, 50)) {
        std::vector<std::string> names;
        for (int id : h.labels) names.push_back(labels.name(id));
        CHECK(bio::bio_valid(names));
    }
    // and the partition only counts valid sequences
    double total = 0.0;
    for (const auto& s : oracle::enumerate_all(lat))
        if (std::isfinite(s.score)) total += std::exp(s.score - crf::log_partition(lat));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

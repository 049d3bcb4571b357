#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "neu/nn.hpp"
#include "oracles.hpp"

using namespace neu;
using nn::Graph;
using nn::ParameterSet;
using nn::Tensor;
using nn::Var;

TEST_CASE("tensor invariants") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), Error);
    ParameterSet ps;
    ps.add("a", {2});
    CHECK_THROWS_AS(ps.add("a", {2}), Error);          // unique names
    CHECK(ps.get("a").has_grad());                     // trainable => grad slot
    CHECK_FALSE(ps.add("b", {2}, false).has_grad());
    CHECK_THROWS_AS(ps.get("missing"), Error);
}

TEST_CASE("embedding lookup: one-hot rows and duplicate ids") {
    ParameterSet ps;
    Tensor& table = ps.add("t", {3, 3});
    for (size_t i = 0; i < 3; ++i) table.v[i * 3 + i] = 1.0;  // identity rows

    Graph g(true);
    Var out = g.embed(table, {2});
    CHECK(out->val.v == std::vector<double>{0, 0, 1});

    Var two = g.embed(table, {0, 0});
    CHECK(two->val.v == std::vector<double>{1, 0, 0, 1, 0, 0});

    CHECK_THROWS_AS(g.embed(table, {3}), Error);
    CHECK_THROWS_AS(g.embed(table, {-1}), Error);

    // backward of sum: grad row counts equal id multiplicities
    Var loss = g.sum(two);
    g.backward(loss);
    CHECK(table.g[0] == doctest::Approx(2.0));  // row 0 used twice
    CHECK(table.g[3] == doctest::Approx(0.0));
}

TEST_CASE("embedding gradient passes finite differences") {
    Rng rng(11);
    ParameterSet ps;
    Tensor& table = ps.add_init("t", {4, 3}, rng);
    auto loss = [&](bool want) {
        Graph g(want);
        Var x = g.embed(table, {1, 1, 3});
        Var l = g.sum(g.mul(x, x));
        if (want) g.backward(l);
        return l->val.v[0];
    };
    CHECK(nn::grad_check(loss, ps, 1e-5) < 1e-7);
}

TEST_CASE("bilstm: zero parameters give zero output, T=1 works") {
    ParameterSet ps;
    Rng rng(3);
    nn::bilstm_init(ps, "l", 2, 3, rng);
    for (auto& e : ps.entries()) std::fill(e.tensor.v.begin(), e.tensor.v.end(), 0.0);
    Graph g(false);
    std::vector<Var> xs = {g.input(Tensor({2}, {0.5, -0.2}))};
    auto out = nn::bilstm_run(g, ps, "l", xs);
    REQUIRE(out.size() == 1);
    REQUIRE(out[0]->size() == 6);
    for (double v : out[0]->val.v) CHECK(v == doctest::Approx(0.0));
}

// independent per-gate scalar recomputation of an LSTM
static std::vector<std::vector<double>> lstm_by_hand(const ParameterSet& ps,
                                                     const std::string& prefix,
                                                     const std::vector<std::vector<double>>& xs,
                                                     bool reverse) {
    const Tensor& Wx = ps.get(prefix + ".Wx");
    const Tensor& Wh = ps.get(prefix + ".Wh");
    const Tensor& b = ps.get(prefix + ".b");
    const size_t h = Wh.shape[1], in = Wx.shape[1];
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    std::vector<double> hv(h, 0.0), cv(h, 0.0);
    std::vector<std::vector<double>> out(xs.size());
    for (size_t step = 0; step < xs.size(); ++step) {
        const size_t t = reverse ? xs.size() - 1 - step : step;
        std::vector<double> gates(4 * h, 0.0);
        for (size_t i = 0; i < 4 * h; ++i) {
            double acc = b.v[i];
            for (size_t j = 0; j < in; ++j) acc += Wx.v[i * in + j] * xs[t][j];
            for (size_t j = 0; j < h; ++j) acc += Wh.v[i * h + j] * hv[j];
            gates[i] = acc;
        }
        std::vector<double> nh(h), nc(h);
        for (size_t j = 0; j < h; ++j) {
            const double ig = sig(gates[j]);
            const double fg = sig(gates[h + j]);
            const double cand = std::tanh(gates[2 * h + j]);
            const double og = sig(gates[3 * h + j]);
            nc[j] = fg * cv[j] + ig * cand;
            nh[j] = og * std::tanh(nc[j]);
        }
        hv = nh;
        cv = nc;
        out[t] = hv;
    }
    return out;
}

TEST_CASE("bilstm matches step-by-step scalar recomputation (T=3, h=2)") {
    Rng rng(17);
    ParameterSet ps;
    nn::bilstm_init(ps, "l", 3, 2, rng);
    std::vector<std::vector<double>> xs = {{0.3, -1.2, 0.8}, {1.1, 0.05, -0.4}, {-0.7, 0.6, 0.9}};
    Graph g(false);
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(g.input(Tensor({3}, x)));
    auto out = nn::bilstm_run(g, ps, "l", vars);

    auto fwd = lstm_by_hand(ps, "l.fwd", xs, false);
    auto bwd = lstm_by_hand(ps, "l.bwd", xs, true);
    for (size_t t = 0; t < xs.size(); ++t) {
        for (size_t j = 0; j < 2; ++j) {
            CHECK(out[t]->val.v[j] == doctest::Approx(fwd[t][j]).epsilon(1e-12));
            CHECK(out[t]->val.v[2 + j] == doctest::Approx(bwd[t][j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("bilstm gradient passes finite differences") {
    Rng rng(23);
    ParameterSet ps;
    nn::bilstm_init(ps, "l", 2, 2, rng);
    std::vector<std::vector<double>> xs = {{0.4, -0.3}, {0.1, 0.9}, {-0.5, 0.2}};
    auto loss = [&](bool want) {
        Graph g(want);
        std::vector<Var> vars;
        for (const auto& x : xs) vars.push_back(g.input(Tensor({2}, x)));
        auto out = nn::bilstm_run(g, ps, "l", vars);
        Var l = g.sum(g.mul(out[0], out[2]));
        l = g.add(l, g.sum(out[1]));
        if (want) g.backward(l);
        return l->val.v[0];
    };
    CHECK(nn::grad_check(loss, ps, 1e-5) < 1e-6);
}

TEST_CASE("char_conv_pool: zeros give zeros, short inputs are padded") {
    Rng rng(5);
    ParameterSet ps;
    nn::ConvSpec spec;
    spec.widths = {3, 4, 5};
    spec.kernels = 4;
    nn::char_conv_init(ps, "c", 3, spec, rng);
    // zero bias so zero input stays zero through both layers
    for (auto& e : ps.entries())
        if (e.name.find(".b") != std::string::npos)
            std::fill(e.tensor.v.begin(), e.tensor.v.end(), 0.0);

    Graph g(false);
    Var z = g.input(Tensor({2, 3}));  // L=2 < max width 5: padded, no error
    Var out = nn::char_conv_pool(g, ps, "c", z, spec);
    REQUIRE(out->size() == 12);  // widths * kernels, invariant to L
    for (double v : out->val.v) CHECK(v == doctest::Approx(0.0));

    Var one = g.input(Tensor({1, 3}, {0.1, 0.2, 0.3}));
    CHECK(nn::char_conv_pool(g, ps, "c", one, spec)->size() == 12);

    CHECK_THROWS_AS(nn::char_conv_pool(g, ps, "c", g.input(Tensor({0, 3})), spec), Error);
}

TEST_CASE("char_conv_pool matches brute-force window recomputation (L=7)") {
    Rng rng(29);
    ParameterSet ps;
    nn::ConvSpec spec;
    spec.widths = {3, 5};
    spec.kernels = 3;
    const size_t L = 7, D = 2;
    nn::char_conv_init(ps, "c", D, spec, rng);
    std::vector<double> x(L * D);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);

    Graph g(false);
    Var out = nn::char_conv_pool(g, ps, "c", g.input(Tensor({L, D}, x)), spec);

    std::vector<double> expect;
    for (size_t w : spec.widths) {
        const std::string wp = "c.w" + std::to_string(w);
        auto h1 = oracle::conv1d_same(x, L, D, ps.get(wp + ".c0.K").v, spec.kernels, w,
                                      ps.get(wp + ".c0.b").v);
        for (double& v : h1) v = std::max(0.0, v);
        auto h2 = oracle::conv1d_same(h1, L, spec.kernels, ps.get(wp + ".c1.K").v, spec.kernels, w,
                                      ps.get(wp + ".c1.b").v);
        for (size_t k = 0; k < spec.kernels; ++k) {
            double best = h2[k];
            for (size_t t = 1; t < L; ++t) best = std::max(best, h2[t * spec.kernels + k]);
            expect.push_back(best);
        }
    }
    REQUIRE(out->size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(out->val.v[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("char conv gradient passes finite differences at 1e-4") {
    Rng rng(31);
    ParameterSet ps;
    nn::ConvSpec spec;
    spec.widths = {3, 4};
    spec.kernels = 2;
    nn::char_conv_init(ps, "c", 2, spec, rng);
    std::vector<double> x = {0.3, -0.4, 0.9, 0.2, -0.6, 0.7, 0.05, 0.55, -0.15, 0.25};
    auto loss = [&](bool want) {
        Graph g(want);
        Var out = nn::char_conv_pool(g, ps, "c", g.input(Tensor({5, 2}, x)), spec);
        Var l = g.sum(g.mul(out, out));
        if (want) g.backward(l);
        return l->val.v[0];
    };
    CHECK(nn::grad_check(loss, ps, 1e-4) < 1e-4);
}

TEST_CASE("mlp: identity pass-through and zero weights") {
    ParameterSet ps;
    Rng rng(7);
    nn::mlp_init(ps, "m", 3, {3}, 2, rng);
    Tensor& W0 = ps.get("m.l0.W");
    std::fill(W0.v.begin(), W0.v.end(), 0.0);
    for (size_t i = 0; i < 3; ++i) W0.v[i * 3 + i] = 1.0;
    std::fill(ps.get("m.l0.b").v.begin(), ps.get("m.l0.b").v.end(), 0.0);
    Tensor& Wo = ps.get("m.out.W");
    std::fill(Wo.v.begin(), Wo.v.end(), 0.0);
    Wo.v[0 * 3 + 0] = 1.0;
    Wo.v[1 * 3 + 1] = 1.0;
    ps.get("m.out.b").v = {0.0, 0.0};

    Graph g(false);
    // non-negative input passes the identity hidden layer unchanged
    Var out = nn::mlp_run(g, ps, "m", g.input(Tensor({3}, {0.5, 0.25, 0.0})));
    CHECK(out->val.v[0] == doctest::Approx(0.5));
    CHECK(out->val.v[1] == doctest::Approx(0.25));

    // zero weights: output equals output-layer bias
    std::fill(Wo.v.begin(), Wo.v.end(), 0.0);
    ps.get("m.out.b").v = {3.5, -1.25};
    Var out2 = nn::mlp_run(g, ps, "m", g.input(Tensor({3}, {9.0, -2.0, 4.0})));
    CHECK(out2->val.v[0] == doctest::Approx(3.5));
    CHECK(out2->val.v[1] == doctest::Approx(-1.25));
}

TEST_CASE("mlp matches matrix-arithmetic oracle on a random 2-layer net") {
    Rng rng(41);
    ParameterSet ps;
    nn::mlp_init(ps, "m", 4, {5, 3}, 2, rng);
    std::vector<double> x = {0.2, -0.9, 1.4, 0.33};
    Graph g(false);
    Var out = nn::mlp_run(g, ps, "m", g.input(Tensor({4}, x)));
    auto expect = oracle::mlp(
        {ps.get("m.l0.W").v, ps.get("m.l1.W").v, ps.get("m.out.W").v},
        {ps.get("m.l0.b").v, ps.get("m.l1.b").v, ps.get("m.out.b").v}, {5, 3, 2}, x);
    REQUIRE(out->size() == 2);
    CHECK(out->val.v[0] == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(out->val.v[1] == doctest::Approx(expect[1]).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, step increments") {
    ParameterSet ps;
    Tensor& t = ps.add("x", {2});
    t.v = {1.0, -2.0};
    t.zero_grad();
    nn::AdamState adam;
    adam.step(ps);
    CHECK(adam.step_count == 1);
    CHECK(t.v[0] == doctest::Approx(1.0));
    CHECK(t.v[1] == doctest::Approx(-2.0));
}

TEST_CASE("adam: constant unit gradient drives update magnitude to lr") {
    ParameterSet ps;
    Tensor& t = ps.add("x", {1});
    t.v = {0.0};
    nn::AdamState adam;
    adam.lr = 0.001;
    double prev = t.v[0];
    double step_size = 0.0;
    for (int i = 0; i < 400; ++i) {
        t.zero_grad();
        t.g[0] = 1.0;
        adam.step(ps);
        step_size = prev - t.v[0];
        prev = t.v[0];
    }
    // closed-form Adam with g == 1: mhat = vhat = 1, update -> lr/(1+eps)
    CHECK(step_size == doctest::Approx(adam.lr).epsilon(1e-3));
}

TEST_CASE("adam: missing grad is an error; epoch decay compounds") {
    ParameterSet ps;
    Tensor& t = ps.add("x", {1});
    t.g.clear();
    nn::AdamState adam;
    CHECK_THROWS_AS(adam.step(ps), Error);

    nn::AdamState a2;
    a2.lr = 0.001;
    a2.lr_decay = 0.99;
    a2.end_epoch();
    a2.end_epoch();
    CHECK(a2.lr == doctest::Approx(0.001 * 0.99 * 0.99).epsilon(1e-12));
}

TEST_CASE("grad_check: quadratic loss and corrupted-gradient sensitivity") {
    ParameterSet ps;
    Tensor& t = ps.add("x", {1});
    t.v = {3.0};
    auto loss = [&](bool want) {
        if (want) {
            t.zero_grad();
            t.g[0] = t.v[0];  // d(x^2/2)/dx = x
        }
        return 0.5 * t.v[0] * t.v[0];
    };
    CHECK(nn::grad_check(loss, ps, 1e-4) < 1e-9);

    auto corrupted = [&](bool want) {
        if (want) {
            t.zero_grad();
            t.g[0] = t.v[0] + 0.1;  // deliberately wrong
        }
        return 0.5 * t.v[0] * t.v[0];
    };
    CHECK(nn::grad_check(corrupted, ps, 1e-4) > 1e-2);

    auto bad = [&](bool) { return std::nan(""); };
    CHECK_THROWS_AS(nn::grad_check(bad, ps, 1e-4), Error);
}

TEST_CASE("op gradients via parameter vectors") {
    Rng rng(61);
    ParameterSet ps;
    ps.add_init("a", {1, 4}, rng);
    ps.add_init("b", {1, 4}, rng);
    auto with_vecs = [&](auto body) {
        return [&, body](bool want) {
            Graph g(want);
            Var a = g.slice(g.embed(ps.get("a"), {0}), 0, 4);
            Var b = g.slice(g.embed(ps.get("b"), {0}), 0, 4);
            Var l = body(g, a, b);
            if (want) g.backward(l);
            return l->val.v[0];
        };
    };
    auto cos_loss = with_vecs([](Graph& g, Var a, Var b) { return g.cosine(a, b); });
    CHECK(nn::grad_check(cos_loss, ps, 1e-5) < 1e-6);
    auto minmax_loss = with_vecs([](Graph& g, Var a, Var b) {
        return g.sum(g.add(g.emin(a, b), g.mul(g.emax(a, b), b)));
    });
    CHECK(nn::grad_check(minmax_loss, ps, 1e-5) < 1e-6);
    auto lse_loss = with_vecs([](Graph& g, Var a, Var b) {
        return g.logsumexp(g.concat({a, g.scale(b, 2.0)}));
    });
    CHECK(nn::grad_check(lse_loss, ps, 1e-5) < 1e-6);
}

TEST_CASE("cosine: identical and orthogonal vectors, zero-norm convention") {
    Graph g(false);
    Var a = g.input(Tensor({2}, {3.0, 4.0}));
    Var b = g.input(Tensor({2}, {3.0, 4.0}));
    CHECK(g.cosine(a, b)->val.v[0] == doctest::Approx(1.0));
    Var c = g.input(Tensor({2}, {-4.0, 3.0}));
    CHECK(g.cosine(a, c)->val.v[0] == doctest::Approx(0.0));
    Var z = g.input(Tensor({2}, {0.0, 0.0}));
    CHECK(g.cosine(a, z)->val.v[0] == doctest::Approx(0.0));
}

TEST_CASE("dropout: deterministic under a fixed seed, inverted scaling") {
    Tensor x({100});
    for (size_t i = 0; i < 100; ++i) x.v[i] = 1.0;
    Rng r1(99), r2(99);
    Graph g(false);
    Var d1 = g.dropout(g.input(x), 0.5, r1);
    Var d2 = g.dropout(g.input(x), 0.5, r2);
    CHECK(d1->val.v == d2->val.v);
    for (double v : d1->val.v) CHECK((v == 0.0 || v == doctest::Approx(2.0)));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    Rng rng(73);
    ParameterSet ps("neu.test.v1");
    ps.add_init("w", {3, 4}, rng);
    ps.add_init("b", {7}, rng);
    ps.get("b").v[0] = 0.1 + 0.2;  // classic non-representable sum
    const std::string path =
        (std::filesystem::temp_directory_path() / "ckpt_roundtrip.json").string();
    nn::save_checkpoint(path, ps, 42, {{"note", "hi"}});

    ParameterSet loaded("neu.test.v1");
    Rng rng2(1);
    loaded.add_init("w", {3, 4}, rng2);
    loaded.add_init("b", {7}, rng2);
    nn::Checkpoint ck = nn::load_checkpoint(path, loaded);
    CHECK(ck.step == 42);
    CHECK(ck.meta.at("note") == "hi");
    CHECK(loaded.get("w").v == ps.get("w").v);  // exact doubles
    CHECK(loaded.get("b").v == ps.get("b").v);

    ParameterSet wrong("neu.other.v2");
    Rng rng3(1);
    wrong.add_init("w", {3, 4}, rng3);
    wrong.add_init("b", {7}, rng3);
    CHECK_THROWS_WITH_AS(nn::load_checkpoint(path, wrong), doctest::Contains("version"), Error);
    std::remove(path.c_str());
}

TEST_CASE("forward passes are bitwise repeatable with dropout disabled") {
    Rng rng(81);
    ParameterSet ps;
    nn::bilstm_init(ps, "l", 3, 4, rng);
    std::vector<double> x = {0.1, -0.2, 0.3};
    auto run = [&]() {
        Graph g(false);
        auto out = nn::bilstm_run(g, ps, "l", {g.input(Tensor({3}, x))});
        return out[0]->val.v;
    };
    CHECK(run() == run());
}

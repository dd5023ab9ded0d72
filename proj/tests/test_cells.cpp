#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "gatecast/gatecast.hpp"
#include "json.hpp"

using namespace gatecast;
using nlohmann::json;

namespace {

const json& oracle() {
    static const json doc = [] {
        std::ifstream in(std::string(GATECAST_TESTS) + "/oracles/cells_h2_d1_t3.json");
        return json::parse(in);
    }();
    return doc;
}

template <class P>
void load_tensors(P& p, const json& j) {
    p.for_each([&](const char* name, Matrix& m, bool) {
        const auto v = j.at(name).get<std::vector<double>>();
        ASSERT_EQ(v.size(), m.size()) << name;
        std::copy(v.begin(), v.end(), m.values().begin());
    });
}

std::vector<Matrix> oracle_inputs() {
    std::vector<Matrix> xs;
    for (double x : oracle().at("xs")) xs.push_back(Matrix{{x}});
    return xs;
}

void expect_vec(const Matrix& m, const json& want, double tol, const std::string& what) {
    const auto w = want.get<std::vector<double>>();
    ASSERT_EQ(m.size(), w.size()) << what;
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(m[i], w[i], tol) << what << "[" << i << "]";
}

template <class P>
P random_params(P p, Rng& rng, double scale) {
    p.for_each([&](const char*, Matrix& m, bool) {
        for (double& v : m.values()) v = rng.uniform(-scale, scale);
    });
    return p;
}

std::vector<Matrix> random_inputs(Rng& rng, std::size_t steps, std::size_t input, double scale) {
    std::vector<Matrix> xs;
    for (std::size_t t = 0; t < steps; ++t) {
        Matrix x(input, 1);
        for (double& v : x.values()) v = rng.uniform(-scale, scale);
        xs.push_back(x);
    }
    return xs;
}

}  // namespace

// ---------------------------------------------------------------------------
// RNG

TEST(Rng, ReplaysReferenceStream) {
    const auto& s = oracle().at("splitmix");
    Rng rng(s.at("seed").get<std::uint64_t>());
    for (const auto& d : s.at("next")) EXPECT_EQ(rng.next(), std::stoull(d.get<std::string>()));
    Rng u(s.at("seed").get<std::uint64_t>());
    for (const auto& d : s.at("uniform")) EXPECT_EQ(u.uniform(), d.get<double>());
}

TEST(Rng, BelowStaysInRangeAndShuffleIsPermutation) {
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng.shuffle(w);
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
}

// ---------------------------------------------------------------------------
// Transcription oracle

TEST(Init, XavierMatchesOracleReplay) {
    const auto& x = oracle().at("xavier");
    Rng a(x.at("seed").get<std::uint64_t>());
    const auto lstm = init_lstm(2, 1, a);
    lstm.for_each([&](const char* name, const Matrix& m, bool) { expect_vec(m, x.at("lstm").at(name), 0.0, name); });
    Rng b(x.at("seed").get<std::uint64_t>());
    const auto gru = init_gru(2, 1, b);
    gru.for_each([&](const char* name, const Matrix& m, bool) { expect_vec(m, x.at("gru").at(name), 0.0, name); });
}

TEST(LstmStep, MatchesTranscriptionOracle) {
    const auto& o = oracle().at("lstm");
    auto p = LstmParams::zeros(2, 1);
    load_tensors(p, o.at("params"));
    const auto xs = oracle_inputs();
    auto s = LstmState::zeros(2);
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const auto r = lstm_step(p, xs[t], s);
        const auto& want = o.at("steps").at(t);
        const auto tag = "t=" + std::to_string(t) + " ";
        expect_vec(r.cache.input_gate, want.at("i"), 1e-14, tag + "i");
        expect_vec(r.cache.forget_gate, want.at("f"), 1e-14, tag + "f");
        expect_vec(r.cache.output_gate, want.at("o"), 1e-14, tag + "o");
        expect_vec(r.cache.candidate, want.at("c_tilde"), 1e-14, tag + "c~");
        expect_vec(r.state.c, want.at("c"), 1e-14, tag + "c");
        expect_vec(r.state.h, want.at("h"), 1e-14, tag + "h");
        s = r.state;
    }
    EXPECT_NEAR(forward_sequence(p, xs).prediction, o.at("prediction").get<double>(), 1e-14);
}

TEST(GruStep, MatchesTranscriptionOracle) {
    for (const char* key : {"gru", "gru_bias"}) {
        const auto& o = oracle().at(key);
        auto p = GruParams::zeros(2, 1, std::string(key) == "gru_bias");
        load_tensors(p, o.at("params"));
        const auto xs = oracle_inputs();
        Matrix h(2, 1);
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const auto r = gru_step(p, xs[t], h);
            const auto& want = o.at("steps").at(t);
            const auto tag = std::string(key) + " t=" + std::to_string(t) + " ";
            expect_vec(r.cache.update_gate, want.at("z"), 1e-14, tag + "z");
            expect_vec(r.cache.reset_gate, want.at("r"), 1e-14, tag + "r");
            expect_vec(r.cache.candidate, want.at("h_tilde"), 1e-14, tag + "h~");
            expect_vec(r.h, want.at("h"), 1e-14, tag + "h");
            h = r.h;
        }
        EXPECT_NEAR(forward_sequence(p, xs).prediction, o.at("prediction").get<double>(), 1e-14) << key;
    }
}

TEST(Reference, ExtendedPrecisionForwardAgrees) {
    Rng rng(8);
    const auto lstm = random_params(LstmParams::zeros(3, 2), rng, 0.7);
    const auto gru = random_params(GruParams::zeros(3, 2, true), rng, 0.7);
    const auto xs = random_inputs(rng, 6, 2, 1.0);
    const std::span<const Matrix> sx(xs);
    EXPECT_NEAR(static_cast<double>(reference::predict(lstm, reference::widen(lstm), sx)),
                forward_sequence(lstm, sx).prediction, 1e-13);
    EXPECT_NEAR(static_cast<double>(reference::predict(gru, reference::widen(gru), sx)),
                forward_sequence(gru, sx).prediction, 1e-13);
}

// ---------------------------------------------------------------------------
// Closed-form cases

TEST(LstmStep, ZeroWeightsGiveHalfGates) {
    const auto p = LstmParams::zeros(3, 2);
    const auto r = lstm_step(p, Matrix{{0.3}, {-1.2}}, LstmState::zeros(3));
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(r.cache.input_gate[j], 0.5);
        EXPECT_EQ(r.cache.forget_gate[j], 0.5);
        EXPECT_EQ(r.cache.output_gate[j], 0.5);
        EXPECT_EQ(r.cache.candidate[j], 0.0);
        EXPECT_EQ(r.state.c[j], 0.0);
        EXPECT_EQ(r.state.h[j], 0.0);
    }
}

TEST(LstmStep, SaturatedForgetGateKeepsCell) {
    auto p = LstmParams::zeros(2, 1);
    p.forget_b.fill(50.0);
    LstmState s = LstmState::zeros(2);
    s.c = Matrix{{0.7}, {-1.3}};
    const auto r = lstm_step(p, Matrix{{1.0}}, s);
    EXPECT_NEAR(r.state.c[0], 0.7, 1e-12);
    EXPECT_NEAR(r.state.c[1], -1.3, 1e-12);
}

TEST(LstmStep, ShapeErrors) {
    const auto p = LstmParams::zeros(2, 1);
    EXPECT_THROW(lstm_step(p, Matrix(2, 1), LstmState::zeros(2)), ShapeError);
    EXPECT_THROW(lstm_step(p, Matrix(1, 1), LstmState::zeros(3)), ShapeError);
}

TEST(GruStep, ZeroWeightsHalveState) {
    const auto p = GruParams::zeros(2, 1);
    const auto r = gru_step(p, Matrix{{0.9}}, Matrix{{0.4}, {-0.6}});
    EXPECT_EQ(r.cache.update_gate[0], 0.5);
    EXPECT_EQ(r.cache.reset_gate[1], 0.5);
    EXPECT_EQ(r.cache.candidate[0], 0.0);
    EXPECT_EQ(r.h[0], 0.2);
    EXPECT_EQ(r.h[1], -0.3);
}

TEST(GruStep, UpdateGateEndpoints) {
    auto p = GruParams::zeros(2, 1, true);
    p.cand_x = Matrix{{2.0}, {-1.0}};
    const Matrix x{{0.5}}, h_prev{{0.3}, {-0.8}};

    p.update_b.fill(50.0);  // z -> 1: take the candidate
    auto r = gru_step(p, x, h_prev);
    EXPECT_NEAR(r.h[0], r.cache.candidate[0], 1e-12);
    EXPECT_NEAR(r.h[1], r.cache.candidate[1], 1e-12);

    p.update_b.fill(-50.0);  // z -> 0: keep the previous state
    r = gru_step(p, x, h_prev);
    EXPECT_NEAR(r.h[0], 0.3, 1e-12);
    EXPECT_NEAR(r.h[1], -0.8, 1e-12);
}

TEST(GruStep, ShapeErrors) {
    const auto p = GruParams::zeros(2, 1);
    EXPECT_THROW(gru_step(p, Matrix(3, 1), Matrix(2, 1)), ShapeError);
    EXPECT_THROW(gru_step(p, Matrix(1, 1), Matrix(1, 1)), ShapeError);
}

TEST(ForwardSequence, ZeroParamsPredictHeadBias) {
    auto lstm = LstmParams::zeros(4, 2);
    lstm.head_b[0] = 1.25;
    auto gru = GruParams::zeros(4, 2);
    gru.head_b[0] = -0.5;
    Rng rng(1);
    const auto xs = random_inputs(rng, 5, 2, 3.0);
    EXPECT_EQ(forward_sequence(lstm, xs).prediction, 1.25);
    EXPECT_EQ(forward_sequence(gru, xs).prediction, -0.5);
}

TEST(ForwardSequence, SingleStepIsStepPlusProjection) {
    Rng rng(12);
    const auto p = random_params(LstmParams::zeros(3, 2), rng, 0.5);
    const auto xs = random_inputs(rng, 1, 2, 1.0);
    const auto step = lstm_step(p, xs[0], LstmState::zeros(3));
    const double y = matmul(p.head_w, step.state.h)[0] + p.head_b[0];
    EXPECT_NEAR(forward_sequence(p, xs).prediction, y, 1e-15);
}

TEST(ForwardSequence, EmptyInputThrows) {
    EXPECT_THROW(forward_sequence(LstmParams::zeros(2, 1), std::span<const Matrix>{}), EmptyDataError);
    EXPECT_THROW(forward_sequence(GruParams::zeros(2, 1), std::span<const Matrix>{}), EmptyDataError);
}

TEST(ForwardSequence, Deterministic) {
    Rng rng(99);
    const auto p = random_params(GruParams::zeros(5, 3), rng, 0.6);
    const auto xs = random_inputs(rng, 8, 3, 1.0);
    const auto a = forward_sequence(p, xs), b = forward_sequence(p, xs);
    EXPECT_EQ(a.prediction, b.prediction);
    EXPECT_EQ(a.h_final, b.h_final);
}

// ---------------------------------------------------------------------------
// Invariants over random inputs

TEST(Invariants, GateRangesAndGruConvexity) {
    Rng rng(2718);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = 1 + rng.below(5), d = 1 + rng.below(3);
        const double scale = trial % 2 ? 3.0 : 0.5;
        const auto lp = random_params(LstmParams::zeros(h, d), rng, scale);
        const auto gp = random_params(GruParams::zeros(h, d, trial % 3 == 0), rng, scale);
        const auto xs = random_inputs(rng, 10, d, 5.0);
        for (const auto& k : forward_sequence(lp, xs).caches)
            for (std::size_t j = 0; j < h; ++j) {
                for (const Matrix* g : {&k.input_gate, &k.forget_gate, &k.output_gate}) {
                    ASSERT_GT((*g)[j], 0.0);
                    ASSERT_LT((*g)[j], 1.0);
                }
                ASSERT_GT(k.candidate[j], -1.0);
                ASSERT_LT(k.candidate[j], 1.0);
                ASSERT_LT(std::abs(lstm_hidden(k)[j]), 1.0);
            }
        for (const auto& k : forward_sequence(gp, xs).caches) {
            const Matrix hn = gru_hidden(k);
            for (std::size_t j = 0; j < h; ++j) {
                ASSERT_GT(k.update_gate[j], 0.0);
                ASSERT_LT(k.update_gate[j], 1.0);
                ASSERT_GT(k.reset_gate[j], 0.0);
                ASSERT_LT(k.reset_gate[j], 1.0);
                ASSERT_GT(k.candidate[j], -1.0);
                ASSERT_LT(k.candidate[j], 1.0);
                ASSERT_GE(hn[j], std::min(k.h_prev[j], k.candidate[j]));
                ASSERT_LE(hn[j], std::max(k.h_prev[j], k.candidate[j]));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Backward pass

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(5);
    const auto p = random_params(LstmParams::zeros(3, 2), rng, 0.5);
    const auto fwd = forward_sequence(p, random_inputs(rng, 4, 2, 1.0));
    const auto g = backward_sequence(p, fwd.caches, 0.0);
    g.for_each([](const char* name, const Matrix& m, bool) {
        for (double v : m.values()) EXPECT_EQ(v, 0.0) << name;
    });
    const auto gp = random_params(GruParams::zeros(3, 2), rng, 0.5);
    const auto gf = forward_sequence(gp, random_inputs(rng, 4, 2, 1.0));
    backward_sequence(gp, gf.caches, 0.0).for_each([](const char* name, const Matrix& m, bool) {
        for (double v : m.values()) EXPECT_EQ(v, 0.0) << name;
    });
}

TEST(Backward, HeadGradientsAreAffine) {
    Rng rng(6);
    const double d = -1.75;
    const auto p = random_params(LstmParams::zeros(4, 1), rng, 0.5);
    const auto fwd = forward_sequence(p, random_inputs(rng, 5, 1, 1.0));
    const auto g = backward_sequence(p, fwd.caches, d);
    EXPECT_EQ(g.head_b[0], d);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(g.head_w[j], d * fwd.h_final[j]);

    const auto gp = random_params(GruParams::zeros(4, 1), rng, 0.5);
    const auto gf = forward_sequence(gp, random_inputs(rng, 5, 1, 1.0));
    const auto gg = backward_sequence(gp, gf.caches, d);
    EXPECT_EQ(gg.head_b[0], d);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(gg.head_w[j], d * gf.h_final[j]);
}

TEST(Backward, LinearInUpstreamGradient) {
    Rng rng(31);
    const auto p = random_params(LstmParams::zeros(3, 2), rng, 0.5);
    const auto fwd = forward_sequence(p, random_inputs(rng, 4, 2, 1.0));
    const auto g3 = backward_sequence(p, fwd.caches, 3.0);
    const auto l3 = tensor_list(g3);
    const auto g1v = backward_sequence(p, fwd.caches, 1.0);
    const auto l1 = tensor_list(g1v);
    for (std::size_t m = 0; m < l1.size(); ++m)
        for (std::size_t i = 0; i < l1[m]->size(); ++i) EXPECT_NEAR((*l3[m])[i], 3.0 * (*l1[m])[i], 1e-14);
}

TEST(Backward, StructuralMismatchThrows) {
    Rng rng(2);
    const auto p = random_params(LstmParams::zeros(3, 2), rng, 0.5);
    const auto other = random_params(LstmParams::zeros(2, 2), rng, 0.5);
    const auto fwd = forward_sequence(other, random_inputs(rng, 3, 2, 1.0));
    EXPECT_THROW(backward_sequence(p, fwd.caches, 1.0), StructuralError);
    EXPECT_THROW(backward_sequence(p, std::vector<LstmStepCache>{}, 1.0), StructuralError);
    auto wrong = LstmGradients::zeros(2, 2);
    const auto own = forward_sequence(p, random_inputs(rng, 3, 2, 1.0));
    EXPECT_THROW(accumulate_gradients(p, std::span<const LstmStepCache>(own.caches), 1.0, wrong), StructuralError);
}

TEST(GradientCheck, NamedInstances) {
    EXPECT_LT(gradient_check(CellKind::lstm, 1, 3, 2, 5), 1e-4);
    EXPECT_LT(gradient_check(CellKind::gru, 2, 4, 1, 8), 1e-4);
    EXPECT_LT(gradient_check(CellKind::lstm, 3, 3, 2, 1), 1e-6);
    EXPECT_LT(gradient_check(CellKind::gru, 4, 3, 2, 1), 1e-6);
    EXPECT_THROW(gradient_check(CellKind::gru, 1, 0, 1, 1), ArgumentError);
}

TEST(GradientCheck, RandomInstancesIncludingBias) {
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        Rng shape(seed);
        const std::size_t h = 1 + shape.below(5), d = 1 + shape.below(3), T = 1 + shape.below(8);
        EXPECT_LT(gradient_check(random_check_instance<LstmParams>(seed, h, d, T)), 1e-4) << seed;
        EXPECT_LT(gradient_check(random_check_instance<GruParams>(seed, h, d, T)), 1e-4) << seed;
        EXPECT_LT(gradient_check(random_check_instance<GruParams>(seed, h, d, T, true)), 1e-4) << seed;
    }
}

TEST(GradientCheck, DetectsABrokenGradient) {
    // the check must be able to fail: corrupt one gradient entry and rerun the comparison by hand
    auto inst = random_check_instance<LstmParams>(7, 3, 2, 4);
    const auto fwd = forward_sequence(inst.params, inst.xs);
    auto g = backward_sequence(inst.params, fwd.caches, 2.0 * (fwd.prediction - inst.target));
    const double good = g.forget_c[4];
    const double step = 1e-5;
    auto loss = [&](const LstmParams& p) {
        const double e = forward_sequence(p, inst.xs).prediction - inst.target;
        return e * e;
    };
    auto up = inst.params, down = inst.params;
    up.forget_c[4] += step;
    down.forget_c[4] -= step;
    const double numeric = (loss(up) - loss(down)) / (2 * step);
    EXPECT_NEAR(good, numeric, 1e-6 + 1e-4 * std::abs(numeric));
    EXPECT_GT(std::abs(good * 1.01 - numeric), 1e-4 * std::abs(numeric));
}

TEST(Batch, AccumulationOrderIndependent) {
    Rng rng(44);
    const auto p = random_params(GruParams::zeros(4, 2), rng, 0.5);
    std::vector<std::vector<Matrix>> batch;
    std::vector<double> targets;
    for (int i = 0; i < 16; ++i) {
        batch.push_back(random_inputs(rng, 6, 2, 1.0));
        targets.push_back(rng.uniform(-1, 1));
    }
    auto accumulate = [&](const std::vector<int>& order) {
        auto g = GruGradients::zeros(4, 2);
        for (int i : order) {
            const auto fwd = forward_sequence(p, batch[i]);
            accumulate_gradients(p, std::span<const GruStepCache>(fwd.caches), 2 * (fwd.prediction - targets[i]) / 16,
                                 g);
        }
        return g;
    };
    std::vector<int> order(16);
    std::iota(order.begin(), order.end(), 0);
    const auto a = accumulate(order);
    std::reverse(order.begin(), order.end());
    const auto b = accumulate(order);
    const auto la = tensor_list(a), lb = tensor_list(b);
    for (std::size_t m = 0; m < la.size(); ++m)
        for (std::size_t i = 0; i < la[m]->size(); ++i) EXPECT_NEAR((*la[m])[i], (*lb[m])[i], 1e-10);
}

// ---------------------------------------------------------------------------
// Counting and serialization

TEST(ParamCount, ClosedFormsAndSmallExample) {
    EXPECT_EQ(lstm_param_count(2, 1), 47u);
    EXPECT_EQ(gru_param_count(2, 1), 21u);
    for (std::size_t h = 1; h <= 8; ++h)
        for (std::size_t d = 1; d <= 6; ++d) {
            EXPECT_EQ(param_count(LstmParams::zeros(h, d)), lstm_param_count(h, d));
            EXPECT_EQ(param_count(GruParams::zeros(h, d)), gru_param_count(h, d));
            EXPECT_EQ(param_count(GruParams::zeros(h, d, true)), gru_param_count(h, d, true));
            EXPECT_LT(gru_param_count(h, d), lstm_param_count(h, d));
        }
}

TEST(Serialization, RoundTripsBothCells) {
    Rng rng(17);
    const ModelParams lstm = init_lstm(3, 2, rng);
    const ModelParams gru = random_params(GruParams::zeros(2, 4, true), rng, 1.0);
    for (const auto& p : {lstm, gru}) {
        const auto doc = params_to_json(p, 17);
        const auto back = params_from_json(json::parse(doc.dump()));
        EXPECT_EQ(back.init_seed, 17u);
        EXPECT_TRUE(back.params == p);
    }
}

TEST(Serialization, RejectsMalformedDocuments) {
    Rng rng(1);
    auto doc = params_to_json(ModelParams(init_gru(2, 1, rng)), 1);
    auto bad = doc;
    bad["format"] = "something.else";
    EXPECT_THROW(params_from_json(bad), FormatError);
    bad = doc;
    bad["tensors"][0]["data"].push_back(1.0);
    EXPECT_THROW(params_from_json(bad), FormatError);
    bad = doc;
    bad["tensors"].erase(0);
    EXPECT_THROW(params_from_json(bad), FormatError);
}

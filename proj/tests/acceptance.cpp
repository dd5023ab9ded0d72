// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "gatecast/cli.hpp"
#include "test_support.hpp"

using namespace gatecast;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double grad_rel_tol = 1e-4;
constexpr double grad_eps = 1e-5;
constexpr double l2_grad_tol = 1e-6;
constexpr double sine_mse_tol = 0.01;
constexpr std::size_t gru_mse_wins_needed = 4;
constexpr double budget_grad = 30, budget_invariants = 10, budget_folds = 5, budget_l2 = 120, budget_sine = 120,
                 budget_btc = 900;

const std::string btc_csv = std::string(GATECAST_FIXTURES) + "/btc_usd_daily.csv";
const std::string acceptance_config = std::string(GATECAST_TESTS) + "/acceptance_config.json";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << detail << std::endl;
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

/// Curves from every training run made by the acceptance suite.
std::vector<std::pair<std::string, LossCurve>> curves;

// ---------------------------------------------------------------------------

void gradient_correctness() {
    const auto t0 = Clock::now();
    Rng shapes(101);
    double worst_lstm = 0.0, worst_gru = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const std::size_t h = 1 + shapes.below(5), d = 1 + shapes.below(3), T = 1 + shapes.below(8);
        worst_lstm = std::max(worst_lstm,
                              gradient_check(random_check_instance<LstmParams>(1000 + i, h, d, T), grad_eps));
        worst_gru = std::max(worst_gru, gradient_check(random_check_instance<GruParams>(2000 + i, h, d, T), grad_eps));
    }
    const double secs = seconds_since(t0);
    report(1, "gradient correctness", worst_lstm < grad_rel_tol && worst_gru < grad_rel_tol && secs < budget_grad,
           "max rel err lstm " + fmt(worst_lstm) + ", gru " + fmt(worst_gru) + " (tol " + fmt(grad_rel_tol) + "), " +
               fmt(secs) + " s (limit " + fmt(budget_grad) + " s)");
}

bool in_open(const Matrix& m, double lo, double hi) {
    for (double v : m.values())
        if (!(v > lo && v < hi)) return false;
    return true;
}

void randomize(Matrix& m, Rng& rng, double scale) {
    for (double& v : m.values()) v = rng.uniform(-scale, scale);
}

void gate_invariants() {
    const auto t0 = Clock::now();
    Rng rng(77);
    std::size_t lstm_bad = 0, gru_bad = 0;
    const std::size_t steps = 10000, per_model = 100;
    for (std::size_t block = 0; block < steps / per_model; ++block) {
        const std::size_t h = 1 + rng.below(6), d = 1 + rng.below(4);
        const double scale = rng.uniform(0.1, 8.0);  // up to heavily saturated weights
        auto lp = LstmParams::zeros(h, d);
        lp.for_each([&](const char*, Matrix& m, bool) { randomize(m, rng, scale); });
        auto gp = GruParams::zeros(h, d, rng.below(2) == 1);
        gp.for_each([&](const char*, Matrix& m, bool) { randomize(m, rng, scale); });
        auto ls = LstmState::zeros(h);
        Matrix gh(h, 1);
        randomize(ls.h, rng, 1.0);
        randomize(ls.c, rng, 3.0);
        randomize(gh, rng, 1.0);
        for (std::size_t s = 0; s < per_model; ++s) {
            Matrix x(d, 1);
            randomize(x, rng, 3.0);
            auto lr = lstm_step(lp, x, ls);
            const auto& k = lr.cache;
            if (!in_open(k.input_gate, 0, 1) || !in_open(k.forget_gate, 0, 1) || !in_open(k.output_gate, 0, 1) ||
                !in_open(k.candidate, -1, 1) || !in_open(lr.state.h, -1, 1))
                ++lstm_bad;
            ls = std::move(lr.state);

            auto gr = gru_step(gp, x, gh);
            const auto& g = gr.cache;
            bool ok = in_open(g.update_gate, 0, 1) && in_open(g.reset_gate, 0, 1) && in_open(g.candidate, -1, 1);
            for (std::size_t j = 0; j < h; ++j) {
                const double lo = std::min(gh[j], g.candidate[j]), hi = std::max(gh[j], g.candidate[j]);
                ok = ok && gr.h[j] >= lo && gr.h[j] <= hi;
            }
            if (!ok) ++gru_bad;
            gh = std::move(gr.h);
        }
    }
    const double secs = seconds_since(t0);
    report(2, "gate-range invariants", lstm_bad == 0 && gru_bad == 0 && secs < budget_invariants,
           std::to_string(steps) + " steps per cell, violations lstm " + std::to_string(lstm_bad) + ", gru " +
               std::to_string(gru_bad) + ", " + fmt(secs) + " s (limit " + fmt(budget_invariants) + " s)");
}

void fold_properties() {
    const auto t0 = Clock::now();
    std::size_t bad = 0, cases = 0;
    for (auto scheme : {FoldScheme::contiguous, FoldScheme::shuffled}) {
        for (std::size_t n = 5; n <= 200; ++n) {
            ++cases;
            const auto folds = kfold_split(n, 5, scheme, 9000 + n);
            std::vector<int> seen(n, 0);
            std::size_t lo = n, hi = 0;
            bool ok = folds.size() == 5;
            for (const auto& f : folds) {
                lo = std::min(lo, f.validation_indices.size());
                hi = std::max(hi, f.validation_indices.size());
                for (auto i : f.validation_indices) ok = ok && i < n && ++seen[i] == 1;
                ok = ok && f.train_indices.size() + f.validation_indices.size() == n;
            }
            for (int s : seen) ok = ok && s == 1;
            ok = ok && hi - lo <= 1;
            if (!ok) ++bad;
        }
    }
    const double secs = seconds_since(t0);
    report(3, "fold properties", bad == 0 && secs < budget_folds,
           std::to_string(cases) + " (n, scheme) cases, " + std::to_string(bad) + " bad, " + fmt(secs) + " s (limit " +
               fmt(budget_folds) + " s)");
}

struct SineTask {
    Scaler scaler;
    std::vector<WindowSample> train, test;
};

SineTask sine_task(std::size_t points, std::size_t T) {
    const auto series = fixtures::sine_series(points);
    TrainConfig cfg;
    cfg.window_len = T;
    std::vector<std::size_t> starts(window_count(series.size(), T, 1));
    std::iota(starts.begin(), starts.end(), std::size_t{0});
    const auto [train_starts, test_starts] = holdout_test_split(starts, 0.1);
    SineTask task;
    task.scaler = fit_scaler(series, cfg.feature_set, sample_record_ranges(train_starts, T, 1));
    task.train = make_windows(series, task.scaler, cfg.feature_set, T, 1, train_starts);
    task.test = make_windows(series, task.scaler, cfg.feature_set, T, 1, test_starts);
    return task;
}

template <class P, class G>
double l2_gradient_error(const P& trained, double lambda) {
    P p = trained;
    G grads = G::zeros(p.hidden_size, p.input_size);
    if constexpr (std::is_same_v<P, GruParams>) grads = G::zeros(p.hidden_size, p.input_size, p.with_bias);
    add_l2_gradient(p, lambda, grads);
    auto pt = tensor_list(p);
    const auto gt = tensor_list(grads);
    double worst = 0.0;
    const double eps = 1e-6;
    for (std::size_t k = 0; k < pt.size(); ++k)
        for (std::size_t i = 0; i < pt[k]->size(); ++i) {
            const double w = (*pt[k])[i];
            (*pt[k])[i] = w + eps;
            const double up = l2_penalty(p, lambda);
            (*pt[k])[i] = w - eps;
            const double down = l2_penalty(p, lambda);
            (*pt[k])[i] = w;
            worst = std::max(worst, std::abs((*gt[k])[i] - (up - down) / (2 * eps)));
        }
    return worst;
}

void l2_behavior() {
    const auto t0 = Clock::now();
    const auto task = sine_task(300, 20);
    bool decreasing = true;
    double worst_grad = 0.0;
    std::string sums;
    for (auto kind : {CellKind::lstm, CellKind::gru}) {
        double prev = std::numeric_limits<double>::infinity();
        sums += std::string(to_string(kind)) + " sum w^2";
        for (double lambda : {0.0, 1e-3, 1e-1}) {
            TrainConfig cfg;
            cfg.cell_kind = kind;
            cfg.window_len = 20;
            cfg.hidden_size = 16;
            cfg.epochs = 40;
            cfg.lambda = lambda;
            cfg.seed = 4;
            const auto m = train_model(cfg, task.train, task.test, task.scaler, cfg.seed);
            curves.emplace_back(std::string(to_string(kind)) + " l2 lambda=" + fmt(lambda), m.curve);
            const double s = weight_sum_squares(m.params);
            sums += " " + fmt(s, 5);
            decreasing = decreasing && s < prev;
            prev = s;
            if (lambda > 0) {
                const double e = kind == CellKind::lstm
                                     ? l2_gradient_error<LstmParams, LstmGradients>(std::get<LstmParams>(m.params), lambda)
                                     : l2_gradient_error<GruParams, GruGradients>(std::get<GruParams>(m.params), lambda);
                worst_grad = std::max(worst_grad, e);
            }
        }
        sums += "; ";
    }
    const double secs = seconds_since(t0);
    report(4, "L2 behavior", decreasing && worst_grad < l2_grad_tol && secs < budget_l2,
           sums + "2*lambda*w max abs err " + fmt(worst_grad) + " (tol " + fmt(l2_grad_tol) + "), " + fmt(secs) +
               " s (limit " + fmt(budget_l2) + " s)");
}

void sine_learnability() {
    const auto t0 = Clock::now();
    const auto task = sine_task(500, 20);
    double worst = 0.0;
    std::string detail;
    for (auto kind : {CellKind::lstm, CellKind::gru}) {
        TrainConfig cfg;
        cfg.cell_kind = kind;
        cfg.window_len = 20;
        cfg.hidden_size = 16;
        cfg.epochs = 200;
        cfg.seed = 1;
        const auto m = train_model(cfg, task.train, {}, task.scaler, cfg.seed);
        curves.emplace_back(std::string(to_string(kind)) + " sine", m.curve);
        const auto r = evaluate(m, task.test);
        worst = std::max(worst, r.test_mse);
        detail += std::string(to_string(kind)) + " test mse " + fmt(r.test_mse) + ", ";
    }
    const double secs = seconds_since(t0);
    report(5, "synthetic learnability", worst < sine_mse_tol && secs < budget_sine,
           detail + "tol " + fmt(sine_mse_tol) + ", " + fmt(secs) + " s (limit " + fmt(budget_sine) + " s)");
}

void btc_direction() {
    const auto t0 = Clock::now();
    const TrainConfig cfg = load_config(acceptance_config);
    const auto series = load_csv(btc_csv).series;
    std::size_t gru_wins = 0, gru_faster = 0, seeds = 0;
    std::string errors;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ++seeds;
        TrainConfig c = cfg;
        c.seed = seed;
        try {
            const auto rep = compare(c, series);
            const bool win = rep.gru.test_mse <= rep.lstm.test_mse;
            const bool faster = rep.gru.mean_epoch_seconds < rep.lstm.mean_epoch_seconds;
            gru_wins += win;
            gru_faster += faster;
            for (const auto* arm : {&rep.lstm, &rep.gru})
                for (std::size_t i = 0; i < arm->run_curves.size(); ++i)
                    curves.emplace_back("btc seed " + std::to_string(seed) + " " + std::string(to_string(arm->cell_kind)) +
                                            " run " + std::to_string(i),
                                        arm->run_curves[i]);
            std::cout << "      seed " << seed << ": test mse lstm " << fmt(rep.lstm.test_mse, 4) << ", gru "
                      << fmt(rep.gru.test_mse, 4) << "; s/epoch lstm " << fmt(rep.lstm.mean_epoch_seconds)
                      << ", gru " << fmt(rep.gru.mean_epoch_seconds) << "; speed ratio " << fmt(rep.speed_ratio)
                      << std::endl;
        } catch (const std::exception& e) {
            errors += " seed " + std::to_string(seed) + " failed: " + e.what() + ";";
        }
    }
    const double secs = seconds_since(t0);
    report(6, "directional LSTM vs GRU comparison",
           gru_wins >= gru_mse_wins_needed && gru_faster == seeds && errors.empty() && secs < budget_btc,
           "gru mse <= lstm in " + std::to_string(gru_wins) + "/" + std::to_string(seeds) + " seeds (need " +
               std::to_string(gru_mse_wins_needed) + "), gru faster in " + std::to_string(gru_faster) + "/" +
               std::to_string(seeds) + " (need all), " + std::to_string(cfg.epochs) + " epochs, " + fmt(secs) +
               " s (limit " + fmt(budget_btc) + " s)" + errors);
}

void loss_curve_sanity() {
    std::size_t checked = 0;
    std::vector<std::string> bad;
    for (const auto& [name, c] : curves) {
        ++checked;
        bool ok = c.train.size() >= 10 && c.train[9] < c.train[0];
        for (const auto* v : {&c.train, &c.validation})
            for (double x : *v) ok = ok && std::isfinite(x);
        if (!ok) bad.push_back(name);
    }
    std::string detail = std::to_string(checked) + " training runs checked, " + std::to_string(bad.size()) + " bad";
    for (std::size_t i = 0; i < bad.size() && i < 5; ++i) detail += (i ? ", " : ": ") + bad[i];
    report(7, "loss-curve sanity", checked > 0 && bad.empty(), detail);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism() {
    const auto root = fs::temp_directory_path() / "gatecast_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg = root / "config.json";
    std::ofstream(cfg) << "{\"epochs\": 3, \"hidden_size\": 8}";
    int rc = 0;
    for (const char* sub : {"a", "b"}) {
        CompareArgs a;
        a.csv = btc_csv;
        a.config = cfg.string();
        a.seeds = "1";
        a.out = (root / sub).string();
        std::ostringstream out, err;
        rc |= cmd_compare(a, out, err);
    }
    std::string detail = "reduced config (3 epochs, hidden 8), seed 1:";
    bool ok = rc == 0;
    for (const char* f : {"predictions.csv", "loss_curves.csv"}) {
        const auto a = slurp(root / "a" / "seed_1" / f), b = slurp(root / "b" / "seed_1" / f);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        detail += std::string(" ") + f + (same ? " identical" : " differs");
    }
    report(8, "determinism", ok, detail);
}

void parameter_counts() {
    std::size_t pairs = 0, bad = 0;
    Rng rng(3);
    for (std::size_t h = 1; h <= 64; ++h)
        for (std::size_t d = 1; d <= 8; ++d) {
            ++pairs;
            const auto l = param_count(ModelParams{init_lstm(h, d, rng)});
            const auto g = param_count(ModelParams{init_gru(h, d, rng)});
            const auto gb = param_count(ModelParams{init_gru(h, d, rng, true)});
            if (l != lstm_param_count(h, d) || g != gru_param_count(h, d) || gb != gru_param_count(h, d, true) ||
                !(g < l) || !(gb < l))
                ++bad;
        }
    report(9, "parameter counts", bad == 0,
           std::to_string(pairs) + " (hidden, input) pairs, " + std::to_string(bad) +
               " mismatches; at hidden 32, input 1: lstm " + std::to_string(lstm_param_count(32, 1)) + ", gru " +
               std::to_string(gru_param_count(32, 1)));
}

void guard(int id, const char* name, const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("threw: ") + e.what());
    }
}

}  // namespace

int main() {
    guard(1, "gradient correctness", gradient_correctness);
    guard(2, "gate-range invariants", gate_invariants);
    guard(3, "fold properties", fold_properties);
    guard(4, "L2 behavior", l2_behavior);
    guard(5, "synthetic learnability", sine_learnability);
    guard(6, "directional LSTM vs GRU comparison", btc_direction);
    guard(7, "loss-curve sanity", loss_curve_sanity);
    guard(8, "determinism", determinism);
    guard(9, "parameter counts", parameter_counts);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "gatecast/folds.hpp"
#include "gatecast/sequence.hpp"
#include "gatecast/windows.hpp"

namespace gatecast {

enum class OptimizerKind { adam, sgd };

inline std::string_view to_string(OptimizerKind o) noexcept { return o == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ArgumentError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

/// Every training knob. Field names match the JSON config keys.
struct TrainConfig {
    CellKind cell_kind = CellKind::lstm;
    std::size_t hidden_size = 32;
    std::size_t window_len = 30;
    FeatureSet feature_set = {Feature::close};
    double learning_rate = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lambda = 1e-4;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double clip_norm = 5.0;
    std::size_t k_folds = 5;
    FoldScheme fold_scheme = FoldScheme::contiguous;

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError(m); };
        if (hidden_size == 0) fail("hidden_size must be positive");
        if (window_len == 0) fail("window_len must be positive");
        if (feature_set.empty()) fail("feature_set must not be empty");
        for (std::size_t i = 0; i < feature_set.size(); ++i)
            for (std::size_t j = i + 1; j < feature_set.size(); ++j)
                if (feature_set[i] == feature_set[j])
                    fail("feature_set lists '" + std::string(to_string(feature_set[i])) + "' twice");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
        if (batch_size == 0) fail("batch_size must be positive");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
        if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
        if (k_folds < 2) fail("k_folds must be >= 2");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------------------
// Losses

namespace detail {
inline void check_pair(std::span<const double> a, std::span<const double> b, const char* name) {
    if (a.empty()) throw ArgumentError(std::string(name) + ": empty input");
    if (a.size() != b.size())
        throw ArgumentError(std::string(name) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
}
}  // namespace detail

inline double mse(std::span<const double> pred, std::span<const double> target) {
    detail::check_pair(pred, target, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

inline double mae(std::span<const double> pred, std::span<const double> target) {
    detail::check_pair(pred, target, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

/// lambda * sum of squared weights. Bias tensors do not count.
template <class P>
double l2_penalty(const P& params, double lambda) {
    if (lambda < 0.0) throw ArgumentError("l2_penalty: lambda must be >= 0");
    if (lambda == 0.0) return 0.0;
    double s = 0.0;
    params.for_each([&](const char*, const Matrix& m, bool bias) {
        if (!bias) s += sum_squares(m);
    });
    return lambda * s;
}

inline double l2_penalty(const ModelParams& params, double lambda) {
    return std::visit([&](const auto& p) { return l2_penalty(p, lambda); }, params);
}

/// Sum of squared weights (biases excluded).
inline double weight_sum_squares(const ModelParams& params) { return l2_penalty(params, 1.0); }

/// grads += 2 lambda w for every weight entry.
template <class P, class G>
void add_l2_gradient(const P& params, double lambda, G& grads) {
    if (lambda == 0.0) return;
    const auto pt = tensor_list(params);
    auto gt = tensor_list(grads);
    std::size_t idx = 0;
    params.for_each([&](const char*, const Matrix&, bool bias) {
        if (!bias) axpy(gt[idx]->values(), pt[idx]->values(), 2.0 * lambda);
        ++idx;
    });
}

// ---------------------------------------------------------------------------
// Optimizers

template <class G>
double global_norm(const G& grads) {
    double s = 0.0;
    grads.for_each([&](const char*, const Matrix& m, bool) { s += sum_squares(m); });
    return std::sqrt(s);
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`. Returns the norm before clipping.
template <class G>
double clip_global_norm(G& grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double f = max_norm / norm;
        grads.for_each([&](const char*, Matrix& m, bool) {
            for (double& v : m.values()) v *= f;
        });
    }
    return norm;
}

template <class G>
struct AdamState {
    G m;
    G v;
    std::uint64_t step = 0;
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double epsilon = 1e-8;
};

template <class P>
AdamState<GradientsOf<P>> adam_init(const P& params) {
    return {CellTraits<P>::zero_gradients(params), CellTraits<P>::zero_gradients(params), 0};
}

namespace detail {
template <class P, class G>
void check_congruent(const P& params, const G& grads) {
    const auto pt = tensor_list(params);
    const auto gt = tensor_list(grads);
    bool ok = pt.size() == gt.size();
    for (std::size_t i = 0; ok && i < pt.size(); ++i) ok = pt[i]->same_shape(*gt[i]);
    if (!ok) throw StructuralError("optimizer: gradients do not match parameter shapes");
}
}  // namespace detail

/// In-place bias-corrected Adam update.
template <class P, class G>
void apply_adam(P& params, const G& grads, AdamState<G>& state, double learning_rate) {
    detail::check_congruent(params, grads);
    detail::check_congruent(params, state.m);
    detail::check_congruent(params, state.v);
    using S = AdamState<G>;
    ++state.step;
    const double c1 = 1.0 - std::pow(S::beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(S::beta2, static_cast<double>(state.step));
    auto pt = tensor_list(params);
    const auto gt = tensor_list(grads);
    auto mt = tensor_list(state.m);
    auto vt = tensor_list(state.v);
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto w = pt[k]->values();
        const auto g = gt[k]->values();
        auto m = mt[k]->values();
        auto v = vt[k]->values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = S::beta1 * m[i] + (1.0 - S::beta1) * g[i];
            v[i] = S::beta2 * v[i] + (1.0 - S::beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + S::epsilon);
        }
    }
}

template <class P, class G>
struct AdamStepResult {
    P params;
    AdamState<G> state;
};

/// Value-returning form of `apply_adam`.
template <class P, class G>
AdamStepResult<P, G> adam_step(P params, const G& grads, AdamState<G> state, double learning_rate) {
    apply_adam(params, grads, state, learning_rate);
    return {std::move(params), std::move(state)};
}

/// w <- w - lr * g
template <class P, class G>
void apply_sgd(P& params, const G& grads, double learning_rate) {
    detail::check_congruent(params, grads);
    auto pt = tensor_list(params);
    const auto gt = tensor_list(grads);
    for (std::size_t k = 0; k < pt.size(); ++k) axpy(pt[k]->values(), gt[k]->values(), -learning_rate);
}

template <class P, class G>
P sgd_step(P params, const G& grads, double learning_rate) {
    apply_sgd(params, grads, learning_rate);
    return params;
}

// ---------------------------------------------------------------------------
// Training loop

struct LossCurve {
    std::vector<double> train;
    std::vector<double> validation;  // empty when trained without a validation set

    friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

struct TrainedModel {
    ModelParams params;
    Scaler scaler;
    TrainConfig config;
    LossCurve curve;
    std::vector<double> epoch_seconds;
    std::size_t horizon = 1;
    std::uint64_t init_seed = 0;  // stream the weights and batch order were drawn from
};

inline ModelParams init_params(CellKind kind, std::size_t hidden, std::size_t input, Rng& rng) {
    if (kind == CellKind::lstm) return init_lstm(hidden, input, rng);
    return init_gru(hidden, input, rng);
}

/// Normalized-scale predictions for every sample.
inline std::vector<double> predict_samples(const ModelParams& params, std::span<const WindowSample> samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(predict(params, s.inputs));
    return out;
}

inline std::vector<double> targets_of(std::span<const WindowSample> samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.target);
    return out;
}

namespace detail {

template <class P>
bool all_finite(const P& p) {
    bool ok = true;
    p.for_each([&](const char*, const Matrix& m, bool) { ok = ok && m.all_finite(); });
    return ok;
}

template <class P>
void run_epochs(P& params, const TrainConfig& cfg, std::span<const WindowSample> train,
                std::span<const WindowSample> val, Rng& rng, TrainedModel& model) {
    using G = GradientsOf<P>;
    using Clock = std::chrono::steady_clock;
    G grads = CellTraits<P>::zero_gradients(params);
    auto adam = adam_init(params);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = train.size();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = Clock::now();
        rng.shuffle(order);
        double weighted_loss = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const double inv_b = 1.0 / static_cast<double>(end - begin);
            grads.for_each([](const char*, Matrix& m, bool) { m.fill(0.0); });
            double sq = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const WindowSample& s = train[order[k]];
                const auto fwd = forward_sequence(params, std::span<const Matrix>(s.inputs));
                const double e = fwd.prediction - s.target;
                sq += e * e;
                accumulate_gradients(params, std::span<const typename CellTraits<P>::Cache>(fwd.caches),
                                     2.0 * e * inv_b, grads);
            }
            const double loss = sq * inv_b + l2_penalty(params, cfg.lambda);
            if (!std::isfinite(loss))
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                          std::to_string(batch_no + 1),
                                      epoch + 1, batch_no + 1);
            weighted_loss += loss * static_cast<double>(end - begin);
            add_l2_gradient(params, cfg.lambda, grads);
            clip_global_norm(grads, cfg.clip_norm);
            if (cfg.optimizer == OptimizerKind::adam)
                apply_adam(params, grads, adam, cfg.learning_rate);
            else
                apply_sgd(params, grads, cfg.learning_rate);
        }
        if (!all_finite(params) || !all_finite(adam.m) || !all_finite(adam.v))
            throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch + 1), epoch + 1,
                                  batch_no);
        model.epoch_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        model.curve.train.push_back(weighted_loss / static_cast<double>(n));

        if (!val.empty()) {
            double sq = 0.0;
            for (const auto& s : val) {
                const double e = forward_sequence(params, std::span<const Matrix>(s.inputs)).prediction - s.target;
                sq += e * e;
            }
            const double vloss = sq / static_cast<double>(val.size());
            if (!std::isfinite(vloss))
                throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch + 1), epoch + 1,
                                      batch_no);
            model.curve.validation.push_back(vloss);
        }
    }
}

}  // namespace detail

/**
 * Trains a fresh model on `train`, recording per-epoch training loss (batch
 * MSE plus L2 penalty, averaged over samples), validation MSE and wall-clock
 * seconds. Weights and batch order come from `Rng(stream_seed)`.
 *
 * `val` may be empty, in which case no validation curve is recorded.
 */
inline TrainedModel train_model(const TrainConfig& cfg, std::span<const WindowSample> train,
                                std::span<const WindowSample> val, Scaler scaler, std::uint64_t stream_seed) {
    cfg.validate();
    if (train.empty()) throw InsufficientDataError("no training samples");
    const std::size_t input = cfg.feature_set.size();
    for (auto set : {train, val})
        for (const auto& s : set)
            if (s.inputs.size() != cfg.window_len || s.inputs.front().rows() != input)
                throw CompatibilityError("sample shape does not match config window_len/feature_set");

    Rng rng(stream_seed);
    TrainedModel model;
    model.params = init_params(cfg.cell_kind, cfg.hidden_size, input, rng);
    model.scaler = std::move(scaler);
    model.config = cfg;
    model.init_seed = stream_seed;
    std::visit([&](auto& p) { detail::run_epochs(p, cfg, train, val, rng, model); }, model.params);
    return model;
}

/// One cross-validation fold: both sample sets must be nonempty.
inline TrainedModel train_fold(const TrainConfig& cfg, std::span<const WindowSample> train,
                               std::span<const WindowSample> val, Scaler scaler, std::uint64_t stream_seed) {
    if (train.empty() || val.empty()) throw InsufficientDataError("train_fold needs nonempty train and validation sets");
    return train_model(cfg, train, val, std::move(scaler), stream_seed);
}

inline TrainedModel train_fold(const TrainConfig& cfg, std::span<const WindowSample> train,
                               std::span<const WindowSample> val, Scaler scaler = {}) {
    return train_fold(cfg, train, val, std::move(scaler), cfg.seed);
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
    FoldSplit split;
    TrainedModel model;
    double validation_mse = 0.0;
    double validation_mae = 0.0;
};

struct CrossValidationResult {
    std::vector<FoldResult> folds;
    double mean_mse = 0.0, std_mse = 0.0;
    double mean_mae = 0.0, std_mae = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
inline std::pair<double, double> mean_std(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// Per-fold data: scaler refit on the fold's training records, then windowed.
struct FoldData {
    Scaler scaler;
    std::vector<WindowSample> train;
    std::vector<WindowSample> validation;
};

inline FoldData prepare_fold(const TrainConfig& cfg, const PriceSeries& series, std::span<const std::size_t> starts,
                             const FoldSplit& split, std::size_t horizon = 1) {
    std::vector<std::size_t> train_starts, val_starts;
    for (auto i : split.train_indices) train_starts.push_back(starts[i]);
    for (auto i : split.validation_indices) val_starts.push_back(starts[i]);
    FoldData d;
    d.scaler = fit_scaler(series, cfg.feature_set, sample_record_ranges(train_starts, cfg.window_len, horizon));
    d.train = make_windows(series, d.scaler, cfg.feature_set, cfg.window_len, horizon, train_starts);
    d.validation = make_windows(series, d.scaler, cfg.feature_set, cfg.window_len, horizon, val_starts);
    return d;
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads; rethrows the first failure by index.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& work) {
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            work(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += jobs) guarded(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/**
 * k-fold cross-validation over the samples starting at `starts` (record
 * indices, time-ordered). Fold f trains from stream seed `cfg.seed ^ f`, so
 * results do not depend on `jobs`.
 */
inline CrossValidationResult cross_validate(const TrainConfig& cfg, const PriceSeries& series,
                                            std::span<const std::size_t> starts, std::size_t jobs = 1,
                                            std::size_t horizon = 1) {
    cfg.validate();
    const auto splits = kfold_split(starts.size(), cfg.k_folds, cfg.fold_scheme, cfg.seed);
    CrossValidationResult out;
    out.folds.resize(splits.size());
    parallel_for(splits.size(), jobs, [&](std::size_t f) {
        try {
            FoldData d = prepare_fold(cfg, series, starts, splits[f], horizon);
            FoldResult r;
            r.split = splits[f];
            r.model = train_fold(cfg, d.train, d.validation, std::move(d.scaler), cfg.seed ^ f);
            const auto pred = predict_samples(r.model.params, d.validation);
            const auto tgt = targets_of(d.validation);
            r.validation_mse = mse(pred, tgt);
            r.validation_mae = mae(pred, tgt);
            out.folds[f] = std::move(r);
        } catch (const DivergenceError& e) {
            throw DivergenceError("fold " + std::to_string(f) + ": " + e.what(), e.epoch(), e.batch());
        } catch (const FoldError& e) {
            throw FoldError("fold " + std::to_string(f) + ": " + e.what());
        }
    });
    std::vector<double> mses, maes;
    for (const auto& r : out.folds) {
        mses.push_back(r.validation_mse);
        maes.push_back(r.validation_mae);
    }
    std::tie(out.mean_mse, out.std_mse) = mean_std(mses);
    std::tie(out.mean_mae, out.std_mae) = mean_std(maes);
    return out;
}

/// Mean over folds of the per-epoch training and validation curves.
inline LossCurve mean_curve(const CrossValidationResult& cv) {
    LossCurve c;
    if (cv.folds.empty()) return c;
    const std::size_t epochs = cv.folds.front().model.curve.train.size();
    c.train.assign(epochs, 0.0);
    c.validation.assign(epochs, 0.0);
    for (const auto& f : cv.folds)
        for (std::size_t e = 0; e < epochs; ++e) {
            c.train[e] += f.model.curve.train[e];
            c.validation[e] += f.model.curve.validation[e];
        }
    for (std::size_t e = 0; e < epochs; ++e) {
        c.train[e] /= static_cast<double>(cv.folds.size());
        c.validation[e] /= static_cast<double>(cv.folds.size());
    }
    return c;
}

/// Grid searched when a lambda sweep is requested without an explicit grid.
inline const std::vector<double> default_lambda_grid = {0.0, 1e-4, 1e-3, 1e-2, 1e-1};

struct LambdaScore {
    double lambda = 0.0;
    double mean_mse = 0.0;
    double std_mse = 0.0;
};

/// Cross-validates each lambda in `grid`; returns scores in grid order.
inline std::vector<LambdaScore> sweep_lambda(const TrainConfig& cfg, const PriceSeries& series,
                                             std::span<const std::size_t> starts, std::span<const double> grid,
                                             std::size_t jobs = 1, std::size_t horizon = 1) {
    std::vector<LambdaScore> out;
    for (double lambda : grid) {
        TrainConfig c = cfg;
        c.lambda = lambda;
        const auto cv = cross_validate(c, series, starts, jobs, horizon);
        out.push_back({lambda, cv.mean_mse, cv.std_mse});
    }
    return out;
}

/// Lowest mean validation MSE; ties keep the earlier grid entry.
inline double best_lambda(std::span<const LambdaScore> scores) {
    if (scores.empty()) throw ArgumentError("best_lambda: empty sweep");
    return std::min_element(scores.begin(), scores.end(),
                            [](const LambdaScore& a, const LambdaScore& b) { return a.mean_mse < b.mean_mse; })
        ->lambda;
}

}  // namespace gatecast

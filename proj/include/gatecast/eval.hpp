#pragma once

#include <charconv>
#include <chrono>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gatecast/config_io.hpp"
#include "gatecast/training.hpp"
#include "json.hpp"

namespace gatecast {

struct FoldMetrics {
    std::size_t fold = 0;
    double mse = 0.0;
    double mae = 0.0;
    friend bool operator==(const FoldMetrics&, const FoldMetrics&) = default;
};

/// Test-set accuracy and cost of one trained cell.
struct MetricsReport {
    CellKind cell_kind = CellKind::lstm;
    double test_mse = 0.0;      // normalized scale
    double test_mae = 0.0;      // normalized scale
    double test_mse_usd = 0.0;  // USD^2
    double test_mae_usd = 0.0;  // USD
    double mean_epoch_seconds = 0.0;
    double std_epoch_seconds = 0.0;
    std::size_t timed_epochs = 0;
    std::size_t param_count = 0;
    std::vector<FoldMetrics> folds;
    double cv_mean_mse = 0.0, cv_std_mse = 0.0;
    double cv_mean_mae = 0.0, cv_std_mae = 0.0;
    TrainConfig config;
    std::uint64_t seed = 0;
    std::vector<LambdaScore> lambda_sweep;  // empty unless a grid was searched
    LossCurve cv_curve;                     // fold-mean training/validation curves
    std::vector<LossCurve> run_curves;      // each fold, then the final retrain; not exported
    std::vector<std::size_t> test_indices;  // record index of each test target
    std::vector<double> predictions_usd;
    std::vector<double> actual_usd;
};

struct ComparisonReport {
    MetricsReport lstm;
    MetricsReport gru;
    CellKind mse_winner = CellKind::gru;
    double speed_ratio = 0.0;  // lstm seconds per epoch / gru seconds per epoch
    double test_fraction = 0.1;
    std::vector<std::string> test_dates;
};

struct EpochTiming {
    double mean = 0.0;
    double std = 0.0;
    std::size_t epochs = 0;  // epochs measured, warm-up excluded
};

/// Wall-clock per epoch with the first epoch discarded.
inline EpochTiming summarize_epoch_times(std::span<const double> seconds) {
    if (seconds.size() < 2) return {};
    const auto [mean, sd] = mean_std(seconds.subspan(1));
    return {mean, sd, seconds.size() - 1};
}

/**
 * Trains `kind` on `samples` for `n_epochs` and reports per-epoch seconds,
 * excluding the first (warm-up) epoch.
 */
inline EpochTiming benchmark_epoch_time(CellKind kind, TrainConfig cfg, std::span<const WindowSample> samples,
                                        std::size_t n_epochs) {
    if (n_epochs < 3) throw ArgumentError("benchmark_epoch_time needs at least 3 epochs");
    cfg.cell_kind = kind;
    cfg.epochs = n_epochs;
    const auto model = train_model(cfg, samples, {}, Scaler{}, cfg.seed);
    return summarize_epoch_times(model.epoch_seconds);
}

/// Normalized and USD test metrics for `model`. Timing comes from the model's epoch log.
inline MetricsReport evaluate(const TrainedModel& model, std::span<const WindowSample> test) {
    if (test.empty()) throw InsufficientDataError("evaluate: empty test set");
    if (model.scaler.stats.empty()) throw CompatibilityError("evaluate: model carries no scaler");
    const std::size_t input = model.scaler.features.size();
    const std::size_t expected_input = std::visit([](const auto& p) { return p.input_size; }, model.params);
    if (input != expected_input) throw CompatibilityError("evaluate: scaler and parameters disagree on input size");
    for (const auto& s : test)
        if (s.inputs.empty() || s.inputs.front().rows() != input || s.inputs.size() != model.config.window_len)
            throw CompatibilityError("evaluate: test samples do not match the model's features or window length");

    MetricsReport r;
    r.cell_kind = cell_kind(model.params);
    r.config = model.config;
    r.seed = model.config.seed;
    r.param_count = param_count(model.params);
    const auto pred = predict_samples(model.params, test);
    const auto tgt = targets_of(test);
    r.test_mse = mse(pred, tgt);
    r.test_mae = mae(pred, tgt);
    for (std::size_t i = 0; i < test.size(); ++i) {
        r.predictions_usd.push_back(model.scaler.inverse_target(pred[i]));
        r.actual_usd.push_back(model.scaler.inverse_target(tgt[i]));
        r.test_indices.push_back(test[i].target_index);
    }
    r.test_mse_usd = mse(r.predictions_usd, r.actual_usd);
    r.test_mae_usd = mae(r.predictions_usd, r.actual_usd);
    const auto timing = summarize_epoch_times(model.epoch_seconds);
    r.mean_epoch_seconds = timing.mean;
    r.std_epoch_seconds = timing.std;
    r.timed_epochs = timing.epochs;
    return r;
}

struct CompareOptions {
    double test_fraction = 0.1;
    std::size_t jobs = 1;             // worker threads for cross-validation folds
    std::vector<double> lambda_grid;  // empty: use config lambda as given
    std::size_t horizon = 1;
};

/**
 * Trains and evaluates one arm; used by `compare`. The retrained model is
 * moved into `final_out` when given.
 */
inline MetricsReport run_arm(const TrainConfig& base, CellKind kind, const PriceSeries& series,
                             std::span<const std::size_t> cv_starts, std::span<const std::size_t> test_starts,
                             const CompareOptions& opt, TrainedModel* final_out = nullptr) {
    TrainConfig cfg = base;
    cfg.cell_kind = kind;
    try {
        std::vector<LambdaScore> sweep;
        if (!opt.lambda_grid.empty()) {
            sweep = sweep_lambda(cfg, series, cv_starts, opt.lambda_grid, opt.jobs, opt.horizon);
            cfg.lambda = best_lambda(sweep);
        }
        const auto cv = cross_validate(cfg, series, cv_starts, opt.jobs, opt.horizon);

        const Scaler scaler =
            fit_scaler(series, cfg.feature_set, sample_record_ranges(cv_starts, cfg.window_len, opt.horizon));
        const auto train = make_windows(series, scaler, cfg.feature_set, cfg.window_len, opt.horizon, cv_starts);
        const auto test = make_windows(series, scaler, cfg.feature_set, cfg.window_len, opt.horizon, test_starts);
        TrainedModel final_model = train_model(cfg, train, {}, scaler, cfg.seed);
        final_model.horizon = opt.horizon;

        MetricsReport r = evaluate(final_model, test);
        if (r.timed_epochs < 2) {
            // too few epochs to time from the run itself
            const auto t = benchmark_epoch_time(kind, cfg, train, 3);
            r.mean_epoch_seconds = t.mean;
            r.std_epoch_seconds = t.std;
            r.timed_epochs = t.epochs;
        }
        for (const auto& f : cv.folds)
            r.folds.push_back({f.split.fold_index, f.validation_mse, f.validation_mae});
        r.cv_mean_mse = cv.mean_mse;
        r.cv_std_mse = cv.std_mse;
        r.cv_mean_mae = cv.mean_mae;
        r.cv_std_mae = cv.std_mae;
        r.cv_curve = mean_curve(cv);
        for (const auto& f : cv.folds) r.run_curves.push_back(f.model.curve);
        r.run_curves.push_back(final_model.curve);
        r.lambda_sweep = std::move(sweep);
        if (final_out) *final_out = std::move(final_model);
        return r;
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(to_string(kind)) + ": " + e.what(), e.epoch(), e.batch());
    } catch (const Error& e) {
        throw Error(std::string(to_string(kind)) + ": " + e.what());
    }
}

/// Sample starts for cross-validation and for the most recent `test_fraction` holdout.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_sample_starts(const TrainConfig& base,
                                                                                        const PriceSeries& series,
                                                                                        const CompareOptions& opt) {
    base.validate();
    const std::size_t n = window_count(series.size(), base.window_len, opt.horizon);
    if (n == 0) throw InsufficientDataError("series too short for the configured window");
    std::vector<std::size_t> starts(n);
    std::iota(starts.begin(), starts.end(), std::size_t{0});
    auto split = holdout_test_split(starts, opt.test_fraction);
    if (split.first.size() < base.k_folds)
        throw InsufficientDataError("only " + std::to_string(split.first.size()) + " samples for " +
                                    std::to_string(base.k_folds) + " folds");
    return split;
}

/**
 * LSTM versus GRU under one configuration: the most recent `test_fraction` of
 * windows is held out, each arm is cross-validated on the rest, retrained on
 * all of it, and scored on the holdout. Only `cell_kind` differs between arms.
 * Arms run one after the other so their epoch timings do not overlap.
 */
inline ComparisonReport compare(const TrainConfig& base, const PriceSeries& series, const CompareOptions& opt = {}) {
    const auto [cv_starts, test_starts] = split_sample_starts(base, series, opt);
    ComparisonReport rep;
    rep.test_fraction = opt.test_fraction;
    rep.lstm = run_arm(base, CellKind::lstm, series, cv_starts, test_starts, opt);
    rep.gru = run_arm(base, CellKind::gru, series, cv_starts, test_starts, opt);
    rep.mse_winner = rep.lstm.test_mse < rep.gru.test_mse ? CellKind::lstm : CellKind::gru;
    rep.speed_ratio = rep.lstm.mean_epoch_seconds / rep.gru.mean_epoch_seconds;
    for (std::size_t idx : rep.lstm.test_indices) rep.test_dates.push_back(format_date(series[idx].date));
    return rep;
}

// ---------------------------------------------------------------------------
// Export

/// Shortest decimal string that parses back to the same double.
inline std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json folds = nlohmann::json::array(), sweep = nlohmann::json::array();
    for (const auto& f : r.folds) folds.push_back({{"fold", f.fold}, {"mse", f.mse}, {"mae", f.mae}});
    for (const auto& s : r.lambda_sweep)
        sweep.push_back({{"lambda", s.lambda}, {"mean_mse", s.mean_mse}, {"std_mse", s.std_mse}});
    return {{"cell_kind", std::string(to_string(r.cell_kind))},
            {"test_mse", r.test_mse},
            {"test_mae", r.test_mae},
            {"test_mse_usd", r.test_mse_usd},
            {"test_mae_usd", r.test_mae_usd},
            {"mean_epoch_seconds", r.mean_epoch_seconds},
            {"std_epoch_seconds", r.std_epoch_seconds},
            {"timed_epochs", r.timed_epochs},
            {"param_count", r.param_count},
            {"folds", folds},
            {"cv_mean_mse", r.cv_mean_mse},
            {"cv_std_mse", r.cv_std_mse},
            {"cv_mean_mae", r.cv_mean_mae},
            {"cv_std_mae", r.cv_std_mae},
            {"config", config_to_json(r.config)},
            {"seed", r.seed},
            {"lambda_sweep", sweep},
            {"cv_curve", {{"train", r.cv_curve.train}, {"validation", r.cv_curve.validation}}},
            {"test_indices", r.test_indices},
            {"predictions_usd", r.predictions_usd},
            {"actual_usd", r.actual_usd}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.cell_kind = parse_cell_kind(j.at("cell_kind").get<std::string>());
    j.at("test_mse").get_to(r.test_mse);
    j.at("test_mae").get_to(r.test_mae);
    j.at("test_mse_usd").get_to(r.test_mse_usd);
    j.at("test_mae_usd").get_to(r.test_mae_usd);
    j.at("mean_epoch_seconds").get_to(r.mean_epoch_seconds);
    j.at("std_epoch_seconds").get_to(r.std_epoch_seconds);
    j.at("timed_epochs").get_to(r.timed_epochs);
    j.at("param_count").get_to(r.param_count);
    for (const auto& f : j.at("folds")) r.folds.push_back({f.at("fold"), f.at("mse"), f.at("mae")});
    j.at("cv_mean_mse").get_to(r.cv_mean_mse);
    j.at("cv_std_mse").get_to(r.cv_std_mse);
    j.at("cv_mean_mae").get_to(r.cv_mean_mae);
    j.at("cv_std_mae").get_to(r.cv_std_mae);
    r.config = config_from_json(j.at("config"));
    j.at("seed").get_to(r.seed);
    for (const auto& s : j.at("lambda_sweep")) r.lambda_sweep.push_back({s.at("lambda"), s.at("mean_mse"), s.at("std_mse")});
    j.at("cv_curve").at("train").get_to(r.cv_curve.train);
    j.at("cv_curve").at("validation").get_to(r.cv_curve.validation);
    j.at("test_indices").get_to(r.test_indices);
    j.at("predictions_usd").get_to(r.predictions_usd);
    j.at("actual_usd").get_to(r.actual_usd);
    return r;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json report_to_json(const ComparisonReport& r) {
    return {{"lstm", metrics_to_json(r.lstm)},
            {"gru", metrics_to_json(r.gru)},
            {"mse_winner", std::string(to_string(r.mse_winner))},
            {"speed_ratio", r.speed_ratio},
            {"test_fraction", r.test_fraction},
            {"test_dates", r.test_dates}};
}

inline ComparisonReport report_from_json(const nlohmann::json& j) {
    try {
        ComparisonReport r;
        r.lstm = metrics_from_json(j.at("lstm"));
        r.gru = metrics_from_json(j.at("gru"));
        r.mse_winner = parse_cell_kind(j.at("mse_winner").get<std::string>());
        j.at("speed_ratio").get_to(r.speed_ratio);
        j.at("test_fraction").get_to(r.test_fraction);
        j.at("test_dates").get_to(r.test_dates);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

namespace detail {
inline void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out.flush()) throw Error("write failed for " + path.string());
}
}  // namespace detail

inline std::string predictions_csv(const ComparisonReport& r) {
    std::string s = "date,actual_usd,lstm_pred_usd,gru_pred_usd\n";
    for (std::size_t i = 0; i < r.test_dates.size(); ++i)
        s += r.test_dates[i] + "," + format_real(r.lstm.actual_usd[i]) + "," + format_real(r.lstm.predictions_usd[i]) +
             "," + format_real(r.gru.predictions_usd[i]) + "\n";
    return s;
}

inline std::string loss_curves_csv(const ComparisonReport& r) {
    std::string s = "epoch,lstm_train,lstm_val,gru_train,gru_val\n";
    const std::size_t epochs = r.lstm.cv_curve.train.size();
    for (std::size_t e = 0; e < epochs; ++e)
        s += std::to_string(e + 1) + "," + format_real(r.lstm.cv_curve.train[e]) + "," +
             format_real(r.lstm.cv_curve.validation[e]) + "," + format_real(r.gru.cv_curve.train[e]) + "," +
             format_real(r.gru.cv_curve.validation[e]) + "\n";
    return s;
}

/**
 * Writes `predictions.csv`, `loss_curves.csv` and `report.json` into `out_dir`
 * (created if needed). The CSVs contain no timestamps; report.json carries the
 * generation time under "metadata".
 */
inline std::vector<std::filesystem::path> export_report(const ComparisonReport& r,
                                                        const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
    const auto pred = out_dir / "predictions.csv", curves = out_dir / "loss_curves.csv", json = out_dir / "report.json";
    detail::write_text(pred, predictions_csv(r));
    detail::write_text(curves, loss_curves_csv(r));
    auto doc = report_to_json(r);
    doc["metadata"] = {{"generated_at", utc_timestamp()}};
    detail::write_text(json, doc.dump(2) + "\n");
    return {pred, curves, json};
}

}  // namespace gatecast

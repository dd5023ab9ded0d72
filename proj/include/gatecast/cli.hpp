#pragma once

// Command implementations behind tools/gatecast. Each cmd_* returns a process
// exit code and writes human-readable output to the given streams.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gatecast/digest.hpp"
#include "gatecast/gatecast.hpp"
#include "json.hpp"

namespace gatecast {

inline constexpr const char* tool_version = "1.0.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int input = 2;
inline constexpr int divergence = 3;
}  // namespace exit_code

/// 3 for divergence, 2 for any other library error, 1 otherwise.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DivergenceError*>(&e)) return exit_code::divergence;
    if (dynamic_cast<const Error*>(&e)) return exit_code::input;
    return exit_code::failure;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    std::string command;
    nlohmann::json config;  // resolved settings, null if the command takes none
    std::string input_path;
    std::string input_sha256;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;
    std::string version = tool_version;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"config", m.config},
            {"input", {{"path", m.input_path}, {"sha256", m.input_sha256}}},
            {"started_at", m.started_at},
            {"finished_at", m.finished_at},
            {"outputs", m.outputs},
            {"version", m.version}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    j.at("command").get_to(m.command);
    m.config = j.at("config");
    j.at("input").at("path").get_to(m.input_path);
    j.at("input").at("sha256").get_to(m.input_sha256);
    j.at("started_at").get_to(m.started_at);
    j.at("finished_at").get_to(m.finished_at);
    j.at("outputs").get_to(m.outputs);
    j.at("version").get_to(m.version);
    return m;
}

inline void write_manifest(RunManifest m, const std::filesystem::path& path) {
    m.finished_at = utc_timestamp();
    detail::write_text(path, manifest_to_json(m).dump(2) + "\n");
}

/// CSV bytes plus the digest of exactly those bytes.
struct InputFile {
    std::string path;
    std::string sha256;
    LoadReport load;
};

inline InputFile read_input_csv(const std::string& path) {
    InputFile f;
    f.path = path;
    const std::string bytes = read_file(path);
    f.sha256 = sha256_hex(bytes);
    std::istringstream in(bytes);
    f.load = parse_csv(in, path);
    return f;
}

// ---------------------------------------------------------------------------
// ingest

struct FeatureRange {
    double min = 0.0;
    double max = 0.0;
    friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

struct IngestReport {
    std::string source;
    std::string sha256;
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t dropped_rows = 0;
    std::string first_date;
    std::string last_date;
    std::map<std::string, FeatureRange> features;

    friend bool operator==(const IngestReport&, const IngestReport&) = default;
};

inline IngestReport summarize_ingest(const InputFile& f) {
    IngestReport r;
    const auto& s = f.load.series;
    r.source = f.path;
    r.sha256 = f.sha256;
    r.rows_read = f.load.rows_read;
    r.rows_kept = s.size();
    r.dropped_rows = f.load.dropped_rows;
    r.first_date = format_date(s[0].date);
    r.last_date = format_date(s[s.size() - 1].date);
    for (Feature feat : all_features()) {
        FeatureRange fr{s[0].get(feat), s[0].get(feat)};
        for (const auto& rec : s) {
            fr.min = std::min(fr.min, rec.get(feat));
            fr.max = std::max(fr.max, rec.get(feat));
        }
        r.features[std::string(to_string(feat))] = fr;
    }
    return r;
}

inline nlohmann::json ingest_to_json(const IngestReport& r) {
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [name, fr] : r.features) features[name] = {{"min", fr.min}, {"max", fr.max}};
    return {{"source", r.source},         {"sha256", r.sha256},         {"rows_read", r.rows_read},
            {"rows_kept", r.rows_kept},   {"dropped_rows", r.dropped_rows}, {"first_date", r.first_date},
            {"last_date", r.last_date},   {"features", features}};
}

inline IngestReport ingest_from_json(const nlohmann::json& j) {
    IngestReport r;
    j.at("source").get_to(r.source);
    j.at("sha256").get_to(r.sha256);
    j.at("rows_read").get_to(r.rows_read);
    j.at("rows_kept").get_to(r.rows_kept);
    j.at("dropped_rows").get_to(r.dropped_rows);
    j.at("first_date").get_to(r.first_date);
    j.at("last_date").get_to(r.last_date);
    for (const auto& [name, v] : j.at("features").items())
        r.features[name] = {v.at("min").get<double>(), v.at("max").get<double>()};
    return r;
}

struct IngestArgs {
    std::string csv;
    std::string report;    // optional JSON report path
    std::string manifest;  // defaults to <report>.manifest.json when a report is written
};

inline int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunManifest m;
        m.command = "ingest";
        m.started_at = utc_timestamp();
        const auto input = read_input_csv(a.csv);
        m.input_path = input.path;
        m.input_sha256 = input.sha256;
        const auto r = summarize_ingest(input);

        out << "source: " << r.source << "\n"
            << "sha256: " << r.sha256 << "\n"
            << "rows: " << r.rows_read << " read, " << r.rows_kept << " kept, " << r.dropped_rows << " dropped\n"
            << "span: " << r.first_date << " -> " << r.last_date << "\n";
        for (Feature f : all_features()) {
            const auto& fr = r.features.at(std::string(to_string(f)));
            out << to_string(f) << ": min " << format_real(fr.min) << ", max " << format_real(fr.max) << "\n";
        }

        if (!a.report.empty()) {
            detail::write_text(a.report, ingest_to_json(r).dump(2) + "\n");
            m.outputs.push_back(a.report);
        }
        const std::string manifest = !a.manifest.empty() ? a.manifest
                                     : !a.report.empty() ? a.report + ".manifest.json"
                                                         : std::string{};
        if (!manifest.empty()) write_manifest(m, manifest);
        return exit_code::ok;
    });
}

// ---------------------------------------------------------------------------
// train

/// Flag overrides; unset fields leave the config file (or default) value.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> hidden_size;
    std::optional<double> lambda;
};

/// Precedence: flag > config file > built-in default.
inline TrainConfig resolve_config(const std::string& config_path, const ConfigOverrides& o) {
    TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.hidden_size) c.hidden_size = *o.hidden_size;
    if (o.lambda) c.lambda = *o.lambda;
    c.validate();
    return c;
}

struct TrainArgs {
    std::string csv;
    std::string config;
    std::string cell;  // empty keeps the config's cell_kind
    std::string out;
    ConfigOverrides overrides;
    std::size_t jobs = 1;
    double test_fraction = 0.1;
};

inline std::string single_curve_csv(const LossCurve& c) {
    std::string s = "epoch,train,validation\n";
    for (std::size_t e = 0; e < c.train.size(); ++e)
        s += std::to_string(e + 1) + "," + format_real(c.train[e]) + "," +
             (e < c.validation.size() ? format_real(c.validation[e]) : std::string{}) + "\n";
    return s;
}

inline std::string single_predictions_csv(const MetricsReport& r, const PriceSeries& series) {
    std::string s = "date,actual_usd,pred_usd\n";
    for (std::size_t i = 0; i < r.test_indices.size(); ++i)
        s += format_date(series[r.test_indices[i]].date) + "," + format_real(r.actual_usd[i]) + "," +
             format_real(r.predictions_usd[i]) + "\n";
    return s;
}

/**
 * Cross-validates one cell, retrains it on all non-holdout samples and scores
 * it on the holdout. Writes model.json, metrics.json, loss_curves.csv,
 * predictions.csv and manifest.json into `out`.
 */
inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunManifest m;
        m.command = "train";
        m.started_at = utc_timestamp();
        TrainConfig cfg = resolve_config(a.config, a.overrides);
        if (!a.cell.empty()) {
            try {
                cfg.cell_kind = parse_cell_kind(a.cell);
            } catch (const ArgumentError& e) {
                throw ConfigError(e.what());
            }
        }
        m.config = config_to_json(cfg);
        const auto input = read_input_csv(a.csv);
        m.input_path = input.path;
        m.input_sha256 = input.sha256;
        const PriceSeries& series = input.load.series;

        CompareOptions opt;
        opt.jobs = a.jobs;
        opt.test_fraction = a.test_fraction;
        const auto [cv_starts, test_starts] = split_sample_starts(cfg, series, opt);
        TrainedModel model;
        const MetricsReport metrics = run_arm(cfg, cfg.cell_kind, series, cv_starts, test_starts, opt, &model);

        const std::filesystem::path dir(a.out);
        std::filesystem::create_directories(dir);
        auto metrics_doc = metrics_to_json(metrics);
        metrics_doc["epoch_seconds"] = model.epoch_seconds;
        const std::vector<std::pair<std::filesystem::path, std::string>> files = {
            {dir / "model.json", model_to_json(model).dump(2) + "\n"},
            {dir / "metrics.json", metrics_doc.dump(2) + "\n"},
            {dir / "loss_curves.csv", single_curve_csv(metrics.cv_curve)},
            {dir / "predictions.csv", single_predictions_csv(metrics, series)},
        };
        for (const auto& [path, body] : files) {
            detail::write_text(path, body);
            m.outputs.push_back(path.string());
        }
        write_manifest(m, dir / "manifest.json");

        out << to_string(cfg.cell_kind) << ": cv mse " << format_real(metrics.cv_mean_mse) << " +/- "
            << format_real(metrics.cv_std_mse) << ", test mse " << format_real(metrics.test_mse) << " (usd^2 "
            << format_real(metrics.test_mse_usd) << "), " << format_real(metrics.mean_epoch_seconds)
            << " s/epoch\n";
        return exit_code::ok;
    });
}

// ---------------------------------------------------------------------------
// compare

/// Parses "1,2,3", "1-5" or "1..5" (and mixtures such as "1-3,7").
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    auto number = [&](std::string_view s) {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
            throw ConfigError("bad seed '" + std::string(s) + "' in seed list");
        return v;
    };
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, comma - pos);
        const auto dots = item.find("..");
        const auto dash = item.find('-');
        if (dots != std::string_view::npos || dash != std::string_view::npos) {
            const bool is_dots = dots != std::string_view::npos;
            const std::size_t at = is_dots ? dots : dash;
            const auto lo = number(item.substr(0, at)), hi = number(item.substr(at + (is_dots ? 2 : 1)));
            if (hi < lo) throw ConfigError("descending seed range '" + std::string(item) + "'");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(number(item));
        }
        pos = comma + 1;
    }
    if (seeds.empty()) throw ConfigError("no seeds given");
    return seeds;
}

struct CompareArgs {
    std::string csv;
    std::string config;
    std::string seeds;
    std::string out;
    std::size_t jobs = 1;
    std::vector<double> lambda_grid;
    double test_fraction = 0.1;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    int exit_code = exit_code::ok;
    std::string error;
    double lstm_test_mse = 0.0;
    double gru_test_mse = 0.0;
    double speed_ratio = 0.0;
    CellKind mse_winner = CellKind::gru;
};

struct CompareSummary {
    std::vector<SeedOutcome> seeds;
    std::size_t gru_mse_wins = 0;
    std::size_t lstm_mse_wins = 0;
    std::size_t gru_faster = 0;
    double mean_speed_ratio = 0.0;  // over completed seeds
    std::size_t failed = 0;
};

inline CompareSummary summarize(std::vector<SeedOutcome> seeds) {
    CompareSummary s;
    std::vector<double> ratios;
    for (const auto& o : seeds) {
        if (!o.ok) {
            ++s.failed;
            continue;
        }
        ++(o.mse_winner == CellKind::gru ? s.gru_mse_wins : s.lstm_mse_wins);
        if (o.speed_ratio > 1.0) ++s.gru_faster;
        ratios.push_back(o.speed_ratio);
    }
    s.mean_speed_ratio = mean_std(ratios).first;
    s.seeds = std::move(seeds);
    return s;
}

inline nlohmann::json summary_to_json(const CompareSummary& s) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& o : s.seeds) {
        nlohmann::json j = {{"seed", o.seed}, {"ok", o.ok}};
        if (o.ok) {
            j["lstm_test_mse"] = o.lstm_test_mse;
            j["gru_test_mse"] = o.gru_test_mse;
            j["speed_ratio"] = o.speed_ratio;
            j["mse_winner"] = std::string(to_string(o.mse_winner));
        } else {
            j["error"] = o.error;
            j["exit_code"] = o.exit_code;
        }
        seeds.push_back(j);
    }
    return {{"seeds", seeds},
            {"gru_mse_wins", s.gru_mse_wins},
            {"lstm_mse_wins", s.lstm_mse_wins},
            {"gru_faster", s.gru_faster},
            {"mean_speed_ratio", s.mean_speed_ratio},
            {"failed", s.failed}};
}

/**
 * Runs `compare` once per seed into `<out>/seed_<N>/`, then writes
 * summary.json and manifest.json. A failing seed is reported and skipped; the
 * exit code is that of the first failure.
 */
inline int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunManifest m;
        m.command = "compare";
        m.started_at = utc_timestamp();
        const TrainConfig base = resolve_config(a.config, {});
        const auto seeds = parse_seed_list(a.seeds);
        m.config = config_to_json(base);
        m.config["seeds"] = seeds;
        m.config["lambda_grid"] = a.lambda_grid;
        m.config["test_fraction"] = a.test_fraction;
        const auto input = read_input_csv(a.csv);
        m.input_path = input.path;
        m.input_sha256 = input.sha256;

        CompareOptions opt;
        opt.jobs = a.jobs;
        opt.lambda_grid = a.lambda_grid;
        opt.test_fraction = a.test_fraction;
        const std::filesystem::path dir(a.out);
        std::filesystem::create_directories(dir);

        std::vector<SeedOutcome> outcomes;
        int first_failure = exit_code::ok;
        for (std::uint64_t seed : seeds) {
            SeedOutcome o;
            o.seed = seed;
            try {
                TrainConfig cfg = base;
                cfg.seed = seed;
                const auto rep = compare(cfg, input.load.series, opt);
                for (const auto& p : export_report(rep, dir / ("seed_" + std::to_string(seed))))
                    m.outputs.push_back(p.string());
                o.ok = true;
                o.lstm_test_mse = rep.lstm.test_mse;
                o.gru_test_mse = rep.gru.test_mse;
                o.speed_ratio = rep.speed_ratio;
                o.mse_winner = rep.mse_winner;
                out << "seed " << seed << ": lstm mse " << format_real(rep.lstm.test_mse) << ", gru mse "
                    << format_real(rep.gru.test_mse) << ", speed ratio " << format_real(rep.speed_ratio) << "\n";
            } catch (const std::exception& e) {
                o.exit_code = exit_code_for(e);
                o.error = e.what();
                if (first_failure == exit_code::ok) first_failure = o.exit_code;
                err << "seed " << seed << " failed: " << e.what() << "\n";
            }
            outcomes.push_back(std::move(o));
        }

        const auto summary = summarize(std::move(outcomes));
        detail::write_text(dir / "summary.json", summary_to_json(summary).dump(2) + "\n");
        m.outputs.push_back((dir / "summary.json").string());
        write_manifest(m, dir / "manifest.json");
        out << "gru wins " << summary.gru_mse_wins << "/" << summary.seeds.size() << ", mean speed ratio "
            << format_real(summary.mean_speed_ratio) << "\n";
        return first_failure;
    });
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string model;
    std::string csv;
    bool last_window_only = false;
    std::string out;       // empty: stdout
    std::string manifest;  // defaults to <out>.manifest.json when writing a file
};

struct DatedPrediction {
    std::string date;
    double close_usd = 0.0;
};

/**
 * One USD prediction per window of the series. The row is dated by the
 * target record, or by calendar days past the last record for windows whose
 * target lies beyond the data.
 */
inline std::vector<DatedPrediction> predict_series(const TrainedModel& model, const PriceSeries& series,
                                                   bool last_window_only) {
    const std::size_t T = model.config.window_len, h = model.horizon;
    if (model.scaler.features != model.config.feature_set)
        throw CompatibilityError("model scaler and config disagree on features");
    const std::size_t input = std::visit([](const auto& p) { return p.input_size; }, model.params);
    if (input != model.scaler.features.size())
        throw CompatibilityError("model parameters expect " + std::to_string(input) + " features, scaler has " +
                                 std::to_string(model.scaler.features.size()));
    if (series.size() < T)
        throw InsufficientDataError("series of " + std::to_string(series.size()) + " records is shorter than window " +
                                    std::to_string(T));
    std::vector<DatedPrediction> out;
    const std::size_t last_start = series.size() - T;
    for (std::size_t start = last_window_only ? last_start : 0; start <= last_start; ++start) {
        std::vector<Matrix> xs;
        xs.reserve(T);
        for (std::size_t t = 0; t < T; ++t) xs.push_back(scaled_inputs(series, model.scaler, start + t));
        const double y = model.scaler.inverse_target(predict(model.params, xs));
        const std::size_t target = start + T + h - 1;
        const Date d = target < series.size()
                           ? series[target].date
                           : add_days(series[series.size() - 1].date, static_cast<int>(target - (series.size() - 1)));
        out.push_back({format_date(d), y});
    }
    return out;
}

inline int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        RunManifest m;
        m.command = "predict";
        m.started_at = utc_timestamp();
        const TrainedModel model = load_model(a.model);
        m.config = {{"model", a.model}, {"last_window_only", a.last_window_only}};
        const auto input = read_input_csv(a.csv);
        m.input_path = input.path;
        m.input_sha256 = input.sha256;

        std::string body = "date,pred_close_usd\n";
        for (const auto& p : predict_series(model, input.load.series, a.last_window_only))
            body += p.date + "," + format_real(p.close_usd) + "\n";
        if (a.out.empty()) {
            out << body;
        } else {
            detail::write_text(a.out, body);
            m.outputs.push_back(a.out);
        }
        const std::string manifest = !a.manifest.empty() ? a.manifest
                                     : !a.out.empty()      ? a.out + ".manifest.json"
                                                           : std::string{};
        if (!manifest.empty()) write_manifest(m, manifest);
        return exit_code::ok;
    });
}

}  // namespace gatecast

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gatecast/params_io.hpp"
#include "gatecast/training.hpp"
#include "json.hpp"

namespace gatecast {

inline constexpr const char* config_keys[] = {"cell_kind", "hidden_size", "window_len", "feature_set",
                                              "learning_rate", "epochs", "batch_size", "lambda",
                                              "seed", "optimizer", "clip_norm", "k_folds", "fold_scheme"};

/// Levenshtein distance, for "did you mean" hints.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string closest_config_key(std::string_view key) {
    std::string best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    for (const char* k : config_keys) {
        const auto d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best_d <= std::max<std::size_t>(3, key.size() / 2) ? best : std::string{};
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    nlohmann::json features = nlohmann::json::array();
    for (Feature f : c.feature_set) features.push_back(std::string(to_string(f)));
    return {{"cell_kind", std::string(to_string(c.cell_kind))},
            {"hidden_size", c.hidden_size},
            {"window_len", c.window_len},
            {"feature_set", features},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lambda", c.lambda},
            {"seed", c.seed},
            {"optimizer", std::string(to_string(c.optimizer))},
            {"clip_norm", c.clip_norm},
            {"k_folds", c.k_folds},
            {"fold_scheme", std::string(to_string(c.fold_scheme))}};
}

/**
 * Reads a TrainConfig. Missing keys keep `base` values; unknown keys are
 * rejected with a suggestion. `feature_set` is a list of feature names or the
 * string "all".
 */
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(config_keys), std::end(config_keys), [&](const char* k) { return key == k; }) ==
            std::end(config_keys)) {
            const auto hint = closest_config_key(key);
            throw ConfigError("unknown config key \"" + key + "\"" +
                              (hint.empty() ? std::string{} : "; did you mean \"" + hint + "\"?"));
        }
    }
    auto field = [&](const char* key, auto& slot) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(slot);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config key \"") + key + "\" has the wrong type: " + j.at(key).dump());
        }
    };
    auto text = [&](const char* key, auto parse, auto& slot) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_string()) throw ConfigError(std::string("config key \"") + key + "\" must be a string");
        try {
            slot = parse(j.at(key).get<std::string>());
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
        }
    };
    auto count = [&](const char* key, std::size_t& slot) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(std::string("config key \"") + key + "\" must be a non-negative integer");
        slot = v.get<std::size_t>();
    };

    TrainConfig c = std::move(base);
    text("cell_kind", parse_cell_kind, c.cell_kind);
    count("hidden_size", c.hidden_size);
    count("window_len", c.window_len);
    if (j.contains("feature_set")) {
        const auto& fs = j.at("feature_set");
        if (fs.is_string() && fs.get<std::string>() == "all") {
            c.feature_set = all_features();
        } else if (fs.is_array()) {
            c.feature_set.clear();
            for (const auto& f : fs) {
                if (!f.is_string()) throw ConfigError("feature_set entries must be strings");
                try {
                    c.feature_set.push_back(parse_feature(f.get<std::string>()));
                } catch (const ArgumentError& e) {
                    throw ConfigError(std::string("config key \"feature_set\": ") + e.what());
                }
            }
        } else {
            throw ConfigError("feature_set must be a list of feature names or \"all\"");
        }
    }
    field("learning_rate", c.learning_rate);
    count("epochs", c.epochs);
    count("batch_size", c.batch_size);
    field("lambda", c.lambda);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
            throw ConfigError("config key \"seed\" must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    text("optimizer", parse_optimizer, c.optimizer);
    field("clip_norm", c.clip_norm);
    count("k_folds", c.k_folds);
    text("fold_scheme", parse_fold_scheme, c.fold_scheme);
    c.validate();
    return c;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::move(base));
}

// ---------------------------------------------------------------------------
// Model documents

inline nlohmann::json scaler_to_json(const Scaler& s) {
    nlohmann::json features = nlohmann::json::array(), stats = nlohmann::json::array(),
                   ranges = nlohmann::json::array();
    for (Feature f : s.features) features.push_back(std::string(to_string(f)));
    for (const auto& m : s.stats) stats.push_back({{"min", m.min}, {"max", m.max}});
    for (const auto& r : s.fit_ranges) ranges.push_back({r.begin, r.end});
    return {{"features", features},
            {"stats", stats},
            {"target", {{"min", s.target.min}, {"max", s.target.max}}},
            {"fit_ranges", ranges}};
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler s;
    for (const auto& f : j.at("features")) s.features.push_back(parse_feature(f.get<std::string>()));
    for (const auto& m : j.at("stats")) s.stats.push_back({m.at("min").get<double>(), m.at("max").get<double>()});
    s.target = {j.at("target").at("min").get<double>(), j.at("target").at("max").get<double>()};
    for (const auto& r : j.at("fit_ranges")) s.fit_ranges.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
    if (s.stats.size() != s.features.size()) throw FormatError("scaler stats do not match its feature list");
    return s;
}

inline constexpr const char* model_format = "gatecast.model";

/**
 * Model document: parameters (see params_io.hpp), scaler, config snapshot,
 * loss curves and horizon. Wall-clock timings are kept out so that identical
 * runs produce identical files.
 */
inline nlohmann::json model_to_json(const TrainedModel& m) {
    return {{"format", model_format},
            {"version", 1},
            {"params", params_to_json(m.params, m.init_seed)},
            {"scaler", scaler_to_json(m.scaler)},
            {"config", config_to_json(m.config)},
            {"horizon", m.horizon},
            {"loss_curve", {{"train", m.curve.train}, {"validation", m.curve.validation}}}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != model_format) throw FormatError("not a gatecast model document");
        TrainedModel m;
        auto loaded = params_from_json(j.at("params"));
        m.params = std::move(loaded.params);
        m.init_seed = loaded.init_seed;
        m.scaler = scaler_from_json(j.at("scaler"));
        m.config = config_from_json(j.at("config"));
        m.horizon = j.at("horizon").get<std::size_t>();
        m.curve.train = j.at("loss_curve").at("train").get<std::vector<double>>();
        m.curve.validation = j.at("loss_curve").at("validation").get<std::vector<double>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model document: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("malformed model document: ") + e.what());
    }
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model " + path + " is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace gatecast

#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gatecast/linalg.hpp"
#include "gatecast/ohlcv.hpp"
#include "gatecast/scaler.hpp"

namespace gatecast {

/// One supervised example: T normalized input vectors and the normalized close
/// `horizon` days after the last input day.
struct WindowSample {
    std::vector<Matrix> inputs;
    double target = 0.0;
    std::size_t start = 0;         // record index of the first input day
    std::size_t target_index = 0;  // record index of the target day
};

/// Number of windows a series of `length` records yields.
inline std::size_t window_count(std::size_t length, std::size_t window_len, std::size_t horizon) noexcept {
    return length >= window_len + horizon ? length - window_len - horizon + 1 : 0;
}

/// Records touched by sample `start` (inputs and target).
inline IndexRange window_span(std::size_t start, std::size_t window_len, std::size_t horizon) noexcept {
    return {start, start + window_len + horizon};
}

/// Merged record ranges covered by the given samples; the fit range for a fold's scaler.
inline std::vector<IndexRange> sample_record_ranges(std::span<const std::size_t> starts, std::size_t window_len,
                                                    std::size_t horizon) {
    std::vector<IndexRange> ranges;
    ranges.reserve(starts.size());
    for (std::size_t s : starts) ranges.push_back(window_span(s, window_len, horizon));
    return merge_ranges(std::move(ranges));
}

namespace detail {

inline void check_window_args(const PriceSeries& series, const Scaler& scaler, const FeatureSet& features,
                              std::size_t window_len, std::size_t horizon) {
    if (window_len == 0 || horizon == 0) throw ArgumentError("window length and horizon must be >= 1");
    if (scaler.features != features) throw CompatibilityError("scaler was fit on a different feature set");
    if (series.size() <= window_len + horizon - 1)
        throw InsufficientDataError("series of " + std::to_string(series.size()) +
                                    " records is too short for window " + std::to_string(window_len) +
                                    " and horizon " + std::to_string(horizon));
}

}  // namespace detail

/// Input vector for record `i`: the scaled feature columns.
inline Matrix scaled_inputs(const PriceSeries& series, const Scaler& scaler, std::size_t i) {
    Matrix x(scaler.features.size(), 1);
    for (std::size_t f = 0; f < scaler.features.size(); ++f)
        x[f] = scaler.transform(f, series[i].get(scaler.features[f]));
    return x;
}

inline WindowSample make_window(const PriceSeries& series, const Scaler& scaler, std::size_t start,
                                std::size_t window_len, std::size_t horizon) {
    WindowSample w;
    w.start = start;
    w.target_index = start + window_len + horizon - 1;
    w.inputs.reserve(window_len);
    for (std::size_t t = 0; t < window_len; ++t) w.inputs.push_back(scaled_inputs(series, scaler, start + t));
    w.target = scaler.transform_target(series[w.target_index].close);
    return w;
}

/// Windows for the listed sample starts only.
inline std::vector<WindowSample> make_windows(const PriceSeries& series, const Scaler& scaler,
                                              const FeatureSet& features, std::size_t window_len, std::size_t horizon,
                                              std::span<const std::size_t> starts) {
    detail::check_window_args(series, scaler, features, window_len, horizon);
    const std::size_t n = window_count(series.size(), window_len, horizon);
    std::vector<WindowSample> out;
    out.reserve(starts.size());
    for (std::size_t s : starts) {
        if (s >= n) throw ArgumentError("sample index " + std::to_string(s) + " out of range");
        out.push_back(make_window(series, scaler, s, window_len, horizon));
    }
    return out;
}

/// Every window: sample i reads records i..i+T-1 and targets record i+T+horizon-1.
inline std::vector<WindowSample> make_windows(const PriceSeries& series, const Scaler& scaler,
                                              const FeatureSet& features, std::size_t window_len,
                                              std::size_t horizon = 1) {
    detail::check_window_args(series, scaler, features, window_len, horizon);
    std::vector<std::size_t> starts(window_count(series.size(), window_len, horizon));
    std::iota(starts.begin(), starts.end(), std::size_t{0});
    return make_windows(series, scaler, features, window_len, horizon, starts);
}

}  // namespace gatecast

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gatecast/ohlcv.hpp"

namespace gatecast {

/// Half-open range of record indices [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Min-max statistics of one column.
struct MinMax {
    double min = 0.0;
    double max = 0.0;

    double span() const noexcept { return max - min; }
    double transform(double v) const noexcept { return (v - min) / (max - min); }
    double inverse(double v) const noexcept { return v * (max - min) + min; }
    friend bool operator==(const MinMax&, const MinMax&) = default;
};

/**
 * Per-feature min-max scaler. The close column is always tracked separately as
 * the target, whether or not it is among the input features.
 *
 * `fit_ranges` records exactly which record indices the statistics came from.
 */
struct Scaler {
    FeatureSet features;
    std::vector<MinMax> stats;
    MinMax target;
    std::vector<IndexRange> fit_ranges;

    double transform(std::size_t column, double v) const noexcept { return stats[column].transform(v); }
    double inverse_transform(std::size_t column, double v) const noexcept { return stats[column].inverse(v); }
    double transform_target(double close) const noexcept { return target.transform(close); }
    double inverse_target(double v) const noexcept { return target.inverse(v); }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Sorts and merges overlapping or touching ranges.
inline std::vector<IndexRange> merge_ranges(std::vector<IndexRange> ranges) {
    std::sort(ranges.begin(), ranges.end(), [](const IndexRange& a, const IndexRange& b) { return a.begin < b.begin; });
    std::vector<IndexRange> out;
    for (const auto& r : ranges) {
        if (r.size() == 0) continue;
        if (!out.empty() && r.begin <= out.back().end)
            out.back().end = std::max(out.back().end, r.end);
        else
            out.push_back(r);
    }
    return out;
}

inline Scaler fit_scaler(const PriceSeries& series, const FeatureSet& features, std::span<const IndexRange> ranges) {
    if (features.empty()) throw ArgumentError("fit_scaler: empty feature set");
    auto merged = merge_ranges({ranges.begin(), ranges.end()});
    if (merged.empty()) throw ArgumentError("fit_scaler: empty index range");
    if (merged.back().end > series.size())
        throw ArgumentError("fit_scaler: range end " + std::to_string(merged.back().end) + " beyond series length " +
                            std::to_string(series.size()));

    auto column_stats = [&](Feature f) {
        MinMax mm{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto& r : merged)
            for (std::size_t i = r.begin; i < r.end; ++i) {
                const double v = series[i].get(f);
                mm.min = std::min(mm.min, v);
                mm.max = std::max(mm.max, v);
            }
        if (!(mm.max > mm.min))
            throw DegenerateFeatureError("feature '" + std::string(to_string(f)) +
                                         "' is constant over the fit range; min-max scaling is undefined");
        return mm;
    };

    Scaler s;
    s.features = features;
    for (Feature f : features) s.stats.push_back(column_stats(f));
    s.target = column_stats(Feature::close);
    s.fit_ranges = std::move(merged);
    return s;
}

inline Scaler fit_scaler(const PriceSeries& series, const FeatureSet& features, IndexRange range) {
    return fit_scaler(series, features, std::span<const IndexRange>(&range, 1));
}

}  // namespace gatecast

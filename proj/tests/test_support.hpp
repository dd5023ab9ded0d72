#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "gatecast/ohlcv.hpp"

namespace gatecast::fixtures {

/// Flat bars whose close follows 2 + sin(2 pi i / period).
inline PriceSeries sine_series(std::size_t n, double period = 50.0) {
    std::vector<OhlcvRecord> rs;
    const Date start = std::chrono::year{2020} / 1 / 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = 2.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period);
        rs.push_back({add_days(start, static_cast<int>(i)), v, v, v, v, v, 1.0});
    }
    return PriceSeries(std::move(rs));
}

}  // namespace gatecast::fixtures

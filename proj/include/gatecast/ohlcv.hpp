#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gatecast/error.hpp"

namespace gatecast {

using Date = std::chrono::year_month_day;

/// Strict YYYY-MM-DD. Returns false on anything else, including impossible dates.
inline bool parse_date(std::string_view s, Date& out) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& v) {
        auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        return ec == std::errc() && p == s.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
    out = Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    return out.ok();
}

inline std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

inline Date add_days(const Date& d, int days) {
    return Date{std::chrono::sys_days{d} + std::chrono::days{days}};
}

enum class Feature { open, high, low, close, adj_close, volume };

using FeatureSet = std::vector<Feature>;

inline constexpr Feature all_feature_list[] = {Feature::open,  Feature::high,      Feature::low,
                                               Feature::close, Feature::adj_close, Feature::volume};

inline FeatureSet all_features() { return {std::begin(all_feature_list), std::end(all_feature_list)}; }

inline std::string_view to_string(Feature f) noexcept {
    switch (f) {
        case Feature::open: return "open";
        case Feature::high: return "high";
        case Feature::low: return "low";
        case Feature::close: return "close";
        case Feature::adj_close: return "adj_close";
        case Feature::volume: return "volume";
    }
    return "?";
}

inline Feature parse_feature(std::string_view s) {
    for (Feature f : all_feature_list)
        if (to_string(f) == s) return f;
    throw ArgumentError("unknown feature '" + std::string(s) +
                        "' (expected open, high, low, close, adj_close or volume)");
}

/// One daily bar. Prices in USD.
struct OhlcvRecord {
    Date date;
    double open = 0, high = 0, low = 0, close = 0, adj_close = 0, volume = 0;

    double get(Feature f) const noexcept {
        switch (f) {
            case Feature::open: return open;
            case Feature::high: return high;
            case Feature::low: return low;
            case Feature::close: return close;
            case Feature::adj_close: return adj_close;
            case Feature::volume: return volume;
        }
        return 0.0;
    }

    bool consistent() const noexcept {
        return open > 0 && high > 0 && low > 0 && close > 0 && adj_close > 0 && volume >= 0 &&
               low <= std::min(open, close) && high >= std::max(open, close);
    }

    friend bool operator==(const OhlcvRecord&, const OhlcvRecord&) = default;
};

/// Nonempty, strictly increasing by date.
class PriceSeries {
  public:
    PriceSeries() = default;

    explicit PriceSeries(std::vector<OhlcvRecord> records) : records_(std::move(records)) {
        if (records_.empty()) throw EmptyDataError("price series has no records");
        for (std::size_t i = 1; i < records_.size(); ++i)
            if (!(records_[i - 1].date < records_[i].date))
                throw FormatError("dates are not strictly increasing at " + format_date(records_[i].date));
    }

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const OhlcvRecord& operator[](std::size_t i) const noexcept { return records_[i]; }
    const std::vector<OhlcvRecord>& records() const noexcept { return records_; }
    auto begin() const noexcept { return records_.begin(); }
    auto end() const noexcept { return records_.end(); }

    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

  private:
    std::vector<OhlcvRecord> records_;
};

struct LoadReport {
    PriceSeries series;
    std::size_t rows_read = 0;
    std::size_t dropped_rows = 0;
};

inline constexpr std::string_view csv_header = "Date,Open,High,Low,Close,Adj Close,Volume";

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_number(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/**
 * Parses daily OHLCV rows with the header `Date,Open,High,Low,Close,Adj Close,Volume`.
 *
 * Rows with an empty or `null` field are dropped and counted. Any other
 * malformed row raises FormatError carrying its 1-based line number. Rows are
 * returned sorted by date.
 */
inline LoadReport parse_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw FormatError(source + ": missing header", 1);
    detail::strip_cr(line);
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line != csv_header)
        throw FormatError(source + ":1: expected header '" + std::string(csv_header) + "', got '" + line + "'", 1);

    LoadReport report;
    std::vector<OhlcvRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        ++report.rows_read;
        const auto fields = detail::split_commas(line);
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        if (fields.size() != 7)
            throw FormatError(where + "expected 7 fields, found " + std::to_string(fields.size()), line_no);
        if (std::any_of(fields.begin(), fields.end(), [](std::string_view f) { return f.empty() || f == "null"; })) {
            ++report.dropped_rows;
            continue;
        }
        OhlcvRecord r;
        if (!parse_date(fields[0], r.date))
            throw FormatError(where + "unparseable date '" + std::string(fields[0]) + "'", line_no);
        double* slots[] = {&r.open, &r.high, &r.low, &r.close, &r.adj_close, &r.volume};
        for (std::size_t i = 0; i < 6; ++i)
            if (!detail::parse_number(fields[i + 1], *slots[i]))
                throw FormatError(where + "unparseable number '" + std::string(fields[i + 1]) + "'", line_no);
        if (!r.consistent())
            throw FormatError(where + "inconsistent bar (need positive prices, low <= open/close <= high, volume >= 0)",
                              line_no);
        records.push_back(r);
    }
    if (records.empty()) throw EmptyDataError(source + ": no valid rows");
    std::stable_sort(records.begin(), records.end(),
                     [](const OhlcvRecord& a, const OhlcvRecord& b) { return a.date < b.date; });
    report.series = PriceSeries(std::move(records));
    return report;
}

inline LoadReport load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return parse_csv(in, path);
}

}  // namespace gatecast

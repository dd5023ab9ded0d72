#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gatecast/error.hpp"
#include "gatecast/rng.hpp"

namespace gatecast {

enum class FoldScheme { contiguous, shuffled };

inline std::string_view to_string(FoldScheme s) noexcept {
    return s == FoldScheme::contiguous ? "contiguous" : "shuffled";
}

inline FoldScheme parse_fold_scheme(std::string_view s) {
    if (s == "contiguous") return FoldScheme::contiguous;
    if (s == "shuffled") return FoldScheme::shuffled;
    throw ArgumentError("unknown fold scheme '" + std::string(s) + "' (expected contiguous or shuffled)");
}

struct FoldSplit {
    std::size_t fold_index = 0;
    std::vector<std::size_t> train_indices;       // ascending
    std::vector<std::size_t> validation_indices;  // ascending

    friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

/**
 * k-fold partition of [0, n). The index order (identity for `contiguous`, a
 * seeded permutation for `shuffled`) is cut into k consecutive blocks; block
 * sizes differ by at most one, with the remainder going to the earliest folds.
 */
inline std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t k = 5,
                                          FoldScheme scheme = FoldScheme::contiguous, std::uint64_t seed = 0) {
    if (k < 2) throw FoldError("k must be at least 2, got " + std::to_string(k));
    if (n < k) throw FoldError("cannot split " + std::to_string(n) + " samples into " + std::to_string(k) + " folds");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (scheme == FoldScheme::shuffled) {
        Rng rng(seed);
        rng.shuffle(order);
    }

    std::vector<FoldSplit> folds(k);
    std::vector<std::size_t> owner(n);
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].fold_index = f;
        for (std::size_t i = 0; i < len; ++i) owner[order[pos + i]] = f;
        pos += len;
    }
    for (std::size_t idx = 0; idx < n; ++idx)
        for (std::size_t f = 0; f < k; ++f)
            (owner[idx] == f ? folds[f].validation_indices : folds[f].train_indices).push_back(idx);
    return folds;
}

/// Number of trailing samples reserved for testing.
inline std::size_t holdout_size(std::size_t n, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 0.5))
        throw ArgumentError("test fraction must lie in (0, 0.5), got " + std::to_string(test_fraction));
    // small slack so e.g. 100 * 0.1 = 10.000000000000002 and 30 * 0.1 both land on the intended count
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
    if (n_test == 0 || n_test >= n)
        throw InsufficientDataError("too few samples (" + std::to_string(n) + ") for a " +
                                    std::to_string(test_fraction) + " holdout");
    return n_test;
}

/// Splits off the most recent `test_fraction` of a time-ordered sequence.
template <class T>
std::pair<std::vector<T>, std::vector<T>> holdout_test_split(std::span<const T> samples, double test_fraction = 0.1) {
    const std::size_t n_test = holdout_size(samples.size(), test_fraction);
    const auto cut = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() - n_test);
    return {std::vector<T>(samples.begin(), cut), std::vector<T>(cut, samples.end())};
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> holdout_test_split(const std::vector<T>& samples,
                                                             double test_fraction = 0.1) {
    return holdout_test_split(std::span<const T>(samples), test_fraction);
}

}  // namespace gatecast

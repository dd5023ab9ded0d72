#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace gatecast {

/**
 * SplitMix64 generator.
 *
 * The stream is fully specified so ports in other languages can replay it:
 *
 *     state += 0x9E3779B97F4A7C15
 *     z = state
 *     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *     return z ^ (z >> 31)
 *
 * `uniform()` maps the top 53 bits to [0, 1): `(next() >> 11) * 2^-53`.
 * `below(n)` rejects draws under `(2^64 - n) mod n` and returns `draw mod n`.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t draws() const noexcept { return draws_; }

    std::uint64_t next() noexcept {
        ++draws_;
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// `lo + (hi - lo) * u` with both operations rounded separately, never fused.
    double uniform(double lo, double hi) noexcept {
        volatile double scaled = (hi - lo) * uniform();
        return lo + scaled;
    }

    // n must be > 0
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    /// Fisher-Yates, walking from the back.
    template <class T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
    std::uint64_t seed_;
    std::uint64_t draws_ = 0;
};

}  // namespace gatecast

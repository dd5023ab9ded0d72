#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "gatecast/reference.hpp"
#include "gatecast/sequence.hpp"

namespace gatecast {

/// A random problem for gradient verification: parameters U[-0.5, 0.5],
/// inputs U[-1, 1], target U[-1, 1], all drawn from one seeded stream.
template <class P>
struct CheckInstance {
    P params;
    std::vector<Matrix> xs;
    double target = 0.0;
};

template <class P>
CheckInstance<P> random_check_instance(std::uint64_t seed, std::size_t hidden, std::size_t input, std::size_t steps,
                                       bool gru_bias = false) {
    Rng rng(seed);
    CheckInstance<P> inst;
    if constexpr (std::is_same_v<P, LstmParams>)
        inst.params = LstmParams::zeros(hidden, input);
    else
        inst.params = GruParams::zeros(hidden, input, gru_bias);
    inst.params.for_each([&](const char*, Matrix& m, bool) {
        for (double& v : m.values()) v = rng.uniform(-0.5, 0.5);
    });
    for (std::size_t t = 0; t < steps; ++t) {
        Matrix x(input, 1);
        for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
        inst.xs.push_back(std::move(x));
    }
    inst.target = rng.uniform(-1.0, 1.0);
    return inst;
}

/**
 * Largest relative disagreement between BPTT gradients of the squared error
 * (prediction - target)^2 and central finite differences with step `eps`,
 * over every parameter entry:
 *
 *     |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
 *
 * The perturbed losses are evaluated by the extended-precision reference
 * forward pass, so cancellation in (L+ - L-) does not swamp small gradients.
 */
template <class P>
double gradient_check(const CheckInstance<P>& inst, double eps = 1e-5) {
    using reference::Real;
    const std::span<const Matrix> xs(inst.xs);
    const auto fwd = forward_sequence(inst.params, xs);
    const auto grads = backward_sequence(inst.params, fwd.caches, 2.0 * (fwd.prediction - inst.target));
    const auto analytic = tensor_list(grads);

    auto wide = reference::widen(inst.params);
    const auto loss = [&] {
        const Real e = reference::predict(inst.params, wide, xs) - static_cast<Real>(inst.target);
        return e * e;
    };
    double worst = 0.0;
    for (std::size_t m = 0; m < wide.size(); ++m) {
        for (std::size_t i = 0; i < wide[m].v.size(); ++i) {
            Real& w = wide[m].v[i];
            const Real saved = w;
            w = saved + eps;
            const Real up = loss();
            w = saved - eps;
            const Real down = loss();
            w = saved;
            const double numeric = static_cast<double>((up - down) / (2.0L * eps));
            const double a = (*analytic[m])[i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric)));
        }
    }
    return worst;
}

inline double gradient_check(CellKind kind, std::uint64_t seed, std::size_t hidden, std::size_t input,
                             std::size_t steps) {
    if (hidden == 0 || input == 0 || steps == 0) throw ArgumentError("gradient_check: sizes must be >= 1");
    if (kind == CellKind::lstm) return gradient_check(random_check_instance<LstmParams>(seed, hidden, input, steps));
    return gradient_check(random_check_instance<GruParams>(seed, hidden, input, steps));
}

}  // namespace gatecast

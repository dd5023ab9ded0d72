#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "gatecast/gru.hpp"
#include "gatecast/lstm.hpp"

namespace gatecast {

enum class CellKind { lstm, gru };

inline std::string_view to_string(CellKind k) noexcept { return k == CellKind::lstm ? "lstm" : "gru"; }

inline CellKind parse_cell_kind(std::string_view s) {
    if (s == "lstm") return CellKind::lstm;
    if (s == "gru") return CellKind::gru;
    throw ArgumentError("unknown cell kind '" + std::string(s) + "' (expected lstm or gru)");
}

using ModelParams = std::variant<LstmParams, GruParams>;

inline CellKind cell_kind(const ModelParams& p) noexcept {
    return std::holds_alternative<LstmParams>(p) ? CellKind::lstm : CellKind::gru;
}

template <class P>
struct CellTraits;

template <>
struct CellTraits<LstmParams> {
    using Gradients = LstmGradients;
    using Cache = LstmStepCache;
    static constexpr CellKind kind = CellKind::lstm;
    static Gradients zero_gradients(const LstmParams& p) { return Gradients::zeros(p.hidden_size, p.input_size); }
};

template <>
struct CellTraits<GruParams> {
    using Gradients = GruGradients;
    using Cache = GruStepCache;
    static constexpr CellKind kind = CellKind::gru;
    static Gradients zero_gradients(const GruParams& p) {
        return Gradients::zeros(p.hidden_size, p.input_size, p.with_bias);
    }
};

template <class P>
using GradientsOf = typename CellTraits<P>::Gradients;

/// Flat list of pointers into a tensor set, in serialization order.
template <class T>
auto tensor_list(T& t) {
    using M = std::conditional_t<std::is_const_v<T>, const Matrix, Matrix>;
    std::vector<M*> out;
    t.for_each([&](const char*, M& m, bool) { out.push_back(&m); });
    return out;
}

template <class T>
std::size_t param_count(const T& t) {
    std::size_t n = 0;
    t.for_each([&](const char*, const Matrix& m, bool) { n += m.size(); });
    return n;
}

inline std::size_t param_count(const ModelParams& p) {
    return std::visit([](const auto& q) { return param_count(q); }, p);
}

/// 4HD input weights, 4H^2 recurrent, 3H^2 peephole, 4H gate biases, H + 1 head.
constexpr std::size_t lstm_param_count(std::size_t hidden, std::size_t input) noexcept {
    return 4 * hidden * input + 7 * hidden * hidden + 4 * hidden + hidden + 1;
}

constexpr std::size_t gru_param_count(std::size_t hidden, std::size_t input, bool with_bias = false) noexcept {
    return 3 * hidden * input + 3 * hidden * hidden + (with_bias ? 3 * hidden : 0) + hidden + 1;
}

template <class Cache>
struct SequenceResult {
    Matrix h_final;
    std::vector<Cache> caches;
    double prediction = 0.0;
};

namespace detail {

inline double project(const Matrix& head_w, const Matrix& head_b, const Matrix& h) noexcept {
    double y = head_b[0];
    for (std::size_t j = 0; j < h.rows(); ++j) y += head_w[j] * h[j];
    return y;
}

}  // namespace detail

/// Unrolls the LSTM over `xs` from `initial` (zeros if absent) and applies the head to h_T.
inline SequenceResult<LstmStepCache> forward_sequence(const LstmParams& p, std::span<const Matrix> xs,
                                                      std::optional<LstmState> initial = std::nullopt) {
    if (xs.empty()) throw EmptyDataError("forward_sequence: empty input sequence");
    LstmState s = initial ? std::move(*initial) : LstmState::zeros(p.hidden_size);
    SequenceResult<LstmStepCache> out;
    out.caches.reserve(xs.size());
    for (const Matrix& x : xs) {
        auto step = lstm_step(p, x, s);
        s = std::move(step.state);
        out.caches.push_back(std::move(step.cache));
    }
    out.prediction = detail::project(p.head_w, p.head_b, s.h);
    out.h_final = std::move(s.h);
    return out;
}

inline SequenceResult<GruStepCache> forward_sequence(const GruParams& p, std::span<const Matrix> xs,
                                                     std::optional<Matrix> initial = std::nullopt) {
    if (xs.empty()) throw EmptyDataError("forward_sequence: empty input sequence");
    Matrix h = initial ? std::move(*initial) : Matrix(p.hidden_size, 1);
    SequenceResult<GruStepCache> out;
    out.caches.reserve(xs.size());
    for (const Matrix& x : xs) {
        auto step = gru_step(p, x, h);
        h = std::move(step.h);
        out.caches.push_back(std::move(step.cache));
    }
    out.prediction = detail::project(p.head_w, p.head_b, h);
    out.h_final = std::move(h);
    return out;
}

/// Prediction only, from zero initial state.
inline double predict(const ModelParams& p, std::span<const Matrix> xs) {
    return std::visit([&](const auto& q) { return forward_sequence(q, xs).prediction; }, p);
}

namespace detail {

template <class P, class G>
void check_gradient_shapes(const P& p, const G& g) {
    const auto pt = tensor_list(p);
    const auto gt = tensor_list(g);
    bool ok = pt.size() == gt.size();
    for (std::size_t i = 0; ok && i < pt.size(); ++i) ok = pt[i]->same_shape(*gt[i]);
    if (!ok) throw StructuralError("gradient buffers do not match parameter layout");
}

template <class P, class Cache>
void check_caches(const P& p, std::span<const Cache> caches) {
    if (caches.empty()) throw StructuralError("backward_sequence: no cached steps");
    for (const auto& k : caches)
        if (k.x.rows() != p.input_size || k.h_prev.rows() != p.hidden_size || k.candidate.rows() != p.hidden_size)
            throw StructuralError("backward_sequence: cached step shapes do not match parameters (hidden " +
                                  std::to_string(p.hidden_size) + ", input " + std::to_string(p.input_size) + ")");
}

}  // namespace detail

/**
 * Backpropagation through time for the LSTM. Adds d(prediction)/d(theta) scaled
 * by `d_prediction` into `grads`, summed over every step in `caches`.
 */
inline void accumulate_gradients(const LstmParams& p, std::span<const LstmStepCache> caches, double d_prediction,
                                 LstmGradients& grads) {
    detail::check_caches(p, caches);
    detail::check_gradient_shapes(p, grads);
    const Matrix h_last = lstm_hidden(caches.back());
    grads.head_b[0] += d_prediction;
    for (std::size_t j = 0; j < p.hidden_size; ++j) grads.head_w[j] += d_prediction * h_last[j];

    std::vector<double> dh(p.head_w.values().begin(), p.head_w.values().end());
    for (double& v : dh) v *= d_prediction;
    std::vector<double> dc(p.hidden_size, 0.0);
    for (std::size_t t = caches.size(); t-- > 0;) lstm_step_backward(p, caches[t], dh, dc, grads);
}

inline void accumulate_gradients(const GruParams& p, std::span<const GruStepCache> caches, double d_prediction,
                                 GruGradients& grads) {
    detail::check_caches(p, caches);
    detail::check_gradient_shapes(p, grads);
    const Matrix h_last = gru_hidden(caches.back());
    grads.head_b[0] += d_prediction;
    for (std::size_t j = 0; j < p.hidden_size; ++j) grads.head_w[j] += d_prediction * h_last[j];

    std::vector<double> dh(p.head_w.values().begin(), p.head_w.values().end());
    for (double& v : dh) v *= d_prediction;
    for (std::size_t t = caches.size(); t-- > 0;) gru_step_backward(p, caches[t], dh, grads);
}

template <class P, class Cache>
GradientsOf<P> backward_sequence(const P& p, std::span<const Cache> caches, double d_prediction) {
    auto grads = CellTraits<P>::zero_gradients(p);
    accumulate_gradients(p, caches, d_prediction, grads);
    return grads;
}

template <class P, class Cache>
GradientsOf<P> backward_sequence(const P& p, const std::vector<Cache>& caches, double d_prediction) {
    return backward_sequence(p, std::span<const Cache>(caches), d_prediction);
}

}  // namespace gatecast

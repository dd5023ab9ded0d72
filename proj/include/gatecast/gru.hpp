#pragma once

#include <cstddef>
#include <vector>

#include "gatecast/linalg.hpp"
#include "gatecast/lstm.hpp"

namespace gatecast {

/**
 * Weights of a GRU with a scalar regression head.
 *
 *     z  = sigmoid(update_x x + update_h h')
 *     r  = sigmoid(reset_x x + reset_h h')
 *     n  = tanh(cand_x x + cand_h (r * h'))
 *     h  = (1 - z) * h' + z * n
 *
 * The gates carry no bias by default. With `with_bias` set, `update_b`,
 * `reset_b` and `cand_b` are added to the three pre-activations; otherwise
 * those matrices are empty and skipped by `for_each`.
 */
template <class Tag>
struct GruTensors {
    std::size_t hidden_size = 0;
    std::size_t input_size = 0;
    bool with_bias = false;

    Matrix update_x, update_h;
    Matrix reset_x, reset_h;
    Matrix cand_x, cand_h;
    Matrix update_b, reset_b, cand_b;
    Matrix head_w, head_b;

    static GruTensors zeros(std::size_t hidden, std::size_t input, bool with_bias = false) {
        GruTensors t;
        t.hidden_size = hidden;
        t.input_size = input;
        t.with_bias = with_bias;
        for_each_slot(t, [&](const char*, Matrix& m, std::size_t r, std::size_t c, bool) { m = Matrix(r, c); });
        return t;
    }

    template <class F>
    void for_each(F&& f) {
        for_each_slot(*this, [&](const char* name, Matrix& m, std::size_t, std::size_t, bool bias) { f(name, m, bias); });
    }
    template <class F>
    void for_each(F&& f) const {
        for_each_slot(*this,
                      [&](const char* name, const Matrix& m, std::size_t, std::size_t, bool bias) { f(name, m, bias); });
    }

    friend bool operator==(const GruTensors&, const GruTensors&) = default;

  private:
    template <class Self, class F>
    static void for_each_slot(Self& s, F&& f) {
        const std::size_t h = s.hidden_size, d = s.input_size;
        f("W_z", s.update_x, h, d, false);
        f("U_z", s.update_h, h, h, false);
        f("W_r", s.reset_x, h, d, false);
        f("U_r", s.reset_h, h, h, false);
        f("W", s.cand_x, h, d, false);
        f("U", s.cand_h, h, h, false);
        if (s.with_bias) {
            f("b_z", s.update_b, h, 1, true);
            f("b_r", s.reset_b, h, 1, true);
            f("b_h", s.cand_b, h, 1, true);
        }
        f("W_out", s.head_w, 1, h, false);
        f("b_out", s.head_b, 1, 1, true);
    }
};

using GruParams = GruTensors<ParamsTag>;
using GruGradients = GruTensors<GradsTag>;

inline GruParams init_gru(std::size_t hidden, std::size_t input, Rng& rng, bool with_bias = false) {
    auto p = GruParams::zeros(hidden, input, with_bias);
    p.for_each([&](const char*, Matrix& m, bool bias) {
        if (!bias) m = xavier_init(m.rows(), m.cols(), rng);
    });
    return p;
}

struct GruStepCache {
    Matrix x, h_prev;
    Matrix update_gate, reset_gate;
    Matrix candidate;
};

struct GruStepResult {
    Matrix h;
    GruStepCache cache;
};

inline GruStepResult gru_step(const GruParams& p, const Matrix& x, const Matrix& h_prev) {
    if (x.rows() != p.input_size || x.cols() != 1)
        throw ShapeError("gru_step: input is " + x.shape() + ", expected " + Matrix::shape_string(p.input_size, 1));
    if (h_prev.rows() != p.hidden_size || h_prev.cols() != 1)
        throw ShapeError("gru_step: hidden state is " + h_prev.shape() + ", expected " +
                         Matrix::shape_string(p.hidden_size, 1));
    const std::size_t n = p.hidden_size;
    const auto xv = x.values(), hv = h_prev.values();

    Matrix z = p.with_bias ? p.update_b : Matrix(n, 1);
    Matrix r = p.with_bias ? p.reset_b : Matrix(n, 1);
    Matrix cand = p.with_bias ? p.cand_b : Matrix(n, 1);
    gemv_acc(z.values(), p.update_x, xv);
    gemv_acc(z.values(), p.update_h, hv);
    gemv_acc(r.values(), p.reset_x, xv);
    gemv_acc(r.values(), p.reset_h, hv);
    std::vector<double> gated(n);
    for (std::size_t k = 0; k < n; ++k) {
        z[k] = sigmoid(z[k]);
        r[k] = sigmoid(r[k]);
        gated[k] = r[k] * hv[k];
    }
    gemv_acc(cand.values(), p.cand_x, xv);
    gemv_acc(cand.values(), p.cand_h, gated);

    Matrix h(n, 1);
    for (std::size_t k = 0; k < n; ++k) {
        cand[k] = tanh_act(cand[k]);
        h[k] = (1.0 - z[k]) * hv[k] + z[k] * cand[k];
    }
    return {std::move(h), {x, h_prev, std::move(z), std::move(r), std::move(cand)}};
}

inline Matrix gru_hidden(const GruStepCache& k) {
    Matrix h(k.h_prev.rows(), 1);
    for (std::size_t j = 0; j < h.rows(); ++j)
        h[j] = (1.0 - k.update_gate[j]) * k.h_prev[j] + k.update_gate[j] * k.candidate[j];
    return h;
}

/// Reverse pass through one step; `dh` goes in as dL/dh_t and comes out as dL/dh_{t-1}.
inline void gru_step_backward(const GruParams& p, const GruStepCache& k, std::vector<double>& dh,
                              GruGradients& grads) {
    const std::size_t n = p.hidden_size;
    const auto hp = k.h_prev.values();
    std::vector<double> da_z(n), da_r(n), da_n(n), gated(n), d_gated(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double z = k.update_gate[j], c = k.candidate[j];
        da_z[j] = dh[j] * (c - hp[j]) * z * (1.0 - z);
        da_n[j] = dh[j] * z * (1.0 - c * c);
        gated[j] = k.reset_gate[j] * hp[j];
    }
    gemv_t_acc(d_gated, p.cand_h, da_n);
    for (std::size_t j = 0; j < n; ++j) {
        const double r = k.reset_gate[j];
        da_r[j] = d_gated[j] * hp[j] * r * (1.0 - r);
    }

    const auto x = k.x.values();
    ger_acc(grads.update_x, da_z, x);
    ger_acc(grads.update_h, da_z, hp);
    ger_acc(grads.reset_x, da_r, x);
    ger_acc(grads.reset_h, da_r, hp);
    ger_acc(grads.cand_x, da_n, x);
    ger_acc(grads.cand_h, da_n, gated);
    if (p.with_bias) {
        axpy(grads.update_b.values(), da_z);
        axpy(grads.reset_b.values(), da_r);
        axpy(grads.cand_b.values(), da_n);
    }

    for (std::size_t j = 0; j < n; ++j) dh[j] = dh[j] * (1.0 - k.update_gate[j]) + d_gated[j] * k.reset_gate[j];
    gemv_t_acc(dh, p.update_h, da_z);
    gemv_t_acc(dh, p.reset_h, da_r);
}

}  // namespace gatecast

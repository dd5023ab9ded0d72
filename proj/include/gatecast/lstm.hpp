#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gatecast/linalg.hpp"

namespace gatecast {

struct ParamsTag {};
struct GradsTag {};

/**
 * Weights of a peephole LSTM with a scalar regression head.
 *
 * Gate pre-activations, for hidden size H and input size D:
 *
 *     i  = sigmoid(in_x x + in_h h' + in_c c' + in_b)
 *     f  = sigmoid(forget_x x + forget_h h' + forget_c c' + forget_b)
 *     g  = tanh(cand_x x + cand_h h' + cand_b)
 *     c  = f * c' + i * g
 *     o  = sigmoid(out_x x + out_h h' + out_c c + out_b)
 *     h  = o * tanh(c)
 *
 * where h', c' are the previous states and `*` is element-wise. The output gate
 * peeps at the updated cell state c. Peephole weights (`*_c`) are full H x H
 * matrices. The head maps h_T to one value: y = head_w h_T + head_b.
 *
 * The same layout is reused for gradients (`LstmGradients`).
 */
template <class Tag>
struct LstmTensors {
    std::size_t hidden_size = 0;
    std::size_t input_size = 0;

    Matrix in_x, in_h, in_c, in_b;
    Matrix forget_x, forget_h, forget_c, forget_b;
    Matrix cand_x, cand_h, cand_b;
    Matrix out_x, out_h, out_c, out_b;
    Matrix head_w, head_b;

    static LstmTensors zeros(std::size_t hidden, std::size_t input) {
        LstmTensors t;
        t.hidden_size = hidden;
        t.input_size = input;
        for_each_slot(t, [&](const char*, Matrix& m, const auto& shape, bool) { m = Matrix(shape.rows, shape.cols); });
        return t;
    }

    /// Calls f(name, matrix, is_bias) on every tensor in serialization order.
    template <class F>
    void for_each(F&& f) {
        for_each_slot(*this, [&](const char* name, Matrix& m, const auto&, bool bias) { f(name, m, bias); });
    }
    template <class F>
    void for_each(F&& f) const {
        for_each_slot(*this, [&](const char* name, const Matrix& m, const auto&, bool bias) { f(name, m, bias); });
    }

    friend bool operator==(const LstmTensors&, const LstmTensors&) = default;

  private:
    struct Shape {
        std::size_t rows, cols;
    };

    template <class Self, class F>
    static void for_each_slot(Self& s, F&& f) {
        const Shape hx{s.hidden_size, s.input_size}, hh{s.hidden_size, s.hidden_size}, h1{s.hidden_size, 1};
        f("W_xi", s.in_x, hx, false);
        f("W_hi", s.in_h, hh, false);
        f("W_ci", s.in_c, hh, false);
        f("b_i", s.in_b, h1, true);
        f("W_xf", s.forget_x, hx, false);
        f("W_hf", s.forget_h, hh, false);
        f("W_cf", s.forget_c, hh, false);
        f("b_f", s.forget_b, h1, true);
        f("W_xc", s.cand_x, hx, false);
        f("W_hc", s.cand_h, hh, false);
        f("b_c", s.cand_b, h1, true);
        f("W_xo", s.out_x, hx, false);
        f("W_ho", s.out_h, hh, false);
        f("W_co", s.out_c, hh, false);
        f("b_o", s.out_b, h1, true);
        f("W_out", s.head_w, Shape{1, s.hidden_size}, false);
        f("b_out", s.head_b, Shape{1, 1}, true);
    }
};

using LstmParams = LstmTensors<ParamsTag>;
using LstmGradients = LstmTensors<GradsTag>;

/// Xavier-uniform weights, zero biases. Tensors are drawn in serialization order.
inline LstmParams init_lstm(std::size_t hidden, std::size_t input, Rng& rng) {
    auto p = LstmParams::zeros(hidden, input);
    p.for_each([&](const char*, Matrix& m, bool bias) {
        if (!bias) m = xavier_init(m.rows(), m.cols(), rng);
    });
    return p;
}

struct LstmState {
    Matrix h;
    Matrix c;

    static LstmState zeros(std::size_t hidden) { return {Matrix(hidden, 1), Matrix(hidden, 1)}; }
};

/// Activations retained from one forward step for the backward pass.
struct LstmStepCache {
    Matrix x, h_prev, c_prev;
    Matrix input_gate, forget_gate, output_gate;
    Matrix candidate;
    Matrix c;
};

struct LstmStepResult {
    LstmState state;
    LstmStepCache cache;
};

namespace detail {

inline void check_lstm_shapes(const LstmParams& p, const Matrix& x, const LstmState& s) {
    if (x.rows() != p.input_size || x.cols() != 1)
        throw ShapeError("lstm_step: input is " + x.shape() + ", expected " +
                         Matrix::shape_string(p.input_size, 1));
    if (s.h.rows() != p.hidden_size || s.h.cols() != 1 || s.c.rows() != p.hidden_size || s.c.cols() != 1)
        throw ShapeError("lstm_step: state is " + s.h.shape() + "/" + s.c.shape() + ", expected " +
                         Matrix::shape_string(p.hidden_size, 1));
}

}  // namespace detail

inline LstmStepResult lstm_step(const LstmParams& p, const Matrix& x, const LstmState& s) {
    detail::check_lstm_shapes(p, x, s);
    const std::size_t n = p.hidden_size;
    const auto xv = x.values(), hv = s.h.values(), cv = s.c.values();

    Matrix i = p.in_b, f = p.forget_b, g = p.cand_b, o = p.out_b;
    gemv_acc(i.values(), p.in_x, xv);
    gemv_acc(i.values(), p.in_h, hv);
    gemv_acc(i.values(), p.in_c, cv);
    gemv_acc(f.values(), p.forget_x, xv);
    gemv_acc(f.values(), p.forget_h, hv);
    gemv_acc(f.values(), p.forget_c, cv);
    gemv_acc(g.values(), p.cand_x, xv);
    gemv_acc(g.values(), p.cand_h, hv);
    for (std::size_t k = 0; k < n; ++k) {
        i[k] = sigmoid(i[k]);
        f[k] = sigmoid(f[k]);
        g[k] = tanh_act(g[k]);
    }

    Matrix c(n, 1);
    for (std::size_t k = 0; k < n; ++k) c[k] = f[k] * cv[k] + i[k] * g[k];

    gemv_acc(o.values(), p.out_x, xv);
    gemv_acc(o.values(), p.out_h, hv);
    gemv_acc(o.values(), p.out_c, c.values());
    Matrix h(n, 1);
    for (std::size_t k = 0; k < n; ++k) {
        o[k] = sigmoid(o[k]);
        h[k] = o[k] * tanh_act(c[k]);
    }

    LstmStepResult out;
    out.state = {h, c};
    out.cache = {x, s.h, s.c, std::move(i), std::move(f), std::move(o), std::move(g), std::move(c)};
    return out;
}

/// Hidden state recomputed from a cache: o * tanh(c).
inline Matrix lstm_hidden(const LstmStepCache& k) {
    Matrix h(k.c.rows(), 1);
    for (std::size_t j = 0; j < h.rows(); ++j) h[j] = k.output_gate[j] * tanh_act(k.c[j]);
    return h;
}

/**
 * Reverse pass through one step.
 *
 * Takes the loss gradient w.r.t. this step's h and c (`dh`, `dc_next`, where
 * `dc_next` holds only the paths that reach c through later steps) and
 * accumulates weight gradients into `grads`. On return `dh` and `dc_next` hold
 * the gradients w.r.t. the previous h and c.
 */
inline void lstm_step_backward(const LstmParams& p, const LstmStepCache& k, std::vector<double>& dh,
                               std::vector<double>& dc_next, LstmGradients& grads) {
    const std::size_t n = p.hidden_size;
    std::vector<double> da_i(n), da_f(n), da_g(n), da_o(n), dc(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double tc = tanh_act(k.c[j]);
        const double o = k.output_gate[j];
        da_o[j] = dh[j] * tc * o * (1.0 - o);
        dc[j] = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
    }
    // output gate peeps at the updated cell state
    gemv_t_acc(dc, p.out_c, da_o);
    for (std::size_t j = 0; j < n; ++j) {
        const double i = k.input_gate[j], f = k.forget_gate[j], g = k.candidate[j];
        da_i[j] = dc[j] * g * i * (1.0 - i);
        da_f[j] = dc[j] * k.c_prev[j] * f * (1.0 - f);
        da_g[j] = dc[j] * i * (1.0 - g * g);
    }

    const auto x = k.x.values(), hp = k.h_prev.values(), cp = k.c_prev.values(), c = k.c.values();
    ger_acc(grads.in_x, da_i, x);
    ger_acc(grads.in_h, da_i, hp);
    ger_acc(grads.in_c, da_i, cp);
    axpy(grads.in_b.values(), da_i);
    ger_acc(grads.forget_x, da_f, x);
    ger_acc(grads.forget_h, da_f, hp);
    ger_acc(grads.forget_c, da_f, cp);
    axpy(grads.forget_b.values(), da_f);
    ger_acc(grads.cand_x, da_g, x);
    ger_acc(grads.cand_h, da_g, hp);
    axpy(grads.cand_b.values(), da_g);
    ger_acc(grads.out_x, da_o, x);
    ger_acc(grads.out_h, da_o, hp);
    ger_acc(grads.out_c, da_o, c);
    axpy(grads.out_b.values(), da_o);

    std::fill(dh.begin(), dh.end(), 0.0);
    gemv_t_acc(dh, p.in_h, da_i);
    gemv_t_acc(dh, p.forget_h, da_f);
    gemv_t_acc(dh, p.cand_h, da_g);
    gemv_t_acc(dh, p.out_h, da_o);

    for (std::size_t j = 0; j < n; ++j) dc_next[j] = dc[j] * k.forget_gate[j];
    gemv_t_acc(dc_next, p.in_c, da_i);
    gemv_t_acc(dc_next, p.forget_c, da_f);
}

}  // namespace gatecast

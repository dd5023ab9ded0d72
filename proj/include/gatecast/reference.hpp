#pragma once

// Straight-line extended-precision forward pass, kept independent of the
// Matrix kernels so it can serve as the finite-difference oracle.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gatecast/sequence.hpp"

namespace gatecast::reference {

using Real = long double;

/// One tensor in row-major order plus its column count.
struct Tensor {
    std::vector<Real> v;
    std::size_t cols = 0;
    Real at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

template <class P>
std::vector<Tensor> widen(const P& p) {
    std::vector<Tensor> out;
    p.for_each([&](const char*, const Matrix& m, bool) {
        Tensor t;
        t.cols = m.cols();
        t.v.assign(m.values().begin(), m.values().end());
        out.push_back(std::move(t));
    });
    return out;
}

inline Real sig(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

// sum_j W[r][j] * v[j]
inline Real dot_row(const Tensor& w, std::size_t r, const std::vector<Real>& v) {
    Real s = 0.0L;
    for (std::size_t j = 0; j < v.size(); ++j) s += w.at(r, j) * v[j];
    return s;
}

inline std::vector<Real> column(const Matrix& x) { return {x.values().begin(), x.values().end()}; }

/// Tensor indices follow LstmParams serialization order.
inline Real lstm_predict(const std::vector<Tensor>& t, std::size_t hidden, std::span<const Matrix> xs) {
    enum { Wxi, Whi, Wci, bi, Wxf, Whf, Wcf, bf, Wxc, Whc, bc, Wxo, Who, Wco, bo, Wout, bout };
    std::vector<Real> h(hidden, 0.0L), c(hidden, 0.0L);
    for (const Matrix& xm : xs) {
        const auto x = column(xm);
        std::vector<Real> nc(hidden), nh(hidden);
        for (std::size_t k = 0; k < hidden; ++k) {
            const Real i = sig(dot_row(t[Wxi], k, x) + dot_row(t[Whi], k, h) + dot_row(t[Wci], k, c) + t[bi].v[k]);
            const Real f = sig(dot_row(t[Wxf], k, x) + dot_row(t[Whf], k, h) + dot_row(t[Wcf], k, c) + t[bf].v[k]);
            const Real g = std::tanh(dot_row(t[Wxc], k, x) + dot_row(t[Whc], k, h) + t[bc].v[k]);
            nc[k] = f * c[k] + i * g;
        }
        for (std::size_t k = 0; k < hidden; ++k) {
            const Real o = sig(dot_row(t[Wxo], k, x) + dot_row(t[Who], k, h) + dot_row(t[Wco], k, nc) + t[bo].v[k]);
            nh[k] = o * std::tanh(nc[k]);
        }
        h = std::move(nh);
        c = std::move(nc);
    }
    return dot_row(t[Wout], 0, h) + t[bout].v[0];
}

inline Real gru_predict(const std::vector<Tensor>& t, std::size_t hidden, bool with_bias, std::span<const Matrix> xs) {
    enum { Wz, Uz, Wr, Ur, Wh, Uh };
    const std::size_t head = with_bias ? 9 : 6;
    std::vector<Real> h(hidden, 0.0L);
    for (const Matrix& xm : xs) {
        const auto x = column(xm);
        std::vector<Real> z(hidden), rh(hidden), nh(hidden);
        for (std::size_t k = 0; k < hidden; ++k) {
            z[k] = sig(dot_row(t[Wz], k, x) + dot_row(t[Uz], k, h) + (with_bias ? t[6].v[k] : 0.0L));
            const Real r = sig(dot_row(t[Wr], k, x) + dot_row(t[Ur], k, h) + (with_bias ? t[7].v[k] : 0.0L));
            rh[k] = r * h[k];
        }
        for (std::size_t k = 0; k < hidden; ++k) {
            const Real cand = std::tanh(dot_row(t[Wh], k, x) + dot_row(t[Uh], k, rh) + (with_bias ? t[8].v[k] : 0.0L));
            nh[k] = (1.0L - z[k]) * h[k] + z[k] * cand;
        }
        h = std::move(nh);
    }
    return dot_row(t[head], 0, h) + t[head + 1].v[0];
}

inline Real predict(const LstmParams& p, const std::vector<Tensor>& t, std::span<const Matrix> xs) {
    return lstm_predict(t, p.hidden_size, xs);
}

inline Real predict(const GruParams& p, const std::vector<Tensor>& t, std::span<const Matrix> xs) {
    return gru_predict(t, p.hidden_size, p.with_bias, xs);
}

}  // namespace gatecast::reference

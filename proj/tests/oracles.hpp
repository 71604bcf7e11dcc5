#pragma once

// Independent scalar oracles used by the tests. These deliberately avoid the
// library's matrix helpers: everything is explicit double loops over the raw
// arrays so they check the implementation rather than restating it.

#include "transatt/lstm.hpp"
#include "transatt/tensor.hpp"

#include <cmath>
#include <vector>

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmOut {
    std::vector<double> h, c;
};

// Step-by-step scalar LSTM forward (no peepholes).
inline LstmOut lstm_forward(const std::vector<double>& x, const std::vector<double>& h_prev,
                            const std::vector<double>& c_prev, const transatt::LstmWeights& w) {
    const int hd = w.hidden_dim, id = w.input_dim;
    LstmOut out;
    out.h.resize(hd);
    out.c.resize(hd);
    for (int k = 0; k < hd; ++k) {
        double zi = w.b_i[k], zf = w.b_f[k], zo = w.b_o[k], zg = w.b_g[k];
        for (int j = 0; j < id; ++j) {
            zi += w.w_i(k, j) * x[j];
            zf += w.w_f(k, j) * x[j];
            zo += w.w_o(k, j) * x[j];
            zg += w.w_g(k, j) * x[j];
        }
        for (int j = 0; j < hd; ++j) {
            zi += w.u_i(k, j) * h_prev[j];
            zf += w.u_f(k, j) * h_prev[j];
            zo += w.u_o(k, j) * h_prev[j];
            zg += w.u_g(k, j) * h_prev[j];
        }
        double i = sigmoid(zi), f = sigmoid(zf), o = sigmoid(zo), g = std::tanh(zg);
        out.c[k] = f * c_prev[k] + i * g;
        out.h[k] = o * std::tanh(out.c[k]);
    }
    return out;
}

// softmax evaluated naively in extended precision.
inline std::vector<double> softmax_longdouble(const std::vector<double>& s) {
    long double denom = 0.0L;
    for (double v : s) denom += expl(static_cast<long double>(v));
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        out[i] = static_cast<double>(expl(static_cast<long double>(s[i])) / denom);
    return out;
}

// d(p M, a) via explicit index loops.
inline double translate_score(const std::vector<double>& p, const transatt::Mat& M,
                              const std::vector<double>& a, transatt::Norm norm) {
    double acc = 0.0;
    for (int j = 0; j < M.cols; ++j) {
        double u = 0.0;
        for (int k = 0; k < M.rows; ++k) u += p[k] * M(k, j);
        double d = u - a[j];
        acc += norm == transatt::Norm::L1 ? std::fabs(d) : d * d;
    }
    return norm == transatt::Norm::L1 ? acc : std::sqrt(acc);
}

// Bilinear attention weights via explicit loops.
inline std::vector<double> attention(const std::vector<std::vector<double>>& paths,
                                     const std::vector<double>& a, const transatt::Mat& A) {
    std::vector<double> s(paths.size(), 0.0);
    for (std::size_t i = 0; i < paths.size(); ++i)
        for (int r = 0; r < A.rows; ++r)
            for (int c = 0; c < A.cols; ++c) s[i] += paths[i][r] * A(r, c) * a[c];
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    double denom = 0.0;
    std::vector<double> alpha(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        alpha[i] = std::exp(s[i] - mx);
        denom += alpha[i];
    }
    for (double& v : alpha) v /= denom;
    return alpha;
}

} // namespace oracle

#include "transatt/lstm.hpp"

#include "transatt/error.hpp"

#include <cmath>

namespace transatt {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dims(std::span<const double> x, std::span<const double> h_prev,
                std::span<const double> c_prev, const LstmWeights& w) {
    if (static_cast<int>(x.size()) != w.input_dim)
        fail_config("lstm: input dim " + std::to_string(x.size()) + " != " + std::to_string(w.input_dim));
    if (static_cast<int>(h_prev.size()) != w.hidden_dim || static_cast<int>(c_prev.size()) != w.hidden_dim)
        fail_config("lstm: state dim mismatch");
}

void fill_uniform(Mat& m, double lo, double hi, SplitMix64& rng) {
    for (double& v : m.a) v = rng.uniform(lo, hi);
}

} // namespace

LstmWeights LstmWeights::zeros(int input_dim, int hidden_dim, bool peepholes) {
    LstmWeights w;
    w.input_dim = input_dim;
    w.hidden_dim = hidden_dim;
    for (Mat* m : {&w.w_i, &w.w_f, &w.w_o, &w.w_g}) *m = Mat(hidden_dim, input_dim);
    for (Mat* m : {&w.u_i, &w.u_f, &w.u_o, &w.u_g}) *m = Mat(hidden_dim, hidden_dim);
    for (Vec* b : {&w.b_i, &w.b_f, &w.b_o, &w.b_g}) b->assign(hidden_dim, 0.0);
    if (peepholes)
        for (Vec* p : {&w.p_i, &w.p_f, &w.p_o}) p->assign(hidden_dim, 0.0);
    return w;
}

LstmWeights LstmWeights::random_init(int input_dim, int hidden_dim, bool peepholes, SplitMix64& rng) {
    LstmWeights w = zeros(input_dim, hidden_dim, peepholes);
    const double bw = std::sqrt(6.0 / (hidden_dim + input_dim));
    const double bu = std::sqrt(6.0 / (hidden_dim + hidden_dim));
    for (Mat* m : {&w.w_i, &w.w_f, &w.w_o, &w.w_g}) fill_uniform(*m, -bw, bw, rng);
    for (Mat* m : {&w.u_i, &w.u_f, &w.u_o, &w.u_g}) fill_uniform(*m, -bu, bu, rng);
    if (peepholes)
        for (Vec* p : {&w.p_i, &w.p_f, &w.p_o})
            for (double& v : *p) v = rng.uniform(-bu, bu);
    return w;
}

void lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const LstmWeights& w,
                       Vec& h_out, Vec& c_out, LstmStepCache* cache) {
    check_dims(x, h_prev, c_prev, w);
    const int hd = w.hidden_dim;

    Vec zi = matvec(w.w_i, x), zf = matvec(w.w_f, x), zo = matvec(w.w_o, x), zg = matvec(w.w_g, x);
    axpy(1.0, matvec(w.u_i, h_prev), zi);
    axpy(1.0, matvec(w.u_f, h_prev), zf);
    axpy(1.0, matvec(w.u_o, h_prev), zo);
    axpy(1.0, matvec(w.u_g, h_prev), zg);
    axpy(1.0, w.b_i, zi);
    axpy(1.0, w.b_f, zf);
    axpy(1.0, w.b_o, zo);
    axpy(1.0, w.b_g, zg);
    if (w.peepholes()) {
        for (int k = 0; k < hd; ++k) {
            zi[k] += w.p_i[k] * c_prev[k];
            zf[k] += w.p_f[k] * c_prev[k];
        }
    }

    Vec i(hd), f(hd), g(hd), c(hd);
    for (int k = 0; k < hd; ++k) {
        i[k] = sigmoid(zi[k]);
        f[k] = sigmoid(zf[k]);
        g[k] = std::tanh(zg[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
    }
    if (w.peepholes())
        for (int k = 0; k < hd; ++k) zo[k] += w.p_o[k] * c[k];

    Vec o(hd), tc(hd);
    h_out.assign(hd, 0.0);
    for (int k = 0; k < hd; ++k) {
        o[k] = sigmoid(zo[k]);
        tc[k] = std::tanh(c[k]);
        h_out[k] = o[k] * tc[k];
    }
    c_out = c;

    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->c_prev.assign(c_prev.begin(), c_prev.end());
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->o = std::move(o);
        cache->g = std::move(g);
        cache->c = std::move(c);
        cache->tanh_c = std::move(tc);
    }
}

LstmStepGrads lstm_cell_backward(std::span<const double> dh, std::span<const double> dc_in,
                                 const LstmStepCache& cache, const LstmWeights& w,
                                 LstmWeights& grads) {
    const int hd = w.hidden_dim;
    if (cache.i.empty() || static_cast<int>(cache.i.size()) != hd)
        fail_config("lstm backward: cache missing or does not match weights");
    if (static_cast<int>(dh.size()) != hd || static_cast<int>(dc_in.size()) != hd)
        fail_config("lstm backward: upstream gradient dim mismatch");

    Vec dzo(hd), dci(hd), dzi(hd), dzf(hd), dzg(hd);
    for (int k = 0; k < hd; ++k) {
        double do_ = dh[k] * cache.tanh_c[k];
        dzo[k] = do_ * cache.o[k] * (1.0 - cache.o[k]);
        dci[k] = dc_in[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    }
    if (w.peepholes())
        for (int k = 0; k < hd; ++k) dci[k] += w.p_o[k] * dzo[k];

    for (int k = 0; k < hd; ++k) {
        double di = dci[k] * cache.g[k];
        double df = dci[k] * cache.c_prev[k];
        double dg = dci[k] * cache.i[k];
        dzi[k] = di * cache.i[k] * (1.0 - cache.i[k]);
        dzf[k] = df * cache.f[k] * (1.0 - cache.f[k]);
        dzg[k] = dg * (1.0 - cache.g[k] * cache.g[k]);
    }

    add_outer(grads.w_i, dzi, cache.x);
    add_outer(grads.w_f, dzf, cache.x);
    add_outer(grads.w_o, dzo, cache.x);
    add_outer(grads.w_g, dzg, cache.x);
    add_outer(grads.u_i, dzi, cache.h_prev);
    add_outer(grads.u_f, dzf, cache.h_prev);
    add_outer(grads.u_o, dzo, cache.h_prev);
    add_outer(grads.u_g, dzg, cache.h_prev);
    axpy(1.0, dzi, grads.b_i);
    axpy(1.0, dzf, grads.b_f);
    axpy(1.0, dzo, grads.b_o);
    axpy(1.0, dzg, grads.b_g);
    if (w.peepholes()) {
        for (int k = 0; k < hd; ++k) {
            grads.p_i[k] += dzi[k] * cache.c_prev[k];
            grads.p_f[k] += dzf[k] * cache.c_prev[k];
            grads.p_o[k] += dzo[k] * cache.c[k];
        }
    }

    LstmStepGrads out;
    out.dx = matTvec(w.w_i, dzi);
    axpy(1.0, matTvec(w.w_f, dzf), out.dx);
    axpy(1.0, matTvec(w.w_o, dzo), out.dx);
    axpy(1.0, matTvec(w.w_g, dzg), out.dx);
    out.dh_prev = matTvec(w.u_i, dzi);
    axpy(1.0, matTvec(w.u_f, dzf), out.dh_prev);
    axpy(1.0, matTvec(w.u_o, dzo), out.dh_prev);
    axpy(1.0, matTvec(w.u_g, dzg), out.dh_prev);
    out.dc_prev.assign(hd, 0.0);
    for (int k = 0; k < hd; ++k) out.dc_prev[k] = dci[k] * cache.f[k];
    if (w.peepholes()) {
        for (int k = 0; k < hd; ++k) {
            out.dc_prev[k] += w.p_i[k] * dzi[k];
            out.dc_prev[k] += w.p_f[k] * dzf[k];
        }
    }
    return out;
}

} // namespace transatt

#pragma once

#include "transatt/rng.hpp"
#include "transatt/tensor.hpp"

namespace transatt {

// Gated recurrent cell weights. Gate order throughout: input, forget, output,
// candidate. Peephole vectors are present (non-empty) only when the cell was
// created with peepholes enabled.
struct LstmWeights {
    int input_dim = 0;
    int hidden_dim = 0;
    Mat w_i, w_f, w_o, w_g; // hidden x input
    Mat u_i, u_f, u_o, u_g; // hidden x hidden
    Vec b_i, b_f, b_o, b_g; // hidden
    Vec p_i, p_f, p_o;      // hidden, diagonal peepholes (optional)

    bool peepholes() const { return !p_i.empty(); }

    static LstmWeights zeros(int input_dim, int hidden_dim, bool peepholes = false);
    static LstmWeights random_init(int input_dim, int hidden_dim, bool peepholes, SplitMix64& rng);
};

struct LstmStepCache {
    Vec x, h_prev, c_prev;
    Vec i, f, o, g;  // gate activations
    Vec c, tanh_c;
};

struct LstmStepGrads {
    Vec dx, dh_prev, dc_prev;
};

// h_out/c_out sized hidden_dim. When cache is non-null it is filled for the
// matching backward call.
void lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const LstmWeights& w,
                       Vec& h_out, Vec& c_out, LstmStepCache* cache = nullptr);

// Accumulates weight gradients into `grads` (same shapes as `w`, zero-init by
// caller) and returns gradients for the step inputs.
LstmStepGrads lstm_cell_backward(std::span<const double> dh, std::span<const double> dc,
                                 const LstmStepCache& cache, const LstmWeights& w,
                                 LstmWeights& grads);

} // namespace transatt

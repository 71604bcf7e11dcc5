#pragma once

#include "transatt/model.hpp"
#include "transatt/rng.hpp"

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace transatt {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double adadelta_rho = 0.95;
    double adadelta_eps = 1e-6;
    int negatives_per_positive = 1;
    bool shuffle = true;
    int early_stop_patience = 10;
    double validation_fraction = 0.1;
    // Literal corrupted sampling from all of A (minus the positive itself);
    // default excludes every gold attribute of the entity.
    bool allow_gold_negatives = false;
    std::uint64_t seed = 42;

    void validate() const;
};

// One trainable tensor plus its Adadelta state.
struct Param {
    std::string name;
    Mat value, grad, acc_grad_sq, acc_delta_sq;

    explicit Param(std::string n = {}, int rows = 0, int cols = 0)
        : name(std::move(n)), value(rows, cols), grad(rows, cols),
          acc_grad_sq(rows, cols), acc_delta_sq(rows, cols) {}
};

// E[g2] <- rho E[g2] + (1-rho) g2; dx = -sqrt(E[dx2]+eps)/sqrt(E[g2]+eps) * g;
// E[dx2] <- rho E[dx2] + (1-rho) dx2; value += dx; grad zeroed.
void adadelta_step(std::span<double> value, std::span<double> grad,
                   std::span<double> acc_grad_sq, std::span<double> acc_delta_sq,
                   double rho, double eps, const std::string& name);
void adadelta_step(Param& p, double rho, double eps);

// Uniform draw from [0, num_attrs) \ excluded.
int sample_corrupted(int num_attrs, const std::set<int>& excluded, SplitMix64& rng);

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> val_hits1;
    double seconds = 0.0;
};

struct TrainState {
    std::uint64_t rng_state = 0;
    int epoch = 0;
    std::vector<double> loss_history;
    double best_val_hits1 = -1.0;
    int best_epoch = -1;
    bool stopped_early = false;
};

struct TrainOptions {
    const WordEmbeddingTable* pretrained = nullptr;
    bool trainable_embeddings = true;
    int threads = 1;
    // Periodic checkpointing: every save_every epochs to checkpoint_path.
    std::string checkpoint_path;
    int save_every = 0;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    ModelCheckpoint checkpoint; // best validation epoch, or the final state
    TrainState state;
    std::vector<EpochRecord> log;
};

// Margin-ranking training over the tuples with Adadelta updates per batch.
// Fully deterministic given (dataset, configs): the opt-in parallel mode
// reproduces the single-threaded checkpoint bitwise because per-tuple
// gradients are always reduced in tuple order.
TrainResult train(const Dataset& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const TrainOptions& opts = {});

} // namespace transatt

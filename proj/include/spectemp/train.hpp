#pragma once

#include "spectemp/dataio.hpp"
#include "spectemp/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace spectemp::train {

using Gradients = std::map<std::string, Matrix>;

struct LossAndGrad {
    double loss = 0.0;
    Gradients grads;
};

// Exact reverse-mode gradient of the batch loss. Throws NumericalError naming
// the first parameter with a non-finite gradient.
LossAndGrad gradients(const model::ModelState& state, const model::ModelConfig& config,
                      const std::vector<Tensor3>& inputs, const std::vector<Tensor3>& targets);

// Loss only, for finite-difference checks and reporting.
double batch_loss_value(const model::ModelState& state, const model::ModelConfig& config,
                        const std::vector<Tensor3>& inputs, const std::vector<Tensor3>& targets);

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Matrix> m;
    std::map<std::string, Matrix> v;
    long step = 0;
};

// One bias-corrected adaptive-moment update of every parameter with a
// gradient. Throws ConfigError when lr <= 0.
void optimizer_step(model::ModelState& state, const Gradients& grads, const AdamOptions& options, AdamState& moments);

struct TrainOptions {
    int epochs = 100;
    int batch_size = 32;
    AdamOptions adam;
    int patience = 15;  // 0 disables early stopping
    std::uint64_t seed = 0;
    // Parameters left untouched by the optimizer.
    std::vector<std::string> frozen;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double val_rmse = 0.0;
    double seconds = 0.0;
};

struct TrainRun {
    std::vector<EpochRecord> history;
    std::uint64_t seed = 0;
    nlohmann::json config;
    int best_epoch = -1;
    bool stopped_early = false;
};

void write_history_csv(std::ostream& os, const TrainRun& run);

// Evaluation on de-normalized values. With a Normalizer of method None the
// values are used as-is.
data::ErrorMetrics evaluate(const model::ModelState& state, const model::ModelConfig& config,
                            const data::WindowSet& windows, const data::Normalizer& norm);

std::vector<Tensor3> predict(const model::ModelState& state, const model::ModelConfig& config,
                             const std::vector<Tensor3>& inputs, int batch_size = 64);

// Minibatch training with seeded shuffling. When `validation` is nonempty the
// state with the best validation MAE is restored at the end.
TrainRun fit(model::ModelState& state, const model::ModelConfig& config, const data::WindowSet& train_set,
             const data::WindowSet& validation, const data::Normalizer& norm, const TrainOptions& options);

} // namespace spectemp::train

#pragma once

#include "spectemp/autodiff.hpp"
#include "spectemp/basis.hpp"
#include "spectemp/frequency_temporal.hpp"
#include "spectemp/tensor.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace spectemp::model {

enum class Variant { Linear, Nonlinear };
enum class AdjacencyMode { Pearson, Learned, Provided };
enum class ProjectorKind { Fourier, Random };
enum class ModePolicy { Lowest, Random };

struct ModelConfig {
    int nodes = 1;
    int lookback = 12;
    int horizon = 3;
    int dims = 1;

    int blocks = 1;
    graph::BasisSpec basis = graph::BasisSpec::gegenbauer(4, 1.0);
    int modes = 5;
    ModePolicy mode_policy = ModePolicy::Lowest;
    std::uint64_t mode_seed = 0;
    int decomp_window = 3;
    Variant variant = Variant::Linear;
    AdjacencyMode adjacency_mode = AdjacencyMode::Pearson;
    int embed_dim = 8;

    bool residual = true;
    bool share_theta_dims = false;
    bool share_phi_dims = false;
    bool share_phi_nodes = false;
    ProjectorKind projector = ProjectorKind::Fourier;
    bool coarse = true;
    bool fine = true;
    // Unset means "follow the variant": both on for Nonlinear, off for Linear.
    std::optional<bool> relu;
    std::optional<bool> attention;

    bool uses_relu() const { return relu.value_or(variant == Variant::Nonlinear); }
    bool uses_attention() const { return attention.value_or(variant == Variant::Nonlinear); }

    // Throws ConfigError when an invariant fails.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
// Missing keys keep their defaults; unknown keys are ignored.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

std::string to_string(Variant v);
std::string to_string(AdjacencyMode m);
std::string to_string(ProjectorKind p);

// Learnable parameters plus fixed buffers. Parameter names:
//   block{m}/theta, block{m}/phi1_re, block{m}/phi1_im, block{m}/phi2_re,
//   block{m}/phi2_im, block{m}/attn_q, block{m}/attn_k, block{m}/attn_v,
//   head, latent/embed
struct ModelState {
    std::map<std::string, Matrix> params;
    Matrix adjacency;  // raw weights, N x N (pearson/provided modes)
    Matrix shift;      // I - L_hat of `adjacency`
    std::vector<int> modes;
    temporal::SpaceProjector projector;

    bool all_finite() const;
};

// A_ij = |Pearson(x_i, x_j)| over each variable's flattened (T * D) series,
// zero diagonal; a constant series correlates 0 with everything.
Matrix pearson_adjacency(const Tensor3& x);

// Mean of pearson_adjacency over consecutive windows of `window` steps (stride
// `window`). Captures coupling strength when the sign flips from window to
// window.
Matrix windowed_pearson_adjacency(const Tensor3& x, int window);

// `adjacency` is required for Pearson and Provided modes and ignored for
// Learned. Draws all random initial values from `rng`.
ModelState init_state(const ModelConfig& config, const Matrix& adjacency, std::mt19937_64& rng);

// Replaces the fixed adjacency (and its shifted form).
void set_adjacency(ModelState& state, const Matrix& adjacency);

// Latent-correlation adjacency for Learned mode, one N x N matrix per window.
Matrix learned_adjacency(const ModelState& state, const ModelConfig& config, const Tensor3& x);

// Stacks samples (each N x T x D) into the (B*N) x (D*T) packed layout.
Matrix pack_batch(const std::vector<Tensor3>& samples);
std::vector<Tensor3> unpack_batch(const Matrix& packed, int nodes, int steps, int dims);

// Places every parameter on the tape.
std::map<std::string, ad::Var> bind_parameters(ad::Tape& tape, const ModelState& state, bool trainable = true);

struct GraphOutputs {
    ad::Var representation;  // final-block Z, (B*N) x (D*T)
    ad::Var prediction;      // (B*N) x (D*H)
};

// Builds the forward graph for a packed batch.
GraphOutputs forward_graph(ad::Tape& tape, const std::map<std::string, ad::Var>& params,
                           const ModelState& state, const ModelConfig& config, const Matrix& x_packed);

// Sum over the batch of (1/H) * ||Y_hat - Y||_F^2, divided by the batch size.
ad::Var batch_loss(ad::Var prediction, const Matrix& y_packed, int nodes, int horizon);

// Single-window conveniences.
Tensor3 forward(const Tensor3& x, const ModelState& state, const ModelConfig& config);
Tensor3 embed(const Tensor3& x, const ModelState& state, const ModelConfig& config);
// (1/H) * sum_t ||Y_hat_t - Y_t||_F^2 for N x H x D tensors.
double loss(const Tensor3& y_hat, const Tensor3& y);

// Binary checkpoint: "STGC", u32 version, u64 + config JSON, u32 array count,
// then per array: u32 name length, name, u32 rank, u64 extents, f64 data
// (row-major, little-endian). Buffers are stored under "buffer/...".
void save_checkpoint(const std::string& path, const ModelConfig& config, const ModelState& state);
std::pair<ModelConfig, ModelState> load_checkpoint(const std::string& path);

} // namespace spectemp::model

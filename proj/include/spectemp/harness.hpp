#pragma once

#include "spectemp/dataio.hpp"
#include "spectemp/model.hpp"
#include "spectemp/train.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace spectemp::harness {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kDataError = 3, kNumerical = 4 };

struct ExperimentSpec {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::vector<std::string> overrides; // "dotted.key=value"
};

// Reads the JSON config; throws ConfigError when missing or malformed.
nlohmann::json load_config(const std::string& path);
// Sets dotted keys; the value is parsed as JSON when possible, else kept as a
// string.
void apply_overrides(nlohmann::json& config, const std::vector<std::string>& overrides);
// Defaults merged under the user's config.
nlohmann::json default_config();
nlohmann::json effective_config(const ExperimentSpec& spec);

// Runs one command and maps library errors onto exit codes. Diagnostics go to
// `err`.
int run(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);

int cmd_train(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);
int cmd_ablate(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);
int cmd_theory(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);
int cmd_twl(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);
int cmd_synth(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);
int cmd_forecast(const ExperimentSpec& spec, const nlohmann::json& config, std::ostream& out);

// Mean silhouette coefficient of row vectors under Euclidean distance. Points
// in singleton clusters score 0.
double silhouette(const Matrix& points, const std::vector<int>& labels);

// A dataset normalized and cut into windows. Normalization stats and the
// pearson adjacency come from the training split only.
struct Prepared {
    data::Dataset dataset;
    data::Normalizer norm;
    data::WindowSet train;
    data::WindowSet validation;
    data::WindowSet test;
    Tensor3 train_series; // normalized training split
    Matrix adjacency;     // for pearson/provided modes
};

// `data_cfg` is the "data" section; `lookback`/`horizon` size the windows and
// `adjacency` picks the graph.
data::Dataset build_dataset(const nlohmann::json& data_cfg, std::uint64_t seed);
Prepared prepare(data::Dataset ds, const nlohmann::json& data_cfg, int lookback, int horizon,
                 model::AdjacencyMode adjacency);

// Model config from the "model" section sized to the prepared data.
model::ModelConfig model_config(const nlohmann::json& model_cfg, const Prepared& p);
train::TrainOptions train_options(const nlohmann::json& train_cfg, std::uint64_t seed);

struct RunResult {
    model::ModelConfig config;
    model::ModelState state;
    train::TrainRun run;
    data::ErrorMetrics test;
    data::ErrorMetrics baseline;
};

RunResult run_experiment(const Prepared& p, const model::ModelConfig& config, const train::TrainOptions& options,
                         std::uint64_t init_seed);

// Per-run seeds, drawn in this order from a master generator.
struct RunSeeds {
    std::uint64_t data = 0;
    std::uint64_t init = 0;
    std::uint64_t train = 0;

    static RunSeeds draw(std::mt19937_64& master);
};

// Data, model and training sections of a full config to one trained model.
struct TrainedRun {
    Prepared prepared;
    RunResult result;
};
TrainedRun train_from_config(const nlohmann::json& config, const RunSeeds& seeds);

struct AblationVariant {
    std::string id;
    std::string name;
    nlohmann::json overrides; // applied to the "model" section
};

// Valid axes: basis, design, addons, all.
std::vector<AblationVariant> ablation_variants(const std::string& axis);
std::vector<std::string> ablation_axes();

// Trains every variant on one dataset draw; results follow `variants`.
std::vector<RunResult> run_variants(const nlohmann::json& config, const std::vector<AblationVariant>& variants,
                                    const RunSeeds& seeds);

// Per-basis full-model training-loss curves from identical data and initial
// seeds.
std::map<std::string, std::vector<double>> convergence_race(const Prepared& p, const model::ModelConfig& base,
                                                            const train::TrainOptions& options,
                                                            std::uint64_t init_seed);

// convergence_race on the configured data and model, for theory.race.epochs
// epochs.
std::map<std::string, std::vector<double>> model_race(const nlohmann::json& config, const RunSeeds& seeds);

// Graph-stage race: fits sum_k theta_k P_k(L_hat) X_t to X_{t+shift} over the
// snapshots of `series` by full-batch gradient descent from theta = 0, with
// step 1 / lambda_max of each basis' Hessian. Returns the loss after each of
// `steps` iterations (index 0 is the starting loss).
std::map<std::string, std::vector<double>> filter_race(const Matrix& adjacency, const Tensor3& series, int degree,
                                                       double alpha, int shift, int steps);

// One row per basis: max normalized off-diagonal Gram entry under the basis'
// reference weight.
struct OrthogonalityRow {
    std::string basis;
    double residual = 0.0;
    bool orthogonal = false;
};
std::vector<OrthogonalityRow> orthogonality_report(int degree, double alpha, double tol = 1e-6);

// Column-sampling check on a random rank-k matrix, with and without additive
// noise. `lemma_cfg` holds nodes, length, rank, samples, trials, noise.
struct ColumnSamplingResult {
    temporal::ColumnSamplingReport noisy;
    temporal::ColumnSamplingReport exact;
};
ColumnSamplingResult column_sampling_experiment(const nlohmann::json& lemma_cfg, std::uint64_t seed);

struct SignedRelationResult {
    double model_silhouette = 0.0;
    double control_silhouette = 0.0;
    Tensor3 model_embedding;   // first test window
    Tensor3 control_embedding;
    std::vector<int> labels;
};

// Trains the configured model and the fixed low-pass control on the signed
// groups data and scores both embeddings against the group labels.
SignedRelationResult signed_relation_experiment(const nlohmann::json& config, std::uint64_t seed);

void write_embedding_csv(std::ostream& os, const Tensor3& z);
void write_embedding_vectors_csv(std::ostream& os, const Tensor3& z, const std::vector<int>& labels);

} // namespace spectemp::harness

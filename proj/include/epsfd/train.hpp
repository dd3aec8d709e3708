#pragma once

// Training for all three model families: composite loss (main + beta * phys),
// Adam, and the Lagrangian-dual beta update (projected sub-gradient ascent on
// the epoch-mean violation, once per epoch; beta is a constant within each
// gradient step). Runs are bit-deterministic under a fixed seed.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epsfd/checkpoint.hpp"
#include "epsfd/data.hpp"
#include "epsfd/physics.hpp"

namespace epsfd::train {

struct TrainConfig {
  model::Kind kind = model::Kind::realnvp;
  bool pi_enabled = false;
  std::int64_t past_length = 50;
  std::int64_t batch_size = 256;
  std::int64_t epochs = 100;
  double learning_rate = 1e-3;
  std::int64_t gen_count = 16;  // arrays sampled per step for the flow PI loss
  double beta_init = 0.1;
  double beta_step = 0.01;
  std::uint64_t seed = 0;
  std::int64_t patience = 10;  // early stopping on validation main loss; 0 = off
  double grad_clip = 0.0;      // global-norm clip; 0 = off

  // Architecture knobs; `layers`/`neurons` map onto the model kind:
  // realnvp -> s/t-net hidden depth/width, gru -> stacked cells/hidden width,
  // autoencoder -> encoder depth/first hidden width (bottleneck = neurons/4).
  std::int64_t coupling_layers = 2;
  std::int64_t layers = 4;
  std::int64_t neurons = 128;

  void validate() const;
  flow::FlowConfig flow_config() const;
  nn::GRUConfig gru_config() const;
  nn::AutoencoderConfig ae_config() const;

  static TrainConfig load(const std::string& path);
  void save(const std::string& path) const;
  // Canonical one-line form; also the input of config_hash().
  std::string canonical() const;
  std::uint64_t config_hash() const;  // seed excluded
};

// ---- loss pieces ------------------------------------------------------------

// Reconstruction for the two baselines (flow has no reconstruction path).
ad::Tensor forward_recon(const model::Bundle& bundle, const ad::Tensor& batch);

// gru -> MAE(recon, batch); autoencoder -> MSE; realnvp -> -mean log_prob.
ad::Tensor main_loss(const model::Bundle& bundle, const ad::Tensor& batch);

ad::Tensor composite_loss(const ad::Tensor& main, const ad::Tensor& phys, double beta);

struct LagrangianState {
  double beta = 0.0;  // always >= 0
};

// beta <- max(0, beta + beta_step * phys_value)
LagrangianState lagrangian_update(LagrangianState state, double phys_value,
                                  double beta_step);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard Adam with bias correction; moments live in state.slots, parallel
// to the parameter list.
void adam_step(model::TrainerState& state, const nn::NamedParams& params,
               const AdamConfig& cfg);

// ---- training loop ------------------------------------------------------------

struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based
  double main = 0.0;
  double phys = 0.0;        // PI runs only
  double beta = 0.0;        // value used during this epoch
  double val_main = 0.0;
  double val_auc = 0.0;
  bool has_validation = false;
  bool has_val_auc = false;
};

void save_history(const std::string& path, const std::vector<EpochRecord>& history,
                  bool pi_enabled);
std::vector<EpochRecord> load_history(const std::string& path, bool* pi_enabled = nullptr);

struct TrainResult {
  model::Bundle bundle;
  model::TrainerState state;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

struct ResumePoint {
  model::Bundle bundle;
  model::TrainerState state;
};

using EpochCallback = std::function<void(const model::Bundle&, const model::TrainerState&,
                                         const EpochRecord&)>;

// train_windows must be nominal-only and already scaled; validation windows
// (faults kept) drive the validation score and early stopping. The topology
// is required when pi_enabled. Aborts with a descriptive error if the loss
// goes non-finite.
TrainResult train_model(const TrainConfig& config, const data::WindowBatch& train_windows,
                        const data::WindowBatch& validation_windows,
                        const data::Scaler& scaler, const phys::CircuitTopology* topology,
                        const ResumePoint* resume = nullptr,
                        const EpochCallback& per_epoch = nullptr);

// ---- grid search ----------------------------------------------------------------

struct GridSpec {
  TrainConfig base;
  std::vector<std::int64_t> past_lengths{50, 30, 10};
  std::vector<std::int64_t> coupling_layer_values{2, 4, 6};  // realnvp only
  std::vector<std::int64_t> layer_values{2, 4, 6, 8};
  std::vector<std::int64_t> neuron_values{512, 256, 128, 64, 32};
  std::vector<std::int64_t> batch_sizes{256, 128, 64, 32};
  std::vector<bool> pi_values{false};
  int seeds = 1;  // fine phase: 5

  std::size_t cell_count() const;  // excludes seeds
  std::vector<TrainConfig> enumerate() const;

  static GridSpec load(const std::string& path);
  void save(const std::string& path) const;
};

struct GridResult {
  TrainConfig config;
  std::uint64_t seed = 0;
  double val_main = 0.0;
  double val_auc = 0.0;
  bool has_val_auc = false;
  std::int64_t epochs_run = 0;
  std::string error;  // empty on success

  std::uint64_t key_hash() const;  // (config, seed) resume key
};

void save_grid_results(const std::string& path, const std::vector<GridResult>& results);
std::vector<GridResult> load_grid_results(const std::string& path, const GridSpec& spec);

// Ranks by validation AUC (fallback: lowest validation main loss when no
// AUC is available); deterministic under fixed seeds.
void rank_results(std::vector<GridResult>& results);

struct GridDataset {
  const std::vector<data::Frame>* frames = nullptr;
  data::Split split;
  phys::CircuitTopology topology;
};

// Trains every (cell, seed) not already present in `completed`; individual
// cell failures are recorded and the search continues. on_result fires as
// cells finish (any thread order); the returned table is ranked.
std::vector<GridResult> grid_search(
    const GridSpec& spec, const GridDataset& dataset,
    const std::vector<GridResult>& completed = {}, int workers = 1,
    const std::function<void(const GridResult&)>& on_result = nullptr);

}  // namespace epsfd::train

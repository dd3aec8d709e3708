#pragma once

// Model bundle (one of the three families plus the fitted scaler and window
// geometry) and its self-describing textual checkpoint format. Doubles are
// written with 17 significant digits, so load(save(x)) reproduces values
// bit-for-bit; the optional trainer section carries enough state (Adam
// moments, beta, epoch, rng stream) for exact resume.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epsfd/data.hpp"
#include "epsfd/flow.hpp"
#include "epsfd/nn.hpp"
#include "epsfd/random.hpp"

namespace epsfd::model {

enum class Kind { realnvp, gru, autoencoder };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct Bundle {
  Kind kind = Kind::realnvp;
  std::int64_t features = 0;
  std::int64_t past_length = 0;
  data::Scaler scaler;

  flow::FlowConfig flow_cfg;
  nn::GRUConfig gru_cfg;
  nn::AutoencoderConfig ae_cfg;

  std::optional<flow::FlowModel> flow;
  std::optional<nn::GRUModel> gru;
  std::optional<nn::AutoencoderModel> autoencoder;

  std::int64_t input_width() const { return features * past_length; }
  nn::NamedParams parameters() const;

  static Bundle create(Kind kind, std::int64_t features, std::int64_t past_length,
                       const data::Scaler& scaler, const flow::FlowConfig& fc,
                       const nn::GRUConfig& gc, const nn::AutoencoderConfig& ac,
                       RandomStream& rng);
};

struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;
};

struct TrainerState {
  std::int64_t epoch = 0;       // completed epochs
  std::int64_t adam_step = 0;
  double beta = 0.0;            // Lagrangian multiplier
  std::vector<AdamSlot> slots;  // parallel to Bundle::parameters() order
  RandomStream rng;
  double best_validation = 0.0;
  std::int64_t stale_epochs = 0;
  bool has_best = false;
};

inline constexpr int checkpoint_format_version = 1;

void save_checkpoint(const std::string& path, const Bundle& bundle,
                     const TrainerState* trainer = nullptr);
Bundle load_checkpoint(const std::string& path, TrainerState* trainer = nullptr);

}  // namespace epsfd::model

#pragma once

// Neural building blocks and the two reconstruction baselines. Windows are
// flattened feature-major: flat index = t * features + f, oldest step first.
// The autoencoder consumes the flat window; the GRU consumes it one time
// step at a time via column slices.

#include <cstdint>
#include <string>
#include <vector>

#include "epsfd/random.hpp"
#include "epsfd/tensor.hpp"

namespace epsfd::nn {

enum class Activation { relu, tanh, sigmoid, linear };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  ad::Tensor weight;  // [in, out]
  ad::Tensor bias;    // [out]
  Activation activation = Activation::linear;

  static DenseLayer create(std::int64_t in, std::int64_t out, Activation act,
                           RandomStream& rng);
  // Zero weight and bias; used for identity-at-init output layers.
  static DenseLayer create_zero(std::int64_t in, std::int64_t out, Activation act);

  ad::Tensor forward(const ad::Tensor& x) const;
  std::int64_t in_width() const { return weight.shape()[0]; }
  std::int64_t out_width() const { return weight.shape()[1]; }
};

using NamedParams = std::vector<std::pair<std::string, ad::Tensor>>;

void append_params(NamedParams& out, const std::string& prefix, const DenseLayer& layer);

// ---- autoencoder -------------------------------------------------------------

struct AutoencoderConfig {
  std::vector<std::int64_t> encoder_widths = {256, 64};  // bottleneck last
  std::int64_t decoder_hidden = 256;
};

struct AutoencoderModel {
  std::vector<DenseLayer> encoder;  // relu throughout
  std::vector<DenseLayer> decoder;  // relu hidden, linear output
  std::int64_t input_width = 0;

  static AutoencoderModel create(std::int64_t input_width, const AutoencoderConfig& cfg,
                                 RandomStream& rng);
  ad::Tensor forward(const ad::Tensor& flat_windows) const;
  NamedParams parameters() const;
};

// ---- GRU ----------------------------------------------------------------------

// Standard cell: z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
// hc = tanh(x Wh + (r*h) Uh + bh), h' = (1 - z)*h + z*hc.
struct GRUCellParams {
  ad::Tensor w_update, u_update, b_update;
  ad::Tensor w_reset, u_reset, b_reset;
  ad::Tensor w_cand, u_cand, b_cand;

  static GRUCellParams create(std::int64_t input, std::int64_t hidden, RandomStream& rng);
  ad::Tensor step(const ad::Tensor& x_t, const ad::Tensor& h_prev) const;
  std::int64_t hidden_width() const { return u_update.shape()[0]; }
  std::int64_t input_width() const { return w_update.shape()[0]; }
};

struct GRUConfig {
  std::int64_t hidden = 256;
  std::int64_t cells = 2;
};

struct GRUModel {
  std::vector<GRUCellParams> cells;
  DenseLayer head;  // hidden -> features * past_length, linear
  std::int64_t features = 0;
  std::int64_t past_length = 0;

  static GRUModel create(std::int64_t features, std::int64_t past_length,
                         const GRUConfig& cfg, RandomStream& rng);
  // flat_windows: [batch, features * past_length], oldest step first.
  ad::Tensor forward(const ad::Tensor& flat_windows) const;
  NamedParams parameters() const;
};

}  // namespace epsfd::nn

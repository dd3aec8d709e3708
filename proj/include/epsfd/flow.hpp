#pragma once

// Real NVP density model: affine coupling layers over a standard normal
// base. Masked coordinates pass through unchanged; the rest are scaled and
// translated by networks of the masked part, so the Jacobian is triangular
// and the log-determinant is a plain sum of scale outputs. Both directions
// are exact, and sampling stays on the tape so losses on generated arrays
// can reach the parameters.

#include <cstdint>
#include <vector>

#include "epsfd/nn.hpp"
#include "epsfd/random.hpp"
#include "epsfd/tensor.hpp"

namespace epsfd::flow {

struct CouplingConfig {
  std::int64_t hidden_layers = 4;
  std::int64_t hidden_width = 128;
};

struct CouplingLayer {
  std::vector<double> mask;          // 1 = pass-through partition
  std::vector<nn::DenseLayer> s_net; // relu hidden, tanh output (width d)
  std::vector<nn::DenseLayer> t_net; // relu hidden, linear output (width d)

  // Output layers are zero-initialized so a fresh layer is the identity.
  static CouplingLayer create(std::int64_t width, bool mask_even_parity,
                              const CouplingConfig& cfg, RandomStream& rng);

  // Returns y and the per-row log |det dy/dx|.
  std::pair<ad::Tensor, ad::Tensor> forward(const ad::Tensor& x) const;
  ad::Tensor inverse(const ad::Tensor& y) const;

  std::int64_t width() const { return static_cast<std::int64_t>(mask.size()); }
};

struct FlowConfig {
  std::int64_t coupling_layers = 2;  // grid values: 2, 4, 6
  CouplingConfig nets;
};

struct FlowModel {
  std::vector<CouplingLayer> layers;  // alternating mask parity
  std::int64_t width = 0;

  static FlowModel create(std::int64_t width, const FlowConfig& cfg, RandomStream& rng);

  // Full forward pass: latent z plus the accumulated per-row log-det.
  std::pair<ad::Tensor, ad::Tensor> transform(const ad::Tensor& x) const;

  // Exact log-density per row under the change of variables.
  ad::Tensor log_prob(const ad::Tensor& x) const;

  // Inverse propagation of base-normal draws; differentiable wrt parameters.
  ad::Tensor sample(std::int64_t count, RandomStream& rng) const;

  nn::NamedParams parameters() const;
};

// log N(z; 0, I) summed per row: -(d/2) ln(2 pi) - |z|^2 / 2.
ad::Tensor standard_normal_log_density(const ad::Tensor& z);

}  // namespace epsfd::flow

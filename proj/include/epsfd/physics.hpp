#pragma once

// Circuit-derived loss terms driven by a declarative topology: range bounds
// on every value, equality across closed-breaker voltage pairs, zero
// open-circuit currents, and inverter voltage/frequency setpoints. The same
// engine serves generated arrays (flow) and reconstructions (baselines).
// Physical targets are expressed in the scaled unit space of the data.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "epsfd/data.hpp"
#include "epsfd/tensor.hpp"

namespace epsfd::phys {

struct CircuitTopology {
  std::vector<std::string> columns;  // ordered sensor channels
  std::vector<std::pair<std::string, std::string>> voltage_pairs;
  std::vector<std::string> open_circuit_currents;
  std::vector<std::string> inverter_voltage_channels;  // empty or exactly 2
  std::vector<std::string> inverter_freq_channels;     // empty or exactly 2
  double v_target = 120.5;  // volts
  double f_target = 60.0;   // hertz

  // Throws std::invalid_argument naming the offending channel/section.
  void validate() const;
  std::int64_t column_index(const std::string& name) const;

  static CircuitTopology load(const std::string& path);
  static CircuitTopology parse(std::istream& in, const std::string& origin);
  void save(const std::string& path) const;
};

// Index view over a flattened array O [batch, features * past_length];
// channel c's time series occupies columns c, c + F, ..., c + (T-1)*F.
struct SignalView {
  const CircuitTopology* topology = nullptr;
  std::int64_t features = 0;
  std::int64_t past_length = 0;

  SignalView(const CircuitTopology& topo, std::int64_t past_len);

  // [batch, past_length] series of one channel.
  ad::Tensor channel(const ad::Tensor& flat, const std::string& name) const;
  std::int64_t flat_width() const { return features * past_length; }
};

// Scaled setpoints for the four inverter-proximate channels, in the same
// per-column unit space as the data.
struct ScaledTargets {
  double inverter_v[2] = {0.0, 0.0};
  double inverter_f[2] = {0.0, 0.0};
};

// Passes the physical setpoints (v_target volts, f_target hertz) through the
// fitted per-column scaler, since model arrays live in scaled units.
ScaledTargets scaled_targets(const CircuitTopology& topology, const data::Scaler& scaler);

class PhysicsLoss {
 public:
  PhysicsLoss(const CircuitTopology& topology, std::int64_t past_length,
              ScaledTargets targets);

  // Term of Eq.-style range bound: mean of (x-1)^2 above 1 and x^2 below 0.
  ad::Tensor d_squared(const ad::Tensor& flat) const;
  // Closed-breaker voltage-pair equality, averaged over the M pairs.
  ad::Tensor pair_equality(const ad::Tensor& flat) const;
  // Open-circuit currents driven to zero, averaged over the N channels.
  ad::Tensor open_circuit_current(const ad::Tensor& flat) const;
  // Inverter-proximate voltages steered to the scaled 120.5 V setpoint.
  ad::Tensor inverter_voltage(const ad::Tensor& flat) const;
  // Inverter-proximate frequencies steered to the scaled 60 Hz setpoint.
  ad::Tensor inverter_frequency(const ad::Tensor& flat) const;

  // Sum of the five terms (terms whose channel sets are empty contribute 0).
  ad::Tensor total(const ad::Tensor& flat) const;

  const SignalView& view() const { return view_; }
  const CircuitTopology& topology() const { return *topology_; }

 private:
  void check_width(const ad::Tensor& flat) const;

  const CircuitTopology* topology_;
  SignalView view_;
  ScaledTargets targets_;
};

}  // namespace epsfd::phys

#pragma once

// Synthetic EPS telemetry generator mirroring the testbed circuit roles: a
// closed-breaker voltage pair, open-circuit currents, inverter-proximate
// voltage and frequency channels, plus free bus/load channels with slow
// sinusoidal modulation so nominal windows are not i.i.d. constants.
// Deterministic under seed; emits the same CSV + sidecar-labels format the
// ingestion layer consumes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "epsfd/data.hpp"
#include "epsfd/physics.hpp"

namespace epsfd::synth {

enum class ChannelRole {
  pair_voltage,    // equal across a closed breaker, up to noise
  open_current,    // reads 0 up to noise
  inverter_volt,   // regulated at v_target
  inverter_freq,   // regulated at f_target
  bus_voltage,     // free channel, modulated
  load_current,    // free channel, modulated
};

struct ChannelSpec {
  std::string name;
  ChannelRole role = ChannelRole::bus_voltage;
  double base = 0.0;       // nominal level in raw units
  double mod_amp = 0.0;    // sinusoidal load-modulation amplitude
  double mod_period = 0.0; // seconds; 0 = no modulation
  double noise_std = 0.0;  // per-channel sigma in raw units
  int pair_id = -1;        // channels sharing a pair_id form a voltage pair
};

struct SynthConfig {
  std::vector<ChannelSpec> channels;
  double sample_rate = 2.0;     // Hz
  std::int64_t duration = 1000; // samples
  std::uint64_t seed = 1;
  double v_target = 120.5;
  double f_target = 60.0;

  static SynthConfig defaults();
  static SynthConfig load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;

  std::int64_t channel_index(const std::string& name) const;
  // Topology induced by the channel roles (drives the physics loss).
  phys::CircuitTopology topology() const;
};

enum class FaultKind {
  stuck_sensor,    // hold the last pre-onset value
  offset_bias,     // add magnitude from onset on
  breaker_trip,    // break pair equality by magnitude
  inverter_drift,  // ramp away from the setpoint, reaching magnitude
  noise_burst,     // extra Gaussian noise, sigma = magnitude * channel sigma
};

std::string fault_kind_name(FaultKind k);
FaultKind fault_kind_from_name(const std::string& name);

struct FaultScenario {
  FaultKind kind = FaultKind::offset_bias;
  std::string channel;
  std::int64_t onset = 0;  // sample index
  double magnitude = 0.0;  // raw units (noise_burst: sigma multiplier)

  void validate(const SynthConfig& config) const;
};

std::vector<FaultScenario> load_scenarios(const std::string& path);
void save_scenarios(const std::string& path, const std::vector<FaultScenario>& scenarios);

// Nominal telemetry; deterministic under config.seed.
data::Frame simulate_nominal(const SynthConfig& config);

// Applies one scenario: rows from onset onward are modified per kind and
// labeled fault with the target channel annotated.
data::Frame inject_fault(const data::Frame& frame, const FaultScenario& scenario,
                         const SynthConfig& config);

// Label ranges covering the faulted region of a frame (for the sidecar).
std::vector<data::LabelRange> fault_ranges(const data::Frame& frame);

void write_csv(const std::string& path, const data::Frame& frame);

}  // namespace epsfd::synth

#include "epsfd/synth.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "epsfd/random.hpp"

namespace epsfd::synth {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string role_name(ChannelRole r) {
  switch (r) {
    case ChannelRole::pair_voltage: return "pair_voltage";
    case ChannelRole::open_current: return "open_current";
    case ChannelRole::inverter_volt: return "inverter_volt";
    case ChannelRole::inverter_freq: return "inverter_freq";
    case ChannelRole::bus_voltage: return "bus_voltage";
    case ChannelRole::load_current: return "load_current";
  }
  return "bus_voltage";
}

ChannelRole role_from_name(const std::string& name) {
  if (name == "pair_voltage") return ChannelRole::pair_voltage;
  if (name == "open_current") return ChannelRole::open_current;
  if (name == "inverter_volt") return ChannelRole::inverter_volt;
  if (name == "inverter_freq") return ChannelRole::inverter_freq;
  if (name == "bus_voltage") return ChannelRole::bus_voltage;
  if (name == "load_current") return ChannelRole::load_current;
  throw std::invalid_argument("unknown channel role '" + name + "'");
}

}  // namespace

std::string fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::stuck_sensor: return "stuck_sensor";
    case FaultKind::offset_bias: return "offset_bias";
    case FaultKind::breaker_trip: return "breaker_trip";
    case FaultKind::inverter_drift: return "inverter_drift";
    case FaultKind::noise_burst: return "noise_burst";
  }
  return "offset_bias";
}

FaultKind fault_kind_from_name(const std::string& name) {
  if (name == "stuck_sensor") return FaultKind::stuck_sensor;
  if (name == "offset_bias") return FaultKind::offset_bias;
  if (name == "breaker_trip") return FaultKind::breaker_trip;
  if (name == "inverter_drift") return FaultKind::inverter_drift;
  if (name == "noise_burst") return FaultKind::noise_burst;
  throw std::invalid_argument("unknown fault kind '" + name + "'");
}

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.sample_rate = 2.0;
  c.duration = 1000;
  c.seed = 1;
  // Battery bus pair across a closed breaker, slow load modulation.
  c.channels.push_back({"E135", ChannelRole::pair_voltage, 24.0, 0.5, 180.0, 0.05, 0});
  c.channels.push_back({"E140", ChannelRole::pair_voltage, 24.0, 0.5, 180.0, 0.05, 0});
  // Currents on normally-open branches.
  c.channels.push_back({"IT167", ChannelRole::open_current, 0.0, 0.0, 0.0, 0.02, -1});
  c.channels.push_back({"IT281", ChannelRole::open_current, 0.0, 0.0, 0.0, 0.02, -1});
  // Inverter-proximate regulated channels.
  c.channels.push_back({"E165", ChannelRole::inverter_volt, 120.5, 0.0, 0.0, 0.3, -1});
  c.channels.push_back({"E265", ChannelRole::inverter_volt, 120.5, 0.0, 0.0, 0.3, -1});
  c.channels.push_back({"ST165", ChannelRole::inverter_freq, 60.0, 0.0, 0.0, 0.05, -1});
  c.channels.push_back({"ST265", ChannelRole::inverter_freq, 60.0, 0.0, 0.0, 0.05, -1});
  // Free bus voltage and load current, modulated.
  c.channels.push_back({"E242", ChannelRole::bus_voltage, 26.0, 1.2, 240.0, 0.08, -1});
  c.channels.push_back({"IT240", ChannelRole::load_current, 5.0, 1.5, 150.0, 0.06, -1});
  return c;
}

void SynthConfig::validate() const {
  if (channels.size() < 8)
    throw std::invalid_argument("synth config needs >= 8 channels, got " +
                                std::to_string(channels.size()));
  if (duration < 2) throw std::invalid_argument("duration must be >= 2 samples");
  if (sample_rate <= 0.0) throw std::invalid_argument("sample_rate must be positive");
  std::map<int, int> pair_counts;
  int volt = 0, freq = 0, open_c = 0;
  for (const auto& ch : channels) {
    if (ch.name.empty()) throw std::invalid_argument("channel with empty name");
    if (ch.noise_std < 0.0)
      throw std::invalid_argument("channel " + ch.name + ": noise_std must be >= 0");
    switch (ch.role) {
      case ChannelRole::pair_voltage:
        if (ch.pair_id < 0)
          throw std::invalid_argument("channel " + ch.name +
                                      ": pair_voltage needs a pair id");
        pair_counts[ch.pair_id]++;
        break;
      case ChannelRole::open_current: ++open_c; break;
      case ChannelRole::inverter_volt: ++volt; break;
      case ChannelRole::inverter_freq: ++freq; break;
      default: break;
    }
  }
  if (pair_counts.empty())
    throw std::invalid_argument("synth config needs at least one voltage pair");
  for (const auto& [id, n] : pair_counts)
    if (n != 2)
      throw std::invalid_argument("voltage pair " + std::to_string(id) + " has " +
                                  std::to_string(n) + " channels, expected 2");
  if (open_c < 1) throw std::invalid_argument("synth config needs an open-circuit current");
  if (volt != 2) throw std::invalid_argument("synth config needs exactly 2 inverter_volt channels");
  if (freq != 2) throw std::invalid_argument("synth config needs exactly 2 inverter_freq channels");
}

std::int64_t SynthConfig::channel_index(const std::string& name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == name) return static_cast<std::int64_t>(i);
  throw std::invalid_argument("unknown channel '" + name + "'");
}

phys::CircuitTopology SynthConfig::topology() const {
  phys::CircuitTopology topo;
  std::map<int, std::vector<std::string>> pairs;
  for (const auto& ch : channels) {
    topo.columns.push_back(ch.name);
    switch (ch.role) {
      case ChannelRole::pair_voltage: pairs[ch.pair_id].push_back(ch.name); break;
      case ChannelRole::open_current: topo.open_circuit_currents.push_back(ch.name); break;
      case ChannelRole::inverter_volt: topo.inverter_voltage_channels.push_back(ch.name); break;
      case ChannelRole::inverter_freq: topo.inverter_freq_channels.push_back(ch.name); break;
      default: break;
    }
  }
  for (const auto& [id, names] : pairs)
    if (names.size() == 2) topo.voltage_pairs.emplace_back(names[0], names[1]);
  topo.v_target = v_target;
  topo.f_target = f_target;
  topo.validate();
  return topo;
}

SynthConfig SynthConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synth config: " + path);
  SynthConfig c;
  c.channels.clear();
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + why);
    };
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    if (section == "channels") {
      // name role base mod_amp mod_period noise_std [pair_id]
      std::istringstream is(line);
      ChannelSpec ch;
      std::string role;
      if (!(is >> ch.name >> role >> ch.base >> ch.mod_amp >> ch.mod_period >> ch.noise_std))
        fail("channel line needs: name role base mod_amp mod_period noise_std [pair_id]");
      ch.role = role_from_name(role);
      if (!(is >> ch.pair_id)) ch.pair_id = -1;
      c.channels.push_back(std::move(ch));
    } else {
      auto pos = line.find('=');
      if (pos == std::string::npos) fail("expected key = value");
      std::string key = trim(line.substr(0, pos));
      std::string value = trim(line.substr(pos + 1));
      if (key == "sample_rate") c.sample_rate = std::stod(value);
      else if (key == "duration") c.duration = std::stoll(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "v_target") c.v_target = std::stod(value);
      else if (key == "f_target") c.f_target = std::stod(value);
      else fail("unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

void SynthConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write synth config: " + path);
  out.precision(17);
  out << "sample_rate = " << sample_rate << "\n"
      << "duration = " << duration << "\n"
      << "seed = " << seed << "\n"
      << "v_target = " << v_target << "\n"
      << "f_target = " << f_target << "\n\n[channels]\n"
      << "# name role base mod_amp mod_period noise_std [pair_id]\n";
  for (const auto& ch : channels) {
    out << ch.name << " " << role_name(ch.role) << " " << ch.base << " " << ch.mod_amp
        << " " << ch.mod_period << " " << ch.noise_std;
    if (ch.pair_id >= 0) out << " " << ch.pair_id;
    out << "\n";
  }
}

// ---- generation ------------------------------------------------------------------

data::Frame simulate_nominal(const SynthConfig& config) {
  config.validate();
  data::Frame frame;
  frame.source = "synth.csv";
  for (const auto& ch : config.channels) frame.columns.push_back(ch.name);
  std::int64_t n_cols = frame.cols();
  frame.values.resize(static_cast<std::size_t>(config.duration * n_cols));
  RandomStream rng(config.seed);

  // Paired channels share one base waveform per pair id so equality holds
  // exactly in the noiseless limit.
  for (std::int64_t i = 0; i < config.duration; ++i) {
    double t = static_cast<double>(i) / config.sample_rate;
    frame.timestamps.push_back(t);
    frame.labels.push_back(data::label_nominal);
    frame.fault_channel.emplace_back();
    std::map<int, double> pair_base;
    for (std::int64_t c = 0; c < n_cols; ++c) {
      const auto& ch = config.channels[static_cast<std::size_t>(c)];
      double base = ch.base;
      if (ch.mod_period > 0.0 && ch.mod_amp != 0.0)
        base += ch.mod_amp * std::sin(2.0 * std::numbers::pi * t / ch.mod_period);
      if (ch.role == ChannelRole::pair_voltage) {
        auto it = pair_base.find(ch.pair_id);
        if (it == pair_base.end())
          pair_base.emplace(ch.pair_id, base);
        else
          base = it->second;
      }
      double noise = ch.noise_std > 0.0 ? ch.noise_std * rng.normal() : 0.0;
      frame.values[i * n_cols + c] = base + noise;
    }
  }
  return frame;
}

void FaultScenario::validate(const SynthConfig& config) const {
  std::int64_t idx = config.channel_index(channel);
  const auto& ch = config.channels[static_cast<std::size_t>(idx)];
  if (onset < 1 || onset >= config.duration)
    throw std::invalid_argument("fault onset " + std::to_string(onset) +
                                " outside (0, duration)");
  if (!(magnitude > 0.0))
    throw std::invalid_argument("fault magnitude must be > 0, got " +
                                std::to_string(magnitude));
  if (kind == FaultKind::breaker_trip && ch.role != ChannelRole::pair_voltage)
    throw std::invalid_argument("breaker_trip target '" + channel +
                                "' is not part of a voltage pair");
  if (kind == FaultKind::inverter_drift && ch.role != ChannelRole::inverter_volt &&
      ch.role != ChannelRole::inverter_freq)
    throw std::invalid_argument("inverter_drift target '" + channel +
                                "' is not an inverter channel");
}

data::Frame inject_fault(const data::Frame& frame, const FaultScenario& scenario,
                         const SynthConfig& config) {
  scenario.validate(config);
  std::int64_t col = -1;
  for (std::int64_t c = 0; c < frame.cols(); ++c)
    if (frame.columns[c] == scenario.channel) col = c;
  if (col < 0)
    throw std::invalid_argument("frame has no channel '" + scenario.channel + "'");

  data::Frame out = frame;
  std::int64_t n_cols = out.cols();
  std::int64_t n_rows = out.rows();
  const auto& ch = config.channels[static_cast<std::size_t>(config.channel_index(scenario.channel))];
  // Independent stream so the nominal part of the frame is untouched.
  RandomStream rng(config.seed ^ 0x9e3779b97f4a7c15ULL ^
                   static_cast<std::uint64_t>(scenario.onset));

  double held = out.at(scenario.onset - 1, col);
  for (std::int64_t r = scenario.onset; r < n_rows; ++r) {
    double& v = out.values[r * n_cols + col];
    switch (scenario.kind) {
      case FaultKind::stuck_sensor:
        v = held;
        break;
      case FaultKind::offset_bias:
        v += scenario.magnitude;
        break;
      case FaultKind::breaker_trip:
        v -= scenario.magnitude;
        break;
      case FaultKind::inverter_drift: {
        double span = static_cast<double>(n_rows - scenario.onset);
        double ramp = static_cast<double>(r - scenario.onset + 1) / span;
        v += scenario.magnitude * ramp;
        break;
      }
      case FaultKind::noise_burst:
        v += scenario.magnitude * ch.noise_std * rng.normal();
        break;
    }
    out.labels[r] = data::label_fault;
    out.fault_channel[r] = scenario.channel;
  }
  return out;
}

std::vector<data::LabelRange> fault_ranges(const data::Frame& frame) {
  std::vector<data::LabelRange> out;
  std::int64_t r = 0;
  while (r < frame.rows()) {
    if (frame.labels[r] != data::label_fault) {
      ++r;
      continue;
    }
    std::int64_t start = r;
    while (r < frame.rows() && frame.labels[r] == data::label_fault) ++r;
    data::LabelRange range;
    range.file = frame.source;
    range.t_start = frame.timestamps[start];
    range.t_end = frame.timestamps[r - 1];
    range.channel = frame.fault_channel[start];
    out.push_back(std::move(range));
  }
  return out;
}

// ---- scenario files ----------------------------------------------------------------

std::vector<FaultScenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::vector<FaultScenario> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string kind;
    FaultScenario s;
    if (!(is >> kind >> s.channel >> s.onset >> s.magnitude))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected <kind> <channel> <onset> <magnitude>");
    s.kind = fault_kind_from_name(kind);
    out.push_back(std::move(s));
  }
  return out;
}

void save_scenarios(const std::string& path, const std::vector<FaultScenario>& scenarios) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << "# kind channel onset magnitude\n";
  out.precision(17);
  for (const auto& s : scenarios)
    out << fault_kind_name(s.kind) << " " << s.channel << " " << s.onset << " "
        << s.magnitude << "\n";
}

void write_csv(const std::string& path, const data::Frame& frame) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV: " + path);
  out.precision(17);
  out << "time";
  for (const auto& c : frame.columns) out << "," << c;
  out << "\n";
  std::int64_t n_cols = frame.cols();
  for (std::int64_t r = 0; r < frame.rows(); ++r) {
    out << frame.timestamps[r];
    for (std::int64_t c = 0; c < n_cols; ++c) out << "," << frame.at(r, c);
    out << "\n";
  }
}

}  // namespace epsfd::synth

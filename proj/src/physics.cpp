#include "epsfd/physics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epsfd::phys {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(line);
  while (is >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

std::int64_t CircuitTopology::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end())
    throw std::invalid_argument("topology references unknown channel '" + name + "'");
  return static_cast<std::int64_t>(it - columns.begin());
}

void CircuitTopology::validate() const {
  if (columns.empty()) throw std::invalid_argument("topology has no columns");
  for (const auto& [a, b] : voltage_pairs) {
    column_index(a);
    column_index(b);
  }
  for (const auto& c : open_circuit_currents) column_index(c);
  if (!inverter_voltage_channels.empty() && inverter_voltage_channels.size() != 2)
    throw std::invalid_argument("inverter_voltage section needs exactly 2 channels, got " +
                                std::to_string(inverter_voltage_channels.size()));
  if (!inverter_freq_channels.empty() && inverter_freq_channels.size() != 2)
    throw std::invalid_argument("inverter_frequency section needs exactly 2 channels, got " +
                                std::to_string(inverter_freq_channels.size()));
  for (const auto& c : inverter_voltage_channels) column_index(c);
  for (const auto& c : inverter_freq_channels) column_index(c);
}

CircuitTopology CircuitTopology::parse(std::istream& in, const std::string& origin) {
  CircuitTopology topo;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    if (section == "columns") {
      for (auto& t : split_tokens(line)) topo.columns.push_back(t);
    } else if (section == "voltage_pairs") {
      auto toks = split_tokens(line);
      if (toks.size() != 2) fail("voltage pair needs exactly 2 channels");
      topo.voltage_pairs.emplace_back(toks[0], toks[1]);
    } else if (section == "open_circuit_currents") {
      for (auto& t : split_tokens(line)) topo.open_circuit_currents.push_back(t);
    } else if (section == "inverter_voltage") {
      for (auto& t : split_tokens(line)) topo.inverter_voltage_channels.push_back(t);
    } else if (section == "inverter_frequency") {
      for (auto& t : split_tokens(line)) topo.inverter_freq_channels.push_back(t);
    } else if (section == "targets") {
      auto pos = line.find('=');
      if (pos == std::string::npos) fail("targets entries are key = value");
      std::string key = trim(line.substr(0, pos));
      double value = std::stod(trim(line.substr(pos + 1)));
      if (key == "v")
        topo.v_target = value;
      else if (key == "f")
        topo.f_target = value;
      else
        fail("unknown target '" + key + "' (expected v or f)");
    } else {
      fail("line outside any known section (" + line + ")");
    }
  }
  topo.validate();
  return topo;
}

CircuitTopology CircuitTopology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  return parse(in, path);
}

void CircuitTopology::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology file: " + path);
  out << "[columns]\n";
  for (const auto& c : columns) out << c << "\n";
  out << "\n[voltage_pairs]\n";
  for (const auto& [a, b] : voltage_pairs) out << a << " " << b << "\n";
  out << "\n[open_circuit_currents]\n";
  for (const auto& c : open_circuit_currents) out << c << "\n";
  out << "\n[inverter_voltage]\n";
  for (const auto& c : inverter_voltage_channels) out << c << "\n";
  out << "\n[inverter_frequency]\n";
  for (const auto& c : inverter_freq_channels) out << c << "\n";
  out << "\n[targets]\n";
  out.precision(17);
  out << "v = " << v_target << "\n"
      << "f = " << f_target << "\n";
}

ScaledTargets scaled_targets(const CircuitTopology& topology, const data::Scaler& scaler) {
  ScaledTargets t;
  for (std::size_t i = 0; i < topology.inverter_voltage_channels.size() && i < 2; ++i) {
    std::int64_t col = scaler.column_index(topology.inverter_voltage_channels[i]);
    t.inverter_v[i] = scaler.transform_value(col, topology.v_target);
  }
  for (std::size_t i = 0; i < topology.inverter_freq_channels.size() && i < 2; ++i) {
    std::int64_t col = scaler.column_index(topology.inverter_freq_channels[i]);
    t.inverter_f[i] = scaler.transform_value(col, topology.f_target);
  }
  return t;
}

// ---- signal view -------------------------------------------------------------

SignalView::SignalView(const CircuitTopology& topo, std::int64_t past_len)
    : topology(&topo),
      features(static_cast<std::int64_t>(topo.columns.size())),
      past_length(past_len) {
  if (past_len < 1) throw std::invalid_argument("past_length must be >= 1");
}

ad::Tensor SignalView::channel(const ad::Tensor& flat, const std::string& name) const {
  std::int64_t col = topology->column_index(name);
  return ad::slice_cols(flat, col, features, past_length);
}

// ---- loss terms ----------------------------------------------------------------

PhysicsLoss::PhysicsLoss(const CircuitTopology& topology, std::int64_t past_length,
                         ScaledTargets targets)
    : topology_(&topology), view_(topology, past_length), targets_(targets) {
  topology.validate();
}

void PhysicsLoss::check_width(const ad::Tensor& flat) const {
  if (flat.shape().size() != 2 || flat.cols() != view_.flat_width())
    throw std::invalid_argument("physics loss expects arrays of width " +
                                std::to_string(view_.flat_width()) + ", got " +
                                ad::shape_str(flat.shape()));
}

ad::Tensor PhysicsLoss::d_squared(const ad::Tensor& flat) const {
  check_width(flat);
  using namespace ad;
  Tensor above = square(hinge_above(flat, 1.0));
  Tensor below = square(hinge_below(flat, 0.0));
  return mean(add(above, below));
}

ad::Tensor PhysicsLoss::pair_equality(const ad::Tensor& flat) const {
  check_width(flat);
  using namespace ad;
  if (topology_->voltage_pairs.empty()) return Tensor::scalar(0.0);
  Tensor acc;
  for (const auto& [a, b] : topology_->voltage_pairs) {
    Tensor diff = sub(view_.channel(flat, a), view_.channel(flat, b));
    Tensor term = mean(square(diff));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, 1.0 / static_cast<double>(topology_->voltage_pairs.size()));
}

ad::Tensor PhysicsLoss::open_circuit_current(const ad::Tensor& flat) const {
  check_width(flat);
  using namespace ad;
  if (topology_->open_circuit_currents.empty()) return Tensor::scalar(0.0);
  Tensor acc;
  for (const auto& name : topology_->open_circuit_currents) {
    Tensor term = mean(square(view_.channel(flat, name)));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, 1.0 / static_cast<double>(topology_->open_circuit_currents.size()));
}

namespace {

ad::Tensor setpoint_term(const SignalView& view, const ad::Tensor& flat,
                         const std::vector<std::string>& channels,
                         const double targets[2]) {
  using namespace ad;
  if (channels.empty()) return Tensor::scalar(0.0);
  Tensor a = mean(abs(add_scalar(view.channel(flat, channels[0]), -targets[0])));
  Tensor b = mean(abs(add_scalar(view.channel(flat, channels[1]), -targets[1])));
  return scale(add(a, b), 0.5);
}

}  // namespace

ad::Tensor PhysicsLoss::inverter_voltage(const ad::Tensor& flat) const {
  check_width(flat);
  return setpoint_term(view_, flat, topology_->inverter_voltage_channels, targets_.inverter_v);
}

ad::Tensor PhysicsLoss::inverter_frequency(const ad::Tensor& flat) const {
  check_width(flat);
  return setpoint_term(view_, flat, topology_->inverter_freq_channels, targets_.inverter_f);
}

ad::Tensor PhysicsLoss::total(const ad::Tensor& flat) const {
  using namespace ad;
  Tensor acc = d_squared(flat);
  acc = add(acc, pair_equality(flat));
  acc = add(acc, open_circuit_current(flat));
  acc = add(acc, inverter_voltage(flat));
  acc = add(acc, inverter_frequency(flat));
  return acc;
}

}  // namespace epsfd::phys

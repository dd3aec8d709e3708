#include "epsfd/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "epsfd/eval.hpp"

namespace epsfd::train {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("expected boolean, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

// ---- config ---------------------------------------------------------------------

void TrainConfig::validate() const {
  if (past_length < 1) throw std::invalid_argument("past_length must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (gen_count < 1) throw std::invalid_argument("gen_count must be >= 1");
  if (beta_init < 0.0) throw std::invalid_argument("beta_init must be >= 0");
  if (beta_step < 0.0) throw std::invalid_argument("beta_step must be >= 0");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
  if (coupling_layers < 1) throw std::invalid_argument("coupling_layers must be >= 1");
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (neurons < 1) throw std::invalid_argument("neurons must be >= 1");
}

flow::FlowConfig TrainConfig::flow_config() const {
  flow::FlowConfig fc;
  fc.coupling_layers = coupling_layers;
  fc.nets.hidden_layers = layers;
  fc.nets.hidden_width = neurons;
  return fc;
}

nn::GRUConfig TrainConfig::gru_config() const {
  nn::GRUConfig gc;
  gc.cells = layers;
  gc.hidden = neurons;
  return gc;
}

nn::AutoencoderConfig TrainConfig::ae_config() const {
  nn::AutoencoderConfig ac;
  std::int64_t depth = std::max<std::int64_t>(1, layers / 2);
  ac.encoder_widths.clear();
  for (std::int64_t i = 0; i < depth - 1; ++i) ac.encoder_widths.push_back(neurons);
  ac.encoder_widths.push_back(std::max<std::int64_t>(1, neurons / 4));
  ac.decoder_hidden = neurons;
  return ac;
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << model::kind_name(kind) << " pi=" << (pi_enabled ? 1 : 0)
     << " past_length=" << past_length << " batch_size=" << batch_size
     << " epochs=" << epochs << " learning_rate=" << learning_rate
     << " gen_count=" << gen_count << " beta_init=" << beta_init
     << " beta_step=" << beta_step << " patience=" << patience
     << " grad_clip=" << grad_clip;
  if (kind == model::Kind::realnvp) os << " coupling_layers=" << coupling_layers;
  os << " layers=" << layers << " neurons=" << neurons;
  return os.str();
}

std::uint64_t TrainConfig::config_hash() const {
  // FNV-1a 64 over the canonical form.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

void apply_config_key(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "kind") c.kind = model::kind_from_name(value);
  else if (key == "pi") c.pi_enabled = parse_bool(value);
  else if (key == "past_length") c.past_length = std::stoll(value);
  else if (key == "batch_size") c.batch_size = std::stoll(value);
  else if (key == "epochs") c.epochs = std::stoll(value);
  else if (key == "learning_rate") c.learning_rate = std::stod(value);
  else if (key == "gen_count") c.gen_count = std::stoll(value);
  else if (key == "beta_init") c.beta_init = std::stod(value);
  else if (key == "beta_step") c.beta_step = std::stod(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "patience") c.patience = std::stoll(value);
  else if (key == "grad_clip") c.grad_clip = std::stod(value);
  else if (key == "coupling_layers") c.coupling_layers = std::stoll(value);
  else if (key == "layers") c.layers = std::stoll(value);
  else if (key == "neurons") c.neurons = std::stoll(value);
  else throw std::invalid_argument("unknown train config key '" + key + "'");
}

}  // namespace

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open train config: " + path);
  TrainConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    try {
      apply_config_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& ex) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  c.validate();
  return c;
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train config: " + path);
  out.precision(17);
  out << "kind = " << model::kind_name(kind) << "\n"
      << "pi = " << (pi_enabled ? "true" : "false") << "\n"
      << "past_length = " << past_length << "\n"
      << "batch_size = " << batch_size << "\n"
      << "epochs = " << epochs << "\n"
      << "learning_rate = " << learning_rate << "\n"
      << "gen_count = " << gen_count << "\n"
      << "beta_init = " << beta_init << "\n"
      << "beta_step = " << beta_step << "\n"
      << "seed = " << seed << "\n"
      << "patience = " << patience << "\n"
      << "grad_clip = " << grad_clip << "\n"
      << "coupling_layers = " << coupling_layers << "\n"
      << "layers = " << layers << "\n"
      << "neurons = " << neurons << "\n";
}

// ---- loss pieces ------------------------------------------------------------------

ad::Tensor forward_recon(const model::Bundle& bundle, const ad::Tensor& batch) {
  switch (bundle.kind) {
    case model::Kind::gru: return bundle.gru->forward(batch);
    case model::Kind::autoencoder: return bundle.autoencoder->forward(batch);
    case model::Kind::realnvp:
      throw std::invalid_argument("realnvp has no reconstruction path");
  }
  throw std::invalid_argument("unknown model kind");
}

ad::Tensor main_loss(const model::Bundle& bundle, const ad::Tensor& batch) {
  using namespace ad;
  switch (bundle.kind) {
    case model::Kind::realnvp:
      return neg(mean(bundle.flow->log_prob(batch)));
    case model::Kind::gru:
      return mean(abs(sub(forward_recon(bundle, batch), batch)));
    case model::Kind::autoencoder:
      return mean(square(sub(forward_recon(bundle, batch), batch)));
  }
  throw std::invalid_argument("unknown model kind");
}

ad::Tensor composite_loss(const ad::Tensor& main, const ad::Tensor& phys, double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  return ad::add(main, ad::scale(phys, beta));
}

LagrangianState lagrangian_update(LagrangianState state, double phys_value,
                                  double beta_step) {
  if (phys_value < 0.0)
    throw std::invalid_argument("phys_value must be >= 0, got " + std::to_string(phys_value));
  state.beta = std::max(0.0, state.beta + beta_step * phys_value);
  return state;
}

void adam_step(model::TrainerState& state, const nn::NamedParams& params,
               const AdamConfig& cfg) {
  if (state.slots.empty()) {
    state.slots.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto n = static_cast<std::size_t>(params[i].second.size());
      state.slots[i].m.assign(n, 0.0);
      state.slots[i].v.assign(n, 0.0);
    }
  }
  if (state.slots.size() != params.size())
    throw std::invalid_argument("adam state does not match parameter list");
  state.adam_step += 1;
  double t = static_cast<double>(state.adam_step);
  double corr1 = 1.0 - std::pow(cfg.beta1, t);
  double corr2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    ad::Tensor tensor = params[p].second;  // shared handle
    auto& slot = state.slots[p];
    const auto& g = tensor.grad();
    auto& values = tensor.values();
    if (slot.m.size() != g.size())
      throw std::invalid_argument("adam slot size mismatch for " + params[p].first);
    for (std::size_t i = 0; i < g.size(); ++i) {
      slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g[i];
      slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double mhat = slot.m[i] / corr1;
      double vhat = slot.v[i] / corr2;
      values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

// ---- history ------------------------------------------------------------------------

void save_history(const std::string& path, const std::vector<EpochRecord>& history,
                  bool pi_enabled) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path);
  out.precision(17);
  out << "epsfd-history 1\n";
  out << "pi = " << (pi_enabled ? "true" : "false") << "\n";
  out << (pi_enabled ? "epoch main phys beta val_main val_auc\n"
                     : "epoch main val_main val_auc\n");
  for (const auto& r : history) {
    out << r.epoch << " " << r.main;
    if (pi_enabled) out << " " << r.phys << " " << r.beta;
    if (r.has_validation) out << " " << r.val_main;
    else out << " nan";
    if (r.has_val_auc) out << " " << r.val_auc;
    else out << " nan";
    out << "\n";
  }
}

std::vector<EpochRecord> load_history(const std::string& path, bool* pi_enabled) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open history: " + path);
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "epsfd-history" || version != 1)
    throw std::runtime_error(path + ": not an epsfd history file");
  std::string key, eq, value;
  in >> key >> eq >> value;
  bool pi = parse_bool(value);
  if (pi_enabled) *pi_enabled = pi;
  std::string line;
  std::getline(in, line);  // rest of pi line
  std::getline(in, line);  // column header
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream is(line);
    EpochRecord r;
    is >> r.epoch >> r.main;
    if (pi) is >> r.phys >> r.beta;
    is >> r.val_main >> r.val_auc;
    r.has_validation = !std::isnan(r.val_main);
    r.has_val_auc = !std::isnan(r.val_auc);
    out.push_back(r);
  }
  return out;
}

// ---- training loop ---------------------------------------------------------------------

namespace {

ad::Tensor gather_rows(const data::WindowBatch& windows,
                       const std::vector<std::int64_t>& order, std::int64_t start,
                       std::int64_t count) {
  std::int64_t width = windows.width();
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(count * width));
  for (std::int64_t i = 0; i < count; ++i) {
    std::int64_t w = order[static_cast<std::size_t>(start + i)];
    vals.insert(vals.end(), windows.flat.begin() + w * width,
                windows.flat.begin() + (w + 1) * width);
  }
  return ad::Tensor::from_values({count, width}, std::move(vals));
}

void clip_gradients(const nn::NamedParams& params, double clip) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    (void)name;
    for (double g : t.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm <= clip || norm == 0.0) return;
  double s = clip / norm;
  for (const auto& [name, t] : params) {
    (void)name;
    ad::Tensor handle = t;
    for (double& x : handle.grad()) x *= s;
  }
}

double validation_main(const model::Bundle& bundle, const data::WindowBatch& validation) {
  eval::ScoreSet set = eval::score(bundle, validation);
  double acc = 0.0;
  for (double s : set.scores) acc += s;
  return acc / static_cast<double>(set.scores.size());
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const data::WindowBatch& train_windows,
                        const data::WindowBatch& validation_windows,
                        const data::Scaler& scaler, const phys::CircuitTopology* topology,
                        const ResumePoint* resume, const EpochCallback& per_epoch) {
  config.validate();
  if (train_windows.count < 1) throw std::invalid_argument("no training windows");
  for (int l : train_windows.labels)
    if (l != data::label_nominal)
      throw std::invalid_argument("training windows must be nominal-only");
  if (config.pi_enabled && !topology)
    throw std::invalid_argument("pi_enabled requires a circuit topology");

  TrainResult result;
  if (resume) {
    result.bundle = resume->bundle;
    result.state = resume->state;
  } else {
    RandomStream rng(config.seed);
    result.bundle = model::Bundle::create(config.kind, train_windows.features,
                                          config.past_length, scaler, config.flow_config(),
                                          config.gru_config(), config.ae_config(), rng);
    result.state.rng = rng;
    result.state.beta = config.beta_init;
  }
  if (train_windows.past_length != config.past_length)
    throw std::invalid_argument("window past_length does not match config");

  model::Bundle& bundle = result.bundle;
  model::TrainerState& state = result.state;
  auto params = bundle.parameters();

  std::optional<phys::PhysicsLoss> ploss;
  if (config.pi_enabled)
    ploss.emplace(*topology, config.past_length, phys::scaled_targets(*topology, scaler));

  AdamConfig adam;
  adam.learning_rate = config.learning_rate;

  bool has_validation = validation_windows.count > 0;
  bool val_has_both = has_validation && validation_windows.has_both_classes();

  std::vector<std::int64_t> order(static_cast<std::size_t>(train_windows.count));

  for (std::int64_t epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
    // Shuffle from the identity so the batch order depends only on the rng
    // state; resumed runs then replay the exact trajectory.
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
    state.rng.shuffle(order);
    double main_sum = 0.0, phys_sum = 0.0;
    std::int64_t steps = 0;
    double beta_used = state.beta;

    for (std::int64_t start = 0; start < train_windows.count; start += config.batch_size) {
      std::int64_t count = std::min<std::int64_t>(config.batch_size,
                                                  train_windows.count - start);
      for (auto& [name, t] : params) {
        (void)name;
        t.zero_grad();
      }
      ad::Graph graph;
      double main_value = 0.0, phys_value = 0.0, loss_value = 0.0;
      {
        ad::Graph::Scope scope(graph);
        ad::Tensor batch = gather_rows(train_windows, order, start, count);
        ad::Tensor main = main_loss(bundle, batch);
        ad::Tensor loss = main;
        if (config.pi_enabled) {
          ad::Tensor arrays = bundle.kind == model::Kind::realnvp
                                  ? bundle.flow->sample(config.gen_count, state.rng)
                                  : forward_recon(bundle, batch);
          ad::Tensor phys = ploss->total(arrays);
          loss = composite_loss(main, phys, state.beta);
          phys_value = phys.item();
        }
        main_value = main.item();
        loss_value = loss.item();
        if (!std::isfinite(loss_value))
          throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(steps) + ": loss = " +
                                   std::to_string(loss_value));
        graph.backward(loss);
      }
      if (config.grad_clip > 0.0) clip_gradients(params, config.grad_clip);
      adam_step(state, params, adam);
      main_sum += main_value;
      phys_sum += phys_value;
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.main = main_sum / static_cast<double>(steps);
    record.phys = phys_sum / static_cast<double>(steps);
    record.beta = beta_used;
    if (has_validation) {
      record.has_validation = true;
      record.val_main = validation_main(bundle, validation_windows);
      if (val_has_both) {
        record.has_val_auc = true;
        record.val_auc = eval::auroc(eval::score(bundle, validation_windows));
      }
    }

    if (config.pi_enabled)
      state.beta = lagrangian_update({state.beta}, record.phys, config.beta_step).beta;
    state.epoch = epoch;

    bool stop = false;
    if (config.patience > 0 && record.has_validation) {
      if (!state.has_best || record.val_main < state.best_validation) {
        state.has_best = true;
        state.best_validation = record.val_main;
        state.stale_epochs = 0;
      } else {
        state.stale_epochs += 1;
        if (state.stale_epochs >= config.patience) {
          stop = true;
          result.early_stopped = true;
        }
      }
    }

    result.history.push_back(record);
    if (per_epoch) per_epoch(bundle, state, record);
    if (stop) break;
  }
  return result;
}

// ---- grid search --------------------------------------------------------------------------

std::size_t GridSpec::cell_count() const {
  std::size_t coup = base.kind == model::Kind::realnvp ? coupling_layer_values.size() : 1;
  return past_lengths.size() * coup * layer_values.size() * neuron_values.size() *
         batch_sizes.size() * pi_values.size();
}

std::vector<TrainConfig> GridSpec::enumerate() const {
  std::vector<TrainConfig> cells;
  std::vector<std::int64_t> coup =
      base.kind == model::Kind::realnvp ? coupling_layer_values : std::vector<std::int64_t>{base.coupling_layers};
  for (auto past : past_lengths)
    for (auto c : coup)
      for (auto l : layer_values)
        for (auto n : neuron_values)
          for (auto b : batch_sizes)
            for (bool pi : pi_values) {
              TrainConfig cfg = base;
              cfg.past_length = past;
              cfg.coupling_layers = c;
              cfg.layers = l;
              cfg.neurons = n;
              cfg.batch_size = b;
              cfg.pi_enabled = pi;
              cells.push_back(cfg);
            }
  return cells;
}

namespace {

std::vector<std::int64_t> parse_int_list(const std::string& value) {
  std::vector<std::int64_t> out;
  for (const auto& tok : split_list(value)) out.push_back(std::stoll(tok));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace

GridSpec GridSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid spec: " + path);
  GridSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "past_length") spec.past_lengths = parse_int_list(value);
      else if (key == "coupling_layers") spec.coupling_layer_values = parse_int_list(value);
      else if (key == "layers") spec.layer_values = parse_int_list(value);
      else if (key == "neurons") spec.neuron_values = parse_int_list(value);
      else if (key == "batch_size") spec.batch_sizes = parse_int_list(value);
      else if (key == "pi") {
        spec.pi_values.clear();
        for (const auto& tok : split_list(value)) spec.pi_values.push_back(parse_bool(tok));
      } else if (key == "seeds") {
        spec.seeds = std::stoi(value);
      } else {
        apply_config_key(spec.base, key, value);
      }
    } catch (const std::exception& ex) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (spec.seeds < 1) throw std::invalid_argument(path + ": seeds must be >= 1");
  if (spec.cell_count() == 0) throw std::invalid_argument(path + ": empty grid");
  return spec;
}

void GridSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid spec: " + path);
  auto list = [&](const std::vector<std::int64_t>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    return os.str();
  };
  out << "kind = " << model::kind_name(base.kind) << "\n"
      << "seeds = " << seeds << "\n"
      << "past_length = " << list(past_lengths) << "\n";
  if (base.kind == model::Kind::realnvp)
    out << "coupling_layers = " << list(coupling_layer_values) << "\n";
  out << "layers = " << list(layer_values) << "\n"
      << "neurons = " << list(neuron_values) << "\n"
      << "batch_size = " << list(batch_sizes) << "\n"
      << "pi = ";
  for (std::size_t i = 0; i < pi_values.size(); ++i)
    out << (i ? ", " : "") << (pi_values[i] ? "true" : "false");
  out << "\n"
      << "epochs = " << base.epochs << "\n"
      << "learning_rate = " << base.learning_rate << "\n"
      << "patience = " << base.patience << "\n"
      << "seed = " << base.seed << "\n";
}

std::uint64_t GridResult::key_hash() const {
  std::uint64_t h = config.config_hash();
  h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

void save_grid_results(const std::string& path, const std::vector<GridResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid results: " + path);
  out.precision(17);
  out << "kind,pi,past_length,coupling_layers,layers,neurons,batch_size,seed,"
         "val_auc,val_main,epochs_run,error\n";
  for (const auto& r : results) {
    out << model::kind_name(r.config.kind) << "," << (r.config.pi_enabled ? 1 : 0) << ","
        << r.config.past_length << "," << r.config.coupling_layers << ","
        << r.config.layers << "," << r.config.neurons << "," << r.config.batch_size << ","
        << r.seed << ",";
    if (r.has_val_auc) out << r.val_auc;
    else out << "nan";
    out << "," << r.val_main << "," << r.epochs_run << "," << r.error << "\n";
  }
}

std::vector<GridResult> load_grid_results(const std::string& path, const GridSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid results: " + path);
  std::vector<GridResult> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (fields.size() < 11) continue;
    GridResult r;
    r.config = spec.base;
    r.config.kind = model::kind_from_name(fields[0]);
    r.config.pi_enabled = fields[1] == "1";
    r.config.past_length = std::stoll(fields[2]);
    r.config.coupling_layers = std::stoll(fields[3]);
    r.config.layers = std::stoll(fields[4]);
    r.config.neurons = std::stoll(fields[5]);
    r.config.batch_size = std::stoll(fields[6]);
    r.seed = std::stoull(fields[7]);
    r.has_val_auc = fields[8] != "nan";
    r.val_auc = r.has_val_auc ? std::stod(fields[8]) : 0.0;
    r.val_main = std::stod(fields[9]);
    r.epochs_run = std::stoll(fields[10]);
    if (fields.size() > 11) r.error = fields[11];
    out.push_back(std::move(r));
  }
  return out;
}

void rank_results(std::vector<GridResult>& results) {
  std::sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    bool a_ok = a.error.empty(), b_ok = b.error.empty();
    if (a_ok != b_ok) return a_ok;
    if (a.has_val_auc != b.has_val_auc) return a.has_val_auc;
    if (a.has_val_auc && a.val_auc != b.val_auc) return a.val_auc > b.val_auc;
    if (a.val_main != b.val_main) return a.val_main < b.val_main;
    if (a.config.config_hash() != b.config.config_hash())
      return a.config.config_hash() < b.config.config_hash();
    return a.seed < b.seed;
  });
}

std::vector<GridResult> grid_search(
    const GridSpec& spec, const GridDataset& dataset,
    const std::vector<GridResult>& completed, int workers,
    const std::function<void(const GridResult&)>& on_result) {
  if (!dataset.frames) throw std::invalid_argument("grid_search: no dataset frames");
  auto cells = spec.enumerate();
  if (cells.empty()) throw std::invalid_argument("grid_search: empty grid");

  // (config, seed) jobs not already completed.
  std::vector<GridResult> jobs;
  for (const auto& cell : cells) {
    for (int s = 0; s < spec.seeds; ++s) {
      GridResult job;
      job.config = cell;
      job.seed = cell.seed + static_cast<std::uint64_t>(s);
      bool done = std::any_of(completed.begin(), completed.end(), [&](const GridResult& r) {
        return r.key_hash() == job.key_hash() && r.error.empty();
      });
      if (!done) jobs.push_back(std::move(job));
    }
  }

  std::vector<GridResult> results = completed;
  std::mutex mu;
  std::size_t next = 0;

  auto run_job = [&](GridResult job) {
    try {
      TrainConfig cfg = job.config;
      cfg.seed = job.seed;
      auto train_frames = data::select_frames(*dataset.frames, dataset.split.train_files);
      auto val_frames = data::select_frames(*dataset.frames, dataset.split.validation_files);
      data::Scaler scaler = data::fit_scaler(train_frames);
      for (auto& f : train_frames) scaler.apply(f);
      for (auto& f : val_frames) scaler.apply(f);
      auto train_w = data::windows_of(train_frames, cfg.past_length).filter_nominal();
      data::WindowBatch val_w;
      if (!val_frames.empty()) val_w = data::windows_of(val_frames, cfg.past_length);
      TrainResult tr = train_model(cfg, train_w, val_w, scaler, &dataset.topology);
      job.epochs_run = static_cast<std::int64_t>(tr.history.size());
      if (!tr.history.empty()) {
        const auto& last = tr.history.back();
        job.val_main = last.val_main;
        job.val_auc = last.val_auc;
        job.has_val_auc = last.has_val_auc;
      }
    } catch (const std::exception& ex) {
      job.error = ex.what();
    }
    std::lock_guard<std::mutex> lock(mu);
    results.push_back(job);
    if (on_result) on_result(job);
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    for (auto& job : jobs) run_job(job);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          GridResult job;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= jobs.size()) return;
            job = jobs[next++];
          }
          run_job(std::move(job));
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  rank_results(results);
  return results;
}

}  // namespace epsfd::train

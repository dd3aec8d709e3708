#include "epsfd/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epsfd::model {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::realnvp: return "realnvp";
    case Kind::gru: return "gru";
    case Kind::autoencoder: return "autoencoder";
  }
  return "realnvp";
}

Kind kind_from_name(const std::string& name) {
  if (name == "realnvp") return Kind::realnvp;
  if (name == "gru") return Kind::gru;
  if (name == "autoencoder") return Kind::autoencoder;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

nn::NamedParams Bundle::parameters() const {
  switch (kind) {
    case Kind::realnvp: return flow->parameters();
    case Kind::gru: return gru->parameters();
    case Kind::autoencoder: return autoencoder->parameters();
  }
  return {};
}

Bundle Bundle::create(Kind kind, std::int64_t features, std::int64_t past_length,
                      const data::Scaler& scaler, const flow::FlowConfig& fc,
                      const nn::GRUConfig& gc, const nn::AutoencoderConfig& ac,
                      RandomStream& rng) {
  Bundle b;
  b.kind = kind;
  b.features = features;
  b.past_length = past_length;
  b.scaler = scaler;
  b.flow_cfg = fc;
  b.gru_cfg = gc;
  b.ae_cfg = ac;
  switch (kind) {
    case Kind::realnvp:
      b.flow = flow::FlowModel::create(b.input_width(), fc, rng);
      break;
    case Kind::gru:
      b.gru = nn::GRUModel::create(features, past_length, gc, rng);
      break;
    case Kind::autoencoder:
      b.autoencoder = nn::AutoencoderModel::create(b.input_width(), ac, rng);
      break;
  }
  return b;
}

namespace {

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << v[i];
    os << ((i + 1) % 8 == 0 ? '\n' : ' ');
  }
  if (v.size() % 8 != 0) os << '\n';
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v)
    if (!(is >> x)) throw std::runtime_error("checkpoint: truncated value block");
  return v;
}

void write_tensor(std::ostream& os, const std::string& name, const ad::Tensor& t) {
  os << "tensor " << name << " " << t.shape().size();
  for (auto d : t.shape()) os << " " << d;
  os << "\n";
  write_doubles(os, t.values());
}

}  // namespace

void save_checkpoint(const std::string& path, const Bundle& bundle,
                     const TrainerState* trainer) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.precision(17);
  os << "epsfd-checkpoint " << checkpoint_format_version << "\n";
  os << "kind " << kind_name(bundle.kind) << "\n";
  os << "features " << bundle.features << "\n";
  os << "past_length " << bundle.past_length << "\n";
  os << "flow_cfg " << bundle.flow_cfg.coupling_layers << " "
     << bundle.flow_cfg.nets.hidden_layers << " " << bundle.flow_cfg.nets.hidden_width << "\n";
  os << "gru_cfg " << bundle.gru_cfg.hidden << " " << bundle.gru_cfg.cells << "\n";
  os << "ae_cfg " << bundle.ae_cfg.decoder_hidden << " " << bundle.ae_cfg.encoder_widths.size();
  for (auto w : bundle.ae_cfg.encoder_widths) os << " " << w;
  os << "\n";

  os << "scaler " << bundle.scaler.columns.size() << "\n";
  for (std::size_t c = 0; c < bundle.scaler.columns.size(); ++c)
    os << bundle.scaler.columns[c] << " " << bundle.scaler.mins[c] << " "
       << bundle.scaler.maxs[c] << " " << (bundle.scaler.constant[c] ? 1 : 0) << "\n";

  auto params = bundle.parameters();
  os << "tensors " << params.size() << "\n";
  for (const auto& [name, t] : params) write_tensor(os, name, t);

  if (trainer) {
    os << "trainer\n";
    os << "epoch " << trainer->epoch << "\n";
    os << "adam_step " << trainer->adam_step << "\n";
    os << "beta " << trainer->beta << "\n";
    os << "best " << (trainer->has_best ? 1 : 0) << " " << trainer->best_validation << " "
       << trainer->stale_epochs << "\n";
    os << "slots " << trainer->slots.size() << "\n";
    for (const auto& slot : trainer->slots) {
      os << "slot " << slot.m.size() << "\n";
      write_doubles(os, slot.m);
      write_doubles(os, slot.v);
    }
    os << "rng\n";
    trainer->rng.save(os);
  }
  os << "end\n";
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Bundle load_checkpoint(const std::string& path, TrainerState* trainer) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "epsfd-checkpoint")
    throw std::runtime_error(path + ": not an epsfd checkpoint");
  if (version != checkpoint_format_version)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));

  Bundle b;
  std::string key;
  is >> key;
  if (key != "kind") throw std::runtime_error(path + ": malformed checkpoint (kind)");
  std::string kind_str;
  is >> kind_str;
  b.kind = kind_from_name(kind_str);
  is >> key >> b.features;
  is >> key >> b.past_length;
  is >> key >> b.flow_cfg.coupling_layers >> b.flow_cfg.nets.hidden_layers >>
      b.flow_cfg.nets.hidden_width;
  is >> key >> b.gru_cfg.hidden >> b.gru_cfg.cells;
  std::size_t n_widths = 0;
  is >> key >> b.ae_cfg.decoder_hidden >> n_widths;
  b.ae_cfg.encoder_widths.resize(n_widths);
  for (auto& w : b.ae_cfg.encoder_widths) is >> w;

  std::size_t n_cols = 0;
  is >> key >> n_cols;
  if (key != "scaler") throw std::runtime_error(path + ": malformed checkpoint (scaler)");
  b.scaler.columns.resize(n_cols);
  b.scaler.mins.resize(n_cols);
  b.scaler.maxs.resize(n_cols);
  b.scaler.constant.resize(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    int flag = 0;
    is >> b.scaler.columns[c] >> b.scaler.mins[c] >> b.scaler.maxs[c] >> flag;
    b.scaler.constant[c] = flag != 0;
  }

  // Rebuild the architecture, then overwrite parameter values in file order.
  RandomStream init_rng(0);
  b = [&]() {
    Bundle built = Bundle::create(b.kind, b.features, b.past_length, b.scaler, b.flow_cfg,
                                  b.gru_cfg, b.ae_cfg, init_rng);
    return built;
  }();

  std::size_t n_tensors = 0;
  is >> key >> n_tensors;
  if (key != "tensors") throw std::runtime_error(path + ": malformed checkpoint (tensors)");
  auto params = b.parameters();
  if (params.size() != n_tensors)
    throw std::runtime_error(path + ": checkpoint has " + std::to_string(n_tensors) +
                             " tensors, model expects " + std::to_string(params.size()));
  for (auto& [name, t] : params) {
    std::string tname;
    std::size_t rank = 0;
    is >> key >> tname >> rank;
    if (key != "tensor" || tname != name)
      throw std::runtime_error(path + ": expected tensor '" + name + "', found '" +
                               tname + "'");
    ad::Shape shape(rank);
    for (auto& d : shape) is >> d;
    if (shape != t.shape())
      throw std::runtime_error(path + ": tensor '" + name + "' shape mismatch");
    t.values() = read_doubles(is, static_cast<std::size_t>(t.size()));
  }

  is >> key;
  if (key == "trainer") {
    TrainerState state;
    is >> tag >> state.epoch;
    is >> tag >> state.adam_step;
    is >> tag >> state.beta;
    int has_best = 0;
    is >> tag >> has_best >> state.best_validation >> state.stale_epochs;
    state.has_best = has_best != 0;
    std::size_t n_slots = 0;
    is >> tag >> n_slots;
    for (std::size_t i = 0; i < n_slots; ++i) {
      std::size_t n = 0;
      is >> tag >> n;
      AdamSlot slot;
      slot.m = read_doubles(is, n);
      slot.v = read_doubles(is, n);
      state.slots.push_back(std::move(slot));
    }
    is >> tag;  // rng
    state.rng.load(is);
    if (trainer) *trainer = std::move(state);
    is >> key;
  } else if (trainer) {
    *trainer = TrainerState{};
  }
  if (key != "end") throw std::runtime_error(path + ": malformed checkpoint (no end)");
  return b;
}

}  // namespace epsfd::model

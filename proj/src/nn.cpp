#include "epsfd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace epsfd::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "linear") return Activation::linear;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

namespace {

ad::Tensor uniform_init(ad::Shape shape, std::int64_t fan_in, std::int64_t fan_out,
                        RandomStream& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::int64_t n = ad::shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor::from_values(std::move(shape), std::move(v), true);
}

ad::Tensor activate(const ad::Tensor& x, Activation act) {
  switch (act) {
    case Activation::relu: return ad::relu(x);
    case Activation::tanh: return ad::tanh(x);
    case Activation::sigmoid: return ad::sigmoid(x);
    case Activation::linear: return x;
  }
  return x;
}

}  // namespace

DenseLayer DenseLayer::create(std::int64_t in, std::int64_t out, Activation act,
                              RandomStream& rng) {
  DenseLayer layer;
  layer.weight = uniform_init({in, out}, in, out, rng);
  layer.bias = ad::Tensor::zeros({out}, true);
  layer.activation = act;
  return layer;
}

DenseLayer DenseLayer::create_zero(std::int64_t in, std::int64_t out, Activation act) {
  DenseLayer layer;
  layer.weight = ad::Tensor::zeros({in, out}, true);
  layer.bias = ad::Tensor::zeros({out}, true);
  layer.activation = act;
  return layer;
}

ad::Tensor DenseLayer::forward(const ad::Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != in_width())
    throw std::invalid_argument("dense layer expects width " + std::to_string(in_width()) +
                                ", got " + ad::shape_str(x.shape()));
  return activate(ad::add_rowvec(ad::matmul(x, weight), bias), activation);
}

void append_params(NamedParams& out, const std::string& prefix, const DenseLayer& layer) {
  out.emplace_back(prefix + ".weight", layer.weight);
  out.emplace_back(prefix + ".bias", layer.bias);
}

// ---- autoencoder ---------------------------------------------------------------

AutoencoderModel AutoencoderModel::create(std::int64_t input_width,
                                          const AutoencoderConfig& cfg, RandomStream& rng) {
  if (cfg.encoder_widths.empty())
    throw std::invalid_argument("autoencoder needs at least one encoder layer");
  if (cfg.encoder_widths.back() >= input_width)
    throw std::invalid_argument("autoencoder bottleneck (" +
                                std::to_string(cfg.encoder_widths.back()) +
                                ") must be narrower than the input (" +
                                std::to_string(input_width) + ")");
  AutoencoderModel m;
  m.input_width = input_width;
  std::int64_t w = input_width;
  for (std::int64_t width : cfg.encoder_widths) {
    m.encoder.push_back(DenseLayer::create(w, width, Activation::relu, rng));
    w = width;
  }
  m.decoder.push_back(DenseLayer::create(w, cfg.decoder_hidden, Activation::relu, rng));
  m.decoder.push_back(DenseLayer::create(cfg.decoder_hidden, input_width,
                                         Activation::linear, rng));
  return m;
}

ad::Tensor AutoencoderModel::forward(const ad::Tensor& flat_windows) const {
  ad::Tensor h = flat_windows;
  for (const auto& layer : encoder) h = layer.forward(h);
  for (const auto& layer : decoder) h = layer.forward(h);
  return h;
}

NamedParams AutoencoderModel::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < encoder.size(); ++i)
    append_params(out, "encoder." + std::to_string(i), encoder[i]);
  for (std::size_t i = 0; i < decoder.size(); ++i)
    append_params(out, "decoder." + std::to_string(i), decoder[i]);
  return out;
}

// ---- GRU ------------------------------------------------------------------------

GRUCellParams GRUCellParams::create(std::int64_t input, std::int64_t hidden,
                                    RandomStream& rng) {
  GRUCellParams c;
  c.w_update = uniform_init({input, hidden}, input, hidden, rng);
  c.u_update = uniform_init({hidden, hidden}, hidden, hidden, rng);
  c.b_update = ad::Tensor::zeros({hidden}, true);
  c.w_reset = uniform_init({input, hidden}, input, hidden, rng);
  c.u_reset = uniform_init({hidden, hidden}, hidden, hidden, rng);
  c.b_reset = ad::Tensor::zeros({hidden}, true);
  c.w_cand = uniform_init({input, hidden}, input, hidden, rng);
  c.u_cand = uniform_init({hidden, hidden}, hidden, hidden, rng);
  c.b_cand = ad::Tensor::zeros({hidden}, true);
  return c;
}

ad::Tensor GRUCellParams::step(const ad::Tensor& x_t, const ad::Tensor& h_prev) const {
  using namespace ad;
  Tensor z = sigmoid(add_rowvec(add(matmul(x_t, w_update), matmul(h_prev, u_update)), b_update));
  Tensor r = sigmoid(add_rowvec(add(matmul(x_t, w_reset), matmul(h_prev, u_reset)), b_reset));
  Tensor hc = tanh(add_rowvec(add(matmul(x_t, w_cand), matmul(mul(r, h_prev), u_cand)), b_cand));
  // h' = (1 - z) * h + z * hc
  Tensor keep = add_scalar(neg(z), 1.0);
  return add(mul(keep, h_prev), mul(z, hc));
}

GRUModel GRUModel::create(std::int64_t features, std::int64_t past_length,
                          const GRUConfig& cfg, RandomStream& rng) {
  if (cfg.cells < 1) throw std::invalid_argument("GRU needs at least one cell");
  GRUModel m;
  m.features = features;
  m.past_length = past_length;
  std::int64_t in = features;
  for (std::int64_t i = 0; i < cfg.cells; ++i) {
    m.cells.push_back(GRUCellParams::create(in, cfg.hidden, rng));
    in = cfg.hidden;
  }
  m.head = DenseLayer::create(cfg.hidden, features * past_length, Activation::linear, rng);
  return m;
}

ad::Tensor GRUModel::forward(const ad::Tensor& flat_windows) const {
  std::int64_t width = features * past_length;
  if (flat_windows.shape().size() != 2 || flat_windows.cols() != width)
    throw std::invalid_argument("GRU expects flattened windows of width " +
                                std::to_string(width) + ", got " +
                                ad::shape_str(flat_windows.shape()));
  std::int64_t batch = flat_windows.rows();
  std::vector<ad::Tensor> h;
  h.reserve(cells.size());
  for (const auto& cell : cells)
    h.push_back(ad::Tensor::zeros({batch, cell.hidden_width()}));
  for (std::int64_t t = 0; t < past_length; ++t) {
    // time step t occupies the contiguous column block [t*F, (t+1)*F)
    ad::Tensor x_t = ad::slice_cols(flat_windows, t * features, 1, features);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      h[c] = cells[c].step(c == 0 ? x_t : h[c - 1], h[c]);
    }
  }
  return head.forward(h.back());
}

NamedParams GRUModel::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    std::string p = "cell." + std::to_string(i);
    out.emplace_back(p + ".w_update", c.w_update);
    out.emplace_back(p + ".u_update", c.u_update);
    out.emplace_back(p + ".b_update", c.b_update);
    out.emplace_back(p + ".w_reset", c.w_reset);
    out.emplace_back(p + ".u_reset", c.u_reset);
    out.emplace_back(p + ".b_reset", c.b_reset);
    out.emplace_back(p + ".w_cand", c.w_cand);
    out.emplace_back(p + ".u_cand", c.u_cand);
    out.emplace_back(p + ".b_cand", c.b_cand);
  }
  append_params(out, "head", head);
  return out;
}

}  // namespace epsfd::nn

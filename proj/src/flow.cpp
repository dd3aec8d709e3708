#include "epsfd/flow.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace epsfd::flow {

namespace {

std::vector<nn::DenseLayer> make_net(std::int64_t width, const CouplingConfig& cfg,
                                     nn::Activation final_act, RandomStream& rng) {
  std::vector<nn::DenseLayer> net;
  std::int64_t in = width;
  for (std::int64_t i = 0; i < cfg.hidden_layers; ++i) {
    net.push_back(nn::DenseLayer::create(in, cfg.hidden_width, nn::Activation::relu, rng));
    in = cfg.hidden_width;
  }
  net.push_back(nn::DenseLayer::create_zero(in, width, final_act));
  return net;
}

ad::Tensor run_net(const std::vector<nn::DenseLayer>& net, const ad::Tensor& x) {
  ad::Tensor h = x;
  for (const auto& layer : net) h = layer.forward(h);
  return h;
}

}  // namespace

CouplingLayer CouplingLayer::create(std::int64_t width, bool mask_even_parity,
                                    const CouplingConfig& cfg, RandomStream& rng) {
  CouplingLayer layer;
  layer.mask.resize(static_cast<std::size_t>(width));
  for (std::int64_t i = 0; i < width; ++i)
    layer.mask[static_cast<std::size_t>(i)] =
        ((i % 2 == 0) == mask_even_parity) ? 1.0 : 0.0;
  layer.s_net = make_net(width, cfg, nn::Activation::tanh, rng);
  layer.t_net = make_net(width, cfg, nn::Activation::linear, rng);
  return layer;
}

std::pair<ad::Tensor, ad::Tensor> CouplingLayer::forward(const ad::Tensor& x) const {
  using namespace ad;
  if (x.shape().size() != 2 || x.cols() != width())
    throw std::invalid_argument("coupling layer expects width " + std::to_string(width()) +
                                ", got " + shape_str(x.shape()));
  Tensor mask_v = Tensor::from_values({width()}, mask);
  std::vector<double> inv(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0 - mask[i];
  Tensor inv_mask_v = Tensor::from_values({width()}, std::move(inv));

  Tensor masked = mul_rowvec(x, mask_v);
  Tensor s = run_net(s_net, masked);
  Tensor t = run_net(t_net, masked);
  // y = mask*x + (1-mask)*(x*exp(s) + t)
  Tensor transformed = add(mul(x, exp(s)), t);
  Tensor y = add(mul_rowvec(x, mask_v), mul_rowvec(transformed, inv_mask_v));
  Tensor log_det = row_sum(mul_rowvec(s, inv_mask_v));
  return {y, log_det};
}

ad::Tensor CouplingLayer::inverse(const ad::Tensor& y) const {
  using namespace ad;
  if (y.shape().size() != 2 || y.cols() != width())
    throw std::invalid_argument("coupling layer expects width " + std::to_string(width()) +
                                ", got " + shape_str(y.shape()));
  Tensor mask_v = Tensor::from_values({width()}, mask);
  std::vector<double> inv(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0 - mask[i];
  Tensor inv_mask_v = Tensor::from_values({width()}, std::move(inv));

  Tensor masked = mul_rowvec(y, mask_v);
  Tensor s = run_net(s_net, masked);
  Tensor t = run_net(t_net, masked);
  // x = mask*y + (1-mask)*((y - t) * exp(-s))
  Tensor undone = mul(sub(y, t), exp(neg(s)));
  return add(mul_rowvec(y, mask_v), mul_rowvec(undone, inv_mask_v));
}

FlowModel FlowModel::create(std::int64_t width, const FlowConfig& cfg, RandomStream& rng) {
  if (cfg.coupling_layers < 1)
    throw std::invalid_argument("flow needs at least one coupling layer");
  FlowModel m;
  m.width = width;
  for (std::int64_t i = 0; i < cfg.coupling_layers; ++i)
    m.layers.push_back(CouplingLayer::create(width, i % 2 == 0, cfg.nets, rng));
  return m;
}

std::pair<ad::Tensor, ad::Tensor> FlowModel::transform(const ad::Tensor& x) const {
  ad::Tensor z = x;
  ad::Tensor total;
  for (const auto& layer : layers) {
    auto [y, log_det] = layer.forward(z);
    z = y;
    total = total.defined() ? ad::add(total, log_det) : log_det;
  }
  return {z, total};
}

ad::Tensor standard_normal_log_density(const ad::Tensor& z) {
  std::int64_t d = z.cols();
  double norm_const = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  ad::Tensor sq = ad::row_sum(ad::square(z));
  return ad::add_scalar(ad::scale(sq, -0.5), norm_const);
}

ad::Tensor FlowModel::log_prob(const ad::Tensor& x) const {
  auto [z, log_det] = transform(x);
  return ad::add(standard_normal_log_density(z), log_det);
}

ad::Tensor FlowModel::sample(std::int64_t count, RandomStream& rng) const {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  std::vector<double> z(static_cast<std::size_t>(count * width));
  for (auto& v : z) v = rng.normal();
  ad::Tensor x = ad::Tensor::from_values({count, width}, std::move(z));
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) x = it->inverse(x);
  return x;
}

nn::NamedParams FlowModel::parameters() const {
  nn::NamedParams out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    for (std::size_t j = 0; j < layer.s_net.size(); ++j)
      nn::append_params(out, "coupling." + std::to_string(i) + ".s." + std::to_string(j),
                        layer.s_net[j]);
    for (std::size_t j = 0; j < layer.t_net.size(); ++j)
      nn::append_params(out, "coupling." + std::to_string(i) + ".t." + std::to_string(j),
                        layer.t_net[j]);
  }
  return out;
}

}  // namespace epsfd::flow

#include <doctest.h>

#include <cmath>
#include <vector>

#include "epsfd/nn.hpp"
#include "epsfd/train.hpp"

using namespace epsfd;
using ad::Tensor;

namespace {

void zero_layer(nn::DenseLayer& layer) {
  for (auto& v : layer.weight.values()) v = 0.0;
  for (auto& v : layer.bias.values()) v = 0.0;
}

}  // namespace

TEST_CASE("dense layer examples") {
  RandomStream rng(1);
  nn::DenseLayer zero = nn::DenseLayer::create_zero(2, 2, nn::Activation::relu);
  Tensor x = Tensor::from_values({1, 2}, {0.7, -0.3});
  CHECK(zero.forward(x).values() == std::vector<double>{0, 0});

  nn::DenseLayer ident = nn::DenseLayer::create_zero(2, 2, nn::Activation::linear);
  ident.weight.values() = {1, 0, 0, 1};
  CHECK(ident.forward(x).values() == std::vector<double>{0.7, -0.3});

  nn::DenseLayer relu_layer = nn::DenseLayer::create_zero(2, 1, nn::Activation::relu);
  relu_layer.weight.values() = {1, 1};
  relu_layer.bias.values() = {-1};
  Tensor x2 = Tensor::from_values({1, 2}, {0.3, 0.4});
  CHECK(relu_layer.forward(x2).values() == std::vector<double>{0.0});

  CHECK_THROWS_AS(relu_layer.forward(Tensor::zeros({1, 3})), std::invalid_argument);
}

TEST_CASE("GRU cell zero-weight behaviour") {
  RandomStream rng(2);
  nn::GRUCellParams cell = nn::GRUCellParams::create(3, 4, rng);
  for (Tensor t : {cell.w_update, cell.u_update, cell.b_update, cell.w_reset, cell.u_reset,
                   cell.b_reset, cell.w_cand, cell.u_cand, cell.b_cand})
    for (auto& v : t.values()) v = 0.0;
  Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor h = Tensor::from_values({2, 4}, {1, 1, 2, 2, -1, -1, 0.5, 0.5});

  // z = sigmoid(0) = 0.5 and hc = tanh(0) = 0, so h' = 0.5 h.
  Tensor h_next = cell.step(x, h);
  for (std::size_t i = 0; i < h.values().size(); ++i)
    CHECK(h_next.values()[i] == doctest::Approx(0.5 * h.values()[i]).epsilon(1e-15));

  Tensor h0 = Tensor::zeros({2, 4});
  CHECK(cell.step(x, h0).values() == std::vector<double>(8, 0.0));

  // After T steps the zero-weight cell halves the state each time.
  Tensor hT = h;
  int T = 5;
  for (int t = 0; t < T; ++t) hT = cell.step(x, hT);
  for (std::size_t i = 0; i < h.values().size(); ++i)
    CHECK(hT.values()[i] == doctest::Approx(std::pow(0.5, T) * h.values()[i]).epsilon(1e-12));
}

TEST_CASE("GRU cell gradients match finite differences") {
  RandomStream rng(3);
  nn::GRUCellParams cell = nn::GRUCellParams::create(2, 3, rng);
  Tensor x = Tensor::from_values({2, 2}, {0.3, -0.4, 0.1, 0.8});
  Tensor h = Tensor::from_values({2, 3}, {0.2, -0.1, 0.5, -0.3, 0.4, 0.0});

  std::vector<std::pair<std::string, Tensor>> params{
      {"w_update", cell.w_update}, {"u_update", cell.u_update}, {"b_update", cell.b_update},
      {"w_reset", cell.w_reset},   {"u_reset", cell.u_reset},   {"b_reset", cell.b_reset},
      {"w_cand", cell.w_cand},     {"u_cand", cell.u_cand},     {"b_cand", cell.b_cand}};
  auto f = [&]() { return ad::mean(cell.step(x, h)); };
  auto report = ad::finite_difference_check(f, params, 1e-6, 1e-5);
  CHECK(report.all_ok);
}

TEST_CASE("autoencoder reconstruction shape for every past length") {
  RandomStream rng(4);
  nn::AutoencoderConfig cfg;
  cfg.encoder_widths = {16, 8};
  cfg.decoder_hidden = 16;
  for (std::int64_t past : {10, 30, 50}) {
    std::int64_t width = 3 * past;
    auto model = nn::AutoencoderModel::create(width, cfg, rng);
    Tensor x = Tensor::zeros({2, width});
    CHECK(model.forward(x).shape() == ad::Shape{2, width});
  }
}

TEST_CASE("autoencoder with zero-init output layer reconstructs zero") {
  RandomStream rng(5);
  nn::AutoencoderConfig cfg;
  cfg.encoder_widths = {8, 4};
  cfg.decoder_hidden = 8;
  auto model = nn::AutoencoderModel::create(10, cfg, rng);
  zero_layer(model.decoder.back());
  Tensor x = Tensor::from_values({1, 10}, std::vector<double>(10, 0.3));
  CHECK(model.forward(x).values() == std::vector<double>(10, 0.0));
}

TEST_CASE("autoencoder smoke-train on a constant dataset") {
  RandomStream rng(6);
  nn::AutoencoderConfig cfg;
  cfg.encoder_widths = {16, 4};
  cfg.decoder_hidden = 16;
  std::int64_t width = 12;
  auto model = nn::AutoencoderModel::create(width, cfg, rng);
  auto params = model.parameters();
  Tensor x = Tensor::from_values({8, width}, std::vector<double>(8 * width, 0.6));

  model::TrainerState state;
  train::AdamConfig adam;
  adam.learning_rate = 1e-2;
  double last = 0.0;
  for (int step = 0; step < 200; ++step) {
    for (auto& [name, p] : params) {
      (void)name;
      p.zero_grad();
    }
    ad::Graph g;
    ad::Graph::Scope scope(g);
    Tensor loss = ad::mean(ad::square(ad::sub(model.forward(x), x)));
    last = loss.item();
    g.backward(loss);
    train::adam_step(state, params, adam);
  }
  CHECK(last < 1e-3);
}

TEST_CASE("GRU model: zero head reconstructs zero; batch permutation equivariance") {
  RandomStream rng(7);
  nn::GRUConfig cfg;
  cfg.hidden = 6;
  cfg.cells = 2;
  auto model = nn::GRUModel::create(3, 4, cfg, rng);

  auto zeroed = model;
  zero_layer(zeroed.head);
  Tensor x = Tensor::from_values({2, 12}, std::vector<double>(24, 0.5));
  CHECK(zeroed.forward(x).values() == std::vector<double>(24, 0.0));

  // Permuting batch rows permutes outputs identically.
  RandomStream vrng(8);
  std::vector<double> rows(3 * 12);
  for (auto& v : rows) v = vrng.uniform();
  Tensor batch = Tensor::from_values({3, 12}, rows);
  std::vector<double> permuted(rows.begin() + 12, rows.end());
  permuted.insert(permuted.end(), rows.begin(), rows.begin() + 12);  // rotate rows
  Tensor batch_p = Tensor::from_values({3, 12}, permuted);

  auto out = model.forward(batch).values();
  auto out_p = model.forward(batch_p).values();
  for (std::int64_t j = 0; j < 12; ++j) {
    CHECK(out_p[0 * 12 + j] == out[1 * 12 + j]);
    CHECK(out_p[1 * 12 + j] == out[2 * 12 + j]);
    CHECK(out_p[2 * 12 + j] == out[0 * 12 + j]);
  }
}

TEST_CASE("GRU smoke-train on a constant dataset") {
  RandomStream rng(9);
  nn::GRUConfig cfg;
  cfg.hidden = 8;
  cfg.cells = 2;
  std::int64_t features = 2, past = 5;
  auto model = nn::GRUModel::create(features, past, cfg, rng);
  auto params = model.parameters();
  Tensor x = Tensor::from_values({8, features * past},
                                 std::vector<double>(8 * features * past, 0.4));

  model::TrainerState state;
  train::AdamConfig adam;
  adam.learning_rate = 1e-2;
  double mae = 0.0;
  for (int step = 0; step < 500; ++step) {
    for (auto& [name, p] : params) {
      (void)name;
      p.zero_grad();
    }
    ad::Graph g;
    ad::Graph::Scope scope(g);
    Tensor loss = ad::mean(ad::abs(ad::sub(model.forward(x), x)));
    mae = loss.item();
    g.backward(loss);
    train::adam_step(state, params, adam);
  }
  CHECK(mae < 0.05);
}

TEST_CASE("gate activations stay in range on random inputs") {
  RandomStream rng(10);
  nn::GRUCellParams cell = nn::GRUCellParams::create(3, 4, rng);
  Tensor x = Tensor::from_values({1, 3}, {2.0, -3.0, 0.5});
  Tensor h = Tensor::from_values({1, 4}, {0.9, -0.9, 0.1, 0.0});
  using namespace ad;
  Tensor z = sigmoid(add_rowvec(add(matmul(x, cell.w_update), matmul(h, cell.u_update)),
                                cell.b_update));
  Tensor hc = tanh(add_rowvec(add(matmul(x, cell.w_cand), matmul(h, cell.u_cand)),
                              cell.b_cand));
  for (double v : z.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (double v : hc.values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

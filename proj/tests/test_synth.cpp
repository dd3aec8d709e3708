#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "epsfd/physics.hpp"
#include "epsfd/synth.hpp"
#include "test_support.hpp"

using namespace epsfd;

namespace {

synth::SynthConfig noiseless_defaults() {
  auto config = synth::SynthConfig::defaults();
  for (auto& ch : config.channels) ch.noise_std = 0.0;
  return config;
}

double channel_mean(const data::Frame& f, std::int64_t col, std::int64_t from,
                    std::int64_t to) {
  double acc = 0.0;
  for (std::int64_t r = from; r < to; ++r) acc += f.at(r, col);
  return acc / static_cast<double>(to - from);
}

double channel_var(const data::Frame& f, std::int64_t col, std::int64_t from,
                   std::int64_t to) {
  double mu = channel_mean(f, col, from, to);
  double acc = 0.0;
  for (std::int64_t r = from; r < to; ++r) {
    double d = f.at(r, col) - mu;
    acc += d * d;
  }
  return acc / static_cast<double>(to - from);
}

}  // namespace

TEST_CASE("noiseless nominal data meets every constraint exactly") {
  auto config = noiseless_defaults();
  config.duration = 200;
  data::Frame f = synth::simulate_nominal(config);
  CHECK(f.rows() == 200);

  std::int64_t e135 = 0, e140 = 1, it167 = 2, e165 = 4, st165 = 6;
  for (std::int64_t r = 0; r < f.rows(); ++r) {
    CHECK(f.at(r, e135) == f.at(r, e140));  // pair exactly equal
    CHECK(f.at(r, it167) == 0.0);
    CHECK(f.at(r, e165) == 120.5);
    CHECK(f.at(r, st165) == 60.0);
  }
}

TEST_CASE("scaled noiseless nominal data has exactly zero physics loss") {
  auto config = noiseless_defaults();
  config.duration = 120;
  data::Frame f = synth::simulate_nominal(config);
  data::Scaler scaler = data::fit_scaler({f});
  scaler.apply(f);

  auto topo = config.topology();
  std::int64_t past = 10;
  phys::PhysicsLoss loss(topo, past, phys::scaled_targets(topo, scaler));
  data::WindowBatch windows = data::make_windows(f, past);
  ad::Tensor flat = ad::Tensor::from_values({windows.count, windows.width()}, windows.flat);
  CHECK(loss.total(flat).item() == 0.0);
}

TEST_CASE("fixed seed gives bit-identical frames") {
  auto config = synth::SynthConfig::defaults();
  config.duration = 64;
  data::Frame a = synth::simulate_nominal(config);
  data::Frame b = synth::simulate_nominal(config);
  CHECK(a.values == b.values);
  config.seed += 1;
  data::Frame c = synth::simulate_nominal(config);
  CHECK(a.values != c.values);
}

TEST_CASE("fault injection per kind") {
  auto config = synth::SynthConfig::defaults();
  config.duration = 300;
  data::Frame nominal = synth::simulate_nominal(config);

  SUBCASE("zero magnitude is rejected") {
    synth::FaultScenario s{synth::FaultKind::offset_bias, "E242", 100, 0.0};
    CHECK_THROWS_WITH_AS(synth::inject_fault(nominal, s, config),
                         doctest::Contains("magnitude"), std::invalid_argument);
  }

  SUBCASE("unknown channel is rejected") {
    synth::FaultScenario s{synth::FaultKind::offset_bias, "NOPE", 100, 1.0};
    CHECK_THROWS_AS(synth::inject_fault(nominal, s, config), std::invalid_argument);
  }

  SUBCASE("offset_bias shifts the channel and labels rows from the onset") {
    synth::FaultScenario s{synth::FaultKind::offset_bias, "E242", 100, 2.0};
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    std::int64_t col = config.channel_index("E242");
    for (std::int64_t r = 0; r < 100; ++r) {
      CHECK(faulted.labels[r] == data::label_nominal);
      CHECK(faulted.at(r, col) == nominal.at(r, col));
    }
    for (std::int64_t r = 100; r < faulted.rows(); ++r) {
      CHECK(faulted.labels[r] == data::label_fault);
      CHECK(faulted.fault_channel[r] == "E242");
      CHECK(faulted.at(r, col) == nominal.at(r, col) + 2.0);
    }
  }

  SUBCASE("breaker_trip breaks the pair-equality term on post-onset windows") {
    synth::FaultScenario s{synth::FaultKind::breaker_trip, "E140", 100, 3.0};
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    data::Scaler scaler = data::fit_scaler({nominal});
    data::Frame scaled = faulted;
    scaler.apply(scaled);
    auto topo = config.topology();
    std::int64_t past = 10;
    phys::PhysicsLoss loss(topo, past, phys::scaled_targets(topo, scaler));

    data::WindowBatch w = data::make_windows(scaled, past);
    // a fully post-onset window
    std::int64_t wi = 150;
    ad::Tensor one = ad::Tensor::from_values({1, w.width()},
        std::vector<double>(w.flat.begin() + wi * w.width(),
                            w.flat.begin() + (wi + 1) * w.width()));
    CHECK(loss.pair_equality(one).item() > 0.0);
  }

  SUBCASE("stuck_sensor freezes a modulated channel") {
    synth::FaultScenario s{synth::FaultKind::stuck_sensor, "E242", 100, 1.0};
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    std::int64_t col = config.channel_index("E242");
    // every post-onset sample holds the last pre-onset value exactly
    for (std::int64_t r = 100; r < faulted.rows(); ++r)
      CHECK(faulted.at(r, col) == nominal.at(99, col));
    CHECK(channel_var(nominal, col, 100, nominal.rows()) > 0.0);
  }

  SUBCASE("inverter_drift ramps away from the setpoint") {
    synth::FaultScenario s{synth::FaultKind::inverter_drift, "E165", 100, 5.0};
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    std::int64_t col = config.channel_index("E165");
    double late = channel_mean(faulted, col, 250, 300);
    double early = channel_mean(faulted, col, 100, 150);
    CHECK(late > early);
    CHECK(late > 120.5 + 3.0);
  }

  SUBCASE("noise_burst inflates variance") {
    synth::FaultScenario s{synth::FaultKind::noise_burst, "ST165", 100, 20.0};
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    std::int64_t col = config.channel_index("ST165");
    CHECK(channel_var(faulted, col, 100, 300) > 16.0 * channel_var(nominal, col, 100, 300));
  }
}

TEST_CASE("faults of >= 5 sigma are separable by a trivial per-kind statistic") {
  auto config = synth::SynthConfig::defaults();
  config.duration = 400;

  struct Case {
    synth::FaultKind kind;
    std::string channel;
    std::function<double(const data::WindowBatch&, std::int64_t, const synth::SynthConfig&)>
        statistic;
  };
  // Each statistic is a hand-crafted detector for its own fault kind.
  std::vector<Case> cases = {
      // unmodulated regulated channel: deviation from its setpoint
      {synth::FaultKind::offset_bias, "ST265",
       [](const data::WindowBatch& w, std::int64_t i, const synth::SynthConfig& c) {
         std::int64_t col = c.channel_index("ST265");
         double acc = 0.0;
         for (std::int64_t t = 0; t < w.past_length; ++t) acc += w.at(i, t, col);
         return std::fabs(acc / static_cast<double>(w.past_length) - 60.0);
       }},
      // pair difference cancels the shared load modulation
      {synth::FaultKind::breaker_trip, "E140",
       [](const data::WindowBatch& w, std::int64_t i, const synth::SynthConfig& c) {
         std::int64_t a = c.channel_index("E135"), b = c.channel_index("E140");
         double acc = 0.0;
         for (std::int64_t t = 0; t < w.past_length; ++t)
           acc += std::fabs(w.at(i, t, a) - w.at(i, t, b));
         return acc;
       }},
      // a stuck modulated channel loses all its variance
      {synth::FaultKind::stuck_sensor, "E242",
       [](const data::WindowBatch& w, std::int64_t i, const synth::SynthConfig& c) {
         std::int64_t col = c.channel_index("E242");
         double mu = 0.0;
         for (std::int64_t t = 0; t < w.past_length; ++t) mu += w.at(i, t, col);
         mu /= static_cast<double>(w.past_length);
         double var = 0.0;
         for (std::int64_t t = 0; t < w.past_length; ++t) {
           double d = w.at(i, t, col) - mu;
           var += d * d;
         }
         return -var;  // anomalous windows have the higher (less negative) statistic
       }},
  };

  for (const auto& test_case : cases) {
    double sigma =
        config.channels[static_cast<std::size_t>(config.channel_index(test_case.channel))]
            .noise_std;
    double magnitude = test_case.kind == synth::FaultKind::stuck_sensor ? 1.0 : 8.0 * sigma;
    synth::FaultScenario s{test_case.kind, test_case.channel, 200, magnitude};
    data::Frame nominal = synth::simulate_nominal(config);
    data::Frame faulted = synth::inject_fault(nominal, s, config);
    data::WindowBatch w = data::make_windows(faulted, 10);

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::int64_t i = 0; i < w.count; ++i) {
      scores.push_back(test_case.statistic(w, i, config));
      labels.push_back(w.labels[i]);
    }
    double auc = testsup::auroc_pairwise(scores, labels);
    CAPTURE(synth::fault_kind_name(test_case.kind));
    CHECK(auc > 0.95);
  }
}

TEST_CASE("scenario files round trip") {
  testsup::TempDir tmp("scen");
  std::vector<synth::FaultScenario> scenarios = {
      {synth::FaultKind::offset_bias, "E242", 100, 2.5},
      {synth::FaultKind::stuck_sensor, "ST165", 50, 1.0}};
  synth::save_scenarios(tmp.file("f.scenarios"), scenarios);
  auto loaded = synth::load_scenarios(tmp.file("f.scenarios"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].kind == synth::FaultKind::offset_bias);
  CHECK(loaded[0].channel == "E242");
  CHECK(loaded[0].onset == 100);
  CHECK(loaded[0].magnitude == 2.5);
}

TEST_CASE("synth config validation catches bad role sets") {
  auto config = synth::SynthConfig::defaults();
  config.channels[1].pair_id = 3;  // breaks the pair
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  auto few = synth::SynthConfig::defaults();
  few.channels.resize(4);
  CHECK_THROWS_AS(few.validate(), std::invalid_argument);
}

TEST_CASE("synth config save/load round trip") {
  testsup::TempDir tmp("scfg");
  auto config = synth::SynthConfig::defaults();
  config.duration = 512;
  config.seed = 99;
  config.save(tmp.file("synth.cfg"));
  auto loaded = synth::SynthConfig::load(tmp.file("synth.cfg"));
  CHECK(loaded.duration == 512);
  CHECK(loaded.seed == 99);
  CHECK(loaded.channels.size() == config.channels.size());
  CHECK(loaded.channels[0].name == "E135");
  CHECK(loaded.channels[0].pair_id == 0);
  data::Frame a = synth::simulate_nominal(config);
  data::Frame b = synth::simulate_nominal(loaded);
  CHECK(a.values == b.values);
}

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <vector>

#include "epsfd/cli.hpp"
#include "epsfd/data.hpp"
#include "epsfd/eval.hpp"
#include "epsfd/synth.hpp"
#include "epsfd/train.hpp"
#include "test_support.hpp"

using namespace epsfd;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) { return cli::run(args); }

std::string configs_dir() { return std::string(EPSFD_SOURCE_DIR) + "/configs"; }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// One synth invocation covering nominal files plus one scenario per kind.
void make_dataset(const testsup::TempDir& tmp, int nominal_count) {
  std::string scen = tmp.file("faults.scenarios");
  write_file(scen,
             "offset_bias ST265 150 0.6\n"
             "breaker_trip E140 150 0.5\n"
             "stuck_sensor E242 150 1.0\n");
  REQUIRE(run({"synth", "--out", tmp.file("data"), "--count",
               std::to_string(nominal_count), "--faults", scen, "--seed", "3"}) == 0);
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({"no-such-command"}) == 2);
  CHECK(run({"synth"}) == 2);                       // missing --out
  CHECK(run({"train", "--data", "x"}) == 2);        // missing required flags
}

TEST_CASE("synth: deterministic outputs, channel files, bad config rejected") {
  testsup::TempDir tmp("cli_synth");
  REQUIRE(run({"synth", "--out", tmp.file("a"), "--count", "2", "--seed", "7"}) == 0);
  REQUIRE(run({"synth", "--out", tmp.file("b"), "--count", "2", "--seed", "7"}) == 0);

  CHECK(fs::exists(tmp.file("a") + "/synth_000.csv"));
  CHECK(fs::exists(tmp.file("a") + "/synth_001.csv"));
  CHECK(fs::exists(tmp.file("a") + "/labels.txt"));
  CHECK(fs::exists(tmp.file("a") + "/synth.topology"));
  CHECK(fs::exists(tmp.file("a") + "/manifest.json"));

  // seed repeat: identical file hashes
  CHECK(cli::file_hash(tmp.file("a") + "/synth_000.csv") ==
        cli::file_hash(tmp.file("b") + "/synth_000.csv"));
  CHECK(cli::file_hash(tmp.file("a") + "/synth_001.csv") ==
        cli::file_hash(tmp.file("b") + "/synth_001.csv"));

  // invalid config -> exit 2 naming the problem
  write_file(tmp.file("bad.cfg"), "duration = 100\n[channels]\nX bus_voltage 1 0 0 0.1\n");
  CHECK(run({"synth", "--config", tmp.file("bad.cfg"), "--out", tmp.file("c")}) == 2);
}

TEST_CASE("full pipeline: synth -> ingest -> train -> eval -> sample -> report") {
  testsup::TempDir tmp("cli_pipe");
  make_dataset(tmp, 4);

  // ingest
  REQUIRE(run({"ingest", "--data", tmp.file("data"), "--labels", tmp.file("data") + "/labels.txt",
               "--out", tmp.file("splits"), "--splits", "3", "--seed", "5"}) == 0);
  CHECK(fs::exists(tmp.file("splits") + "/split_00.manifest"));
  CHECK(fs::exists(tmp.file("splits") + "/split_02.manifest"));
  CHECK(fs::exists(tmp.file("splits") + "/ingest_summary.txt"));

  // pick a split whose test set has faults (make_splits guarantees it)
  std::string split = tmp.file("splits") + "/split_00.manifest";
  std::string topology = tmp.file("data") + "/synth.topology";

  // train a small flow; the 2-epoch smoke config must stay well under 60 s
  write_file(tmp.file("flow.cfg"),
             "kind = realnvp\npi = true\npast_length = 6\nbatch_size = 128\n"
             "epochs = 2\nlearning_rate = 0.002\ngen_count = 4\nseed = 9\n"
             "patience = 0\ncoupling_layers = 2\nlayers = 2\nneurons = 16\n");
  auto train_start = std::chrono::steady_clock::now();
  REQUIRE(run({"train", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--split", split, "--topology", topology,
               "--config", tmp.file("flow.cfg"), "--out", tmp.file("run")}) == 0);
  double train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - train_start).count();
  CHECK(train_seconds < 60.0);
  CHECK(fs::exists(tmp.file("run") + "/checkpoint.txt"));
  CHECK(fs::exists(tmp.file("run") + "/history.txt"));
  CHECK(fs::exists(tmp.file("run") + "/manifest.json"));

  // history of a PI run carries phys/beta columns
  {
    bool pi = false;
    auto history = train::load_history(tmp.file("run") + "/history.txt", &pi);
    CHECK(pi);
    CHECK(history.size() == 2);
  }

  // eval writes a parseable report
  REQUIRE(run({"eval", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--data",
               tmp.file("data"), "--labels", tmp.file("data") + "/labels.txt", "--split",
               split, "--out", tmp.file("eval"), "--roc"}) == 0);
  auto report = eval::EvalReport::load(tmp.file("eval") + "/report.txt");
  CHECK(report.auroc >= 0.0);
  CHECK(report.auroc <= 1.0);
  CHECK(report.n_fault > 0);
  CHECK(fs::exists(tmp.file("eval") + "/roc.csv"));

  // eval determinism: identical report files
  REQUIRE(run({"eval", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--data",
               tmp.file("data"), "--labels", tmp.file("data") + "/labels.txt", "--split",
               split, "--out", tmp.file("eval2")}) == 0);
  CHECK(cli::file_hash(tmp.file("eval") + "/report.txt") ==
        cli::file_hash(tmp.file("eval2") + "/report.txt"));

  // unknown sensor name -> configuration error
  CHECK(run({"eval", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--data",
             tmp.file("data"), "--labels", tmp.file("data") + "/labels.txt", "--split",
             split, "--sensor", "NOPE", "--out", tmp.file("eval3")}) == 2);

  // per-sensor filter keeps the nominal count
  if (run({"eval", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--data",
           tmp.file("data"), "--labels", tmp.file("data") + "/labels.txt", "--split", split,
           "--sensor", "ST265", "--out", tmp.file("eval4")}) == 0) {
    auto filtered = eval::EvalReport::load(tmp.file("eval4") + "/report.txt");
    CHECK(filtered.n_nominal == report.n_nominal);
    CHECK(filtered.n_fault <= report.n_fault);
  }

  // sample: count 0 gives an empty file with a valid summary header
  REQUIRE(run({"sample", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--count", "0",
               "--out", tmp.file("empty.csv")}) == 0);
  std::ifstream empty_summary(tmp.file("empty.csv") + ".summary");
  std::string header;
  std::getline(empty_summary, header);
  CHECK(header == "feature in_range_fraction");

  REQUIRE(run({"sample", "--checkpoint", tmp.file("run") + "/checkpoint.txt", "--count", "50",
               "--out", tmp.file("gen.csv"), "--seed", "4"}) == 0);
  std::ifstream gen(tmp.file("gen.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(gen, line)) ++lines;
  CHECK(lines == 51);  // header + 50 rows

  // sample on a non-flow checkpoint is a configuration error
  write_file(tmp.file("ae.cfg"),
             "kind = autoencoder\npi = false\npast_length = 6\nbatch_size = 128\n"
             "epochs = 1\nlearning_rate = 0.002\nseed = 9\npatience = 0\n"
             "layers = 4\nneurons = 16\n");
  REQUIRE(run({"train", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--split", split, "--topology", topology,
               "--config", tmp.file("ae.cfg"), "--out", tmp.file("ae_run")}) == 0);
  CHECK(run({"sample", "--checkpoint", tmp.file("ae_run") + "/checkpoint.txt", "--count", "5",
             "--out", tmp.file("nope.csv")}) == 2);

  // report renders all three artifact kinds
  CHECK(run({"report", tmp.file("eval") + "/report.txt", tmp.file("run") + "/history.txt"}) ==
        0);
}

TEST_CASE("train: resume reproduces the straight-through run") {
  testsup::TempDir tmp("cli_resume");
  make_dataset(tmp, 3);
  REQUIRE(run({"ingest", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--out", tmp.file("splits"), "--splits", "1",
               "--seed", "2"}) == 0);
  std::string split = tmp.file("splits") + "/split_00.manifest";
  std::string topology = tmp.file("data") + "/synth.topology";
  write_file(tmp.file("cfg.cfg"),
             "kind = realnvp\npi = false\npast_length = 5\nbatch_size = 256\n"
             "epochs = 4\nlearning_rate = 0.002\nseed = 21\npatience = 0\n"
             "coupling_layers = 2\nlayers = 2\nneurons = 8\n");

  REQUIRE(run({"train", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--split", split, "--topology", topology,
               "--config", tmp.file("cfg.cfg"), "--out", tmp.file("straight")}) == 0);

  REQUIRE(run({"train", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--split", split, "--topology", topology,
               "--config", tmp.file("cfg.cfg"), "--out", tmp.file("half"), "--epochs", "2"}) ==
          0);
  REQUIRE(run({"train", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--split", split, "--topology", topology,
               "--config", tmp.file("cfg.cfg"), "--out", tmp.file("resumed"), "--resume",
               tmp.file("half") + "/checkpoint.txt"}) == 0);

  // final model parameters identical bit-for-bit
  model::Bundle straight = model::load_checkpoint(tmp.file("straight") + "/checkpoint.txt");
  model::Bundle resumed = model::load_checkpoint(tmp.file("resumed") + "/checkpoint.txt");
  auto values = [](const model::Bundle& b) {
    std::vector<double> out;
    for (const auto& [name, t] : b.parameters()) {
      (void)name;
      out.insert(out.end(), t.values().begin(), t.values().end());
    }
    return out;
  };
  CHECK(values(straight) == values(resumed));
}

TEST_CASE("grid: dry run prints the plan, tiny grid runs and resumes") {
  testsup::TempDir tmp("cli_grid");
  CHECK(run({"grid", "--grid", configs_dir() + "/grid_flow_tableI.grid", "--dry-run"}) == 0);

  make_dataset(tmp, 3);
  REQUIRE(run({"ingest", "--data", tmp.file("data"), "--labels",
               tmp.file("data") + "/labels.txt", "--out", tmp.file("splits"), "--splits", "1",
               "--seed", "2"}) == 0);
  write_file(tmp.file("tiny.grid"),
             "kind = realnvp\nseeds = 1\npast_length = 5\ncoupling_layers = 2\n"
             "layers = 2\nneurons = 8, 16\nbatch_size = 256\npi = false\n"
             "epochs = 1\nlearning_rate = 0.002\npatience = 0\ngen_count = 4\nseed = 3\n");
  REQUIRE(run({"grid", "--grid", tmp.file("tiny.grid"), "--data", tmp.file("data"),
               "--labels", tmp.file("data") + "/labels.txt", "--split",
               tmp.file("splits") + "/split_00.manifest", "--topology",
               tmp.file("data") + "/synth.topology", "--out", tmp.file("grid")}) == 0);

  auto spec = train::GridSpec::load(tmp.file("tiny.grid"));
  auto rows = train::load_grid_results(tmp.file("grid") + "/results.csv", spec);
  CHECK(rows.size() == 2);

  // resume skips completed cells: the results file keeps exactly 2 rows
  REQUIRE(run({"grid", "--grid", tmp.file("tiny.grid"), "--data", tmp.file("data"),
               "--labels", tmp.file("data") + "/labels.txt", "--split",
               tmp.file("splits") + "/split_00.manifest", "--topology",
               tmp.file("data") + "/synth.topology", "--out", tmp.file("grid")}) == 0);
  auto rows2 = train::load_grid_results(tmp.file("grid") + "/results.csv", spec);
  CHECK(rows2.size() == 2);

  // empty grid file is a configuration error
  write_file(tmp.file("empty.grid"), "kind = realnvp\nseeds = 1\npast_length =\n");
  CHECK(run({"grid", "--grid", tmp.file("empty.grid"), "--dry-run"}) == 2);
}

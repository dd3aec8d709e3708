#include "epsfd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "epsfd/checkpoint.hpp"
#include "epsfd/data.hpp"
#include "epsfd/eval.hpp"
#include "epsfd/kernels.hpp"
#include "epsfd/physics.hpp"
#include "epsfd/synth.hpp"
#include "epsfd/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace epsfd::cli {

namespace {

std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("EPSFD_OUTPUT_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

void apply_thread_env() {
  const char* threads = std::getenv("EPSFD_THREADS");
  if (threads && *threads) {
    int n = std::atoi(threads);
    if (n > 0) kernels::set_thread_count(n);
  }
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  json inputs = json::object();
  std::vector<std::string> outputs;

  void add_input(const std::string& path) { inputs[path] = file_hash(path); }

  void write(const std::string& path) const {
    json j;
    j["artifact_version"] = artifact_version;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

json config_json(const train::TrainConfig& cfg) {
  json j;
  j["kind"] = model::kind_name(cfg.kind);
  j["pi"] = cfg.pi_enabled;
  j["past_length"] = cfg.past_length;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["learning_rate"] = cfg.learning_rate;
  j["gen_count"] = cfg.gen_count;
  j["beta_init"] = cfg.beta_init;
  j["beta_step"] = cfg.beta_step;
  j["seed"] = cfg.seed;
  j["patience"] = cfg.patience;
  j["grad_clip"] = cfg.grad_clip;
  j["coupling_layers"] = cfg.coupling_layers;
  j["layers"] = cfg.layers;
  j["neurons"] = cfg.neurons;
  return j;
}

// Topology channels must all exist in the data columns; reports the
// difference instead of failing later inside the loss.
void preflight_topology(const phys::CircuitTopology& topo,
                        const std::vector<std::string>& columns) {
  std::vector<std::string> missing;
  for (const auto& c : topo.columns)
    if (std::find(columns.begin(), columns.end(), c) == columns.end())
      missing.push_back(c);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw std::invalid_argument("topology channels missing from data columns: " + list);
  }
  if (topo.columns != columns) {
    std::string extra;
    for (const auto& c : columns)
      if (std::find(topo.columns.begin(), topo.columns.end(), c) == topo.columns.end())
        extra += (extra.empty() ? "" : ", ") + c;
    throw std::invalid_argument(
        "topology column order must match the data columns exactly" +
        (extra.empty() ? std::string() : " (data has extra channels: " + extra + ")"));
  }
}

struct ScaledSplitData {
  data::Scaler scaler;
  data::WindowBatch train;       // nominal-only
  data::WindowBatch validation;  // faults kept
  data::WindowBatch test;
};

ScaledSplitData prepare_split(const std::vector<data::Frame>& frames,
                              const data::Split& split, std::int64_t past_length,
                              bool need_test) {
  ScaledSplitData out;
  auto train_frames = data::select_frames(frames, split.train_files);
  out.scaler = data::fit_scaler(train_frames);
  for (auto& f : train_frames) out.scaler.apply(f);
  out.train = data::windows_of(train_frames, past_length).filter_nominal();

  if (!split.validation_files.empty()) {
    auto val_frames = data::select_frames(frames, split.validation_files);
    for (auto& f : val_frames) out.scaler.apply(f);
    out.validation = data::windows_of(val_frames, past_length);
  }
  if (need_test) {
    auto test_frames = data::select_frames(frames, split.test_files);
    for (auto& f : test_frames) out.scaler.apply(f);
    out.test = data::windows_of(test_frames, past_length);
  }
  return out;
}

// ---- synth ----------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir_raw, int count,
              const std::string& faults_path, const std::string& name,
              std::uint64_t seed_override, bool has_seed_override) {
  synth::SynthConfig config =
      config_path.empty() ? synth::SynthConfig::defaults() : synth::SynthConfig::load(config_path);
  if (has_seed_override) config.seed = seed_override;
  config.validate();

  std::string out_dir = resolve_out(out_dir_raw);
  fs::create_directories(out_dir);

  std::vector<synth::FaultScenario> scenarios;
  if (!faults_path.empty()) scenarios = synth::load_scenarios(faults_path);
  for (const auto& s : scenarios) s.validate(config);

  Manifest manifest;
  manifest.command = "synth";
  manifest.seeds.push_back(config.seed);
  if (!config_path.empty()) manifest.add_input(config_path);
  if (!faults_path.empty()) manifest.add_input(faults_path);

  std::vector<data::LabelRange> all_ranges;
  auto emit = [&](const data::Frame& frame) {
    std::string path = (fs::path(out_dir) / frame.source).string();
    synth::write_csv(path, frame);
    manifest.outputs.push_back(path);
    auto ranges = synth::fault_ranges(frame);
    all_ranges.insert(all_ranges.end(), ranges.begin(), ranges.end());
  };

  char buf[32];
  for (int i = 0; i < count; ++i) {
    synth::SynthConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    data::Frame frame = synth::simulate_nominal(c);
    std::snprintf(buf, sizeof(buf), "_%03d.csv", i);
    frame.source = name + buf;
    emit(frame);
  }
  for (std::size_t j = 0; j < scenarios.size(); ++j) {
    synth::SynthConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(count) + static_cast<std::uint64_t>(j);
    data::Frame frame = synth::simulate_nominal(c);
    frame = synth::inject_fault(frame, scenarios[j], c);
    std::snprintf(buf, sizeof(buf), "_fault_%03d.csv", static_cast<int>(j));
    frame.source = name + buf;
    emit(frame);
  }

  std::string labels_path = (fs::path(out_dir) / "labels.txt").string();
  data::save_labels(labels_path, all_ranges);
  manifest.outputs.push_back(labels_path);

  std::string topo_path = (fs::path(out_dir) / "synth.topology").string();
  config.topology().save(topo_path);
  manifest.outputs.push_back(topo_path);

  // Channel summary.
  std::cout << "channels (" << config.channels.size() << "):\n";
  for (const auto& ch : config.channels)
    std::cout << "  " << ch.name << " base=" << ch.base << " noise_std=" << ch.noise_std
              << "\n";
  std::cout << "files: " << count << " nominal, " << scenarios.size() << " faulted, "
            << config.duration << " rows each\n";

  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

// ---- ingest ----------------------------------------------------------------------

int cmd_ingest(const std::string& data_dir, const std::string& labels_path,
               const std::string& out_dir_raw, int split_count, std::uint64_t seed,
               double train_frac, double val_frac) {
  auto frames = data::load_directory(data_dir, labels_path);
  std::string out_dir = resolve_out(out_dir_raw);
  fs::create_directories(out_dir);

  data::SplitSpec spec;
  spec.seed = seed;
  spec.train_fraction = train_frac;
  spec.validation_fraction = val_frac;
  auto splits = data::make_splits(frames, spec, split_count);

  Manifest manifest;
  manifest.command = "ingest";
  manifest.seeds.push_back(seed);
  if (!labels_path.empty()) manifest.add_input(labels_path);

  char buf[32];
  for (std::size_t k = 0; k < splits.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "split_%02d.manifest", static_cast<int>(k));
    std::string path = (fs::path(out_dir) / buf).string();
    data::save_split(path, splits[k]);
    manifest.outputs.push_back(path);
  }

  std::int64_t total_rows = 0, fault_rows = 0, dropped = 0;
  for (const auto& f : frames) {
    total_rows += f.rows();
    dropped += f.dropped_rows;
    for (int l : f.labels)
      if (l == data::label_fault) ++fault_rows;
  }
  std::ostringstream summary;
  summary << "files = " << frames.size() << "\n"
          << "channels = " << frames[0].cols() << "\n"
          << "rows = " << total_rows << "\n"
          << "fault_rows = " << fault_rows << "\n"
          << "dropped_rows = " << dropped << "\n"
          << "splits = " << splits.size() << "\n";
  std::cout << summary.str();
  std::ofstream sum((fs::path(out_dir) / "ingest_summary.txt").string());
  sum << summary.str();

  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

// ---- train -----------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& labels_path,
              const std::string& split_path, const std::string& topology_path,
              const std::string& config_path, const std::string& out_dir_raw,
              const std::string& resume_path, int checkpoint_every,
              const train::TrainConfig& overrides, const std::vector<std::string>& set_keys) {
  train::TrainConfig config = train::TrainConfig::load(config_path);
  // Flag overrides win over the config file.
  for (const auto& key : set_keys) {
    if (key == "seed") config.seed = overrides.seed;
    else if (key == "epochs") config.epochs = overrides.epochs;
    else if (key == "pi") config.pi_enabled = overrides.pi_enabled;
    else if (key == "past_length") config.past_length = overrides.past_length;
    else if (key == "batch_size") config.batch_size = overrides.batch_size;
  }
  config.validate();

  auto frames = data::load_directory(data_dir, labels_path);
  data::Split split = data::load_split(split_path);
  phys::CircuitTopology topology = phys::CircuitTopology::load(topology_path);
  preflight_topology(topology, frames[0].columns);

  ScaledSplitData ds = prepare_split(frames, split, config.past_length, false);

  std::string out_dir = resolve_out(out_dir_raw);
  fs::create_directories(out_dir);

  train::ResumePoint resume;
  const train::ResumePoint* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    resume.bundle = model::load_checkpoint(resume_path, &resume.state);
    resume_ptr = &resume;
  }

  char buf[48];
  train::EpochCallback per_epoch = nullptr;
  if (checkpoint_every > 0) {
    per_epoch = [&](const model::Bundle& b, const model::TrainerState& st,
                    const train::EpochRecord& r) {
      if (r.epoch % checkpoint_every != 0) return;
      std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%04d.txt",
                    static_cast<int>(r.epoch));
      model::save_checkpoint((fs::path(out_dir) / buf).string(), b, &st);
    };
  }

  train::TrainResult result = train::train_model(config, ds.train, ds.validation, ds.scaler,
                                                 &topology, resume_ptr, per_epoch);

  std::string ckpt = (fs::path(out_dir) / "checkpoint.txt").string();
  model::save_checkpoint(ckpt, result.bundle, &result.state);
  std::string hist = (fs::path(out_dir) / "history.txt").string();
  train::save_history(hist, result.history, config.pi_enabled);

  Manifest manifest;
  manifest.command = "train";
  manifest.config = config_json(config);
  manifest.seeds.push_back(config.seed);
  manifest.add_input(config_path);
  manifest.add_input(split_path);
  manifest.add_input(topology_path);
  manifest.outputs = {ckpt, hist};
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  const auto& last = result.history.back();
  std::cout << "trained " << model::kind_name(config.kind) << " for "
            << result.history.size() << " epochs"
            << (result.early_stopped ? " (early stop)" : "") << ", final main loss "
            << last.main << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& labels_path, const std::string& split_path,
             const std::string& sensor, double tpr_target,
             const std::string& out_dir_raw, bool emit_roc) {
  model::Bundle bundle = model::load_checkpoint(checkpoint_path);
  auto frames = data::load_directory(data_dir, labels_path);
  data::Split split = data::load_split(split_path);

  if (!sensor.empty()) {
    const auto& cols = frames[0].columns;
    if (std::find(cols.begin(), cols.end(), sensor) == cols.end())
      throw std::invalid_argument("unknown sensor '" + sensor + "'");
  }

  auto test_frames = data::select_frames(frames, split.test_files);
  if (bundle.scaler.columns != test_frames[0].columns)
    throw std::invalid_argument("checkpoint scaler columns do not match the data");
  for (auto& f : test_frames) bundle.scaler.apply(f);
  data::WindowBatch test = data::windows_of(test_frames, bundle.past_length);

  if (!sensor.empty()) {
    // Keep every nominal window; keep only faults of the named sensor.
    data::WindowBatch filtered;
    filtered.features = test.features;
    filtered.past_length = test.past_length;
    filtered.columns = test.columns;
    for (std::int64_t w = 0; w < test.count; ++w) {
      if (test.labels[w] == data::label_fault && test.fault_channels[w] != sensor) continue;
      filtered.flat.insert(filtered.flat.end(), test.flat.begin() + w * test.width(),
                           test.flat.begin() + (w + 1) * test.width());
      filtered.labels.push_back(test.labels[w]);
      filtered.fault_channels.push_back(test.fault_channels[w]);
      ++filtered.count;
    }
    test = std::move(filtered);
  }

  eval::ScoreSet scores = eval::score(bundle, test);
  eval::EvalReport report = eval::evaluate_scores(scores, tpr_target);

  std::string out_dir = resolve_out(out_dir_raw);
  fs::create_directories(out_dir);
  std::string report_path = (fs::path(out_dir) / "report.txt").string();
  report.save(report_path);
  std::ofstream table((fs::path(out_dir) / "report.table.txt").string());
  table << report.to_table();

  Manifest manifest;
  manifest.command = "eval";
  manifest.add_input(checkpoint_path);
  manifest.add_input(split_path);
  manifest.config["sensor"] = sensor;
  manifest.config["tpr_target"] = tpr_target;
  manifest.outputs = {report_path};
  if (emit_roc) {
    std::string roc_path = (fs::path(out_dir) / "roc.csv").string();
    eval::save_roc_csv(roc_path, scores);
    manifest.outputs.push_back(roc_path);
  }
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  std::cout << report.to_table();
  return 0;
}

// ---- grid ------------------------------------------------------------------------

int cmd_grid(const std::string& grid_path, const std::string& data_dir,
             const std::string& labels_path, const std::string& split_path,
             const std::string& topology_path, const std::string& out_dir_raw,
             bool dry_run, int workers) {
  train::GridSpec spec = train::GridSpec::load(grid_path);

  if (dry_run) {
    auto list = [](const auto& v) {
      std::ostringstream os;
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      return os.str();
    };
    std::cout << "model: " << model::kind_name(spec.base.kind) << "\n"
              << "past_length: " << list(spec.past_lengths) << "\n";
    if (spec.base.kind == model::Kind::realnvp)
      std::cout << "coupling_layers: " << list(spec.coupling_layer_values) << "\n";
    std::cout << "layers: " << list(spec.layer_values) << "\n"
              << "neurons: " << list(spec.neuron_values) << "\n"
              << "batch_size: " << list(spec.batch_sizes) << "\n"
              << "seeds per cell: " << spec.seeds << "\n"
              << "cells: " << spec.cell_count() << "\n";
    return 0;
  }

  auto frames = data::load_directory(data_dir, labels_path);
  train::GridDataset dataset;
  dataset.frames = &frames;
  dataset.split = data::load_split(split_path);
  dataset.topology = phys::CircuitTopology::load(topology_path);
  preflight_topology(dataset.topology, frames[0].columns);

  std::string out_dir = resolve_out(out_dir_raw);
  fs::create_directories(out_dir);
  std::string results_path = (fs::path(out_dir) / "results.csv").string();

  std::vector<train::GridResult> completed;
  if (fs::exists(results_path)) {
    completed = train::load_grid_results(results_path, spec);
    std::cout << "resuming: " << completed.size() << " rows already present\n";
  }

  std::mutex io_mu;
  std::vector<train::GridResult> done = completed;
  auto on_result = [&](const train::GridResult& r) {
    std::lock_guard<std::mutex> lock(io_mu);
    done.push_back(r);
    train::save_grid_results(results_path, done);
    std::cout << "cell " << model::kind_name(r.config.kind) << " past=" << r.config.past_length
              << " layers=" << r.config.layers << " neurons=" << r.config.neurons
              << " batch=" << r.config.batch_size << " seed=" << r.seed << " -> "
              << (r.error.empty()
                      ? (r.has_val_auc ? "val_auc=" + std::to_string(r.val_auc)
                                       : "val_main=" + std::to_string(r.val_main))
                      : "error: " + r.error)
              << "\n";
  };

  auto ranked = train::grid_search(spec, dataset, completed, workers, on_result);
  train::save_grid_results(results_path, ranked);
  std::string ranked_path = (fs::path(out_dir) / "results_ranked.csv").string();
  train::save_grid_results(ranked_path, ranked);

  Manifest manifest;
  manifest.command = "grid";
  manifest.add_input(grid_path);
  manifest.add_input(split_path);
  manifest.add_input(topology_path);
  manifest.seeds.push_back(spec.base.seed);
  manifest.outputs = {results_path, ranked_path};
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  std::cout << "grid complete: " << ranked.size() << " rows\n";
  return 0;
}

// ---- sample ----------------------------------------------------------------------

int cmd_sample(const std::string& checkpoint_path, std::int64_t count,
               const std::string& out_path_raw, std::uint64_t seed) {
  model::Bundle bundle = model::load_checkpoint(checkpoint_path);
  if (bundle.kind != model::Kind::realnvp)
    throw std::invalid_argument("checkpoint is not a flow model (kind " +
                                model::kind_name(bundle.kind) + ")");
  std::string out_path = resolve_out(out_path_raw);
  if (auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);

  std::int64_t width = bundle.input_width();
  std::vector<double> values;
  if (count > 0) {
    RandomStream rng(seed);
    ad::Tensor samples = bundle.flow->sample(count, rng);
    values = samples.values();
  }

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write samples: " + out_path);
  out.precision(17);
  for (std::int64_t t = 0; t < bundle.past_length; ++t)
    for (std::int64_t f = 0; f < bundle.features; ++f)
      out << (t || f ? "," : "") << bundle.scaler.columns[f] << "@t" << t;
  out << "\n";
  for (std::int64_t i = 0; i < count; ++i) {
    for (std::int64_t j = 0; j < width; ++j) out << (j ? "," : "") << values[i * width + j];
    out << "\n";
  }

  // Fig.-style range diagnostic: fraction of values in [0, 1] per feature.
  std::string summary_path = out_path + ".summary";
  std::ofstream sum(summary_path);
  sum << "feature in_range_fraction\n";
  double total_in = 0.0;
  if (count > 0) {
    for (std::int64_t j = 0; j < width; ++j) {
      std::int64_t in_range = 0;
      for (std::int64_t i = 0; i < count; ++i) {
        double v = values[i * width + j];
        if (v >= 0.0 && v <= 1.0) ++in_range;
      }
      double frac = static_cast<double>(in_range) / static_cast<double>(count);
      total_in += static_cast<double>(in_range);
      std::int64_t t = j / bundle.features, f = j % bundle.features;
      sum << bundle.scaler.columns[f] << "@t" << t << " " << frac << "\n";
    }
  }
  double overall =
      count > 0 ? total_in / static_cast<double>(count * width) : 0.0;
  sum << "overall " << overall << "\n";
  std::cout << "sampled " << count << " arrays, overall in-range fraction " << overall
            << "\n";
  return 0;
}

// ---- report ----------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& paths) {
  for (const auto& path : paths) {
    std::ifstream probe(path);
    if (!probe) throw std::runtime_error("cannot open: " + path);
    std::string first;
    std::getline(probe, first);
    probe.close();
    std::cout << "== " << path << " ==\n";
    if (first.rfind("epsfd-eval-report", 0) == 0) {
      std::cout << eval::EvalReport::load(path).to_table();
    } else if (first.rfind("epsfd-history", 0) == 0) {
      bool pi = false;
      auto history = train::load_history(path, &pi);
      std::printf("%6s %12s %12s %10s %12s %10s\n", "epoch", "main", pi ? "phys" : "-",
                  pi ? "beta" : "-", "val_main", "val_auc");
      for (const auto& r : history) {
        std::printf("%6lld %12.6f ", static_cast<long long>(r.epoch), r.main);
        if (pi) std::printf("%12.6f %10.6f ", r.phys, r.beta);
        else std::printf("%12s %10s ", "-", "-");
        if (r.has_validation) std::printf("%12.6f ", r.val_main);
        else std::printf("%12s ", "-");
        if (r.has_val_auc) std::printf("%10.6f\n", r.val_auc);
        else std::printf("%10s\n", "-");
      }
    } else if (first.rfind("kind,", 0) == 0) {
      std::ifstream in(path);
      std::string line;
      while (std::getline(in, line)) std::cout << line << "\n";
    } else {
      throw std::runtime_error(path + ": unrecognized report format");
    }
  }
  return 0;
}

}  // namespace

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run(const std::vector<std::string>& args) {
  apply_thread_env();

  CLI::App app{"physics-informed Real NVP fault detection for EPS telemetry"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic EPS telemetry");
  std::string synth_config, synth_out = "synth_out", synth_faults, synth_name = "synth";
  int synth_count = 1;
  std::uint64_t synth_seed = 0;
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_seed, "seed override");
  synth_cmd->add_option("--config", synth_config, "synth config file");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--count", synth_count, "nominal files to generate");
  synth_cmd->add_option("--faults", synth_faults, "fault scenario file");
  synth_cmd->add_option("--name", synth_name, "output file prefix");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "load, clean and split a CSV directory");
  std::string ingest_data, ingest_labels, ingest_out = "ingest_out";
  int ingest_splits = 10;
  std::uint64_t ingest_seed = 0;
  double ingest_train_frac = 0.70, ingest_val_frac = 0.30;
  ingest_cmd->add_option("--data", ingest_data, "CSV directory")->required();
  ingest_cmd->add_option("--labels", ingest_labels, "sidecar labels file");
  ingest_cmd->add_option("--out", ingest_out, "output directory")->required();
  ingest_cmd->add_option("--splits", ingest_splits, "number of random splits");
  ingest_cmd->add_option("--seed", ingest_seed, "split seed");
  ingest_cmd->add_option("--train-frac", ingest_train_frac, "train file fraction");
  ingest_cmd->add_option("--val-frac", ingest_val_frac, "validation fraction of train pool");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model on one split");
  std::string train_data, train_labels, train_split, train_topology, train_config_path;
  std::string train_out = "train_out", train_resume;
  int train_ckpt_every = 0;
  train::TrainConfig train_overrides;
  bool override_pi = false;
  train_cmd->add_option("--data", train_data, "CSV directory")->required();
  train_cmd->add_option("--labels", train_labels, "sidecar labels file");
  train_cmd->add_option("--split", train_split, "split manifest")->required();
  train_cmd->add_option("--topology", train_topology, "circuit topology file")->required();
  train_cmd->add_option("--config", train_config_path, "train config file")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");
  train_cmd->add_option("--checkpoint-every", train_ckpt_every, "epochs between checkpoints");
  auto* o_seed = train_cmd->add_option("--seed", train_overrides.seed, "seed override");
  auto* o_epochs = train_cmd->add_option("--epochs", train_overrides.epochs, "epochs override");
  auto* o_pi = train_cmd->add_flag("--pi,!--no-pi", override_pi, "physics-informed loss on/off");
  auto* o_past = train_cmd->add_option("--past-length", train_overrides.past_length,
                                       "past length override");
  auto* o_batch = train_cmd->add_option("--batch-size", train_overrides.batch_size,
                                        "batch size override");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split's test set");
  std::string eval_ckpt, eval_data, eval_labels, eval_split, eval_sensor, eval_out = "eval_out";
  double eval_tpr = 0.95;
  bool eval_roc = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "CSV directory")->required();
  eval_cmd->add_option("--labels", eval_labels, "sidecar labels file");
  eval_cmd->add_option("--split", eval_split, "split manifest")->required();
  eval_cmd->add_option("--sensor", eval_sensor, "keep only faults of this sensor");
  eval_cmd->add_option("--tpr", eval_tpr, "TPR target for the threshold");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_flag("--roc", eval_roc, "emit ROC curve CSV");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "hyper-parameter grid search");
  std::string grid_spec, grid_data, grid_labels, grid_split, grid_topology, grid_out = "grid_out";
  bool grid_dry = false;
  int grid_workers = 1;
  grid_cmd->add_option("--grid", grid_spec, "grid spec file")->required();
  grid_cmd->add_option("--data", grid_data, "CSV directory");
  grid_cmd->add_option("--labels", grid_labels, "sidecar labels file");
  grid_cmd->add_option("--split", grid_split, "split manifest");
  grid_cmd->add_option("--topology", grid_topology, "circuit topology file");
  grid_cmd->add_option("--out", grid_out, "output directory");
  grid_cmd->add_flag("--dry-run", grid_dry, "print the plan and cell count");
  grid_cmd->add_option("--workers", grid_workers, "parallel cells");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw generated arrays from a flow checkpoint");
  std::string sample_ckpt, sample_out = "samples.csv";
  std::int64_t sample_count = 100;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--checkpoint", sample_ckpt, "flow checkpoint")->required();
  sample_cmd->add_option("--count", sample_count, "number of arrays");
  sample_cmd->add_option("--out", sample_out, "output CSV path")->required();
  sample_cmd->add_option("--seed", sample_seed, "sampling seed");

  // report
  auto* report_cmd = app.add_subcommand("report", "pretty-print reports, histories, grids");
  std::vector<std::string> report_paths;
  report_cmd->add_option("paths", report_paths, "files to render")->required();

  std::vector<std::string> argv_copy = args;
  std::vector<const char*> argv;
  argv.push_back("epsfd");
  for (const auto& a : argv_copy) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth_config, synth_out, synth_count, synth_faults, synth_name,
                       synth_seed, synth_seed_opt->count() > 0);
    if (ingest_cmd->parsed())
      return cmd_ingest(ingest_data, ingest_labels, ingest_out, ingest_splits, ingest_seed,
                        ingest_train_frac, ingest_val_frac);
    if (train_cmd->parsed()) {
      std::vector<std::string> set_keys;
      if (o_seed->count()) set_keys.push_back("seed");
      if (o_epochs->count()) set_keys.push_back("epochs");
      if (o_pi->count()) {
        set_keys.push_back("pi");
        train_overrides.pi_enabled = override_pi;
      }
      if (o_past->count()) set_keys.push_back("past_length");
      if (o_batch->count()) set_keys.push_back("batch_size");
      return cmd_train(train_data, train_labels, train_split, train_topology,
                       train_config_path, train_out, train_resume, train_ckpt_every,
                       train_overrides, set_keys);
    }
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_data, eval_labels, eval_split, eval_sensor, eval_tpr,
                      eval_out, eval_roc);
    if (grid_cmd->parsed())
      return cmd_grid(grid_spec, grid_data, grid_labels, grid_split, grid_topology, grid_out,
                      grid_dry, grid_workers);
    if (sample_cmd->parsed())
      return cmd_sample(sample_ckpt, sample_count, sample_out, sample_seed);
    if (report_cmd->parsed()) return cmd_report(report_paths);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "configuration error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace epsfd::cli

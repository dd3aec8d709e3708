#include "epsfd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "epsfd/random.hpp"

namespace epsfd::data {

namespace {

constexpr double gap = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') return false;
  out = v;
  return true;
}

}  // namespace

bool Frame::has_fault_rows() const {
  return std::any_of(labels.begin(), labels.end(),
                     [](int l) { return l == label_fault; });
}

Frame load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2)
    throw std::runtime_error(path + ": no numeric columns (header has " +
                             std::to_string(header.size()) + " fields)");

  Frame frame;
  frame.source = std::filesystem::path(path).filename().string();
  frame.columns.assign(header.begin() + 1, header.end());
  std::int64_t n_cols = frame.cols();

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    double ts = 0.0;
    if (static_cast<std::int64_t>(fields.size()) != n_cols + 1 ||
        !parse_double(fields[0], ts)) {
      ++frame.dropped_rows;
      continue;
    }
    frame.timestamps.push_back(ts);
    for (std::int64_t c = 0; c < n_cols; ++c) {
      double v = gap;
      parse_double(fields[c + 1], v);  // unparseable cell stays a gap
      frame.values.push_back(v);
    }
    frame.labels.push_back(label_nominal);
    frame.fault_channel.emplace_back();
  }
  if (frame.rows() == 0) throw std::runtime_error(path + ": no data rows");
  for (std::int64_t r = 1; r < frame.rows(); ++r)
    if (frame.timestamps[r] < frame.timestamps[r - 1])
      throw std::runtime_error(path + ": timestamps not monotone at row " + std::to_string(r));
  return frame;
}

std::int64_t clean(Frame& frame) {
  std::int64_t n_rows = frame.rows();
  std::int64_t n_cols = frame.cols();

  // Columns that never parsed are dropped entirely.
  std::vector<bool> keep_col(static_cast<std::size_t>(n_cols), false);
  for (std::int64_t c = 0; c < n_cols; ++c)
    for (std::int64_t r = 0; r < n_rows; ++r)
      if (!std::isnan(frame.at(r, c))) {
        keep_col[static_cast<std::size_t>(c)] = true;
        break;
      }
  if (std::count(keep_col.begin(), keep_col.end(), true) == 0)
    throw std::runtime_error(frame.source + ": no numeric columns after cleaning");
  if (std::count(keep_col.begin(), keep_col.end(), true) < n_cols) {
    std::vector<std::string> cols;
    std::vector<double> vals;
    for (std::int64_t c = 0; c < n_cols; ++c)
      if (keep_col[static_cast<std::size_t>(c)]) cols.push_back(frame.columns[c]);
    vals.reserve(static_cast<std::size_t>(n_rows) * cols.size());
    for (std::int64_t r = 0; r < n_rows; ++r)
      for (std::int64_t c = 0; c < n_cols; ++c)
        if (keep_col[static_cast<std::size_t>(c)]) vals.push_back(frame.at(r, c));
    frame.columns = std::move(cols);
    frame.values = std::move(vals);
    n_cols = frame.cols();
  }

  // Forward-fill single-sample gaps; mark rows inside longer runs for drop.
  std::vector<bool> drop_row(static_cast<std::size_t>(n_rows), false);
  for (std::int64_t c = 0; c < n_cols; ++c) {
    std::int64_t r = 0;
    while (r < n_rows) {
      if (!std::isnan(frame.at(r, c))) {
        ++r;
        continue;
      }
      std::int64_t run_end = r;
      while (run_end < n_rows && std::isnan(frame.at(run_end, c))) ++run_end;
      bool single = (run_end - r == 1) && r > 0;
      if (single) {
        frame.values[r * n_cols + c] = frame.at(r - 1, c);
      } else {
        for (std::int64_t k = r; k < run_end; ++k)
          drop_row[static_cast<std::size_t>(k)] = true;
      }
      r = run_end;
    }
  }

  std::int64_t dropped = std::count(drop_row.begin(), drop_row.end(), true);
  if (dropped > 0) {
    Frame out;
    out.source = frame.source;
    out.columns = frame.columns;
    out.dropped_rows = frame.dropped_rows;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      if (drop_row[static_cast<std::size_t>(r)]) continue;
      out.timestamps.push_back(frame.timestamps[r]);
      out.labels.push_back(frame.labels[r]);
      out.fault_channel.push_back(frame.fault_channel[r]);
      for (std::int64_t c = 0; c < n_cols; ++c) out.values.push_back(frame.at(r, c));
    }
    frame = std::move(out);
  }
  frame.dropped_rows += dropped;
  return dropped;
}

// ---- labels ---------------------------------------------------------------------

std::vector<LabelRange> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file: " + path);
  std::vector<LabelRange> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    LabelRange r;
    if (!(is >> r.file >> r.t_start >> r.t_end))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected <file> <t_start> <t_end> [channel]");
    is >> r.channel;
    out.push_back(std::move(r));
  }
  return out;
}

void save_labels(const std::string& path, const std::vector<LabelRange>& ranges) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write labels file: " + path);
  out << "# file t_start t_end [channel]\n";
  out.precision(17);
  for (const auto& r : ranges) {
    out << r.file << " " << r.t_start << " " << r.t_end;
    if (!r.channel.empty()) out << " " << r.channel;
    out << "\n";
  }
}

void apply_labels(Frame& frame, const std::vector<LabelRange>& ranges) {
  for (const auto& range : ranges) {
    if (range.file != frame.source) continue;
    for (std::int64_t r = 0; r < frame.rows(); ++r) {
      double t = frame.timestamps[r];
      if (t >= range.t_start && t <= range.t_end) {
        frame.labels[r] = label_fault;
        if (!range.channel.empty()) frame.fault_channel[r] = range.channel;
      }
    }
  }
}

// ---- scaler ---------------------------------------------------------------------

std::int64_t Scaler::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end())
    throw std::invalid_argument("scaler has no column '" + name + "'");
  return static_cast<std::int64_t>(it - columns.begin());
}

double Scaler::transform_value(std::int64_t col, double v) const {
  double lo = mins[col], hi = maxs[col];
  if (constant[col]) return v - lo;
  return (v - lo) / (hi - lo);
}

void Scaler::apply(Frame& frame) const {
  if (frame.columns != columns)
    throw std::invalid_argument("scaler fitted on different columns than frame '" +
                                frame.source + "'");
  std::int64_t n_cols = frame.cols();
  for (std::int64_t r = 0; r < frame.rows(); ++r)
    for (std::int64_t c = 0; c < n_cols; ++c)
      frame.values[r * n_cols + c] = transform_value(c, frame.at(r, c));
}

Scaler fit_scaler(const std::vector<Frame>& frames) {
  if (frames.empty()) throw std::invalid_argument("fit_scaler: no frames");
  Scaler s;
  s.columns = frames[0].columns;
  std::int64_t n_cols = static_cast<std::int64_t>(s.columns.size());
  s.mins.assign(n_cols, std::numeric_limits<double>::infinity());
  s.maxs.assign(n_cols, -std::numeric_limits<double>::infinity());
  std::int64_t nominal_rows = 0;
  for (const auto& f : frames) {
    if (f.columns != s.columns)
      throw std::invalid_argument("fit_scaler: frame '" + f.source +
                                  "' has mismatched columns");
    for (std::int64_t r = 0; r < f.rows(); ++r) {
      if (f.labels[r] != label_nominal) continue;
      ++nominal_rows;
      for (std::int64_t c = 0; c < n_cols; ++c) {
        double v = f.at(r, c);
        s.mins[c] = std::min(s.mins[c], v);
        s.maxs[c] = std::max(s.maxs[c], v);
      }
    }
  }
  if (nominal_rows == 0) throw std::invalid_argument("fit_scaler: no nominal rows");
  s.constant.resize(n_cols);
  for (std::int64_t c = 0; c < n_cols; ++c) s.constant[c] = !(s.maxs[c] > s.mins[c]);
  return s;
}

// ---- windows --------------------------------------------------------------------

void WindowBatch::append(const WindowBatch& other) {
  if (count == 0 && features == 0) {
    *this = other;
    return;
  }
  if (other.features != features || other.past_length != past_length)
    throw std::invalid_argument("cannot append windows with different geometry");
  flat.insert(flat.end(), other.flat.begin(), other.flat.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  fault_channels.insert(fault_channels.end(), other.fault_channels.begin(),
                        other.fault_channels.end());
  count += other.count;
}

WindowBatch WindowBatch::filter_nominal() const {
  WindowBatch out;
  out.features = features;
  out.past_length = past_length;
  out.columns = columns;
  for (std::int64_t w = 0; w < count; ++w) {
    if (labels[w] != label_nominal) continue;
    out.flat.insert(out.flat.end(), flat.begin() + w * width(),
                    flat.begin() + (w + 1) * width());
    out.labels.push_back(label_nominal);
    out.fault_channels.emplace_back();
    ++out.count;
  }
  return out;
}

bool WindowBatch::has_both_classes() const {
  bool nom = false, fault = false;
  for (int l : labels) (l == label_fault ? fault : nom) = true;
  return nom && fault;
}

WindowBatch make_windows(const Frame& frame, std::int64_t past_length, std::int64_t stride) {
  if (past_length < 1) throw std::invalid_argument("past_length must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (frame.rows() < past_length)
    throw std::invalid_argument(frame.source + ": " + std::to_string(frame.rows()) +
                                " rows < past_length " + std::to_string(past_length));
  WindowBatch batch;
  batch.features = frame.cols();
  batch.past_length = past_length;
  batch.columns = frame.columns;
  std::int64_t n_cols = frame.cols();
  for (std::int64_t start = 0; start + past_length <= frame.rows(); start += stride) {
    int label = label_nominal;
    std::string channel;
    for (std::int64_t t = 0; t < past_length; ++t) {
      std::int64_t r = start + t;
      for (std::int64_t c = 0; c < n_cols; ++c) batch.flat.push_back(frame.at(r, c));
      if (frame.labels[r] == label_fault) {
        label = label_fault;
        if (channel.empty()) channel = frame.fault_channel[r];
      }
    }
    batch.labels.push_back(label);
    batch.fault_channels.push_back(std::move(channel));
    ++batch.count;
  }
  return batch;
}

WindowBatch windows_of(const std::vector<Frame>& frames, std::int64_t past_length) {
  WindowBatch all;
  for (const auto& f : frames) all.append(make_windows(f, past_length));
  return all;
}

// ---- splits ---------------------------------------------------------------------

std::vector<Split> make_splits(const std::vector<Frame>& frames, const SplitSpec& spec,
                               int count) {
  if (frames.size() < 2)
    throw std::invalid_argument("make_splits needs at least 2 files, got " +
                                std::to_string(frames.size()));
  if (count < 1) throw std::invalid_argument("split count must be >= 1");

  std::vector<Split> splits;
  for (int k = 0; k < count; ++k) {
    // A shuffle can land every fault file outside the test set; retry with
    // derived seeds (deterministically) until the test set carries faults.
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(k) +
                           static_cast<std::uint64_t>(attempt) * 0x9e3779b9ULL;
      std::vector<std::size_t> order(frames.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      RandomStream rng(seed);
      rng.shuffle(order);

      auto n_files = static_cast<std::int64_t>(frames.size());
      auto n_train_pool = static_cast<std::int64_t>(
          std::llround(spec.train_fraction * static_cast<double>(n_files)));
      n_train_pool = std::clamp<std::int64_t>(n_train_pool, 1, n_files - 1);
      auto n_val = static_cast<std::int64_t>(
          std::llround(spec.validation_fraction * static_cast<double>(n_train_pool)));
      n_val = std::clamp<std::int64_t>(n_val, 0, n_train_pool - 1);

      Split split;
      split.seed = seed;
      for (std::int64_t i = 0; i < n_train_pool - n_val; ++i)
        split.train_files.push_back(frames[order[i]].source);
      for (std::int64_t i = n_train_pool - n_val; i < n_train_pool; ++i)
        split.validation_files.push_back(frames[order[i]].source);
      for (std::int64_t i = n_train_pool; i < n_files; ++i)
        split.test_files.push_back(frames[order[i]].source);

      bool test_has_fault = false;
      for (const auto& name : split.test_files) {
        for (const auto& f : frames)
          if (f.source == name && f.has_fault_rows()) test_has_fault = true;
      }
      if (test_has_fault) {
        splits.push_back(std::move(split));
        accepted = true;
      }
    }
    if (!accepted)
      throw std::runtime_error("split " + std::to_string(k) +
                               " has no fault rows in its test files; metrics undefined");
  }
  return splits;
}

Split load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split manifest: " + path);
  Split split;
  std::string line, section;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (section.empty() && eq != std::string::npos) {
      std::string key = trim(line.substr(0, eq));
      if (key == "seed") split.seed = std::stoull(trim(line.substr(eq + 1)));
      continue;
    }
    if (section == "train")
      split.train_files.push_back(line);
    else if (section == "validation")
      split.validation_files.push_back(line);
    else if (section == "test")
      split.test_files.push_back(line);
    else
      throw std::runtime_error(path + ": unknown manifest section '" + section + "'");
  }
  return split;
}

void save_split(const std::string& path, const Split& split) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split manifest: " + path);
  out << "seed = " << split.seed << "\n\n[train]\n";
  for (const auto& f : split.train_files) out << f << "\n";
  out << "\n[validation]\n";
  for (const auto& f : split.validation_files) out << f << "\n";
  out << "\n[test]\n";
  for (const auto& f : split.test_files) out << f << "\n";
}

std::vector<Frame> select_frames(const std::vector<Frame>& frames,
                                 const std::vector<std::string>& names) {
  std::vector<Frame> out;
  for (const auto& name : names) {
    auto it = std::find_if(frames.begin(), frames.end(),
                           [&](const Frame& f) { return f.source == name; });
    if (it == frames.end())
      throw std::runtime_error("split references unknown file '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

std::vector<Frame> load_directory(const std::string& dir, const std::string& labels_path) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error("no .csv files under " + dir);

  std::vector<LabelRange> ranges;
  if (!labels_path.empty()) ranges = load_labels(labels_path);

  std::vector<Frame> frames;
  for (const auto& p : paths) {
    Frame f = load_csv(p);
    clean(f);
    apply_labels(f, ranges);
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace epsfd::data

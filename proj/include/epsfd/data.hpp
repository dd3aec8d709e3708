#pragma once

// CSV ingestion, cleaning, min-max scaling, windowing and semi-supervised
// split construction. Input files carry a timestamp first column and sensor
// channels after it; fault annotations come from a sidecar labels file
// mapping (file, time range) -> optional faulty channel.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace epsfd::data {

constexpr int label_nominal = 0;
constexpr int label_fault = 1;

struct Frame {
  std::string source;                      // file name (no directory)
  std::vector<std::string> columns;        // sensor channels
  std::vector<double> timestamps;          // per row, monotone within a file
  std::vector<double> values;              // [rows, columns] row-major
  std::vector<int> labels;                 // label_nominal / label_fault
  std::vector<std::string> fault_channel;  // per row, "" when nominal/unknown
  std::int64_t dropped_rows = 0;           // unparseable rows discarded on load

  std::int64_t rows() const { return static_cast<std::int64_t>(timestamps.size()); }
  std::int64_t cols() const { return static_cast<std::int64_t>(columns.size()); }
  double at(std::int64_t r, std::int64_t c) const { return values[r * cols() + c]; }
  bool has_fault_rows() const;
};

// Loads one CSV. Cells that fail to parse become gaps (NaN); rows with the
// wrong field count are dropped and counted. Throws on missing file, empty
// file, header-only file, or no numeric columns.
Frame load_csv(const std::string& path);

// drop all-non-numeric columns, forward-fill single-sample gaps, drop rows
// belonging to longer gap runs. Returns the number of rows dropped here.
std::int64_t clean(Frame& frame);

struct LabelRange {
  std::string file;
  double t_start = 0.0;
  double t_end = 0.0;
  std::string channel;  // optional
};

std::vector<LabelRange> load_labels(const std::string& path);
void save_labels(const std::string& path, const std::vector<LabelRange>& ranges);
void apply_labels(Frame& frame, const std::vector<LabelRange>& ranges);

// ---- scaling -------------------------------------------------------------------

struct Scaler {
  std::vector<std::string> columns;
  std::vector<double> mins;
  std::vector<double> maxs;
  std::vector<bool> constant;  // flagged when a column had < 2 distinct values

  // (x - min) / (max - min); constant columns use x - min so fitted data
  // maps to 0.0 while out-of-sample deviations remain visible.
  double transform_value(std::int64_t col, double v) const;
  void apply(Frame& frame) const;
  std::int64_t column_index(const std::string& name) const;
};

// Fitted on nominal rows only, across all given frames.
Scaler fit_scaler(const std::vector<Frame>& frames);

// ---- windowing -----------------------------------------------------------------

struct WindowBatch {
  std::int64_t features = 0;
  std::int64_t past_length = 0;
  std::vector<std::string> columns;
  std::vector<double> flat;                // [count, features * past_length]
  std::vector<int> labels;                 // any fault row => fault window
  std::vector<std::string> fault_channels; // per window, "" when nominal
  std::int64_t count = 0;

  std::int64_t width() const { return features * past_length; }
  double at(std::int64_t w, std::int64_t t, std::int64_t f) const {
    return flat[w * width() + t * features + f];
  }
  void append(const WindowBatch& other);
  WindowBatch filter_nominal() const;
  bool has_both_classes() const;
};

// Stride-1 windows over one frame; never crosses file boundaries.
WindowBatch make_windows(const Frame& frame, std::int64_t past_length,
                         std::int64_t stride = 1);

WindowBatch windows_of(const std::vector<Frame>& frames, std::int64_t past_length);

// ---- splits --------------------------------------------------------------------

struct SplitSpec {
  std::uint64_t seed = 0;
  double train_fraction = 0.70;
  double validation_fraction = 0.30;  // of the train pool, faults kept
};

struct Split {
  std::uint64_t seed = 0;
  std::vector<std::string> train_files;       // windows filtered to nominal
  std::vector<std::string> validation_files;  // faults kept
  std::vector<std::string> test_files;        // both classes required
};

// File-granularity splits (prevents temporal leakage between adjacent
// windows). Deterministic in spec.seed; split k uses seed + k. Throws when
// a split's test files carry no fault rows.
std::vector<Split> make_splits(const std::vector<Frame>& frames, const SplitSpec& spec,
                               int count = 10);

Split load_split(const std::string& path);
void save_split(const std::string& path, const Split& split);

// Frames matching the given file names, in split order.
std::vector<Frame> select_frames(const std::vector<Frame>& frames,
                                 const std::vector<std::string>& names);

// Loads, cleans and labels every *.csv under dir (sorted by name).
std::vector<Frame> load_directory(const std::string& dir, const std::string& labels_path);

}  // namespace epsfd::data

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "epsfd/data.hpp"
#include "test_support.hpp"

using namespace epsfd;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

data::Frame frame_of(const std::string& name, const std::vector<std::string>& cols,
                     const std::vector<double>& ts,
                     const std::vector<double>& values,
                     const std::vector<int>& labels = {}) {
  data::Frame f;
  f.source = name;
  f.columns = cols;
  f.timestamps = ts;
  f.values = values;
  f.labels = labels.empty() ? std::vector<int>(ts.size(), data::label_nominal) : labels;
  f.fault_channel.assign(ts.size(), "");
  return f;
}

}  // namespace

TEST_CASE("load_csv: well-formed, corrupt row, header-only") {
  testsup::TempDir tmp("csv");
  write_file(tmp.file("ok.csv"), "time,A,B\n0,1,2\n1,3,4\n2,5,6\n");
  data::Frame f = data::load_csv(tmp.file("ok.csv"));
  CHECK(f.rows() == 3);
  CHECK(f.cols() == 2);
  CHECK(f.at(1, 1) == 4.0);
  CHECK(f.dropped_rows == 0);

  write_file(tmp.file("corrupt.csv"), "time,A,B\n0,1,2\nnot,a,row,at,all\n2,5,6\n");
  data::Frame c = data::load_csv(tmp.file("corrupt.csv"));
  CHECK(c.rows() == 2);
  CHECK(c.dropped_rows == 1);

  write_file(tmp.file("header_only.csv"), "time,A,B\n");
  CHECK_THROWS_WITH_AS(data::load_csv(tmp.file("header_only.csv")),
                       doctest::Contains("no data rows"), std::runtime_error);

  CHECK_THROWS_AS(data::load_csv(tmp.file("missing.csv")), std::runtime_error);

  write_file(tmp.file("empty.csv"), "");
  CHECK_THROWS_AS(data::load_csv(tmp.file("empty.csv")), std::runtime_error);

  write_file(tmp.file("no_cols.csv"), "time\n0\n");
  CHECK_THROWS_AS(data::load_csv(tmp.file("no_cols.csv")), std::runtime_error);
}

TEST_CASE("clean: forward-fill single gaps, drop longer runs, drop dead columns") {
  testsup::TempDir tmp("clean");
  write_file(tmp.file("gaps.csv"),
             "time,A,B,TXT\n"
             "0,1.0,10,x\n"
             "1,,11,x\n"       // single gap in A -> forward-filled with 1.0
             "2,3.0,,x\n"      // start of a 2-row gap in B
             "3,4.0,,x\n"      // second gap row -> both dropped
             "4,5.0,14,x\n");
  data::Frame f = data::load_csv(tmp.file("gaps.csv"));
  data::clean(f);
  CHECK(f.columns == std::vector<std::string>{"A", "B"});  // TXT never parses
  CHECK(f.rows() == 3);
  CHECK(f.at(1, 0) == 1.0);  // forward-filled
  CHECK(f.timestamps == std::vector<double>{0, 1, 4});
}

TEST_CASE("scaler: fit on nominal rows, apply without clipping") {
  auto f = frame_of("a.csv", {"A", "B"}, {0, 1, 2},
                    {0, 7, 5, 7, 10, 7});
  data::Scaler s = data::fit_scaler({f});
  CHECK(s.mins == std::vector<double>{0, 7});
  CHECK(s.maxs == std::vector<double>{10, 7});
  CHECK(s.constant == std::vector<bool>{false, true});

  // column [0,5,10] -> [0,0.5,1]
  data::Frame g = f;
  s.apply(g);
  CHECK(g.at(0, 0) == 0.0);
  CHECK(g.at(1, 0) == 0.5);
  CHECK(g.at(2, 0) == 1.0);
  // constant column maps to 0.0
  CHECK(g.at(0, 1) == 0.0);
  CHECK(g.at(2, 1) == 0.0);

  // out-of-range test value is preserved, not clipped
  CHECK(s.transform_value(0, 12.0) == doctest::Approx(1.2));

  // fault rows are excluded from the fit
  auto h = frame_of("b.csv", {"A", "B"}, {0, 1, 2}, {0, 7, 5, 7, 100, 7},
                    {data::label_nominal, data::label_nominal, data::label_fault});
  data::Scaler s2 = data::fit_scaler({h});
  CHECK(s2.maxs[0] == 5.0);

  // re-fitting on the same rows is idempotent
  data::Scaler s3 = data::fit_scaler({f});
  CHECK(s3.mins == s.mins);
  CHECK(s3.maxs == s.maxs);
}

TEST_CASE("windows: count, any-fault labels, feature-major flattening") {
  auto f = frame_of("w.csv", {"A", "B"}, {0, 1, 2, 3, 4},
                    {1, 10, 2, 20, 3, 30, 4, 40, 5, 50},
                    {data::label_nominal, data::label_nominal, data::label_fault,
                     data::label_nominal, data::label_nominal});
  f.fault_channel[2] = "A";
  data::WindowBatch w = data::make_windows(f, 3);
  CHECK(w.count == 3);  // 5 rows, past 3
  CHECK(w.width() == 6);
  // labels [n,n,f,n,n] with past 3 -> [f,f,f]
  CHECK(w.labels == std::vector<int>{1, 1, 1});
  CHECK(w.fault_channels[0] == "A");
  // flattening: index = t * features + f; window 1 covers rows 1..3
  CHECK(w.at(1, 0, 0) == 2.0);
  CHECK(w.at(1, 0, 1) == 20.0);
  CHECK(w.at(1, 2, 1) == 40.0);

  CHECK_THROWS_AS(data::make_windows(f, 6), std::invalid_argument);

  data::WindowBatch nom = w.filter_nominal();
  CHECK(nom.count == 0);
}

TEST_CASE("splits: determinism, nominal-only training, file granularity") {
  std::vector<data::Frame> frames;
  for (int i = 0; i < 10; ++i) {
    auto f = frame_of("f" + std::to_string(i) + ".csv", {"A"}, {0, 1, 2}, {1, 2, 3});
    if (i % 2 == 0) {
      f.labels[1] = data::label_fault;  // half the files carry a fault
      f.fault_channel[1] = "A";
    }
    frames.push_back(std::move(f));
  }

  data::SplitSpec spec;
  spec.seed = 42;
  auto splits_a = data::make_splits(frames, spec, 10);
  auto splits_b = data::make_splits(frames, spec, 10);
  REQUIRE(splits_a.size() == 10);
  for (std::size_t k = 0; k < splits_a.size(); ++k) {
    CHECK(splits_a[k].train_files == splits_b[k].train_files);
    CHECK(splits_a[k].validation_files == splits_b[k].validation_files);
    CHECK(splits_a[k].test_files == splits_b[k].test_files);
  }

  // 10 files: 7 to the train pool (of which 2 validation), 3 test
  CHECK(splits_a[0].train_files.size() + splits_a[0].validation_files.size() == 7);
  CHECK(splits_a[0].test_files.size() == 3);

  // no file appears twice
  for (const auto& split : splits_a) {
    std::vector<std::string> all = split.train_files;
    all.insert(all.end(), split.validation_files.begin(), split.validation_files.end());
    all.insert(all.end(), split.test_files.begin(), split.test_files.end());
    std::sort(all.begin(), all.end());
    CHECK(std::unique(all.begin(), all.end()) == all.end());
    CHECK(all.size() == frames.size());
  }
}

TEST_CASE("splits error when the test set has no faults") {
  std::vector<data::Frame> frames;
  for (int i = 0; i < 4; ++i)
    frames.push_back(frame_of("f" + std::to_string(i) + ".csv", {"A"}, {0, 1}, {1, 2}));
  data::SplitSpec spec;
  CHECK_THROWS_WITH_AS(data::make_splits(frames, spec, 1),
                       doctest::Contains("no fault rows"), std::runtime_error);
}

TEST_CASE("split manifest round trip") {
  testsup::TempDir tmp("split");
  data::Split split;
  split.seed = 7;
  split.train_files = {"a.csv", "b.csv"};
  split.validation_files = {"c.csv"};
  split.test_files = {"d.csv"};
  data::save_split(tmp.file("s.manifest"), split);
  data::Split loaded = data::load_split(tmp.file("s.manifest"));
  CHECK(loaded.seed == 7);
  CHECK(loaded.train_files == split.train_files);
  CHECK(loaded.validation_files == split.validation_files);
  CHECK(loaded.test_files == split.test_files);
}

TEST_CASE("labels sidecar applies ranges to matching file and time span") {
  testsup::TempDir tmp("labels");
  write_file(tmp.file("labels.txt"),
             "# comment\n"
             "x.csv 1.0 2.0 A\n"
             "other.csv 0 99\n");
  auto ranges = data::load_labels(tmp.file("labels.txt"));
  REQUIRE(ranges.size() == 2);

  auto f = frame_of("x.csv", {"A", "B"}, {0, 1, 2, 3}, {1, 1, 2, 2, 3, 3, 4, 4});
  data::apply_labels(f, ranges);
  CHECK(f.labels == std::vector<int>{0, 1, 1, 0});
  CHECK(f.fault_channel[1] == "A");

  // round trip
  data::save_labels(tmp.file("out.txt"), ranges);
  auto again = data::load_labels(tmp.file("out.txt"));
  CHECK(again.size() == 2);
  CHECK(again[0].file == "x.csv");
  CHECK(again[0].channel == "A");
}

TEST_CASE("windows never cross file boundaries") {
  auto a = frame_of("a.csv", {"A"}, {0, 1, 2}, {1, 2, 3});
  auto b = frame_of("b.csv", {"A"}, {0, 1, 2}, {10, 20, 30});
  data::WindowBatch w = data::windows_of({a, b}, 2);
  CHECK(w.count == 4);  // 2 per file; never a [3, 10] window
  for (std::int64_t i = 0; i < w.count; ++i) {
    double first = w.at(i, 0, 0), second = w.at(i, 1, 0);
    CHECK_FALSE((first == 3.0 && second == 10.0));
  }
}

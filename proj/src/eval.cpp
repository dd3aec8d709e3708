#include "epsfd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "epsfd/flow.hpp"

namespace epsfd::eval {

void ScoreSet::validate() const {
  if (scores.size() != labels.size())
    throw std::invalid_argument("score/label length mismatch: " +
                                std::to_string(scores.size()) + " vs " +
                                std::to_string(labels.size()));
  if (scores.empty()) throw std::invalid_argument("empty score set");
}

bool ScoreSet::has_both_classes() const {
  bool nom = false, fault = false;
  for (int l : labels) (l == data::label_fault ? fault : nom) = true;
  return nom && fault;
}

namespace {

void require_both_classes(const ScoreSet& set, const char* what) {
  set.validate();
  if (!set.has_both_classes())
    throw std::invalid_argument(std::string(what) +
                                " needs both classes present in the score set");
}

}  // namespace

// ---- scoring ----------------------------------------------------------------

ScoreSet score(const model::Bundle& bundle, const data::WindowBatch& windows) {
  if (windows.width() != bundle.input_width())
    throw std::invalid_argument("window width " + std::to_string(windows.width()) +
                                " does not match model input width " +
                                std::to_string(bundle.input_width()));
  ScoreSet out;
  out.labels = windows.labels;
  out.scores.resize(static_cast<std::size_t>(windows.count));

  // Scored in fixed-size chunks without a tape.
  constexpr std::int64_t chunk = 512;
  std::int64_t width = windows.width();
  for (std::int64_t start = 0; start < windows.count; start += chunk) {
    std::int64_t n = std::min(chunk, windows.count - start);
    std::vector<double> vals(windows.flat.begin() + start * width,
                             windows.flat.begin() + (start + n) * width);
    ad::Tensor x = ad::Tensor::from_values({n, width}, std::move(vals));
    switch (bundle.kind) {
      case model::Kind::realnvp: {
        ad::Tensor lp = bundle.flow->log_prob(x);
        for (std::int64_t i = 0; i < n; ++i)
          out.scores[static_cast<std::size_t>(start + i)] = -lp.values()[i];
        break;
      }
      case model::Kind::gru: {
        ad::Tensor rec = bundle.gru->forward(x);
        for (std::int64_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < width; ++j)
            acc += std::fabs(rec.values()[i * width + j] - x.values()[i * width + j]);
          out.scores[static_cast<std::size_t>(start + i)] = acc / static_cast<double>(width);
        }
        break;
      }
      case model::Kind::autoencoder: {
        ad::Tensor rec = bundle.autoencoder->forward(x);
        for (std::int64_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < width; ++j) {
            double d = rec.values()[i * width + j] - x.values()[i * width + j];
            acc += d * d;
          }
          out.scores[static_cast<std::size_t>(start + i)] = acc / static_cast<double>(width);
        }
        break;
      }
    }
  }
  return out;
}

// ---- metrics ----------------------------------------------------------------

double auroc(const ScoreSet& set) {
  require_both_classes(set, "auroc");
  // Sort scores ascending; walk tie groups accumulating, per positive, the
  // count of negatives strictly below plus half the tied ones. All partial
  // sums are multiples of 0.5, so accumulation is exact.
  std::size_t n = set.scores.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] < set.scores[b];
  });
  double wins = 0.0;
  std::int64_t neg_below = 0, pos_total = 0, neg_total = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::int64_t tie_pos = 0, tie_neg = 0;
    while (j < n && set.scores[idx[j]] == set.scores[idx[i]]) {
      (set.labels[idx[j]] == data::label_fault ? tie_pos : tie_neg)++;
      ++j;
    }
    wins += static_cast<double>(tie_pos) *
            (static_cast<double>(neg_below) + 0.5 * static_cast<double>(tie_neg));
    neg_below += tie_neg;
    pos_total += tie_pos;
    neg_total += tie_neg;
    i = j;
  }
  return wins / (static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

std::pair<double, double> fpr_at_tpr(const ScoreSet& set, double tpr_target) {
  require_both_classes(set, "fpr_at_tpr");
  std::int64_t pos = 0, neg = 0;
  for (int l : set.labels) (l == data::label_fault ? pos : neg)++;

  std::vector<double> thresholds = set.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // Walking down the sorted thresholds, TPR is non-decreasing; stop at the
  // first (largest) threshold meeting the target.
  for (double t : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
      if (set.scores[i] >= t) {
        if (set.labels[i] == data::label_fault) ++tp;
        else ++fp;
      }
    }
    double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    if (tpr >= tpr_target)
      return {static_cast<double>(fp) / static_cast<double>(neg), t};
  }
  // Unreachable for tpr_target <= 1: the smallest threshold gives TPR = 1.
  double t = thresholds.back();
  return {1.0, t};
}

double f1_at_threshold(const ScoreSet& set, double threshold) {
  set.validate();
  if (!std::isfinite(threshold))
    throw std::invalid_argument("f1_at_threshold: threshold must be finite");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    bool pred = set.scores[i] >= threshold;
    bool is_fault = set.labels[i] == data::label_fault;
    if (pred && is_fault) ++tp;
    else if (pred && !is_fault) ++fp;
    else if (!pred && is_fault) ++fn;
  }
  double denom = static_cast<double>(2 * tp + fp + fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(tp) / denom;
}

EvalReport evaluate_scores(const ScoreSet& set, double tpr_target) {
  require_both_classes(set, "evaluate");
  EvalReport report;
  report.tpr_target = tpr_target;
  report.auroc = auroc(set);
  auto [fpr, threshold] = fpr_at_tpr(set, tpr_target);
  report.fpr95 = fpr;
  report.threshold = threshold;
  report.f1 = f1_at_threshold(set, threshold);
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    bool pred = set.scores[i] >= threshold;
    bool is_fault = set.labels[i] == data::label_fault;
    if (is_fault) {
      ++report.n_fault;
      pred ? ++report.tp : ++report.fn;
    } else {
      ++report.n_nominal;
      pred ? ++report.fp : ++report.tn;
    }
  }
  return report;
}

EvalReport evaluate(const model::Bundle& bundle, const data::WindowBatch& test_windows,
                    double tpr_target) {
  return evaluate_scores(score(bundle, test_windows), tpr_target);
}

std::vector<std::pair<double, double>> roc_points(const ScoreSet& set) {
  require_both_classes(set, "roc_points");
  std::int64_t pos = 0, neg = 0;
  for (int l : set.labels) (l == data::label_fault ? pos : neg)++;
  std::vector<double> thresholds = set.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 0.0);
  for (double t : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
      if (set.scores[i] >= t) {
        if (set.labels[i] == data::label_fault) ++tp;
        else ++fp;
      }
    }
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos));
  }
  return points;
}

void save_roc_csv(const std::string& path, const ScoreSet& set) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ROC CSV: " + path);
  out.precision(17);
  out << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc_points(set)) out << fpr << "," << tpr << "\n";
}

// ---- report IO -----------------------------------------------------------------

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os.precision(6);
  os << "metric      value\n"
     << "----------  ----------\n"
     << "auroc       " << auroc << "\n"
     << "fpr" << static_cast<int>(tpr_target * 100) << "       " << fpr95 << "\n"
     << "f1          " << f1 << "\n"
     << "threshold   " << threshold << "\n"
     << "nominal     " << n_nominal << "\n"
     << "fault       " << n_fault << "\n"
     << "confusion   tp=" << tp << " fp=" << fp << " tn=" << tn << " fn=" << fn << "\n";
  return os.str();
}

void EvalReport::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write eval report: " + path);
  out.precision(17);
  out << "epsfd-eval-report 1\n"
      << "auroc = " << auroc << "\n"
      << "fpr_at_tpr = " << fpr95 << "\n"
      << "f1 = " << f1 << "\n"
      << "threshold = " << threshold << "\n"
      << "tpr_target = " << tpr_target << "\n"
      << "tp = " << tp << "\n"
      << "fp = " << fp << "\n"
      << "tn = " << tn << "\n"
      << "fn = " << fn << "\n"
      << "n_nominal = " << n_nominal << "\n"
      << "n_fault = " << n_fault << "\n";
}

EvalReport EvalReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval report: " + path);
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "epsfd-eval-report" || version != 1)
    throw std::runtime_error(path + ": not an epsfd eval report");
  EvalReport r;
  std::string key, eq;
  while (in >> key >> eq) {
    if (key == "auroc") in >> r.auroc;
    else if (key == "fpr_at_tpr") in >> r.fpr95;
    else if (key == "f1") in >> r.f1;
    else if (key == "threshold") in >> r.threshold;
    else if (key == "tpr_target") in >> r.tpr_target;
    else if (key == "tp") in >> r.tp;
    else if (key == "fp") in >> r.fp;
    else if (key == "tn") in >> r.tn;
    else if (key == "fn") in >> r.fn;
    else if (key == "n_nominal") in >> r.n_nominal;
    else if (key == "n_fault") in >> r.n_fault;
    else throw std::runtime_error(path + ": unknown report field '" + key + "'");
  }
  return r;
}

}  // namespace epsfd::eval

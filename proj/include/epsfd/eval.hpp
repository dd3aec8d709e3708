#pragma once

// Anomaly scoring and the metric suite: AUROC (Mann-Whitney, ties at 1/2),
// FPR at a target TPR, and F1 at that threshold. Fault is the positive
// class throughout; anomaly scores are oriented so higher = more anomalous,
// and thresholds compare with >=.

#include <cstdint>
#include <string>
#include <vector>

#include "epsfd/checkpoint.hpp"
#include "epsfd/data.hpp"

namespace epsfd::eval {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;  // data::label_nominal / data::label_fault

  void validate() const;
  bool has_both_classes() const;
};

struct EvalReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  double tpr_target = 0.95;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t n_nominal = 0, n_fault = 0;

  std::string to_table() const;
  void save(const std::string& path) const;
  static EvalReport load(const std::string& path);
};

// Per-window anomaly scores: gru -> MAE, autoencoder -> MSE, realnvp ->
// negated log-likelihood. Windows must already be in scaled units.
ScoreSet score(const model::Bundle& bundle, const data::WindowBatch& windows);

// Probability a random fault outranks a random nominal; ties count 1/2.
double auroc(const ScoreSet& set);

// Largest threshold t with TPR(score >= t) >= tpr_target, and the FPR there.
std::pair<double, double> fpr_at_tpr(const ScoreSet& set, double tpr_target = 0.95);

double f1_at_threshold(const ScoreSet& set, double threshold);

EvalReport evaluate(const model::Bundle& bundle, const data::WindowBatch& test_windows,
                    double tpr_target = 0.95);
EvalReport evaluate_scores(const ScoreSet& set, double tpr_target = 0.95);

// ROC curve points (fpr, tpr) over all distinct thresholds, for plotting.
std::vector<std::pair<double, double>> roc_points(const ScoreSet& set);
void save_roc_csv(const std::string& path, const ScoreSet& set);

}  // namespace epsfd::eval

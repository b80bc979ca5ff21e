#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factum/features.hpp"

namespace factum::classify {

using features::FeatureMatrix;

// Report-level fold assignment. Every citation of a report lands in the same
// fold.
struct FoldPlan {
  std::size_t n_folds = 0;
  std::vector<std::vector<std::string>> fold_reports;
  std::vector<std::size_t> row_fold;  // fold of each citation row
  std::vector<std::size_t> fold_positives;
  std::vector<std::size_t> fold_citations;

  std::vector<std::size_t> train_rows(std::size_t fold) const;
  std::vector<std::size_t> test_rows(std::size_t fold) const;
};

// Greedy stratification: reports are shuffled with `seed`, stably sorted by
// hallucinated count (descending), and each goes to the fold with the fewest
// hallucinated citations so far (ties: fewest citations, then lowest index).
FoldPlan make_folds(std::span<const std::string> groups, std::span<const int> labels, std::size_t n_folds = 10,
                    std::uint64_t seed = 0);

// Undersamples the majority class of `rows` (labels parallel to rows) to the
// minority count. Returns the kept rows in ascending order.
std::vector<std::size_t> balance_train(std::span<const std::size_t> rows, std::span<const int> labels,
                                       std::uint64_t seed);

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows);

struct LogRegModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;  // on standardized features
  double bias = 0.0;
  std::vector<double> means;
  std::vector<double> stds;  // 1 for constant features, whose weight is pinned at 0
  std::vector<bool> pinned;
  double lambda = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  double lambda = 1e-2;
  double tolerance = 1e-6;
  int max_iterations = 200;
  std::uint64_t seed = 0;
};

struct Objective {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

// Mean negative log-likelihood plus (lambda / 2) |w|^2 on an already
// standardized row-major design matrix. The bias is not regularized.
Objective logistic_objective(std::span<const double> x, std::size_t n_features, std::span<const int> y,
                             std::span<const double> w, double b, double lambda);

// Newton iterations with Armijo backtracking on the standardized training
// matrix. Stops at |gradient| <= tolerance or max_iterations.
LogRegModel train_logreg(const FeatureMatrix& train, const TrainOptions& options = {});

// Probability of the hallucinated class per row. Column names must match the
// model's, in order.
std::vector<double> predict(const LogRegModel& model, const FeatureMatrix& m);

struct Metrics {
  std::optional<double> auc;  // absent when only one class is present
  double pcc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Hallucinated (label 1) is the positive class; score >= threshold predicts it.
Metrics evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct FoldData {
  FeatureMatrix train;
  FeatureMatrix test;
  nlohmann::json detail;  // echoed into the fold report (e.g. selected features)
};

// Produces features for one fold given its train/test row ids. Anything it
// fits must come from the train rows only.
using FeatureBuilder =
    std::function<FoldData(std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows)>;

struct CvOptions {
  double lambda = 1e-2;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  // Classifier-free mode scores rows with score_sign * (single raw column)
  // and thresholds at the median of the training fold's scores.
  bool classifier_free = false;
  double score_sign = 1.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_rows = 0;
  std::size_t balanced_rows = 0;
  std::size_t test_rows = 0;
  std::size_t test_positives = 0;
  double threshold = 0.5;
  Metrics metrics;
  std::optional<LogRegModel> model;
  nlohmann::json detail;
  std::string note;
};

struct MeanMetrics {
  double auc = 0.0;
  std::size_t auc_folds = 0;
  double pcc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct CVReport {
  std::vector<FoldResult> folds;
  MeanMetrics mean;
};

// Fits and evaluates every fold. Asserts on every fold that no report appears
// on both sides of the split.
CVReport run_cv(const FeatureBuilder& builder, const FoldPlan& plan, std::span<const std::string> groups,
                const CvOptions& options);

// Fixed-feature convenience: the same matrix is split per fold without refitting.
CVReport run_cv(const FeatureMatrix& matrix, const FoldPlan& plan, const CvOptions& options);

nlohmann::json to_json(const LogRegModel& model);
nlohmann::json to_json(const Metrics& metrics);
nlohmann::json to_json(const CVReport& report);

}  // namespace factum::classify

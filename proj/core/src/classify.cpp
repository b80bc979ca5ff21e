#include "factum/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "factum/errors.hpp"
#include "factum/numeric.hpp"
#include "factum/parallel.hpp"
#include "factum/random.hpp"
#include "factum/stats.hpp"

namespace factum::classify {

std::vector<std::size_t> FoldPlan::train_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < row_fold.size(); ++i) {
    if (row_fold[i] != fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldPlan::test_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < row_fold.size(); ++i) {
    if (row_fold[i] == fold) rows.push_back(i);
  }
  return rows;
}

FoldPlan make_folds(std::span<const std::string> groups, std::span<const int> labels, std::size_t n_folds,
                    std::uint64_t seed) {
  if (groups.size() != labels.size()) throw DataError("make_folds: groups and labels differ in length");
  if (n_folds < 2) throw ConfigError("make_folds: need at least 2 folds");
  const auto positives = std::ranges::count(labels, 1);
  if (positives == 0 || positives == static_cast<long>(labels.size())) {
    throw DataError("make_folds: both classes must be present");
  }

  struct Report {
    std::string id;
    std::size_t positives = 0;
    std::size_t citations = 0;
  };
  std::vector<Report> reports;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, added] = index.emplace(groups[i], reports.size());
    if (added) reports.push_back({groups[i]});
    auto& r = reports[it->second];
    r.citations++;
    r.positives += labels[i] == 1 ? 1 : 0;
  }
  if (reports.size() < n_folds) {
    throw DataError("make_folds: " + std::to_string(reports.size()) + " reports cannot fill " +
                    std::to_string(n_folds) + " folds");
  }

  Rng rng(seed);
  shuffle(std::span(reports), rng);
  std::ranges::stable_sort(reports, [](const Report& a, const Report& b) { return a.positives > b.positives; });

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.fold_reports.resize(n_folds);
  plan.fold_positives.assign(n_folds, 0);
  plan.fold_citations.assign(n_folds, 0);
  std::map<std::string, std::size_t> report_fold;
  for (const auto& r : reports) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < n_folds; ++f) {
      if (std::pair(plan.fold_positives[f], plan.fold_citations[f]) <
          std::pair(plan.fold_positives[best], plan.fold_citations[best])) {
        best = f;
      }
    }
    plan.fold_reports[best].push_back(r.id);
    plan.fold_positives[best] += r.positives;
    plan.fold_citations[best] += r.citations;
    report_fold[r.id] = best;
  }
  plan.row_fold.reserve(groups.size());
  for (const auto& g : groups) plan.row_fold.push_back(report_fold.at(g));
  return plan;
}

std::vector<std::size_t> balance_train(std::span<const std::size_t> rows, std::span<const int> labels,
                                       std::uint64_t seed) {
  if (rows.size() != labels.size()) throw DataError("balance_train: rows and labels differ in length");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < rows.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(rows[i]);
  if (pos.empty() || neg.empty()) throw DataError("balance_train: a class is absent from the training rows");

  auto& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(seed);
  shuffle(std::span(majority), rng);
  majority.resize(keep);

  std::vector<std::size_t> out(pos);
  out.insert(out.end(), neg.begin(), neg.end());
  std::ranges::sort(out);
  return out;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.columns = m.columns;
  out.values.reserve(rows.size() * m.cols());
  for (const auto r : rows) {
    for (std::size_t c = 0; c < m.cols(); ++c) out.values.push_back(m.at(r, c));
    out.keys.push_back(m.keys[r]);
    out.groups.push_back(m.groups[r]);
    out.labels.push_back(m.labels[r]);
  }
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double gradient_norm(const Objective& o) {
  double s = o.grad_b * o.grad_b;
  for (const double g : o.grad_w) s += g * g;
  return std::sqrt(s);
}


// Solves H d = -g for the Newton direction over (w, b). Pinned features keep a
// zero step. A tiny ridge keeps H invertible on separable data.
std::vector<double> newton_direction(std::span<const double> x, std::size_t p, std::span<const double> w, double b,
                                     double lambda, const std::vector<bool>& pinned, const Objective& o) {
  const std::size_t n = x.size() / std::max<std::size_t>(p, 1);
  const std::size_t m = p + 1;
  std::vector<double> h(m * m, 0.0);
  std::vector<double> rhs(m);
  std::vector<double> row(m, 1.0);
  const std::size_t rows = p ? n : 0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double z = b + dot(x.subspan(i * p, p), w);
    const double s = sigmoid(z) * (1.0 - sigmoid(z));
    for (std::size_t j = 0; j < p; ++j) row[j] = x[i * p + j];
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t c = 0; c < m; ++c) h[a * m + c] += s * row[a] * row[c];
    }
  }
  const double inv_n = rows ? 1.0 / static_cast<double>(rows) : 1.0;
  for (auto& v : h) v *= inv_n;
  if (!p) h[0] = 0.25;
  for (std::size_t j = 0; j < p; ++j) {
    h[j * m + j] += lambda;
    rhs[j] = -o.grad_w[j];
    if (pinned[j]) {
      for (std::size_t c = 0; c < m; ++c) h[j * m + c] = h[c * m + j] = 0.0;
      h[j * m + j] = 1.0;
      rhs[j] = 0.0;
    }
  }
  rhs[p] = -o.grad_b;
  for (std::size_t a = 0; a < m; ++a) h[a * m + a] += 1e-10;

  // Gaussian elimination with partial pivoting; m is small.
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(h[r * m + col]) > std::abs(h[piv * m + col])) piv = r;
    }
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(h[col * m + c], h[piv * m + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = h[r * m + col] / h[col * m + col];
      for (std::size_t c = col; c < m; ++c) h[r * m + c] -= f * h[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> d(m);
  for (std::size_t r = m; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t c = r + 1; c < m; ++c) acc -= h[r * m + c] * d[c];
    d[r] = acc / h[r * m + r];
  }
  return d;
}
}  // namespace

Objective logistic_objective(std::span<const double> x, std::size_t n_features, std::span<const int> y,
                             std::span<const double> w, double b, double lambda) {
  const std::size_t n = y.size();
  Objective o;
  o.grad_w.assign(n_features, 0.0);
  std::vector<double> residual(n);
  const double nll = pairwise_sum(0, n, [&](std::size_t i) {
    const auto row = x.subspan(i * n_features, n_features);
    const double z = b + dot(row, w);
    residual[i] = sigmoid(z) - y[i];
    return softplus(z) - y[i] * z;
  });
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n_features; ++j) {
    o.grad_w[j] = pairwise_sum(0, n, [&](std::size_t i) { return residual[i] * x[i * n_features + j]; }) * inv_n +
                  lambda * w[j];
  }
  o.grad_b = pairwise_sum(residual) * inv_n;
  o.loss = nll * inv_n + 0.5 * lambda * dot(w, w);
  return o;
}

LogRegModel train_logreg(const FeatureMatrix& train, const TrainOptions& options) {
  const std::size_t n = train.rows();
  const std::size_t p = train.cols();
  const auto positives = std::ranges::count(train.labels, 1);
  if (positives < 2 || static_cast<long>(n) - positives < 2) {
    throw DataError("train_logreg: need at least 2 rows per class");
  }
  if (options.lambda < 0.0) throw ConfigError("train_logreg: lambda must be nonnegative");
  for (const double v : train.values) {
    if (!std::isfinite(v)) throw DataError("train_logreg: non-finite feature value");
  }

  LogRegModel model;
  model.feature_names = train.columns;
  model.lambda = options.lambda;
  model.seed = options.seed;
  model.means.resize(p);
  model.stds.resize(p);
  model.pinned.assign(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = train.column(j);
    model.means[j] = stats::mean(col);
    model.stds[j] = stats::population_std(col);
    if (!(model.stds[j] > 0.0)) {
      model.stds[j] = 1.0;
      model.pinned[j] = true;
    }
  }
  std::vector<double> x(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      x[i * p + j] = model.pinned[j] ? 0.0 : (train.at(i, j) - model.means[j]) / model.stds[j];
    }
  }

  std::vector<double> w(p, 0.0);
  double b = 0.0;
  Objective current = logistic_objective(x, p, train.labels, w, b, options.lambda);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    for (std::size_t j = 0; j < p; ++j) {
      if (model.pinned[j]) current.grad_w[j] = 0.0;
    }
    const double gnorm = gradient_norm(current);
    if (!std::isfinite(current.loss)) throw DataError("train_logreg: loss became non-finite");
    if (gnorm <= options.tolerance) break;

    const auto direction = newton_direction(x, p, w, b, options.lambda, model.pinned, current);
    double slope = direction.back() * current.grad_b;
    for (std::size_t j = 0; j < p; ++j) slope += direction[j] * current.grad_w[j];
    if (!(slope < 0.0)) break;

    // Armijo backtracking from the full Newton step.
    double step = 1.0;
    std::vector<double> w_next(p);
    double b_next = b;
    Objective next;
    for (;;) {
      for (std::size_t j = 0; j < p; ++j) w_next[j] = w[j] + step * direction[j];
      b_next = b + step * direction.back();
      next = logistic_objective(x, p, train.labels, w_next, b_next, options.lambda);
      if (next.loss <= current.loss + 1e-4 * step * slope || step < 1e-12) break;
      step *= 0.5;
    }
    if (!(next.loss <= current.loss)) break;
    w = std::move(w_next);
    b = b_next;
    current = std::move(next);
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (model.pinned[j]) current.grad_w[j] = 0.0;
  }
  model.weights = w;
  model.bias = b;
  model.iterations = iter;
  model.gradient_norm = gradient_norm(current);
  model.converged = model.gradient_norm <= options.tolerance;
  return model;
}

std::vector<double> predict(const LogRegModel& model, const FeatureMatrix& m) {
  if (m.columns != model.feature_names) {
    throw DataError("predict: feature columns do not match the model's (shape/name mismatch)");
  }
  std::vector<double> probs(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double z = model.bias;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!model.pinned[j]) z += model.weights[j] * (m.at(i, j) - model.means[j]) / model.stds[j];
    }
    probs[i] = sigmoid(z);
  }
  return probs;
}

Metrics evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw DataError("evaluate: scores and labels differ in length");
  Metrics m;
  const auto positives = std::ranges::count(labels, 1);
  if (positives > 0 && positives < static_cast<long>(labels.size())) m.auc = stats::roc_auc(scores, labels);
  const std::vector<double> y(labels.begin(), labels.end());
  m.pcc = stats::pearson(scores, y);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i] == 1) ++tp;
    if (predicted && labels[i] != 1) ++fp;
    if (!predicted && labels[i] == 1) ++fn;
  }
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

namespace {

double median(std::vector<double> v) {
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void assert_no_leakage(std::size_t fold, std::span<const std::string> groups,
                       std::span<const std::size_t> train, std::span<const std::size_t> test) {
  std::set<std::string> train_ids;
  for (const auto r : train) train_ids.insert(groups[r]);
  for (const auto r : test) {
    if (train_ids.contains(groups[r])) {
      throw std::logic_error("fold " + std::to_string(fold) + ": report '" + groups[r] +
                             "' is on both sides of the split");
    }
  }
}

FoldResult run_fold(const FeatureBuilder& builder, const FoldPlan& plan, std::size_t fold,
                    std::span<const std::string> groups, const CvOptions& options) {
  const auto train_rows = plan.train_rows(fold);
  const auto test_rows = plan.test_rows(fold);
  assert_no_leakage(fold, groups, train_rows, test_rows);

  FoldData data = builder(train_rows, test_rows);
  FoldResult result;
  result.fold = fold;
  result.train_rows = data.train.rows();
  result.test_rows = data.test.rows();
  result.test_positives = static_cast<std::size_t>(std::ranges::count(data.test.labels, 1));
  result.detail = std::move(data.detail);
  const std::uint64_t fold_seed = derive_seed(options.seed, fold);

  std::vector<std::size_t> local(data.train.rows());
  std::iota(local.begin(), local.end(), std::size_t{0});
  const auto balanced = balance_train(local, data.train.labels, fold_seed);
  result.balanced_rows = balanced.size();
  const FeatureMatrix train = select_rows(data.train, balanced);

  std::vector<double> scores;
  if (options.classifier_free) {
    if (data.test.cols() != 1) throw DataError("classifier-free evaluation needs exactly one column");
    std::vector<double> train_scores;
    for (std::size_t i = 0; i < train.rows(); ++i) train_scores.push_back(options.score_sign * train.at(i, 0));
    result.threshold = median(train_scores);
    for (std::size_t i = 0; i < data.test.rows(); ++i) scores.push_back(options.score_sign * data.test.at(i, 0));
  } else {
    TrainOptions train_options;
    train_options.lambda = options.lambda;
    train_options.seed = fold_seed;
    result.model = train_logreg(train, train_options);
    scores = predict(*result.model, data.test);
    result.threshold = options.threshold;
  }
  result.metrics = evaluate(scores, data.test.labels, result.threshold);
  if (!result.metrics.auc) result.note = "single-class test fold: AUC omitted";
  return result;
}

}  // namespace

CVReport run_cv(const FeatureBuilder& builder, const FoldPlan& plan, std::span<const std::string> groups,
                const CvOptions& options) {
  if (groups.size() != plan.row_fold.size()) throw DataError("run_cv: fold plan does not match the rows");
  CVReport report;
  report.folds.resize(plan.n_folds);
  parallel_for(plan.n_folds, [&](std::size_t f) { report.folds[f] = run_fold(builder, plan, f, groups, options); });

  auto& mean = report.mean;
  for (const auto& f : report.folds) {
    if (f.metrics.auc) {
      mean.auc += *f.metrics.auc;
      mean.auc_folds++;
    }
    mean.pcc += f.metrics.pcc;
    mean.precision += f.metrics.precision;
    mean.recall += f.metrics.recall;
    mean.f1 += f.metrics.f1;
  }
  const double n = static_cast<double>(report.folds.size());
  if (mean.auc_folds) mean.auc /= static_cast<double>(mean.auc_folds);
  mean.pcc /= n;
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  return report;
}

CVReport run_cv(const FeatureMatrix& matrix, const FoldPlan& plan, const CvOptions& options) {
  const FeatureBuilder builder = [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
    return FoldData{select_rows(matrix, train), select_rows(matrix, test), nlohmann::json::object()};
  };
  return run_cv(builder, plan, matrix.groups, options);
}

nlohmann::json to_json(const LogRegModel& m) {
  return {{"features", m.feature_names}, {"weights", m.weights},   {"bias", m.bias},
          {"means", m.means},            {"stds", m.stds},         {"lambda", m.lambda},
          {"iterations", m.iterations},  {"gradient_norm", m.gradient_norm},
          {"converged", m.converged},    {"seed", m.seed}};
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json out{{"pcc", m.pcc}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  out["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
  return out;
}

nlohmann::json to_json(const CVReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json item{{"fold", f.fold},
                        {"train_rows", f.train_rows},
                        {"balanced_train_rows", f.balanced_rows},
                        {"test_rows", f.test_rows},
                        {"test_hallucinated", f.test_positives},
                        {"threshold", f.threshold},
                        {"metrics", to_json(f.metrics)},
                        {"features", f.detail}};
    if (f.model) item["model"] = to_json(*f.model);
    if (!f.note.empty()) item["note"] = f.note;
    folds.push_back(std::move(item));
  }
  const auto& m = report.mean;
  return {{"folds", folds},
          {"mean",
           {{"auc", m.auc},
            {"auc_folds", m.auc_folds},
            {"pcc", m.pcc},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1}}}};
}

}  // namespace factum::classify

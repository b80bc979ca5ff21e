#include "factum/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <functional>
#include <numeric>

#include "factum/errors.hpp"
#include "factum/numeric.hpp"

namespace factum::stats {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::ranges::count(labels, 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("roc_auc: AUC is undefined with a single class");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(positives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  const double ss = pairwise_sum(0, values.size(), [&](std::size_t i) { return (values[i] - m) * (values[i] - m); });
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: inputs differ in length");
  const double mx = mean(x);
  const double my = mean(y);
  const std::size_t n = x.size();
  const double sxy = pairwise_sum(0, n, [&](std::size_t i) { return (x[i] - mx) * (y[i] - my); });
  const double sxx = pairwise_sum(0, n, [&](std::size_t i) { return (x[i] - mx) * (x[i] - mx); });
  const double syy = pairwise_sum(0, n, [&](std::size_t i) { return (y[i] - my) * (y[i] - my); });
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Exact permutation distribution of the (doubled) midrank sum of a k-subset.
// Returns P(W >= observed) and P(W <= observed).
std::pair<double, double> exact_rank_sum_tails(std::span<const long> doubled_ranks, std::size_t k,
                                               long observed) {
  // No k-subset can exceed the sum of the k largest ranks.
  std::vector<long> sorted(doubled_ranks.begin(), doubled_ranks.end());
  std::ranges::sort(sorted, std::greater<>());
  const long max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(k), 0L);
  // ways[j][s]: number of j-subsets of the items seen so far with doubled sum s.
  std::vector<std::vector<double>> ways(k + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  long reach = 0;
  for (const long r : doubled_ranks) {
    reach += r;
    for (std::size_t j = k; j >= 1; --j) {
      auto& to = ways[j];
      const auto& from = ways[j - 1];
      for (long s = std::min(reach, max_sum); s >= r; --s) to[static_cast<std::size_t>(s)] += from[static_cast<std::size_t>(s - r)];
    }
  }
  const auto& dist = ways[k];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double upper = 0.0;
  double lower = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    const double w = dist[static_cast<std::size_t>(s)];
    if (s >= observed) upper += w;
    if (s <= observed) lower += w;
  }
  return {upper / total, lower / total};
}

}  // namespace

MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative,
                         MwuMethod method) {
  if (a.empty() || b.empty()) throw DataError("mann_whitney_u: both samples must be nonempty");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  MwuResult result;
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  result.u = rank_sum_a - dna * (dna + 1.0) / 2.0;

  if (std::ranges::all_of(pooled, [&](double v) { return v == pooled.front(); })) {
    result.degenerate = true;
    result.p = 1.0;
    result.exact = method != MwuMethod::normal && na * nb <= kExactMwuLimit;
    return result;
  }

  const bool exact = method == MwuMethod::exact || (method == MwuMethod::automatic && na * nb <= kExactMwuLimit);
  if (exact) {
    // Midranks are multiples of 1/2; doubling makes them integral.
    std::vector<long> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
    const long observed_a = std::lround(2.0 * rank_sum_a);
    double p_greater = 0.0;
    double p_less = 0.0;
    if (na <= nb) {
      std::tie(p_greater, p_less) = exact_rank_sum_tails(doubled, na, observed_a);
    } else {
      const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
      // W_a large <=> W_b small.
      const auto [b_upper, b_lower] = exact_rank_sum_tails(doubled, nb, total - observed_a);
      p_greater = b_lower;
      p_less = b_upper;
    }
    result.exact = true;
    result.p = std::clamp(alternative == Alternative::greater ? p_greater : p_less, 0.0, 1.0);
    return result;
  }

  std::vector<double> sorted(pooled);
  std::ranges::sort(sorted);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double dn = static_cast<double>(n);
  const double variance = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  const double sigma = std::sqrt(variance);
  const double mu = dna * dnb / 2.0;
  double p = 0.0;
  if (alternative == Alternative::greater) {
    p = normal_upper_tail((result.u - mu - 0.5) / sigma);
  } else {
    p = normal_upper_tail(-(result.u - mu + 0.5) / sigma);
  }
  result.p = std::clamp(p, 0.0, 1.0);
  return result;
}

TTestResult t_test_two_tailed(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DataError("t_test_two_tailed: need paired samples of equal length >= 2");
  }
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double m = mean(diff);
  const double ss = pairwise_sum(0, n, [&](std::size_t i) { return (diff[i] - m) * (diff[i] - m); });
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult result;
  result.df = n - 1;
  if (!(sd > 0.0)) {
    result.degenerate = true;
    return result;
  }
  result.t = m / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(result.df));
  result.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t))), 0.0, 1.0);
  return result;
}

BhResult bh_correct(std::span<const double> pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  for (const double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("bh_correct: p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t x, std::size_t y) { return pvalues[x] < pvalues[y]; });

  BhResult result{std::vector<double>(m), std::vector<bool>(m)};
  double running = 1.0;
  for (std::size_t rank = m; rank >= 1; --rank) {
    const std::size_t i = order[rank - 1];
    running = std::min(running, static_cast<double>(m) * pvalues[i] / static_cast<double>(rank));
    result.adjusted[i] = std::min(running, 1.0);
  }
  for (std::size_t i = 0; i < m; ++i) result.rejected[i] = result.adjusted[i] <= alpha;
  return result;
}

const char* arrow(Direction d) {
  switch (d) {
    case Direction::correct_higher: return "↑";
    case Direction::correct_lower: return "↓";
    case Direction::none: break;
  }
  return "-";
}

const char* to_string(Tier t) {
  switch (t) {
    case Tier::p001: return "p<0.001";
    case Tier::p01: return "p<0.01";
    case Tier::p05: return "p<0.05";
    case Tier::ns: break;
  }
  return "n.s.";
}

Tier tier_for(double adjusted_p) {
  if (adjusted_p < 0.001) return Tier::p001;
  if (adjusted_p < 0.01) return Tier::p01;
  if (adjusted_p < 0.05) return Tier::p05;
  return Tier::ns;
}

SignatureTable signature_table(std::span<const ScoreSample> samples, std::span<const int> labels, double alpha) {
  const auto hallucinated = std::ranges::count(labels, 1);
  if (hallucinated == 0 || hallucinated == static_cast<long>(labels.size())) {
    throw DataError(std::string("signature_table: no ") + (hallucinated == 0 ? "hallucinated" : "correct") +
                    " citations; both classes are required");
  }
  SignatureTable table;
  std::vector<double> raw;
  for (const auto& sample : samples) {
    if (sample.values.size() != labels.size()) {
      throw DataError("signature_table: " + sample.score + " has " + std::to_string(sample.values.size()) +
                      " values for " + std::to_string(labels.size()) + " labels");
    }
    std::vector<double> correct;
    std::vector<double> wrong;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (labels[i] == 1 ? wrong : correct).push_back(sample.values[i]);
    }
    SignatureRow row;
    row.score = sample.score;
    row.feature = sample.feature;
    row.p_greater = mann_whitney_u(correct, wrong, Alternative::greater).p;
    row.p_less = mann_whitney_u(correct, wrong, Alternative::less).p;
    row.raw_p = std::min(1.0, 2.0 * std::min(row.p_greater, row.p_less));
    raw.push_back(row.raw_p);
    table.rows.push_back(std::move(row));
  }
  const auto bh = bh_correct(raw, alpha);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto& row = table.rows[i];
    row.adjusted_p = bh.adjusted[i];
    row.tier = tier_for(row.adjusted_p);
    if (row.tier != Tier::ns) {
      row.direction = row.p_greater <= row.p_less ? Direction::correct_higher : Direction::correct_lower;
    }
  }
  return table;
}

}  // namespace factum::stats

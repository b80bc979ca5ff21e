#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace factum::stats {

// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

// ROC AUC of `scores` for the positive class (labels 1) via the rank-sum
// statistic with midranks. Throws DataError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Pearson correlation; 0 when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
// Population standard deviation (divides by n).
double population_std(std::span<const double> values);

enum class Alternative { greater, less };
enum class MwuMethod { automatic, exact, normal };

// Pairs with n_a * n_b at or below this use exact enumeration in automatic mode.
inline constexpr std::size_t kExactMwuLimit = 400;

struct MwuResult {
  double u = 0.0;  // U of sample a: #(a > b) + 0.5 #(a == b)
  double p = 1.0;
  bool exact = false;
  bool degenerate = false;  // every value identical
};

// One-sided Mann-Whitney U test. `greater` tests whether a tends to exceed b.
// Exact mode enumerates the permutation distribution of the midrank sum (ties
// included); normal mode uses the tie-corrected variance with a 0.5
// continuity correction.
MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative,
                         MwuMethod method = MwuMethod::automatic);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  bool degenerate = false;  // differences have zero variance
};

// Paired two-tailed t-test on a - b with n - 1 degrees of freedom.
TTestResult t_test_two_tailed(std::span<const double> a, std::span<const double> b);

struct BhResult {
  std::vector<double> adjusted;  // input order
  std::vector<bool> rejected;
};

// Benjamini-Hochberg step-up adjustment.
BhResult bh_correct(std::span<const double> pvalues, double alpha = 0.05);

enum class Direction { correct_higher, correct_lower, none };
enum class Tier { p001, p01, p05, ns };

const char* arrow(Direction d);
const char* to_string(Tier t);
Tier tier_for(double adjusted_p);

struct ScoreSample {
  std::string score;    // e.g. "bas"
  std::string feature;  // selected feature the values come from
  std::vector<double> values;
};

struct SignatureRow {
  std::string score;
  std::string feature;
  Direction direction = Direction::none;
  Tier tier = Tier::ns;
  double p_greater = 1.0;  // correct > hallucinated
  double p_less = 1.0;
  double raw_p = 1.0;  // twice the smaller one-sided p, capped at 1
  double adjusted_p = 1.0;
};

struct SignatureTable {
  std::vector<SignatureRow> rows;
};

// Direction and significance of each score's values between correct (label 0)
// and hallucinated (label 1) citations. Both one-sided tests are run; the
// smaller p picks the direction and is doubled to pay for that choice before
// BH correction across scores. Throws DataError unless both classes occur.
SignatureTable signature_table(std::span<const ScoreSample> samples, std::span<const int> labels,
                               double alpha = 0.05);

}  // namespace factum::stats

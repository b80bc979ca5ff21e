#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "factum/errors.hpp"
#include "factum/random.hpp"
#include "factum/stats.hpp"

using namespace factum;
using namespace factum::stats;
using doctest::Approx;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
  }
  return wins / pairs;
}

double u_stat(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : x == y ? 0.5 : 0.0;
  }
  return u;
}

// P(U' >= U) over every way of splitting the pooled values into groups of
// the original sizes.
double brute_exact_greater(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  const double u = u_stat(a, b);
  std::vector<bool> pick(pool.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(a.size()), true);
  std::sort(pick.begin(), pick.end());
  double hits = 0, total = 0;
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < pool.size(); ++i) (pick[i] ? x : y).push_back(pool[i]);
    total += 1;
    if (u_stat(x, y) >= u - 1e-9) hits += 1;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return hits / total;
}

std::vector<double> normals(Rng& rng, std::size_t n, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng) + shift;
  return v;
}

}  // namespace

TEST_CASE("AUC fixture is 0.75") {
  const std::vector<double> p{0.9, 0.8, 0.7, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  CHECK(roc_auc(p, y) == 0.75);
}

TEST_CASE("AUC equals pair enumeration on small random sets with ties") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 7));
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(roc_auc(s, y) == Approx(brute_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("AUC needs both classes") {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> y{1, 1};
  CHECK_THROWS_AS(roc_auc(s, y), DataError);
}

TEST_CASE("midranks average ties") {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0};
  CHECK(midranks(v) == std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0});
}

TEST_CASE("pearson basics") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 6, 8};
  const std::vector<double> c{5, 5, 5, 5};
  CHECK(pearson(x, y) == Approx(1.0));
  CHECK(pearson(x, c) == 0.0);
}

TEST_CASE("exact MWU fixture (1,2,3) vs (4,5,6)") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{4, 5, 6};
  const auto g = mann_whitney_u(a, b, Alternative::greater);
  CHECK(g.u == 0.0);
  CHECK(g.exact);
  CHECK(g.p == Approx(1.0));
  CHECK(mann_whitney_u(a, b, Alternative::less).p == Approx(0.05).epsilon(1e-12));
}

TEST_CASE("exact MWU matches brute-force enumeration with ties") {
  Rng rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t na = 2 + uniform_index(rng, 5);
    const std::size_t nb = 2 + uniform_index(rng, 5);
    std::vector<double> a(na), b(nb);
    for (auto& x : a) x = static_cast<double>(uniform_index(rng, 5));
    for (auto& x : b) x = static_cast<double>(uniform_index(rng, 5));
    const auto r = mann_whitney_u(a, b, Alternative::greater, MwuMethod::exact);
    if (r.degenerate) continue;
    CHECK(r.p == Approx(brute_exact_greater(a, b)).epsilon(1e-9));
    CHECK(mann_whitney_u(a, b, Alternative::less, MwuMethod::exact).p ==
          Approx(brute_exact_greater(b, a)).epsilon(1e-9));
  }
}

TEST_CASE("normal MWU matches scipy's asymptotic test with continuity") {
  // Reference values from scipy.stats.mannwhitneyu(method="asymptotic").
  const std::vector<double> a{1.5, 2.0, 2.0, 3.1, 4.4, 0.2, 5.0, 2.0, 3.3, 1.1, 0.9, 2.7};
  const std::vector<double> b{2.0, 3.5, 4.1, 2.0, 6.2, 5.5, 3.3, 4.8, 7.0, 2.2, 3.9};
  const auto g = mann_whitney_u(a, b, Alternative::greater, MwuMethod::normal);
  CHECK(g.u == 27.5);
  CHECK(g.p == Approx(0.9920854839691252).epsilon(1e-9));
  CHECK(mann_whitney_u(a, b, Alternative::less, MwuMethod::normal).p ==
        Approx(0.009362363613296572).epsilon(1e-9));

  std::vector<double> x(30), y(25);
  std::iota(x.begin(), x.end(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i) + 7.5;
  const auto auto_mode = mann_whitney_u(x, y, Alternative::less);
  CHECK_FALSE(auto_mode.exact);
  CHECK(auto_mode.p == Approx(0.02000116553282029).epsilon(1e-9));
}

TEST_CASE("identical samples are never significant") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(mann_whitney_u(a, a, Alternative::greater).p >= 0.5);
  CHECK(mann_whitney_u(a, a, Alternative::less).p >= 0.5);
  const std::vector<double> c(6, 2.0);
  const auto r = mann_whitney_u(c, c, Alternative::less);
  CHECK(r.degenerate);
  CHECK(r.p == 1.0);
}

TEST_CASE("shifted normal samples are detected") {
  Rng rng(5);
  const auto a = normals(rng, 200, 1.0);
  const auto b = normals(rng, 200, 0.0);
  CHECK(mann_whitney_u(a, b, Alternative::greater).p < 0.001);
  CHECK(mann_whitney_u(a, b, Alternative::less).p > 0.999);
}

TEST_CASE("paired t-test") {
  SUBCASE("equal samples") {
    const std::vector<double> a{0.1, 0.5, 0.3};
    const auto r = t_test_two_tailed(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
  }
  SUBCASE("constant differences are flagged") {
    const std::vector<double> a{2, 3, 4, 5};
    const std::vector<double> b{1, 2, 3, 4};
    const auto r = t_test_two_tailed(a, b);
    CHECK(r.degenerate);
    CHECK(r.p == 1.0);
  }
  SUBCASE("fixture differences") {
    const std::vector<double> d{0.5, 0.3, 0.4, 0.6, 0.2};
    const std::vector<double> zero(5, 0.0);
    double mean = 0, ss = 0;
    for (double x : d) mean += x / 5;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double t = mean / (std::sqrt(ss / 4) / std::sqrt(5.0));
    const auto r = t_test_two_tailed(d, zero);
    CHECK(std::abs(r.t - t) <= 1e-6);
    CHECK(r.df == 4);
    CHECK(r.p == Approx(0.0048126783300442184).epsilon(1e-9));  // scipy.stats.ttest_1samp
  }
}

TEST_CASE("Benjamini-Hochberg") {
  SUBCASE("step-up fixture") {
    const std::vector<double> p{0.01, 0.02, 0.03, 0.04};
    const auto r = bh_correct(p);
    for (double v : r.adjusted) CHECK(v == Approx(0.04).epsilon(1e-12));
    CHECK(std::ranges::all_of(r.rejected, [](bool b) { return b; }));
  }
  SUBCASE("single p is unchanged") {
    const std::vector<double> p{0.3};
    CHECK(bh_correct(p).adjusted[0] == 0.3);
  }
  SUBCASE("all ones") {
    const std::vector<double> p{1, 1, 1};
    const auto r = bh_correct(p);
    CHECK(r.adjusted == std::vector<double>{1, 1, 1});
    CHECK(std::ranges::none_of(r.rejected, [](bool b) { return b; }));
  }
  SUBCASE("input order is kept") {
    const std::vector<double> p{0.04, 0.5, 0.001};
    const auto r = bh_correct(p);
    CHECK(r.adjusted[0] == Approx(0.06));
    CHECK(r.adjusted[1] == Approx(0.5));
    CHECK(r.adjusted[2] == Approx(0.003));
  }
}

TEST_CASE("tiers") {
  CHECK(tier_for(0.0005) == Tier::p001);
  CHECK(tier_for(0.005) == Tier::p01);
  CHECK(tier_for(0.03) == Tier::p05);
  CHECK(tier_for(0.05) == Tier::ns);
}

TEST_CASE("signature table directions") {
  Rng rng(8);
  std::vector<int> labels(400);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
  std::vector<ScoreSample> samples(3);
  samples[0] = {"bas", "bas.mean.mean", {}};
  samples[1] = {"pfs", "pfs.mean", {}};
  samples[2] = {"cas", "cas.mean.mean", {}};
  double shared = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    samples[0].values.push_back(standard_normal(rng) - (labels[i] ? 1.5 : 0.0));
    samples[1].values.push_back(standard_normal(rng) + (labels[i] ? 1.5 : 0.0));
    // cas: each consecutive (correct, hallucinated) pair shares one value
    if (i % 2 == 0) shared = standard_normal(rng);
    samples[2].values.push_back(shared);
  }
  const auto table = signature_table(samples, labels);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].direction == Direction::correct_higher);
  CHECK(table.rows[0].tier == Tier::p001);
  CHECK(table.rows[1].direction == Direction::correct_lower);
  CHECK(table.rows[1].tier == Tier::p001);
  CHECK(table.rows[2].tier == Tier::ns);
  CHECK(table.rows[2].direction == Direction::none);

  SUBCASE("single score: BH leaves the raw p") {
    const std::vector<ScoreSample> one{samples[2]};
    const auto t = signature_table(one, labels);
    CHECK(t.rows[0].adjusted_p == t.rows[0].raw_p);
    CHECK(t.rows[0].raw_p == Approx(std::min(1.0, 2 * std::min(t.rows[0].p_greater, t.rows[0].p_less))));
  }
  SUBCASE("one class only") {
    const std::vector<int> ones(labels.size(), 1);
    CHECK_THROWS_AS(signature_table(samples, ones), DataError);
  }
}

TEST_CASE("null signatures are rarely significant") {
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(1234, seed));
    std::vector<int> labels(200);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
    std::vector<ScoreSample> samples;
    for (const char* s : {"cas", "bas", "pfs", "pas"}) {
      ScoreSample sample{s, s, {}};
      for (std::size_t i = 0; i < labels.size(); ++i) sample.values.push_back(standard_normal(rng));
      samples.push_back(sample);
    }
    const auto t = signature_table(samples, labels);
    clean += std::ranges::all_of(t.rows, [](const SignatureRow& r) { return r.tier == Tier::ns; });
  }
  CHECK(clean >= 8);
}

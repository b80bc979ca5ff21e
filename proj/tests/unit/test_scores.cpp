#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "factum/errors.hpp"
#include "factum/oracle/naive_scores.hpp"
#include "factum/oracle/toy_transformer.hpp"
#include "factum/scores.hpp"
#include "random_trace.hpp"

using namespace factum;
using doctest::Approx;

namespace {

// One layer, one head, d hidden units; prompt positions [1, 1 + n).
ReportTrace tiny(std::uint32_t d, std::uint32_t n, std::uint64_t seed = 1) {
  Rng rng(seed);
  testing::RandomTraceOptions o;
  o.layers = 1;
  o.heads = 1;
  o.hidden = d;
  o.prompt = n;
  o.citations = 1;
  auto t = testing::random_trace(rng, o);
  t.context_span = t.prompt_span;
  return t;
}

void set_row(Tensor& t, std::size_t i, std::initializer_list<float> v) {
  std::copy(v.begin(), v.end(), t.row(i).begin());
}

double explicit_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("CAS with one parallel context token is 1") {
  auto t = tiny(4, 3);
  t.context_span = {2, 3};
  auto& rec = t.citations[0];
  std::ranges::copy(rec.token_final_hidden.values(), t.prompt_final_hidden.row(1).begin());
  for (float w : {0.01f, 0.3f, 0.9f}) {
    rec.attn_rows(0, 0, 1) = w;
    CHECK(compute_cas(rec, t)(0, 0) == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("CAS of an orthogonal context vector is 0") {
  auto t = tiny(4, 2);
  set_row(t.prompt_final_hidden, 0, {1, 0, 0, 0});
  set_row(t.prompt_final_hidden, 1, {0, 2, 0, 0});
  auto& rec = t.citations[0];
  std::ranges::copy(std::vector<float>{0, 0, 3, -1}, rec.token_final_hidden.values().begin());
  CHECK(compute_cas(rec, t)(0, 0) == Approx(0.0));
}

TEST_CASE("CAS with weights (0.5, 0.3, 0.2) matches an explicit loop") {
  auto t = tiny(8, 3, 17);
  auto& rec = t.citations[0];
  rec.sink(0, 0) = 0.0f;
  rec.attn_rows(0, 0, 0) = 0.5f;
  rec.attn_rows(0, 0, 1) = 0.3f;
  rec.attn_rows(0, 0, 2) = 0.2f;
  std::vector<double> ctx(8, 0.0), tok(8);
  for (std::size_t k = 0; k < 8; ++k) {
    tok[k] = rec.token_final_hidden.values()[k];
    for (std::size_t j = 0; j < 3; ++j) ctx[k] += rec.attn_rows(0, 0, j) * t.prompt_final_hidden(j, k);
  }
  CHECK(std::abs(compute_cas(rec, t)(0, 0) - explicit_cosine(ctx, tok)) <= 1e-6);
}

TEST_CASE("CAS is scale invariant while BAS scales linearly") {
  Rng rng(4);
  auto t = testing::random_trace(rng);
  const auto before_cas = compute_cas(t.citations[0], t);
  const auto before_bas = compute_bas(t.citations[0]);
  for (auto& v : t.citations[0].attn_rows.values()) v *= 0.5f;
  for (auto& v : t.citations[0].sink.values()) v *= 0.5f;
  const auto after_cas = compute_cas(t.citations[0], t);
  const auto after_bas = compute_bas(t.citations[0]);
  for (std::size_t i = 0; i < before_cas.values.size(); ++i) {
    CHECK(after_cas.values[i] == Approx(before_cas.values[i]).epsilon(1e-9));
    CHECK(after_bas.values[i] == Approx(0.5 * before_bas.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("BAS reads the sink column") {
  auto t = tiny(4, 4);
  auto& rec = t.citations[0];
  SUBCASE("all weight on the sink") {
    rec.sink(0, 0) = 1.0f;
    for (auto& v : rec.attn_rows.values()) v = 0.0f;
    CHECK(compute_bas(rec)(0, 0) == 1.0);
  }
  SUBCASE("uniform over n stored positions including the sink") {
    Rng rng(2);
    testing::RandomTraceOptions o;
    o.sink_in_prompt = true;
    o.prompt = 5;
    auto s = testing::random_trace(rng, o);
    auto& r = s.citations[0];
    for (auto& v : r.attn_rows.values()) v = 1.0f / 5.0f;
    for (auto& v : r.sink.values()) v = 1.0f / 5.0f;
    CHECK(validate_report(s).ok());
    CHECK(compute_bas(r)(1, 1) == Approx(0.2));
  }
}

TEST_CASE("BAS equals the toy model's attention to position 0 exactly") {
  const auto w = oracle::make_toy_weights({});
  const auto tokens = oracle::toy_tokens(w.config, 30, 8);
  const auto run = oracle::run_toy(w, tokens);
  const std::uint32_t pos[] = {24, 29};
  const auto t = oracle::toy_forward_trace(w, {}, pos, 8);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto bas = compute_bas(t.citations[c]);
    for (std::size_t l = 0; l < 4; ++l) {
      for (std::size_t h = 0; h < 2; ++h) CHECK(bas(l, h) == run.attention[l][h][pos[c] * 30]);
    }
  }
}

TEST_CASE("PFS is the FFN update norm") {
  auto t = tiny(4, 2);
  auto& rec = t.citations[0];
  set_row(rec.x_pre_ffn, 0, {1, 1, 1, 1});
  set_row(rec.x_post_ffn, 0, {1, 1, 1, 1});
  CHECK(compute_pfs(rec)[0] == 0.0);
  set_row(rec.x_post_ffn, 0, {1, 2, 1, 1});
  CHECK(compute_pfs(rec)[0] == Approx(1.0));
  set_row(rec.x_post_ffn, 0, {4, 5, 1, 1});
  CHECK(compute_pfs(rec)[0] == Approx(5.0));
}

TEST_CASE("PFS triangle bound") {
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const auto t = testing::random_trace(rng);
    for (const auto& rec : t.citations) {
      const auto pfs = compute_pfs(rec);
      for (std::size_t l = 0; l < pfs.size(); ++l) {
        double a = 0, b = 0;
        for (std::size_t k = 0; k < rec.x_pre_ffn.dim(1); ++k) {
          a += rec.x_post_ffn(l, k) * rec.x_post_ffn(l, k);
          b += rec.x_pre_ffn(l, k) * rec.x_pre_ffn(l, k);
        }
        CHECK(pfs[l] <= std::sqrt(a) + std::sqrt(b) + 1e-9);
      }
    }
  }
}

TEST_CASE("PAS sign follows the pathway alignment") {
  auto t = tiny(4, 2);
  auto& rec = t.citations[0];
  set_row(rec.x_input, 0, {0, 0, 0, 0});
  set_row(rec.x_pre_ffn, 0, {1, -2, 0, 3});
  set_row(rec.x_post_ffn, 0, {3, -6, 0, 9});
  CHECK(compute_pas(rec)[0] == Approx(1.0));
  set_row(rec.x_post_ffn, 0, {0, 0, 0, 0});
  CHECK(compute_pas(rec)[0] == Approx(-1.0));
}

TEST_CASE("zero FFN update gives PFS 0 and a flagged PAS 0 in both implementations") {
  auto t = tiny(4, 2);
  auto& rec = t.citations[0];
  std::ranges::copy(rec.x_pre_ffn.row(0), rec.x_post_ffn.row(0).begin());
  const auto fast = compute_scores(rec, t);
  const auto slow = oracle::naive_scores(rec, t);
  for (const auto* s : {&fast, &slow}) {
    CHECK(s->pfs[0] == 0.0);
    CHECK(s->pas[0] == 0.0);
    REQUIRE(s->flags.size() == 1);
    CHECK(s->flags[0] == DegenerateFlag{ScoreKind::pas, 0, -1});
  }
}

TEST_CASE("ECS equals CAS when the spans coincide") {
  Rng rng(6);
  auto t = testing::random_trace(rng);
  t.context_span = t.prompt_span;
  const auto s = compute_scores(t.citations[1], t);
  CHECK(s.ecs.values == s.cas.values);
}

TEST_CASE("ECS is 0 when all mass sits on orthogonal instruction tokens") {
  auto t = tiny(4, 4);
  t.context_span = {3, 5};
  auto& rec = t.citations[0];
  set_row(t.prompt_final_hidden, 0, {1, 0, 0, 0});
  set_row(t.prompt_final_hidden, 1, {0, 1, 0, 0});
  std::ranges::copy(std::vector<float>{0, 0, 1, 1}, rec.token_final_hidden.values().begin());
  rec.attn_rows(0, 0, 0) = 0.6f;
  rec.attn_rows(0, 0, 1) = 0.3f;
  rec.attn_rows(0, 0, 2) = 0.0f;
  rec.attn_rows(0, 0, 3) = 0.0f;
  rec.sink(0, 0) = 0.0f;
  const auto s = compute_scores(rec, t);
  CHECK(s.ecs(0, 0) == 0.0);
  CHECK(s.cas(0, 0) == 0.0);
  CHECK(s.flags.size() == 1);  // the CAS context vector vanished
}

TEST_CASE("PKS is the absolute lens delta") {
  auto t = tiny(4, 2);
  auto& lens = *t.citations[0].logitlens_lp;
  lens(0, kLensPreFfn) = -2.0f;
  lens(0, kLensPostFfn) = -0.5f;
  CHECK(compute_pks(t.citations[0])[0] == Approx(1.5));
  lens(0, kLensPostFfn) = -2.0f;
  CHECK(compute_pks(t.citations[0])[0] == 0.0);
}

TEST_CASE("PKS without a lens block asks for re-extraction") {
  auto t = tiny(4, 2);
  t.citations[0].logitlens_lp.reset();
  CHECK_THROWS_WITH_AS(compute_pks(t.citations[0]), doctest::Contains("logit lens"), DataError);
  CHECK_FALSE(compute_scores(t.citations[0], t).has_pks());
}

TEST_CASE("toy lens values match a recomputation from the toy weights") {
  const auto w = oracle::make_toy_weights({});
  const std::uint32_t pos[] = {26};
  const auto t = oracle::toy_forward_trace(w, {}, pos, 21);
  const auto tokens = oracle::toy_tokens(w.config, 27, 21);
  const auto run = oracle::run_toy(w, tokens);
  const auto& logits = run.logits[26];
  const auto emitted = static_cast<std::size_t>(std::ranges::max_element(logits) - logits.begin());
  const auto pks = compute_pks(t.citations[0]);
  for (std::size_t l = 0; l < 4; ++l) {
    const double pre = oracle::lens_log_probs(w, run.x_pre_ffn[l][26])[emitted];
    const double post = oracle::lens_log_probs(w, run.x_post_ffn[l][26])[emitted];
    CHECK(std::abs((*t.citations[0].logitlens_lp)(l, kLensPreFfn) - pre) <= 1e-5);
    CHECK(std::abs((*t.citations[0].logitlens_lp)(l, kLensPostFfn) - post) <= 1e-5);
    CHECK(std::abs(pks[l] - std::abs(post - pre)) <= 1e-5);
  }
}

TEST_CASE("confidence scalars") {
  CitationRecord rec;
  rec.baselines.token_logprob = 0.0f;
  CHECK(derive_confidence(rec).perplexity == 1.0);
  rec.baselines.token_logprob = static_cast<float>(-std::numbers::ln2);
  CHECK(derive_confidence(rec).perplexity == Approx(2.0).epsilon(1e-6));
  rec.baselines.logit_logsumexp = 5.3f;
  CHECK(derive_confidence(rec).energy == Approx(-5.3).epsilon(1e-6));
  rec.baselines.dist_entropy = 0.7f;
  CHECK(derive_confidence(rec).ln_entropy == Approx(0.7).epsilon(1e-6));
  CHECK_FALSE(derive_confidence(rec).p_true.has_value());
}

TEST_CASE("kernels match the naive oracle on random traces") {
  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    testing::RandomTraceOptions o;
    o.hidden = 1 + static_cast<std::uint32_t>(uniform_index(rng, 32));
    o.sink_in_prompt = i % 2;
    o.degenerate_rate = 0.1;
    const auto t = testing::random_trace(rng, o);
    for (const auto& rec : t.citations) {
      const auto a = compute_scores(rec, t);
      const auto b = oracle::naive_scores(rec, t);
      for (std::size_t k = 0; k < a.cas.values.size(); ++k) {
        CHECK(std::abs(a.cas.values[k] - b.cas.values[k]) <= 1e-6);
        CHECK(std::abs(a.ecs.values[k] - b.ecs.values[k]) <= 1e-6);
        CHECK(a.bas.values[k] == b.bas.values[k]);
      }
      for (std::size_t l = 0; l < a.pfs.size(); ++l) {
        CHECK(std::abs(a.pfs[l] - b.pfs[l]) <= 1e-6);
        CHECK(std::abs(a.pas[l] - b.pas[l]) <= 1e-6);
        CHECK(std::abs(a.pks[l] - b.pks[l]) <= 1e-6);
      }
      CHECK(a.flags == b.flags);
    }
  }
}

TEST_CASE("score_dataset keeps labeled citations in order") {
  Rng rng(31);
  testing::RandomTraceOptions o;
  o.citations = 2;
  o.report_id = "x";
  auto a = testing::random_trace(rng, o);
  o.report_id = "y";
  auto b = testing::random_trace(rng, o);
  a.citations[0].label = Label::correct;
  a.citations[1].label = Label::hallucinated;
  b.citations[1].label = Label::correct;
  std::vector<ReportTrace> traces{a, b};
  const auto rows = score_dataset(traces);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].key == CitationKey{"y", 1});
  CHECK(rows[1].label == Label::hallucinated);
  const auto again = score_dataset(traces);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].scores.cas.values == rows[i].scores.cas.values);

  for (auto& t : traces) {
    for (auto& c : t.citations) c.label = Label::unlabeled;
  }
  CHECK_THROWS_AS(score_dataset(traces), DataError);
}

TEST_CASE("toy dataset scores stay in range") {
  const auto w = oracle::make_toy_weights({});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::uint32_t pos[] = {24, 28, 33};
    const auto t = oracle::toy_forward_trace(w, {}, pos, seed);
    for (const auto& rec : t.citations) CHECK_FALSE(check_score_ranges(compute_scores(rec, t)).has_value());
  }
}

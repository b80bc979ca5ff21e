#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "factum/errors.hpp"
#include "factum/oracle/toy_transformer.hpp"
#include "factum/trace.hpp"
#include "random_trace.hpp"

using namespace factum;

namespace {

ReportTrace toy_trace() {
  const auto w = oracle::make_toy_weights({});
  const std::uint32_t pos[] = {24, 26, 30};
  return oracle::toy_forward_trace(w, {}, pos, 11);
}

std::vector<ReportTrace> two_reports() {
  Rng rng(3);
  testing::RandomTraceOptions o;
  o.citations = 3;
  o.report_id = "a";
  auto a = testing::random_trace(rng, o);
  o.report_id = "b";
  auto b = testing::random_trace(rng, o);
  return {a, b};
}

}  // namespace

TEST_CASE("toy trace validates cleanly") {
  CHECK(validate_report(toy_trace()).ok());
}

TEST_CASE("random traces validate with and without the sink in the prompt span") {
  Rng rng(1);
  for (bool sink : {false, true}) {
    testing::RandomTraceOptions o;
    o.sink_in_prompt = sink;
    CHECK(validate_report(testing::random_trace(rng, o)).ok());
  }
}

TEST_CASE("attention weight above 1 is a single indexed violation") {
  auto t = toy_trace();
  t.citations[1].attn_rows(2, 1, 5) = 1.5f;
  const auto report = validate_report(t);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].field == "citations[1].attn_rows");
  CHECK(report.violations[0].index == std::vector<std::size_t>{2, 1, 5});
}

TEST_CASE("wrong x_input shape is a single shape violation") {
  auto t = toy_trace();
  const auto L = t.geometry.num_layers;
  const auto d = t.geometry.hidden_dim;
  t.citations[0].x_input = Tensor({L - 1, d});
  const auto report = validate_report(t);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].field == "citations[0].x_input");
  CHECK(report.violations[0].index.empty());
}

TEST_CASE("attention budget and sink agreement") {
  Rng rng(2);
  testing::RandomTraceOptions o;
  o.sink_in_prompt = true;
  auto t = testing::random_trace(rng, o);
  SUBCASE("stored position 0 must equal the sink") {
    t.citations[0].attn_rows(0, 0, 0) = t.citations[0].sink(0, 0) * 0.5f;
    const auto r = validate_report(t);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].index == std::vector<std::size_t>{0, 0, 0});
  }
  SUBCASE("row mass above 1 is reported per row") {
    for (auto& v : t.citations[0].attn_rows.row(1, 1)) v = 0.5f;
    t.citations[0].sink(1, 1) = 0.5f;
    t.citations[0].attn_rows(1, 1, 0) = 0.5f;
    const auto r = validate_report(t);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].index == std::vector<std::size_t>{1, 1});
  }
}

TEST_CASE("non-finite values and bad baselines") {
  auto t = toy_trace();
  t.citations[0].x_post_ffn(1, 3) = std::numeric_limits<float>::quiet_NaN();
  t.citations[2].baselines.token_logprob = 0.25f;
  const auto r = validate_report(t);
  REQUIRE(r.violations.size() == 2);
  CHECK(r.violations[0].field == "citations[0].x_post_ffn");
  CHECK(r.violations[1].field == "citations[2].baselines.token_logprob");
}

TEST_CASE("context span outside the prompt span") {
  auto t = toy_trace();
  t.context_span = {t.prompt_span.start, t.prompt_span.end + 1};
  const auto r = validate_report(t);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].field == "context_span");
}

TEST_CASE("attach_labels full and partial coverage") {
  auto traces = two_reports();
  LabelFile full;
  for (const char* id : {"a", "b"}) {
    for (std::uint32_t i = 0; i < 3; ++i) full.entries.push_back({id, i, i % 2 ? Label::hallucinated : Label::correct});
  }
  CHECK(attach_labels(traces, full) == 6);
  CHECK(traces[1].citations[1].label == Label::hallucinated);

  auto fresh = two_reports();
  LabelFile partial;
  partial.entries.assign(full.entries.begin(), full.entries.begin() + 4);
  CHECK(attach_labels(fresh, partial) == 4);
  CHECK(fresh[1].citations[1].label == Label::unlabeled);
  CHECK(fresh[1].citations[2].label == Label::unlabeled);
}

TEST_CASE("attach_labels rejects bad entries before touching traces") {
  auto traces = two_reports();
  SUBCASE("ordinal out of range names report and ordinal") {
    LabelFile f{{{"a", 0, Label::correct}, {"a", 7, Label::correct}}};
    try {
      attach_labels(traces, f);
      FAIL("expected an error");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(a, 7)") != std::string::npos);
    }
    CHECK(traces[0].citations[0].label == Label::unlabeled);
  }
  SUBCASE("duplicate key") {
    LabelFile f{{{"b", 1, Label::correct}, {"b", 1, Label::hallucinated}}};
    CHECK_THROWS_AS(attach_labels(traces, f), DataError);
  }
  SUBCASE("unknown report") {
    LabelFile f{{{"zzz", 0, Label::correct}}};
    CHECK_THROWS_AS(attach_labels(traces, f), DataError);
  }
}

TEST_CASE("label file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "factum_labels_test.json";
  LabelFile f{{{"a", 0, Label::correct}, {"b", 2, Label::hallucinated}}};
  save_label_file(f, path);
  const auto back = load_label_file(path);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].report_id == "b");
  CHECK(back.entries[1].ordinal == 2);
  CHECK(back.entries[1].label == Label::hallucinated);
  std::filesystem::remove(path);
}

TEST_CASE("label names") {
  CHECK(parse_label("hallucinated") == Label::hallucinated);
  CHECK(parse_label("correct") == Label::correct);
  CHECK_FALSE(parse_label("maybe").has_value());
}

#include "factum/scores.hpp"

#include <algorithm>
#include <cmath>

#include "factum/errors.hpp"
#include "factum/numeric.hpp"
#include "factum/parallel.hpp"

namespace factum {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::cas: return "cas";
    case ScoreKind::bas: return "bas";
    case ScoreKind::ecs: return "ecs";
    case ScoreKind::pfs: return "pfs";
    case ScoreKind::pas: return "pas";
    case ScoreKind::pks: return "pks";
  }
  return "?";
}

std::optional<ScoreKind> parse_score(std::string_view name) {
  for (const auto kind : kAllScores) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

namespace {

// Cosine with the zero-norm guard: returns nothing when either side vanishes.
std::optional<double> guarded_cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < kZeroNorm || nb < kZeroNorm) return std::nullopt;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// y += a * x over n entries; the buffers never overlap.
void axpy(double a, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

// cosine(sum_{j in span} A_ij h_j, h_i) for every (layer, head). CAS and ECS
// differ only in the span.
HeadGrid attention_alignment(const CitationRecord& record, const ReportTrace& report,
                             const TokenSpan& span, ScoreKind kind,
                             std::vector<DegenerateFlag>* flags) {
  const std::size_t L = report.geometry.num_layers;
  const std::size_t H = report.geometry.num_heads;
  const std::size_t d = report.geometry.hidden_dim;
  const Tensor& hidden = report.prompt_final_hidden;
  if (record.attn_rows.rank() != 3 || hidden.rank() != 2 ||
      record.attn_rows.dim(2) != hidden.dim(0) || hidden.dim(1) != d ||
      !record.attn_rows.has_shape({L, H, hidden.dim(0)}) || !record.token_final_hidden.has_shape({d})) {
    throw DataError("attention rows " + shape_string(record.attn_rows.shape()) +
                    " do not match prompt hidden states " + shape_string(hidden.shape()));
  }
  if (!report.prompt_span.contains(span) || span.length() == 0) {
    throw DataError("score span is empty or outside the prompt span");
  }
  const std::size_t first = span.start - report.prompt_span.start;
  const std::size_t last = span.end - report.prompt_span.start;

  std::vector<double> token(d);
  std::ranges::copy(record.token_final_hidden.values(), token.begin());
  // Rows of the span, widened once and reused by every head.
  std::vector<double> rows((last - first) * d);
  std::ranges::copy(hidden.values().subspan(first * d, rows.size()), rows.begin());
  std::vector<double> context(d);
  HeadGrid grid(L, H);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto weights = record.attn_rows.row(l, h);
      std::ranges::fill(context, 0.0);
      for (std::size_t j = first; j < last; ++j) {
        axpy(weights[j], rows.data() + (j - first) * d, context.data(), d);
      }
      if (const auto c = guarded_cosine(context, token)) {
        grid(l, h) = *c;
      } else if (flags) {
        flags->push_back({kind, static_cast<std::int32_t>(l), static_cast<std::int32_t>(h)});
      }
    }
  }
  return grid;
}

std::vector<double> difference(std::span<const float> after, std::span<const float> before) {
  std::vector<double> out(after.size());
  for (std::size_t k = 0; k < after.size(); ++k) {
    out[k] = static_cast<double>(after[k]) - static_cast<double>(before[k]);
  }
  return out;
}

}  // namespace

HeadGrid compute_cas(const CitationRecord& record, const ReportTrace& report,
                     std::vector<DegenerateFlag>* flags) {
  return attention_alignment(record, report, report.context_span, ScoreKind::cas, flags);
}

HeadGrid compute_ecs(const CitationRecord& record, const ReportTrace& report,
                     std::vector<DegenerateFlag>* flags) {
  return attention_alignment(record, report, report.prompt_span, ScoreKind::ecs, flags);
}

HeadGrid compute_bas(const CitationRecord& record) {
  HeadGrid grid(record.sink.dim(0), record.sink.dim(1));
  std::ranges::copy(record.sink.values(), grid.values.begin());
  return grid;
}

std::vector<double> compute_pfs(const CitationRecord& record) {
  const std::size_t L = record.x_post_ffn.dim(0);
  std::vector<double> pfs(L);
  for (std::size_t l = 0; l < L; ++l) {
    pfs[l] = norm2(std::span<const double>(difference(record.x_post_ffn.row(l), record.x_pre_ffn.row(l))));
  }
  return pfs;
}

std::vector<double> compute_pas(const CitationRecord& record, std::vector<DegenerateFlag>* flags) {
  const std::size_t L = record.x_post_ffn.dim(0);
  std::vector<double> pas(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    const auto v_attn = difference(record.x_pre_ffn.row(l), record.x_input.row(l));
    const auto v_ffn = difference(record.x_post_ffn.row(l), record.x_pre_ffn.row(l));
    if (const auto c = guarded_cosine(v_attn, v_ffn)) {
      pas[l] = *c;
    } else if (flags) {
      flags->push_back({ScoreKind::pas, static_cast<std::int32_t>(l), -1});
    }
  }
  return pas;
}

std::vector<double> compute_pks(const CitationRecord& record) {
  if (!record.logitlens_lp) {
    throw DataError("trace has no logit-lens block; re-extract with the logit lens enabled to compute PKS");
  }
  const Tensor& lens = *record.logitlens_lp;
  std::vector<double> pks(lens.dim(0));
  for (std::size_t l = 0; l < pks.size(); ++l) {
    pks[l] = std::abs(static_cast<double>(lens(l, kLensPostFfn)) - static_cast<double>(lens(l, kLensPreFfn)));
  }
  return pks;
}

Confidence derive_confidence(const CitationRecord& record) {
  const BaselineScalars& b = record.baselines;
  Confidence c;
  c.perplexity = std::exp(-static_cast<double>(b.token_logprob));
  c.ln_entropy = b.dist_entropy;
  c.energy = -static_cast<double>(b.logit_logsumexp);
  if (b.p_true) c.p_true = *b.p_true;
  return c;
}

ScoreSet compute_scores(const CitationRecord& record, const ReportTrace& report) {
  ScoreSet s;
  s.cas = compute_cas(record, report, &s.flags);
  s.bas = compute_bas(record);
  s.ecs = compute_ecs(record, report, &s.flags);
  s.pfs = compute_pfs(record);
  s.pas = compute_pas(record, &s.flags);
  if (record.logitlens_lp) s.pks = compute_pks(record);
  s.confidence = derive_confidence(record);
  return s;
}

std::optional<std::string> check_score_ranges(const ScoreSet& s) {
  auto in_range = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::pair<const char*, const HeadGrid*> grids[] = {{"cas", &s.cas}, {"ecs", &s.ecs}, {"bas", &s.bas}};
  for (const auto& [name, grid] : grids) {
    const double lo = grid == &s.bas ? 0.0 : -1.0;
    for (const double v : grid->values) {
      if (!in_range(v, lo, 1.0)) return std::string(name) + " value " + std::to_string(v) + " out of range";
    }
  }
  for (const double v : s.pas) {
    if (!in_range(v, -1.0, 1.0)) return "pas value " + std::to_string(v) + " out of range";
  }
  for (const double v : s.pfs) {
    if (!in_range(v, 0.0, inf)) return "pfs value " + std::to_string(v) + " out of range";
  }
  for (const double v : s.pks) {
    if (!in_range(v, 0.0, inf)) return "pks value " + std::to_string(v) + " out of range";
  }
  if (!in_range(s.confidence.perplexity, 1.0, inf)) return "perplexity below 1";
  for (const auto& f : s.flags) {
    const bool head = is_head_level(f.score);
    const std::size_t layers = head ? s.cas.layers : s.pas.size();
    if (f.layer < 0 || static_cast<std::size_t>(f.layer) >= layers ||
        (head ? (f.head < 0 || static_cast<std::size_t>(f.head) >= s.cas.heads) : f.head != -1)) {
      return "degenerate flag outside the computed entries";
    }
  }
  return std::nullopt;
}

std::vector<ScoredCitation> score_dataset(std::span<const ReportTrace> traces) {
  struct Job {
    std::size_t trace;
    std::size_t citation;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    for (std::size_t c = 0; c < traces[t].citations.size(); ++c) {
      if (traces[t].citations[c].label != Label::unlabeled) jobs.push_back({t, c});
    }
  }
  if (jobs.empty()) throw DataError("dataset has no labeled citations");

  std::vector<ScoredCitation> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& trace = traces[jobs[i].trace];
    const auto& record = trace.citations[jobs[i].citation];
    out[i] = {{trace.report_id, static_cast<std::uint32_t>(jobs[i].citation)},
              record.label,
              compute_scores(record, trace)};
  });
  return out;
}

}  // namespace factum

#include "factum/oracle/naive_scores.hpp"

#include <cmath>

namespace factum::oracle {
namespace {

constexpr double kTiny = 1e-12;

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b, bool& degenerate) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  degenerate = na < kTiny || nb < kTiny;
  if (degenerate) return 0.0;
  double c = ab / (na * nb);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

HeadGrid naive_alignment(const CitationRecord& rec, const ReportTrace& rep, std::uint32_t from, std::uint32_t to,
                         ScoreKind kind, std::vector<DegenerateFlag>& flags) {
  const std::size_t L = rep.geometry.num_layers;
  const std::size_t H = rep.geometry.num_heads;
  const std::size_t d = rep.geometry.hidden_dim;
  HeadGrid grid(L, H);
  std::vector<double> token(d);
  for (std::size_t k = 0; k < d; ++k) token[k] = rec.token_final_hidden.values()[k];
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) {
      std::vector<double> ctx(d, 0.0);
      for (std::uint32_t pos = from; pos < to; ++pos) {
        const std::size_t j = pos - rep.prompt_span.start;
        const double a = rec.attn_rows(l, h, j);
        for (std::size_t k = 0; k < d; ++k) ctx[k] += a * static_cast<double>(rep.prompt_final_hidden(j, k));
      }
      bool degenerate = false;
      grid(l, h) = naive_cosine(ctx, token, degenerate);
      if (degenerate) flags.push_back({kind, static_cast<std::int32_t>(l), static_cast<std::int32_t>(h)});
    }
  }
  return grid;
}

}  // namespace

ScoreSet naive_scores(const CitationRecord& rec, const ReportTrace& rep) {
  ScoreSet s;
  const std::size_t L = rep.geometry.num_layers;
  const std::size_t H = rep.geometry.num_heads;
  const std::size_t d = rep.geometry.hidden_dim;

  s.cas = naive_alignment(rec, rep, rep.context_span.start, rep.context_span.end, ScoreKind::cas, s.flags);

  s.bas = HeadGrid(L, H);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) s.bas(l, h) = rec.sink(l, h);
  }

  s.ecs = naive_alignment(rec, rep, rep.prompt_span.start, rep.prompt_span.end, ScoreKind::ecs, s.flags);

  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> v_attn(d), v_ffn(d);
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double in = rec.x_input(l, k);
      const double pre = rec.x_pre_ffn(l, k);
      const double post = rec.x_post_ffn(l, k);
      v_attn[k] = pre - in;
      v_ffn[k] = post - pre;
      sq += v_ffn[k] * v_ffn[k];
    }
    s.pfs.push_back(std::sqrt(sq));
    bool degenerate = false;
    s.pas.push_back(naive_cosine(v_attn, v_ffn, degenerate));
    if (degenerate) s.flags.push_back({ScoreKind::pas, static_cast<std::int32_t>(l), -1});
  }

  if (rec.logitlens_lp) {
    for (std::size_t l = 0; l < L; ++l) {
      const double pre = (*rec.logitlens_lp)(l, 0);
      const double post = (*rec.logitlens_lp)(l, 1);
      s.pks.push_back(post > pre ? post - pre : pre - post);
    }
  }

  s.confidence.perplexity = std::exp(-static_cast<double>(rec.baselines.token_logprob));
  s.confidence.ln_entropy = rec.baselines.dist_entropy;
  s.confidence.energy = -static_cast<double>(rec.baselines.logit_logsumexp);
  if (rec.baselines.p_true) s.confidence.p_true = static_cast<double>(*rec.baselines.p_true);
  return s;
}

}  // namespace factum::oracle

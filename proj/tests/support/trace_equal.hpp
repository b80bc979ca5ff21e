#pragma once

#include "factum/trace.hpp"

namespace factum::testing {

// Field-by-field, bit-level equality of two traces.
inline bool same_trace(const ReportTrace& a, const ReportTrace& b) {
  if (a.report_id != b.report_id || !(a.geometry == b.geometry) || !(a.context_span == b.context_span) ||
      !(a.prompt_span == b.prompt_span) || !bit_equal(a.prompt_final_hidden, b.prompt_final_hidden) ||
      a.citations.size() != b.citations.size()) {
    return false;
  }
  for (std::size_t c = 0; c < a.citations.size(); ++c) {
    const auto& x = a.citations[c];
    const auto& y = b.citations[c];
    const bool lens = x.logitlens_lp.has_value() == y.logitlens_lp.has_value() &&
                      (!x.logitlens_lp || bit_equal(*x.logitlens_lp, *y.logitlens_lp));
    const auto& p = x.baselines;
    const auto& q = y.baselines;
    if (x.citation_pos != y.citation_pos || x.cited_doc_id != y.cited_doc_id || x.label != y.label ||
        !bit_equal(x.attn_rows, y.attn_rows) || !bit_equal(x.sink, y.sink) ||
        !bit_equal(x.token_final_hidden, y.token_final_hidden) || !bit_equal(x.x_input, y.x_input) ||
        !bit_equal(x.x_pre_ffn, y.x_pre_ffn) || !bit_equal(x.x_post_ffn, y.x_post_ffn) || !lens ||
        p.token_logprob != q.token_logprob || p.dist_entropy != q.dist_entropy ||
        p.logit_logsumexp != q.logit_logsumexp || p.p_true != q.p_true) {
      return false;
    }
  }
  return true;
}

}  // namespace factum::testing

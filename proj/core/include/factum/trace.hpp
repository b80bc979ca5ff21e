#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factum/tensor.hpp"

namespace factum {

struct ModelGeometry {
  std::uint32_t num_layers = 0;
  std::uint32_t num_heads = 0;
  std::uint32_t hidden_dim = 0;
  std::string model_id;

  friend bool operator==(const ModelGeometry&, const ModelGeometry&) = default;
};

// Half-open token range [start, end).
struct TokenSpan {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t length() const noexcept { return end > start ? end - start : 0; }
  bool contains(const TokenSpan& inner) const noexcept {
    return start <= inner.start && inner.end <= end;
  }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

enum class Label : std::uint8_t { unlabeled, correct, hallucinated };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

struct BaselineScalars {
  float token_logprob = 0.0f;    // log p(citation token), <= 0
  float dist_entropy = 0.0f;     // nats, >= 0
  float logit_logsumexp = 0.0f;  // log-sum-exp of the raw logits
  std::optional<float> p_true;   // self-evaluation probability
};

// Internals captured at one citation token. Tensor shapes, with L layers,
// H heads, d hidden units and n stored prompt positions:
//   attn_rows           [L x H x n]  attention from the citation token to the prompt span
//   sink                [L x H]      attention to absolute sequence position 0
//   token_final_hidden  [d]          final-layer hidden state of the citation token
//   x_input             [L x d]      residual stream entering each layer
//   x_pre_ffn           [L x d]      residual after the attention block
//   x_post_ffn          [L x d]      residual after the FFN block
//   logitlens_lp        [L x 2]      lens log-prob of the emitted token before/after each FFN
struct CitationRecord {
  std::uint32_t citation_pos = 0;
  std::int32_t cited_doc_id = 0;
  Label label = Label::unlabeled;
  Tensor attn_rows;
  Tensor sink;
  Tensor token_final_hidden;
  Tensor x_input;
  Tensor x_pre_ffn;
  Tensor x_post_ffn;
  BaselineScalars baselines;
  std::optional<Tensor> logitlens_lp;
};

// Column indices of CitationRecord::logitlens_lp.
inline constexpr std::size_t kLensPreFfn = 0;
inline constexpr std::size_t kLensPostFfn = 1;

struct ReportTrace {
  std::string report_id;
  ModelGeometry geometry;
  TokenSpan context_span;
  TokenSpan prompt_span;
  Tensor prompt_final_hidden;  // [n_prompt x d]
  std::vector<CitationRecord> citations;

  std::uint32_t prompt_length() const noexcept { return prompt_span.length(); }
};

// Tolerance on the stored attention mass per (layer, head).
inline constexpr double kAttentionBudgetTolerance = 1e-4;

struct Violation {
  std::string field;               // e.g. "citations[0].attn_rows"
  std::vector<std::size_t> index;  // offending element, empty for whole-field issues
  std::string reason;

  std::string to_string() const;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  friend bool operator==(const ValidationReport&, const ValidationReport&);
};

bool operator==(const Violation&, const Violation&);

// Checks every structural and numeric invariant of a trace. Violations are
// returned as data; the trace is not modified. When the prompt span begins at
// position 0 the stored column for that position must equal the sink column,
// and the two are counted once in the attention budget.
ValidationReport validate_report(const ReportTrace& trace);

struct LabelEntry {
  std::string report_id;
  std::uint32_t ordinal = 0;  // 0-based index into ReportTrace::citations
  Label label = Label::correct;
};

// Externally produced labels. Entries are never Label::unlabeled.
struct LabelFile {
  std::vector<LabelEntry> entries;
};

// JSON form: {"version": 1, "labels": [{"report_id", "ordinal", "label"}]}.
LabelFile load_label_file(const std::filesystem::path& path);
void save_label_file(const LabelFile& labels, const std::filesystem::path& path);

// Applies labels to matching citations and returns how many were labeled.
// Citations without an entry keep their current label. Throws DataError on a
// duplicate key, an unknown report_id or an out-of-range ordinal, before any
// trace is modified.
std::size_t attach_labels(std::span<ReportTrace> traces, const LabelFile& labels);

}  // namespace factum

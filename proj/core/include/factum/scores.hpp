#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factum/trace.hpp"

namespace factum {

enum class ScoreKind : std::uint8_t { cas, bas, ecs, pfs, pas, pks };

inline constexpr ScoreKind kAllScores[] = {ScoreKind::cas, ScoreKind::bas, ScoreKind::ecs,
                                           ScoreKind::pfs, ScoreKind::pas, ScoreKind::pks};

std::string_view to_string(ScoreKind kind);
std::optional<ScoreKind> parse_score(std::string_view name);

// Head-level scores are [L x H] grids; the rest are per-layer series.
constexpr bool is_head_level(ScoreKind kind) {
  return kind == ScoreKind::cas || kind == ScoreKind::bas || kind == ScoreKind::ecs;
}

// Row-major [layers x heads] grid of doubles.
struct HeadGrid {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::vector<double> values;

  HeadGrid() = default;
  HeadGrid(std::size_t l, std::size_t h) : layers(l), heads(h), values(l * h, 0.0) {}

  double& operator()(std::size_t l, std::size_t h) { return values[l * heads + h]; }
  double operator()(std::size_t l, std::size_t h) const { return values[l * heads + h]; }
};

// A zero-norm cosine guard fired at (score, layer, head); head is -1 for
// layer-level scores.
struct DegenerateFlag {
  ScoreKind score;
  std::int32_t layer;
  std::int32_t head;

  friend bool operator==(const DegenerateFlag&, const DegenerateFlag&) = default;
};

struct Confidence {
  double perplexity = 1.0;
  double ln_entropy = 0.0;
  double energy = 0.0;
  std::optional<double> p_true;
};

struct ScoreSet {
  HeadGrid cas;
  HeadGrid bas;
  HeadGrid ecs;
  std::vector<double> pfs;
  std::vector<double> pas;
  std::vector<double> pks;  // empty when the trace carries no logit-lens block
  Confidence confidence;
  std::vector<DegenerateFlag> flags;

  bool has_pks() const noexcept { return !pks.empty(); }
};

// Norms below this are treated as zero by the cosine kernels.
inline constexpr double kZeroNorm = 1e-12;

HeadGrid compute_cas(const CitationRecord& record, const ReportTrace& report,
                     std::vector<DegenerateFlag>* flags = nullptr);
HeadGrid compute_ecs(const CitationRecord& record, const ReportTrace& report,
                     std::vector<DegenerateFlag>* flags = nullptr);
HeadGrid compute_bas(const CitationRecord& record);
std::vector<double> compute_pfs(const CitationRecord& record);
std::vector<double> compute_pas(const CitationRecord& record,
                                std::vector<DegenerateFlag>* flags = nullptr);
// Throws DataError when the record has no logit-lens block.
std::vector<double> compute_pks(const CitationRecord& record);
Confidence derive_confidence(const CitationRecord& record);

ScoreSet compute_scores(const CitationRecord& record, const ReportTrace& report);

// Checks the documented value ranges; returns a description of the first
// failure, or nothing.
std::optional<std::string> check_score_ranges(const ScoreSet& scores);

struct CitationKey {
  std::string report_id;
  std::uint32_t ordinal = 0;

  friend bool operator==(const CitationKey&, const CitationKey&) = default;
};

struct ScoredCitation {
  CitationKey key;
  Label label = Label::unlabeled;
  ScoreSet scores;
};

// Scores every labeled citation, in trace order then citation order.
// Throws DataError when nothing is labeled.
std::vector<ScoredCitation> score_dataset(std::span<const ReportTrace> traces);

}  // namespace factum

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "factum/scores.hpp"

namespace factum::features {

// Detector variants. The first three are classifier-based feature sets, the
// rest are single confidence scalars scored without a classifier.
enum class Variant { factum, cas_pfs, ecs_pks, perplexity, ln_entropy, energy, p_true };

inline constexpr Variant kAllVariants[] = {Variant::factum,     Variant::cas_pfs, Variant::ecs_pks,
                                           Variant::perplexity, Variant::ln_entropy, Variant::energy,
                                           Variant::p_true};

std::string_view to_string(Variant v);
std::string_view display_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
bool is_classifier_free(Variant v);
// Mechanistic scores a classifier-based variant is built from (empty otherwise).
std::vector<ScoreKind> variant_scores(Variant v);

// (layer, head) for head-level scores; head == -1 for layer-level scores.
struct ComponentId {
  std::uint32_t layer = 0;
  std::int32_t head = -1;

  friend bool operator==(const ComponentId&, const ComponentId&) = default;
};

struct RankedComponent {
  ComponentId id;
  double r = 0.0;  // signed point-biserial correlation with the hallucination label
};

struct ScoreRanking {
  ScoreKind score = ScoreKind::cas;
  std::size_t layers = 0;
  std::size_t heads = 0;  // 0 for layer-level scores
  std::vector<RankedComponent> order;  // |r| non-increasing, ties by (layer, head)
};

using ComponentRanking = std::vector<ScoreRanking>;

// Ranks every component of each requested score by |point-biserial r| on the
// training rows. Constant components get r = 0. Requires >= 2 rows per class.
ComponentRanking rank_components(std::span<const ScoreSet> train, std::span<const int> labels,
                                 std::span<const ScoreKind> scores);

// max(1, round(k / 100 * total)); throws ConfigError unless 0 < k <= 100.
std::size_t retained_count(std::size_t total, double k_percent);

struct ScoreMask {
  ScoreKind score = ScoreKind::cas;
  std::size_t layers = 0;
  std::size_t heads = 0;       // 0 for layer-level scores
  std::vector<bool> retained;  // indexed layer * heads + head, or layer
  std::size_t count = 0;

  bool keeps(std::size_t layer, std::size_t head = 0) const {
    return retained[heads == 0 ? layer : layer * heads + head];
  }
};

std::vector<ScoreMask> prune(const ComponentRanking& ranking, double k_percent);
ScoreMask full_mask(ScoreKind score, std::size_t layers, std::size_t heads);

// Values indexed by surviving layer.
struct LayerSeries {
  std::vector<std::uint32_t> layers;
  std::vector<double> values;
};

struct HeadAggregates {
  LayerSeries mean;
  LayerSeries std;  // population standard deviation over retained heads
};

// Per-layer statistics over retained heads; layers with no retained head are
// left out of both series.
HeadAggregates aggregate_heads(const HeadGrid& grid, const ScoreMask& mask);
LayerSeries layer_series(std::span<const double> values, const ScoreMask& mask);

struct Summaries {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  double slope = 0.0;    // OLS slope of value on layer index
  double fft_mag = 0.0;  // |DFT bin| of the mean-subtracted series
  bool short_series = false;  // fewer than 2 points: slope and fft_mag are 0
};

// `fft_bin` selects the DFT bin (1 = lowest nonzero frequency); bins above
// n / 2 yield 0.
Summaries layer_summaries(const LayerSeries& series, std::size_t fft_bin = 1);

inline constexpr const char* kSummaryNames[] = {"mean", "std", "min", "max", "slope", "fft"};
inline constexpr const char* kAggregatorNames[] = {"mean", "std"};

struct Candidate {
  std::string name;  // "<score>.<aggregator>.<summary>" or "<score>.<summary>"
  double value = 0.0;
};

// The candidate pool for one score of one citation, in a fixed order: 12
// entries for head-level scores, 6 for layer-level ones.
std::vector<Candidate> candidate_features(const ScoreSet& scores, const ScoreMask& mask, std::size_t fft_bin = 1);

// Value of one score component set, e.g. the PKS series or the CAS grid.
std::span<const double> score_values(const ScoreSet& scores, ScoreKind kind);

// Picks the candidate whose training-set AUC is farthest from 0.5; ties go to
// the lexicographically smallest name. columns[c][row] holds candidate c.
std::string select_feature(std::span<const std::string> names, std::span<const std::vector<double>> columns,
                           std::span<const int> labels_train);

struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<double> values;  // row-major
  std::vector<CitationKey> keys;
  std::vector<std::string> groups;  // report_id per row
  std::vector<int> labels;          // 1 = hallucinated, 0 = correct

  std::size_t rows() const noexcept { return keys.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * columns.size() + col]; }
  std::vector<double> column(std::size_t col) const;
};

struct PipelineConfig {
  double k_percent = 100.0;
  std::size_t fft_bin = 1;
};

// Everything fitted on training rows: rankings, masks and the chosen feature
// per score.
struct FittedPipeline {
  Variant variant = Variant::factum;
  PipelineConfig config;
  ComponentRanking ranking;
  std::vector<ScoreMask> masks;
  std::vector<std::string> chosen;  // parallel to variant_scores(variant)
};

int label_value(Label label);

// Fits ranking, pruning and selection on training rows only; no test label is
// reachable from here.
FittedPipeline fit_pipeline(Variant variant, const PipelineConfig& config, std::span<const ScoreSet> train,
                            std::span<const int> train_labels);

// Builds the feature matrix for `rows` with a fitted pipeline: one column per
// mechanistic score, or the single confidence scalar for classifier-free
// variants. Throws DataError on NaN or a missing input (e.g. no PKS or P(True)).
FeatureMatrix assemble(std::span<const ScoredCitation> rows, const FittedPipeline& pipeline);

nlohmann::json ranking_to_json(const ComponentRanking& ranking);
void write_features_csv(const FeatureMatrix& matrix, const std::filesystem::path& path,
                        std::span<const std::string> header_lines);

}  // namespace factum::features

#include "factum/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>

#include "factum/errors.hpp"
#include "factum/numeric.hpp"
#include "factum/stats.hpp"

namespace factum::features {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::factum: return "factum";
    case Variant::cas_pfs: return "cas_pfs";
    case Variant::ecs_pks: return "ecs_pks";
    case Variant::perplexity: return "perplexity";
    case Variant::ln_entropy: return "ln_entropy";
    case Variant::energy: return "energy";
    case Variant::p_true: return "p_true";
  }
  return "?";
}

std::string_view display_name(Variant v) {
  switch (v) {
    case Variant::factum: return "FACTUM";
    case Variant::cas_pfs: return "CAS+PFS";
    case Variant::ecs_pks: return "ECS+PKS (baseline)";
    case Variant::perplexity: return "Perplexity";
    case Variant::ln_entropy: return "LN-Entropy";
    case Variant::energy: return "Energy";
    case Variant::p_true: return "P(True)";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (const auto v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

bool is_classifier_free(Variant v) { return variant_scores(v).empty(); }

std::vector<ScoreKind> variant_scores(Variant v) {
  switch (v) {
    case Variant::factum: return {ScoreKind::cas, ScoreKind::bas, ScoreKind::pfs, ScoreKind::pas};
    case Variant::cas_pfs: return {ScoreKind::cas, ScoreKind::pfs};
    case Variant::ecs_pks: return {ScoreKind::ecs, ScoreKind::pks};
    default: return {};
  }
}

int label_value(Label label) { return label == Label::hallucinated ? 1 : 0; }

std::span<const double> score_values(const ScoreSet& s, ScoreKind kind) {
  switch (kind) {
    case ScoreKind::cas: return s.cas.values;
    case ScoreKind::bas: return s.bas.values;
    case ScoreKind::ecs: return s.ecs.values;
    case ScoreKind::pfs: return s.pfs;
    case ScoreKind::pas: return s.pas;
    case ScoreKind::pks: return s.pks;
  }
  return {};
}

namespace {

std::size_t layer_count(const ScoreSet& s, ScoreKind kind) {
  return is_head_level(kind) ? s.cas.layers : score_values(s, kind).size();
}

std::size_t head_count(const ScoreSet& s, ScoreKind kind) { return is_head_level(kind) ? s.cas.heads : 0; }

void require_pks(const ScoreSet& s, ScoreKind kind) {
  if (kind == ScoreKind::pks && !s.has_pks()) {
    throw DataError("PKS requested but the trace has no logit-lens block; re-extract with the lens enabled");
  }
}

}  // namespace

ComponentRanking rank_components(std::span<const ScoreSet> train, std::span<const int> labels,
                                 std::span<const ScoreKind> scores) {
  if (train.size() != labels.size()) throw DataError("rank_components: rows and labels differ in length");
  const auto positives = std::ranges::count(labels, 1);
  const auto negatives = static_cast<long>(labels.size()) - positives;
  if (positives < 2 || negatives < 2) {
    throw DataError("rank_components: need at least 2 training citations per class (have " +
                    std::to_string(negatives) + " correct, " + std::to_string(positives) + " hallucinated)");
  }
  const std::vector<double> y(labels.begin(), labels.end());

  ComponentRanking ranking;
  for (const auto kind : scores) {
    for (const auto& s : train) require_pks(s, kind);
    ScoreRanking sr;
    sr.score = kind;
    sr.layers = layer_count(train.front(), kind);
    sr.heads = head_count(train.front(), kind);
    const std::size_t total = score_values(train.front(), kind).size();
    std::vector<double> column(train.size());
    for (std::size_t c = 0; c < total; ++c) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        const auto values = score_values(train[i], kind);
        if (values.size() != total) throw DataError("rank_components: citations disagree on score geometry");
        column[i] = values[c];
      }
      ComponentId id;
      if (sr.heads == 0) {
        id = {static_cast<std::uint32_t>(c), -1};
      } else {
        id = {static_cast<std::uint32_t>(c / sr.heads), static_cast<std::int32_t>(c % sr.heads)};
      }
      sr.order.push_back({id, stats::pearson(column, y)});
    }
    // Components are generated in (layer, head) order, so a stable sort keeps
    // that as the tie-break.
    std::ranges::stable_sort(sr.order, [](const RankedComponent& a, const RankedComponent& b) {
      return std::abs(a.r) > std::abs(b.r);
    });
    ranking.push_back(std::move(sr));
  }
  return ranking;
}

std::size_t retained_count(std::size_t total, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw ConfigError("pruning percentage k must lie in (0, 100], got " + std::to_string(k_percent));
  }
  const auto kept = static_cast<std::size_t>(std::llround(k_percent / 100.0 * static_cast<double>(total)));
  return std::clamp<std::size_t>(kept, 1, std::max<std::size_t>(total, 1));
}

ScoreMask full_mask(ScoreKind score, std::size_t layers, std::size_t heads) {
  const std::size_t total = heads == 0 ? layers : layers * heads;
  return {score, layers, heads, std::vector<bool>(total, true), total};
}

std::vector<ScoreMask> prune(const ComponentRanking& ranking, double k_percent) {
  std::vector<ScoreMask> masks;
  for (const auto& sr : ranking) {
    const std::size_t keep = retained_count(sr.order.size(), k_percent);
    ScoreMask mask{sr.score, sr.layers, sr.heads, std::vector<bool>(sr.order.size(), false), keep};
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& id = sr.order[i].id;
      mask.retained[sr.heads == 0 ? id.layer : id.layer * sr.heads + static_cast<std::size_t>(id.head)] = true;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

HeadAggregates aggregate_heads(const HeadGrid& grid, const ScoreMask& mask) {
  HeadAggregates out;
  std::vector<double> kept;
  for (std::size_t l = 0; l < grid.layers; ++l) {
    kept.clear();
    for (std::size_t h = 0; h < grid.heads; ++h) {
      if (mask.keeps(l, h)) kept.push_back(grid(l, h));
    }
    if (kept.empty()) continue;
    const auto layer = static_cast<std::uint32_t>(l);
    out.mean.layers.push_back(layer);
    out.mean.values.push_back(stats::mean(kept));
    out.std.layers.push_back(layer);
    out.std.values.push_back(stats::population_std(kept));
  }
  return out;
}

LayerSeries layer_series(std::span<const double> values, const ScoreMask& mask) {
  LayerSeries out;
  for (std::size_t l = 0; l < values.size(); ++l) {
    if (mask.keeps(l)) {
      out.layers.push_back(static_cast<std::uint32_t>(l));
      out.values.push_back(values[l]);
    }
  }
  return out;
}

Summaries layer_summaries(const LayerSeries& series, std::size_t fft_bin) {
  Summaries s;
  const auto& y = series.values;
  const std::size_t n = y.size();
  if (n == 0) {
    s.short_series = true;
    return s;
  }
  s.mean = stats::mean(y);
  s.std = stats::population_std(y);
  const auto [lo, hi] = std::ranges::minmax(y);
  s.min = lo;
  s.max = hi;
  if (n < 2) {
    s.short_series = true;
    return s;
  }

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = series.layers[i];
  const double mx = stats::mean(x);
  const double sxy = pairwise_sum(0, n, [&](std::size_t i) { return (x[i] - mx) * (y[i] - s.mean); });
  const double sxx = pairwise_sum(0, n, [&](std::size_t i) { return (x[i] - mx) * (x[i] - mx); });
  s.slope = sxx > 0.0 ? sxy / sxx : 0.0;

  if (fft_bin <= n / 2) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(fft_bin) / static_cast<double>(n);
    const double re = pairwise_sum(0, n, [&](std::size_t i) { return (y[i] - s.mean) * std::cos(w * i); });
    const double im = pairwise_sum(0, n, [&](std::size_t i) { return (y[i] - s.mean) * std::sin(w * i); });
    s.fft_mag = std::hypot(re, im);
  }
  return s;
}

namespace {

void append_summaries(std::vector<Candidate>& out, const std::string& prefix, const Summaries& s) {
  const double values[] = {s.mean, s.std, s.min, s.max, s.slope, s.fft_mag};
  for (std::size_t i = 0; i < std::size(kSummaryNames); ++i) {
    out.push_back({prefix + kSummaryNames[i], values[i]});
  }
}

}  // namespace

std::vector<Candidate> candidate_features(const ScoreSet& scores, const ScoreMask& mask, std::size_t fft_bin) {
  require_pks(scores, mask.score);
  const std::string score(to_string(mask.score));
  std::vector<Candidate> out;
  if (is_head_level(mask.score)) {
    const HeadGrid& grid = mask.score == ScoreKind::cas   ? scores.cas
                           : mask.score == ScoreKind::bas ? scores.bas
                                                          : scores.ecs;
    const auto agg = aggregate_heads(grid, mask);
    append_summaries(out, score + ".mean.", layer_summaries(agg.mean, fft_bin));
    append_summaries(out, score + ".std.", layer_summaries(agg.std, fft_bin));
  } else {
    append_summaries(out, score + ".", layer_summaries(layer_series(score_values(scores, mask.score), mask), fft_bin));
  }
  return out;
}

std::string select_feature(std::span<const std::string> names, std::span<const std::vector<double>> columns,
                           std::span<const int> labels_train) {
  if (names.empty() || names.size() != columns.size()) {
    throw DataError("select_feature: need at least one candidate with values");
  }
  std::size_t best = 0;
  double best_distance = -1.0;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const double distance = std::abs(stats::roc_auc(columns[c], labels_train) - 0.5);
    if (distance > best_distance || (distance == best_distance && names[c] < names[best])) {
      best = c;
      best_distance = distance;
    }
  }
  return names[best];
}

std::vector<double> FeatureMatrix::column(std::size_t col) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

FittedPipeline fit_pipeline(Variant variant, const PipelineConfig& config, std::span<const ScoreSet> train,
                            std::span<const int> train_labels) {
  FittedPipeline fitted;
  fitted.variant = variant;
  fitted.config = config;
  const auto scores = variant_scores(variant);
  if (scores.empty()) return fitted;

  fitted.ranking = rank_components(train, train_labels, scores);
  fitted.masks = prune(fitted.ranking, config.k_percent);
  for (const auto& mask : fitted.masks) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto candidates = candidate_features(train[i], mask, config.fft_bin);
      if (names.empty()) {
        for (const auto& c : candidates) names.push_back(c.name);
        columns.assign(names.size(), std::vector<double>(train.size()));
      }
      for (std::size_t c = 0; c < candidates.size(); ++c) columns[c][i] = candidates[c].value;
    }
    fitted.chosen.push_back(select_feature(names, columns, train_labels));
  }
  return fitted;
}

FeatureMatrix assemble(std::span<const ScoredCitation> rows, const FittedPipeline& pipeline) {
  FeatureMatrix m;
  const auto scores = variant_scores(pipeline.variant);
  if (scores.empty()) {
    m.columns.emplace_back(to_string(pipeline.variant));
  } else {
    if (pipeline.chosen.size() != scores.size() || pipeline.masks.size() != scores.size()) {
      throw DataError("assemble: pipeline has no chosen feature for some requested score");
    }
    m.columns = pipeline.chosen;
  }
  if (m.columns.empty()) throw DataError("assemble: empty score subset");

  for (const auto& row : rows) {
    m.keys.push_back(row.key);
    m.groups.push_back(row.key.report_id);
    m.labels.push_back(label_value(row.label));
    if (scores.empty()) {
      const Confidence& c = row.scores.confidence;
      double value = 0.0;
      switch (pipeline.variant) {
        case Variant::perplexity: value = c.perplexity; break;
        case Variant::ln_entropy: value = c.ln_entropy; break;
        case Variant::energy: value = c.energy; break;
        case Variant::p_true:
          if (!c.p_true) {
            throw DataError("citation (" + row.key.report_id + ", " + std::to_string(row.key.ordinal) +
                            ") has no P(True) value");
          }
          value = *c.p_true;
          break;
        default: break;
      }
      m.values.push_back(value);
    } else {
      for (std::size_t s = 0; s < scores.size(); ++s) {
        const auto candidates = candidate_features(row.scores, pipeline.masks[s], pipeline.config.fft_bin);
        const auto it = std::ranges::find(candidates, pipeline.chosen[s], &Candidate::name);
        if (it == candidates.end()) throw DataError("assemble: unknown feature " + pipeline.chosen[s]);
        m.values.push_back(it->value);
      }
    }
  }
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (!std::isfinite(m.values[i])) {
      const auto& key = m.keys[i / m.cols()];
      throw DataError("assemble: non-finite " + m.columns[i % m.cols()] + " for citation (" + key.report_id +
                      ", " + std::to_string(key.ordinal) + ")");
    }
  }
  return m;
}

nlohmann::json ranking_to_json(const ComponentRanking& ranking) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& sr : ranking) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : sr.order) {
      items.push_back({{"layer", c.id.layer}, {"head", c.id.head}, {"r", c.r}, {"abs_r", std::abs(c.r)}});
    }
    out[std::string(to_string(sr.score))] = {{"layers", sr.layers}, {"heads", sr.heads}, {"components", items}};
  }
  return out;
}

void write_features_csv(const FeatureMatrix& m, const std::filesystem::path& path,
                        std::span<const std::string> header_lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& line : header_lines) out << "# " << line << '\n';
  out << "report_id,ordinal,label";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << m.keys[r].report_id << ',' << m.keys[r].ordinal << ',' << (m.labels[r] ? "hallucinated" : "correct");
    for (std::size_t c = 0; c < m.cols(); ++c) out << ',' << m.at(r, c);
    out << '\n';
  }
}

}  // namespace factum::features

#include "factum/oracle/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <iomanip>
#include <sstream>

#include "factum/errors.hpp"
#include "factum/parallel.hpp"
#include "factum/random.hpp"

namespace factum::oracle {
namespace {

constexpr std::uint32_t kPromptStart = 1;
constexpr std::uint32_t kContextMargin = 4;
constexpr double kMinFfnScale = 1e-2;

std::string report_name(std::size_t r) {
  std::ostringstream os;
  os << "synth-" << std::setw(4) << std::setfill('0') << r;
  return os.str();
}

template <class T>
T read_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("planted spec: field '") + key + "' has the wrong type");
  }
}

double population_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

// Moves the sink of one (layer, head) to `target`, keeping the row within
// budget. Mass removed from the sink goes proportionally to the other stored
// columns; mass added comes from free budget first, then from those columns.
void plant_sink(CitationRecord& rec, const ReportTrace& trace, std::size_t l, std::size_t h, double target) {
  if (target > 1.0) {
    throw ConfigError("bas shift pushes the sink weight above the attention budget; use a smaller shift");
  }
  const bool zero_stored = trace.prompt_span.start == 0;
  auto row = rec.attn_rows.row(l, h);
  const std::size_t first = zero_stored ? 1 : 0;
  double others = 0.0;
  for (std::size_t j = first; j < row.size(); ++j) others += row[j];
  const double sink = rec.sink(l, h);
  double factor = 1.0;
  if (target < sink) {
    if (others > 0.0) factor = (others + sink - target) / others;
  } else if (sink + others > 1.0 - (target - sink)) {
    factor = others > 0.0 ? std::max(0.0, 1.0 - target) / others : 1.0;
  }
  for (std::size_t j = first; j < row.size(); ++j) row[j] = static_cast<float>(row[j] * factor);
  rec.sink(l, h) = static_cast<float>(target);
  if (zero_stored) row[0] = rec.sink(l, h);
  double total = rec.sink(l, h);
  for (std::size_t j = first; j < row.size(); ++j) total += row[j];
  if (total > 1.0 + 1e-5) {
    // float rounding of the rescaled row; trim the largest column
    auto largest = std::max_element(row.begin() + static_cast<std::ptrdiff_t>(first), row.end());
    if (largest != row.end()) *largest = std::max(0.0f, static_cast<float>(*largest - (total - 1.0)));
  }
}

// Rescales the FFN update of layer l to norm `target` and carries the change
// through every later residual snapshot so the stream stays additive.
void plant_ffn(CitationRecord& rec, std::size_t l, double norm, double target) {
  if (norm <= 0.0) {
    if (target > 0.0) throw ConfigError("pfs shift needs a nonzero FFN update to scale; use a smaller shift");
    return;
  }
  // Clipped above zero so the update keeps its direction and PAS is untouched.
  target = std::max(target, kMinFfnScale * norm);
  const std::size_t L = rec.x_post_ffn.dim(0);
  const std::size_t d = rec.x_post_ffn.dim(1);
  std::vector<double> delta(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double v = static_cast<double>(rec.x_post_ffn(l, k)) - rec.x_pre_ffn(l, k);
    delta[k] = v * (target / norm - 1.0);
  }
  for (std::size_t k = 0; k < d; ++k) {
    rec.x_post_ffn(l, k) = static_cast<float>(rec.x_post_ffn(l, k) + delta[k]);
  }
  for (std::size_t m = l + 1; m < L; ++m) {
    for (std::size_t k = 0; k < d; ++k) {
      rec.x_input(m, k) = static_cast<float>(rec.x_input(m, k) + delta[k]);
      rec.x_pre_ffn(m, k) = static_cast<float>(rec.x_pre_ffn(m, k) + delta[k]);
      rec.x_post_ffn(m, k) = static_cast<float>(rec.x_post_ffn(m, k) + delta[k]);
    }
  }
}

}  // namespace

void validate_spec(const PlantedSpec& spec) {
  if (spec.correct < 1 || spec.hallucinated < 1) throw ConfigError("planted spec: need at least 1 citation per class");
  const std::uint32_t total = spec.correct + spec.hallucinated;
  if (spec.reports < 1 || spec.reports > total) {
    throw ConfigError("planted spec: reports must be between 1 and the number of citations");
  }
  const std::uint32_t per_report = (total + spec.reports - 1) / spec.reports;
  if (spec.generated_length < per_report) {
    throw ConfigError("planted spec: generated_length " + std::to_string(spec.generated_length) +
                      " cannot hold " + std::to_string(per_report) + " citations per report");
  }
  if (spec.prompt_length < kPromptStart + 2 * kContextMargin + 2) {
    throw ConfigError("planted spec: prompt_length must be at least " +
                      std::to_string(kPromptStart + 2 * kContextMargin + 2));
  }
  if (spec.prompt_length + spec.generated_length > spec.geometry.max_positions) {
    throw ConfigError("planted spec: prompt_length + generated_length exceeds max_positions");
  }
  for (const auto& [kind, shift] : spec.shifts) {
    if (!std::isfinite(shift)) throw ConfigError("planted spec: shift must be finite");
    if (shift != 0.0 && kind != ScoreKind::bas && kind != ScoreKind::pfs) {
      throw ConfigError("planted spec: only bas and pfs can be planted, got " + std::string(to_string(kind)));
    }
  }
}

PlantedSpec parse_planted_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("planted spec must be a JSON object");
  static const std::set<std::string> known = {"seed",     "reports",       "correct",         "hallucinated",
                                              "shifts",   "geometry",      "prompt_length",   "generated_length"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("planted spec: unknown field '" + key + "'");
  }
  PlantedSpec s;
  s.seed = read_field<std::uint64_t>(j, "seed", s.seed);
  s.reports = read_field<std::uint32_t>(j, "reports", s.reports);
  s.correct = read_field<std::uint32_t>(j, "correct", s.correct);
  s.hallucinated = read_field<std::uint32_t>(j, "hallucinated", s.hallucinated);
  s.prompt_length = read_field<std::uint32_t>(j, "prompt_length", s.prompt_length);
  s.generated_length = read_field<std::uint32_t>(j, "generated_length", s.generated_length);
  if (j.contains("shifts")) {
    const auto& shifts = j.at("shifts");
    if (!shifts.is_object()) throw ConfigError("planted spec: shifts must be an object");
    for (const auto& [name, value] : shifts.items()) {
      const auto kind = parse_score(name);
      if (!kind) throw ConfigError("planted spec: unknown score '" + name + "' in shifts");
      if (!value.is_number()) throw ConfigError("planted spec: shift for '" + name + "' must be a number");
      s.shifts[*kind] = value.get<double>();
    }
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    if (!g.is_object()) throw ConfigError("planted spec: geometry must be an object");
    for (const auto& [key, _] : g.items()) {
      if (key != "layers" && key != "heads" && key != "hidden_dim" && key != "vocab" && key != "max_positions") {
        throw ConfigError("planted spec: unknown geometry field '" + key + "'");
      }
    }
    s.geometry.num_layers = read_field<std::uint32_t>(g, "layers", s.geometry.num_layers);
    s.geometry.num_heads = read_field<std::uint32_t>(g, "heads", s.geometry.num_heads);
    s.geometry.hidden_dim = read_field<std::uint32_t>(g, "hidden_dim", s.geometry.hidden_dim);
    s.geometry.vocab = read_field<std::uint32_t>(g, "vocab", s.geometry.vocab);
    s.geometry.max_positions = read_field<std::uint32_t>(g, "max_positions", s.geometry.max_positions);
  }
  validate_spec(s);
  return s;
}

nlohmann::json to_json(const PlantedSpec& s) {
  nlohmann::json shifts = nlohmann::json::object();
  for (const auto& [kind, shift] : s.shifts) shifts[std::string(to_string(kind))] = shift;
  return {{"seed", s.seed},
          {"reports", s.reports},
          {"correct", s.correct},
          {"hallucinated", s.hallucinated},
          {"shifts", shifts},
          {"geometry",
           {{"layers", s.geometry.num_layers},
            {"heads", s.geometry.num_heads},
            {"hidden_dim", s.geometry.hidden_dim},
            {"vocab", s.geometry.vocab},
            {"max_positions", s.geometry.max_positions}}},
          {"prompt_length", s.prompt_length},
          {"generated_length", s.generated_length}};
}

SyntheticDataset synth_dataset(const PlantedSpec& spec) {
  validate_spec(spec);
  ToyConfig config = spec.geometry;
  config.seed = derive_seed(spec.seed, 0);
  const auto weights = make_toy_weights(config);

  const std::uint32_t total = spec.correct + spec.hallucinated;
  std::vector<Label> dealt(spec.correct, Label::correct);
  dealt.insert(dealt.end(), spec.hallucinated, Label::hallucinated);
  Rng label_rng(derive_seed(spec.seed, 1));
  shuffle(std::span<Label>(dealt), label_rng);

  std::vector<std::size_t> first_label(spec.reports + 1, 0);
  for (std::uint32_t r = 0; r < spec.reports; ++r) {
    first_label[r + 1] = first_label[r] + total / spec.reports + (r < total % spec.reports ? 1 : 0);
  }

  SyntheticDataset out;
  out.traces.resize(spec.reports);
  parallel_for(spec.reports, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(spec.seed, 1000 + r);
    const std::size_t count = first_label[r + 1] - first_label[r];
    std::vector<std::uint32_t> slots(spec.generated_length);
    for (std::uint32_t i = 0; i < spec.generated_length; ++i) slots[i] = spec.prompt_length + i;
    Rng rng(derive_seed(seed, 7));
    shuffle(std::span<std::uint32_t>(slots), rng);
    std::vector<std::uint32_t> positions(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(count));
    std::ranges::sort(positions);

    TraceLayout layout;
    layout.prompt_length = spec.prompt_length;
    layout.prompt_start = kPromptStart;
    layout.sequence_length = spec.prompt_length + spec.generated_length;
    layout.context = {kPromptStart + kContextMargin, spec.prompt_length - kContextMargin};
    layout.report_id = report_name(r);
    auto trace = toy_forward_trace(weights, layout, positions, seed);
    for (std::size_t c = 0; c < count; ++c) trace.citations[c].label = dealt[first_label[r] + c];
    out.traces[r] = std::move(trace);
  });

  for (const auto& trace : out.traces) {
    for (std::size_t c = 0; c < trace.citations.size(); ++c) {
      out.labels.entries.push_back({trace.report_id, static_cast<std::uint32_t>(c), trace.citations[c].label});
    }
  }

  const std::size_t L = config.num_layers;
  const std::size_t H = config.num_heads;
  const double bas_shift = spec.shifts.contains(ScoreKind::bas) ? spec.shifts.at(ScoreKind::bas) : 0.0;
  const double pfs_shift = spec.shifts.contains(ScoreKind::pfs) ? spec.shifts.at(ScoreKind::pfs) : 0.0;

  if (bas_shift != 0.0) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t h = 0; h < H; ++h) {
        std::vector<double> pool;
        for (const auto& t : out.traces) {
          for (const auto& c : t.citations) pool.push_back(c.sink(l, h));
        }
        const double sigma = population_std(pool);
        for (auto& t : out.traces) {
          for (auto& c : t.citations) {
            if (c.label != Label::hallucinated) continue;
            plant_sink(c, t, l, h, std::max(0.0, static_cast<double>(c.sink(l, h)) + bas_shift * sigma));
          }
        }
      }
    }
  }

  if (pfs_shift != 0.0) {
    std::vector<std::vector<double>> norms;  // [citation][layer], before planting
    for (const auto& t : out.traces) {
      for (const auto& c : t.citations) norms.push_back(compute_pfs(c));
    }
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> pool;
      for (const auto& n : norms) pool.push_back(n[l]);
      const double sigma = population_std(pool);
      std::size_t i = 0;
      for (auto& t : out.traces) {
        for (auto& c : t.citations) {
          const double n = norms[i++][l];
          if (c.label == Label::hallucinated) plant_ffn(c, l, n, n + pfs_shift * sigma);
        }
      }
    }
  }
  return out;
}

}  // namespace factum::oracle

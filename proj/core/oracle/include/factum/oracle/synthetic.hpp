#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "factum/oracle/toy_transformer.hpp"
#include "factum/scores.hpp"
#include "factum/trace.hpp"

namespace factum::oracle {

// Recipe for a labeled toy dataset with class-conditional shifts. A shift is
// applied to hallucinated citations only and is measured in units of the
// pooled standard deviation of that score component over all citations. A
// negative shift therefore makes correct citations score higher.
struct PlantedSpec {
  std::uint64_t seed = 0;
  std::uint32_t reports = 40;
  std::uint32_t correct = 200;
  std::uint32_t hallucinated = 200;
  std::map<ScoreKind, double> shifts;  // only bas and pfs can be planted
  ToyConfig geometry;                  // geometry.seed is ignored; weights derive from `seed`
  std::uint32_t prompt_length = 32;
  std::uint32_t generated_length = 24;
};

// Throws ConfigError on unknown keys, counts below 1 or unplantable scores.
PlantedSpec parse_planted_spec(const nlohmann::json& j);
nlohmann::json to_json(const PlantedSpec& spec);
void validate_spec(const PlantedSpec& spec);

struct SyntheticDataset {
  std::vector<ReportTrace> traces;  // labels already attached
  LabelFile labels;
};

// Generates toy traces (reports in parallel, one derived seed each), deals a
// shuffled label list over the citations and plants the requested shifts.
// Throws ConfigError when a shift would break a trace invariant.
SyntheticDataset synth_dataset(const PlantedSpec& spec);

}  // namespace factum::oracle

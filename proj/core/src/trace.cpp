#include "factum/trace.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "factum/errors.hpp"

namespace factum {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::correct:
      return "correct";
    case Label::hallucinated:
      return "hallucinated";
    case Label::unlabeled:
      break;
  }
  return "unlabeled";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "correct") return Label::correct;
  if (text == "hallucinated") return Label::hallucinated;
  if (text == "unlabeled") return Label::unlabeled;
  return std::nullopt;
}

std::string Violation::to_string() const {
  std::ostringstream out;
  out << field;
  if (!index.empty()) {
    out << '[';
    for (std::size_t i = 0; i < index.size(); ++i) out << (i ? "," : "") << index[i];
    out << ']';
  }
  out << ": " << reason;
  return out.str();
}

bool operator==(const Violation& a, const Violation& b) {
  return a.field == b.field && a.index == b.index && a.reason == b.reason;
}

bool operator==(const ValidationReport& a, const ValidationReport& b) {
  return a.violations == b.violations;
}

namespace {

class Checker {
 public:
  void add(std::string field, std::vector<std::size_t> index, std::string reason) {
    report_.violations.push_back({std::move(field), std::move(index), std::move(reason)});
  }

  bool shape(const std::string& field, const Tensor& t, const Tensor::Shape& expected) {
    if (t.shape() == expected) return true;
    add(field, {}, "shape " + shape_string(t.shape()) + ", expected " + shape_string(expected));
    return false;
  }

  // Reports the first non-finite entry only; one bad capture tends to poison many.
  void finite(const std::string& field, const Tensor& t) {
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        add(field, {i}, "non-finite value");
        return;
      }
    }
  }

  ValidationReport take() { return std::move(report_); }

 private:
  ValidationReport report_;
};

void check_citation(Checker& check, const ReportTrace& trace, std::size_t c) {
  const CitationRecord& rec = trace.citations[c];
  const std::string prefix = "citations[" + std::to_string(c) + "].";
  const std::uint32_t L = trace.geometry.num_layers;
  const std::uint32_t H = trace.geometry.num_heads;
  const std::uint32_t d = trace.geometry.hidden_dim;
  const std::uint32_t n = trace.prompt_length();

  const bool attn_ok = check.shape(prefix + "attn_rows", rec.attn_rows, {L, H, n});
  const bool sink_ok = check.shape(prefix + "sink", rec.sink, {L, H});
  if (check.shape(prefix + "token_final_hidden", rec.token_final_hidden, {d})) {
    check.finite(prefix + "token_final_hidden", rec.token_final_hidden);
  }
  for (const auto& [name, tensor] : {std::pair{"x_input", &rec.x_input},
                                     std::pair{"x_pre_ffn", &rec.x_pre_ffn},
                                     std::pair{"x_post_ffn", &rec.x_post_ffn}}) {
    if (check.shape(prefix + name, *tensor, {L, d})) check.finite(prefix + name, *tensor);
  }
  if (rec.logitlens_lp) {
    if (check.shape(prefix + "logitlens_lp", *rec.logitlens_lp, {L, 2})) {
      check.finite(prefix + "logitlens_lp", *rec.logitlens_lp);
    }
  }

  auto in_unit = [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; };
  std::vector<bool> sink_in_bounds(static_cast<std::size_t>(L) * H, true);
  if (sink_ok) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t h = 0; h < H; ++h) {
        if (!in_unit(rec.sink(l, h))) {
          check.add(prefix + "sink", {l, h}, "attention weight outside [0, 1]");
          sink_in_bounds[l * H + h] = false;
        }
      }
    }
  }
  if (!attn_ok) return;

  const bool sink_stored = trace.prompt_span.start == 0;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto row = rec.attn_rows.row(l, h);
      bool row_ok = sink_ok && sink_in_bounds[l * H + h];
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (!in_unit(row[j])) {
          check.add(prefix + "attn_rows", {l, h, j}, "attention weight outside [0, 1]");
          row_ok = false;
        }
      }
      if (!row_ok) continue;
      if (sink_stored && row[0] != rec.sink(l, h)) {
        check.add(prefix + "attn_rows", {l, h, 0},
                  "stored weight for position 0 differs from the sink column");
        continue;
      }
      double mass = rec.sink(l, h);
      for (std::size_t j = sink_stored ? 1 : 0; j < row.size(); ++j) mass += row[j];
      if (mass > 1.0 + kAttentionBudgetTolerance) {
        check.add(prefix + "attn_rows", {l, h},
                  "sink + stored attention = " + std::to_string(mass) + " exceeds 1");
      }
    }
  }

  const BaselineScalars& b = rec.baselines;
  if (!std::isfinite(b.token_logprob) || b.token_logprob > 0.0f) {
    check.add(prefix + "baselines.token_logprob", {}, "must be finite and <= 0");
  }
  if (!std::isfinite(b.dist_entropy) || b.dist_entropy < 0.0f) {
    check.add(prefix + "baselines.dist_entropy", {}, "must be finite and >= 0");
  }
  if (!std::isfinite(b.logit_logsumexp)) {
    check.add(prefix + "baselines.logit_logsumexp", {}, "must be finite");
  }
  if (b.p_true && !in_unit(*b.p_true)) {
    check.add(prefix + "baselines.p_true", {}, "must lie in [0, 1]");
  }
}

}  // namespace

ValidationReport validate_report(const ReportTrace& trace) {
  Checker check;
  const ModelGeometry& g = trace.geometry;
  if (g.num_layers == 0 || g.num_heads == 0 || g.hidden_dim == 0) {
    check.add("geometry", {}, "num_layers, num_heads and hidden_dim must be positive");
    return check.take();
  }
  bool spans_ok = true;
  if (trace.prompt_span.start >= trace.prompt_span.end) {
    check.add("prompt_span", {}, "empty or inverted span");
    spans_ok = false;
  }
  if (trace.context_span.start >= trace.context_span.end) {
    check.add("context_span", {}, "empty or inverted span");
    spans_ok = false;
  }
  if (spans_ok && !trace.prompt_span.contains(trace.context_span)) {
    check.add("context_span", {}, "not contained in prompt_span");
  }
  if (!spans_ok) return check.take();

  if (check.shape("prompt_final_hidden", trace.prompt_final_hidden,
                  {trace.prompt_length(), g.hidden_dim})) {
    check.finite("prompt_final_hidden", trace.prompt_final_hidden);
  }
  for (std::size_t c = 0; c < trace.citations.size(); ++c) check_citation(check, trace, c);
  return check.take();
}

LabelFile load_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("label file " + path.string() + ": " + e.what());
  }
  if (doc.value("version", 0) != 1 || !doc.contains("labels") || !doc["labels"].is_array()) {
    throw DataError("label file " + path.string() + ": expected version 1 with a labels array");
  }
  LabelFile file;
  for (const auto& item : doc["labels"]) {
    try {
      const auto text = item.at("label").get<std::string>();
      const auto label = parse_label(text);
      if (!label || *label == Label::unlabeled) {
        throw DataError("label file " + path.string() + ": unknown label '" + text + "'");
      }
      file.entries.push_back(
          {item.at("report_id").get<std::string>(), item.at("ordinal").get<std::uint32_t>(), *label});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("label file " + path.string() + ": " + e.what());
    }
  }
  return file;
}

void save_label_file(const LabelFile& labels, const std::filesystem::path& path) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : labels.entries) {
    items.push_back({{"report_id", e.report_id},
                     {"ordinal", e.ordinal},
                     {"label", std::string(to_string(e.label))}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file " + path.string());
  out << nlohmann::json{{"version", 1}, {"labels", items}}.dump(2) << '\n';
}

std::size_t attach_labels(std::span<ReportTrace> traces, const LabelFile& labels) {
  std::map<std::string, ReportTrace*> by_id;
  for (auto& t : traces) by_id.emplace(t.report_id, &t);

  std::set<std::pair<std::string, std::uint32_t>> seen;
  for (const auto& e : labels.entries) {
    const std::string key = "(" + e.report_id + ", " + std::to_string(e.ordinal) + ")";
    if (!seen.emplace(e.report_id, e.ordinal).second) {
      throw DataError("duplicate label key " + key);
    }
    const auto it = by_id.find(e.report_id);
    if (it == by_id.end()) throw DataError("label key " + key + " names an unknown report");
    if (e.ordinal >= it->second->citations.size()) {
      throw DataError("label key " + key + " is out of range: report has " +
                      std::to_string(it->second->citations.size()) + " citations");
    }
    if (e.label == Label::unlabeled) throw DataError("label key " + key + " has no verdict");
  }

  for (const auto& e : labels.entries) {
    by_id.at(e.report_id)->citations[e.ordinal].label = e.label;
  }
  return labels.entries.size();
}

}  // namespace factum

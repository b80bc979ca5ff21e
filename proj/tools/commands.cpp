#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "factum/classify.hpp"
#include "factum/errors.hpp"
#include "factum/features.hpp"
#include "factum/ftrc.hpp"
#include "factum/oracle/synthetic.hpp"
#include "factum/oracle/toy_transformer.hpp"
#include "factum/parallel.hpp"
#include "factum/random.hpp"
#include "factum/scores.hpp"
#include "factum/stats.hpp"
#include "factum/trace.hpp"

namespace factum::cli {
namespace {

namespace fs = std::filesystem;
using features::Variant;
using nlohmann::json;

constexpr const char* kPositiveClass = "positive class: hallucinated (label 1); correct is label 0";

struct DataOptions {
  std::string manifest;
  std::string labels;
  std::string out;
};

struct RunOptions {
  DataOptions data;
  std::string variant = "factum";
  double k = 100.0;
  double lambda = 1e-2;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::size_t fft_bin = 1;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed for " + path.string());
}

std::string comment_block(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += "# " + l + "\n";
  return s;
}

std::vector<ReportTrace> load_inputs(const DataOptions& o) {
  require_file(o.manifest, "--manifest");
  if (!o.labels.empty()) require_file(o.labels, "--labels");
  auto traces = ftrc::load_dataset(o.manifest);
  if (traces.empty()) throw DataError("manifest lists no reports");
  if (!o.labels.empty()) attach_labels(traces, load_label_file(o.labels));
  return traces;
}

void require_both_classes(std::span<const ScoredCitation> rows) {
  std::size_t pos = 0;
  for (const auto& r : rows) pos += r.label == Label::hallucinated;
  if (pos == 0) throw DataError("dataset has no hallucinated citations; both classes are required");
  if (pos == rows.size()) throw DataError("dataset has no correct citations; both classes are required");
}

void validate_run_options(const RunOptions& o) {
  if (!(o.k > 0.0 && o.k <= 100.0)) throw ConfigError("--k must be in (0, 100]");
  if (!std::isfinite(o.lambda) || o.lambda < 0.0) throw ConfigError("--lambda must be finite and >= 0");
  if (o.folds < 2) throw ConfigError("--folds must be at least 2");
  if (o.fft_bin < 1) throw ConfigError("--fft-bin must be at least 1");
}

std::string echo_command(const std::string& command, const RunOptions& o, bool with_model) {
  std::ostringstream s;
  s << "factum " << command << " --manifest " << o.data.manifest;
  if (!o.data.labels.empty()) s << " --labels " << o.data.labels;
  s << " --variant " << o.variant << " --k " << o.k;
  if (with_model) s << " --lambda " << o.lambda << " --folds " << o.folds;
  s << " --seed " << o.seed << " --fft-bin " << o.fft_bin;
  return s.str();
}

// ---- validate ---------------------------------------------------------------

int cmd_validate(const DataOptions& o, std::ostream& out, std::ostream& err) {
  require_file(o.manifest, "--manifest");
  const auto manifest = ftrc::load_manifest(o.manifest);
  if (manifest.reports.empty()) {
    err << "error: " << o.manifest << ": no reports\n";
    return kExitData;
  }
  const fs::path base = fs::path(o.manifest).parent_path();
  std::vector<ReportTrace> traces(manifest.reports.size());
  std::vector<std::string> problems(manifest.reports.size());
  parallel_for(manifest.reports.size(), [&](std::size_t i) {
    const auto& entry = manifest.reports[i];
    const fs::path path = base / entry.path;
    try {
      traces[i] = ftrc::read_report(path);
      if (traces[i].report_id != entry.report_id) {
        problems[i] = path.string() + ": report_id '" + traces[i].report_id + "' does not match manifest entry '" +
                      entry.report_id + "'";
      }
    } catch (const ftrc::FormatError& e) {
      problems[i] = path.string() + ": " + std::string(ftrc::to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      problems[i] = path.string() + ": " + e.what();
    }
  });
  std::size_t bad = 0, citations = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (!problems[i].empty()) {
      err << "invalid: " << problems[i] << "\n";
      ++bad;
    } else {
      citations += traces[i].citations.size();
    }
  }
  if (bad == 0 && !o.labels.empty()) {
    try {
      attach_labels(traces, load_label_file(o.labels));
    } catch (const DataError& e) {
      err << "invalid: " << o.labels << ": " << e.what() << "\n";
      ++bad;
    }
  }
  if (bad) {
    err << bad << " of " << manifest.reports.size() << " reports failed validation\n";
    return kExitData;
  }
  out << "ok: " << manifest.reports.size() << " reports, " << citations << " citations\n";
  return kExitOk;
}

// ---- score ------------------------------------------------------------------

int cmd_score(const DataOptions& o, std::ostream& out) {
  const auto traces = load_inputs(o);
  const fs::path dir = prepare_out(o.out);

  struct Item {
    const ReportTrace* trace;
    std::size_t ordinal;
  };
  std::vector<Item> items;
  for (const auto& t : traces) {
    for (std::size_t c = 0; c < t.citations.size(); ++c) items.push_back({&t, c});
  }
  std::vector<ScoreSet> sets(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    sets[i] = compute_scores(items[i].trace->citations[items[i].ordinal], *items[i].trace);
  });

  std::ostringstream csv;
  csv << comment_block({"factum score --manifest " + o.manifest + (o.labels.empty() ? "" : " --labels " + o.labels),
                        kPositiveClass, "head is -1 for layer-level scores and confidence scalars",
                        "flag is 1 where a zero-norm guard set the value to 0"});
  csv << "report_id,ordinal,label,score,layer,head,value,flag\n";
  json doc = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = *items[i].trace;
    const auto& rec = t.citations[items[i].ordinal];
    const auto& s = sets[i];
    const std::string prefix =
        t.report_id + "," + std::to_string(items[i].ordinal) + "," + std::string(to_string(rec.label)) + ",";
    std::set<std::tuple<int, int, int>> flagged;
    for (const auto& f : s.flags) flagged.insert({static_cast<int>(f.score), f.layer, f.head});
    json entry{{"report_id", t.report_id},
               {"ordinal", items[i].ordinal},
               {"label", std::string(to_string(rec.label))}};
    for (const auto kind : kAllScores) {
      if (kind == ScoreKind::pks && !s.has_pks()) continue;
      const auto name = std::string(to_string(kind));
      if (is_head_level(kind)) {
        const HeadGrid& g = kind == ScoreKind::cas ? s.cas : kind == ScoreKind::bas ? s.bas : s.ecs;
        json grid = json::array();
        for (std::size_t l = 0; l < g.layers; ++l) {
          json row = json::array();
          for (std::size_t h = 0; h < g.heads; ++h) {
            const bool flag = flagged.contains({static_cast<int>(kind), static_cast<int>(l), static_cast<int>(h)});
            csv << prefix << name << "," << l << "," << h << "," << num(g(l, h)) << "," << flag << "\n";
            row.push_back(g(l, h));
          }
          grid.push_back(std::move(row));
        }
        entry[name] = std::move(grid);
      } else {
        const auto& v = kind == ScoreKind::pfs ? s.pfs : kind == ScoreKind::pas ? s.pas : s.pks;
        for (std::size_t l = 0; l < v.size(); ++l) {
          const bool flag = flagged.contains({static_cast<int>(kind), static_cast<int>(l), -1});
          csv << prefix << name << "," << l << ",-1," << num(v[l]) << "," << flag << "\n";
        }
        entry[name] = v;
      }
    }
    const auto& c = s.confidence;
    std::vector<std::pair<std::string, double>> scalars = {
        {"perplexity", c.perplexity}, {"ln_entropy", c.ln_entropy}, {"energy", c.energy}};
    if (c.p_true) scalars.emplace_back("p_true", *c.p_true);
    for (const auto& [name, v] : scalars) {
      csv << prefix << name << ",-1,-1," << num(v) << ",0\n";
      entry[name] = v;
    }
    json flags = json::array();
    for (const auto& f : s.flags) flags.push_back({{"score", to_string(f.score)}, {"layer", f.layer}, {"head", f.head}});
    entry["flags"] = std::move(flags);
    doc.push_back(std::move(entry));
  }
  write_text(dir / "scores.csv", csv.str());
  write_text(dir / "scores.json", doc.dump(1) + "\n");
  out << "scored " << items.size() << " citations into " << dir.string() << "\n";
  return kExitOk;
}

// ---- run --------------------------------------------------------------------

struct ScoredData {
  std::vector<ScoredCitation> rows;
  std::vector<std::string> groups;
  std::vector<int> labels;
};

ScoredData score_inputs(const DataOptions& o) {
  const auto traces = load_inputs(o);
  ScoredData d;
  d.rows = score_dataset(traces);
  require_both_classes(d.rows);
  for (const auto& r : d.rows) {
    d.groups.push_back(r.key.report_id);
    d.labels.push_back(features::label_value(r.label));
  }
  return d;
}

std::vector<ScoredCitation> pick(const ScoredData& d, std::span<const std::size_t> rows) {
  std::vector<ScoredCitation> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(d.rows[r]);
  return out;
}

features::FittedPipeline fit_on(const ScoredData& d, std::span<const std::size_t> rows, Variant v,
                                const features::PipelineConfig& cfg) {
  std::vector<ScoreSet> sets;
  std::vector<int> y;
  for (const auto r : rows) {
    sets.push_back(d.rows[r].scores);
    y.push_back(d.labels[r]);
  }
  return features::fit_pipeline(v, cfg, sets, y);
}

json pipeline_detail(const features::FittedPipeline& p) {
  json retained = json::object();
  for (const auto& m : p.masks) retained[std::string(to_string(m.score))] = m.count;
  return {{"chosen", p.chosen}, {"retained_components", retained}};
}

classify::CVReport run_variant(const ScoredData& d, const classify::FoldPlan& plan, Variant v, const RunOptions& o) {
  const features::PipelineConfig cfg{o.k, o.fft_bin};
  const classify::FeatureBuilder builder = [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
    const auto fitted = fit_on(d, train, v, cfg);
    return classify::FoldData{features::assemble(pick(d, train), fitted), features::assemble(pick(d, test), fitted),
                              pipeline_detail(fitted)};
  };
  classify::CvOptions cv;
  cv.lambda = o.lambda;
  cv.seed = o.seed;
  cv.classifier_free = features::is_classifier_free(v);
  cv.score_sign = v == Variant::p_true ? -1.0 : 1.0;
  return classify::run_cv(builder, plan, d.groups, cv);
}

// Why a variant cannot run on this dataset, or nothing.
std::optional<std::string> missing_input(const ScoredData& d, Variant v) {
  for (const auto& r : d.rows) {
    if (v == Variant::ecs_pks && !r.scores.has_pks()) return "traces have no logit-lens block";
    if (v == Variant::p_true && !r.scores.confidence.p_true) return "traces have no P(True) scalar";
  }
  return std::nullopt;
}

int cmd_run(RunOptions o, std::ostream& out) {
  validate_run_options(o);
  std::vector<Variant> variants;
  const bool all = o.variant == "all";
  if (all) {
    variants.assign(std::begin(features::kAllVariants), std::end(features::kAllVariants));
  } else {
    const auto v = features::parse_variant(o.variant);
    if (!v) throw ConfigError("unknown --variant '" + o.variant + "'");
    variants.push_back(*v);
  }
  const ScoredData d = score_inputs(o.data);
  const fs::path dir = prepare_out(o.data.out);
  const auto plan = classify::make_folds(d.groups, d.labels, o.folds, o.seed);

  std::vector<std::pair<Variant, classify::CVReport>> reports;
  json skipped = json::object();
  for (const auto v : variants) {
    if (all) {
      if (const auto why = missing_input(d, v)) {
        skipped[std::string(features::to_string(v))] = *why;
        continue;
      }
    }
    reports.emplace_back(v, run_variant(d, plan, v, o));
  }

  // Paired two-tailed t-tests of fold AUCs against FACTUM, BH-corrected.
  const classify::CVReport* reference = nullptr;
  for (const auto& [v, r] : reports) {
    if (v == Variant::factum) reference = &r;
  }
  std::vector<std::optional<double>> raw(reports.size());
  std::vector<double> tested;
  std::vector<std::size_t> tested_index;
  if (reference) {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].first == Variant::factum) continue;
      std::vector<double> a, b;
      for (std::size_t f = 0; f < plan.n_folds; ++f) {
        const auto& x = reports[i].second.folds[f].metrics.auc;
        const auto& y = reference->folds[f].metrics.auc;
        if (x && y) {
          a.push_back(*x);
          b.push_back(*y);
        }
      }
      if (a.size() < 2) continue;
      raw[i] = stats::t_test_two_tailed(a, b).p;
      tested.push_back(*raw[i]);
      tested_index.push_back(i);
    }
  }
  std::vector<std::optional<double>> adjusted(reports.size());
  if (!tested.empty()) {
    const auto bh = stats::bh_correct(tested);
    for (std::size_t j = 0; j < tested_index.size(); ++j) adjusted[tested_index[j]] = bh.adjusted[j];
  }

  const std::vector<std::string> header = {
      echo_command("run", o, true),
      kPositiveClass,
      "cross-validation: " + std::to_string(o.folds) + " report-level folds, balanced by undersampling, seed " +
          std::to_string(o.seed),
      "classifier: logistic regression, lambda " + num(o.lambda) + ", threshold 0.5",
      "classifier-free rows: score = sign * raw scalar (P(True) negated), threshold at the training-fold median",
      "significance: paired two-tailed t-test of fold AUCs against FACTUM, BH-corrected across methods"};

  std::ostringstream csv;
  csv << comment_block(header);
  csv << "method,variant,classifier,auc,pcc,precision,recall,f1,auc_folds,p_vs_factum,p_adj_vs_factum,tier\n";
  json variants_json = json::object();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& [v, r] = reports[i];
    const bool free = features::is_classifier_free(v);
    csv << '"' << features::display_name(v) << "\"," << features::to_string(v) << "," << (free ? "none" : "logreg")
        << "," << (r.mean.auc_folds ? num(r.mean.auc) : "") << "," << num(r.mean.pcc) << "," << num(r.mean.precision)
        << "," << num(r.mean.recall) << "," << num(r.mean.f1) << "," << r.mean.auc_folds << ","
        << (raw[i] ? num(*raw[i]) : "") << "," << (adjusted[i] ? num(*adjusted[i]) : "") << ","
        << (adjusted[i] ? stats::to_string(stats::tier_for(*adjusted[i])) : "") << "\n";
    json item = classify::to_json(r);
    item["display_name"] = std::string(features::display_name(v));
    item["classifier_free"] = free;
    if (raw[i]) item["t_test_vs_factum"] = {{"p", *raw[i]}, {"p_adjusted", *adjusted[i]}};
    variants_json[std::string(features::to_string(v))] = std::move(item);
  }
  write_text(dir / "table1.csv", csv.str());

  json folds = json::array();
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    folds.push_back({{"fold", f},
                     {"reports", plan.fold_reports[f]},
                     {"hallucinated", plan.fold_positives[f]},
                     {"citations", plan.fold_citations[f]}});
  }
  const json report{{"config",
                     {{"command", header[0]},
                      {"manifest", o.data.manifest},
                      {"labels", o.data.labels},
                      {"variant", o.variant},
                      {"k", o.k},
                      {"lambda", o.lambda},
                      {"folds", o.folds},
                      {"seed", o.seed},
                      {"fft_bin", o.fft_bin}}},
                    {"positive_class", "hallucinated"},
                    {"t_test_unit", "fold-level AUC pairs"},
                    {"fold_plan", folds},
                    {"variants", variants_json},
                    {"skipped", skipped}};
  write_text(dir / "cv_report.json", report.dump(2) + "\n");

  // Inspection exports: the pipeline refitted on every labeled row.
  const Variant inspect = reports.empty() ? variants.front() : reports.front().first;
  std::vector<std::size_t> every(d.rows.size());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;
  const auto fitted = fit_on(d, every, inspect, {o.k, o.fft_bin});
  auto fheader = header;
  fheader.push_back("features of variant " + std::string(features::to_string(inspect)) +
                    " fitted on all labeled rows; cross-validation refits them per fold");
  features::write_features_csv(features::assemble(d.rows, fitted), dir / "features.csv", fheader);
  write_text(dir / "ranking.json", features::ranking_to_json(fitted.ranking).dump(2) + "\n");

  for (const auto& [v, r] : reports) {
    out << features::display_name(v) << ": mean AUC " << (r.mean.auc_folds ? num(r.mean.auc) : "n/a") << " over "
        << r.mean.auc_folds << " folds\n";
  }
  return kExitOk;
}

// ---- signatures -------------------------------------------------------------

int cmd_signatures(RunOptions o, std::ostream& out) {
  validate_run_options(o);
  const auto v = features::parse_variant(o.variant);
  if (!v) throw ConfigError("unknown --variant '" + o.variant + "'");
  if (features::is_classifier_free(*v)) throw ConfigError("signatures need a mechanistic variant, not " + o.variant);
  const ScoredData d = score_inputs(o.data);
  const fs::path dir = prepare_out(o.data.out);

  // Features are chosen on one half of the reports and tested on the other, so
  // the selection step cannot manufacture significance.
  const auto split = classify::make_folds(d.groups, d.labels, 2, o.seed);
  const auto select_rows = split.test_rows(0);
  const auto test_rows = split.test_rows(1);
  const auto fitted = fit_on(d, select_rows, *v, {o.k, o.fft_bin});
  const auto m = features::assemble(pick(d, test_rows), fitted);

  std::vector<stats::ScoreSample> samples;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const std::string& name = m.columns[c];
    samples.push_back({name.substr(0, name.find('.')), name, m.column(c)});
  }
  const auto table = stats::signature_table(samples, m.labels);

  std::ostringstream csv;
  csv << comment_block(
      {echo_command("signatures", o, false), kPositiveClass,
       "feature selection on " + std::to_string(split.fold_reports[0].size()) + " reports (" +
           std::to_string(select_rows.size()) + " citations), tests on the other " +
           std::to_string(split.fold_reports[1].size()) + " reports (" + std::to_string(test_rows.size()) +
           " citations)",
       "one-sided Mann-Whitney U in both directions; the smaller p is doubled, then BH-corrected across scores",
       "direction: up = correct citations score higher; only the logistic-regression feature set is available"});
  csv << "score,feature,log_reg,direction,tier,p_correct_greater,p_correct_less,raw_p,adjusted_p\n";
  for (const auto& r : table.rows) {
    const bool sig = r.tier != stats::Tier::ns;
    const std::string cell = sig ? std::string(stats::arrow(r.direction)) + " " + stats::to_string(r.tier) : "n.s.";
    const char* dir_name = r.direction == stats::Direction::correct_higher  ? "up"
                           : r.direction == stats::Direction::correct_lower ? "down"
                                                                           : "none";
    csv << r.score << "," << r.feature << "," << cell << "," << dir_name << "," << stats::to_string(r.tier) << ","
        << num(r.p_greater) << "," << num(r.p_less) << "," << num(r.raw_p) << "," << num(r.adjusted_p) << "\n";
    out << r.score << " (" << r.feature << "): " << cell << "\n";
  }
  write_text(dir / "table2.csv", csv.str());
  return kExitOk;
}

// ---- gen-synthetic and toy-trace --------------------------------------------

int cmd_gen_synthetic(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  require_file(spec_path, "--spec");
  std::ifstream in(spec_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + spec_path + ": " + e.what());
  }
  const auto spec = oracle::parse_planted_spec(j);
  const fs::path dir = prepare_out(out_dir);
  const auto ds = oracle::synth_dataset(spec);
  const auto manifest = ftrc::write_dataset(ds.traces, dir);
  save_label_file(ds.labels, dir / "labels.json");
  write_text(dir / "synthetic_spec.json", oracle::to_json(spec).dump(2) + "\n");
  out << "wrote " << ds.traces.size() << " reports, " << ds.labels.entries.size() << " labeled citations; manifest "
      << manifest.string() << "\n";
  return kExitOk;
}

struct ToyOptions {
  std::uint64_t seed = 0;
  std::uint32_t prompt_length = 24;
  std::vector<std::uint32_t> positions{24, 27};
  std::uint32_t layers = 4, heads = 2, hidden_dim = 16, vocab = 64;
  bool no_lens = false;
  std::string out;
};

int cmd_toy_trace(const ToyOptions& o, std::ostream& out) {
  oracle::ToyConfig cfg;
  cfg.num_layers = o.layers;
  cfg.num_heads = o.heads;
  cfg.hidden_dim = o.hidden_dim;
  cfg.vocab = o.vocab;
  cfg.seed = derive_seed(o.seed, 0);
  const auto weights = oracle::make_toy_weights(cfg);
  oracle::TraceLayout layout;
  layout.prompt_length = o.prompt_length;
  layout.logit_lens = !o.no_lens;
  layout.report_id = "toy-" + std::to_string(o.seed);
  ReportTrace trace;
  try {
    trace = oracle::toy_forward_trace(weights, layout, o.positions, derive_seed(o.seed, 1));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = prepare_out(o.out);
  const auto manifest = ftrc::write_dataset(std::span<const ReportTrace>(&trace, 1), dir);
  out << "wrote toy trace with " << trace.citations.size() << " citations; manifest " << manifest.string() << "\n";
  return kExitOk;
}

void add_data_options(CLI::App* cmd, DataOptions& o, bool need_out) {
  cmd->add_option("--manifest", o.manifest, "Dataset manifest.json")->required();
  cmd->add_option("--labels", o.labels, "Label file overriding embedded labels");
  if (need_out) cmd->add_option("--out", o.out, "Output directory")->required();
}

void add_model_options(CLI::App* cmd, RunOptions& o, bool with_model) {
  cmd->add_option("--variant", o.variant, "factum, cas_pfs, ecs_pks, perplexity, ln_entropy, energy, p_true" +
                                              std::string(with_model ? " or all" : ""));
  cmd->add_option("--k", o.k, "Percent of components retained per score, in (0, 100]");
  cmd->add_option("--seed", o.seed, "Seed for folds, balancing and splits");
  cmd->add_option("--fft-bin", o.fft_bin, "DFT bin used by the fft summary");
  if (with_model) {
    cmd->add_option("--lambda", o.lambda, "L2 penalty of the logistic regression");
    cmd->add_option("--folds", o.folds, "Number of report-level folds");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"factum: citation hallucination detection from transformer internals"};
  app.name("factum");
  app.require_subcommand(1);

  DataOptions validate_opts;
  auto* validate = app.add_subcommand("validate", "Check every trace of a dataset");
  add_data_options(validate, validate_opts, false);

  DataOptions score_opts;
  auto* score = app.add_subcommand("score", "Export per-citation scores");
  add_data_options(score, score_opts, true);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Cross-validated detection for one or all variants");
  add_data_options(run, run_opts.data, true);
  add_model_options(run, run_opts, true);

  RunOptions sig_opts;
  auto* sig = app.add_subcommand("signatures", "Direction and significance of each mechanistic score");
  add_data_options(sig, sig_opts.data, true);
  add_model_options(sig, sig_opts, false);

  std::string spec_path, synth_out;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a planted-signal toy dataset");
  gen->add_option("--spec", spec_path, "Planted spec JSON")->required();
  gen->add_option("--out", synth_out, "Output directory")->required();

  ToyOptions toy_opts;
  auto* toy = app.add_subcommand("toy-trace", "Write one toy-transformer trace");
  toy->add_option("--seed", toy_opts.seed);
  toy->add_option("--prompt-length", toy_opts.prompt_length);
  toy->add_option("--positions", toy_opts.positions, "Citation positions, each >= prompt length")->delimiter(',');
  toy->add_option("--layers", toy_opts.layers);
  toy->add_option("--heads", toy_opts.heads);
  toy->add_option("--hidden-dim", toy_opts.hidden_dim);
  toy->add_option("--vocab", toy_opts.vocab);
  toy->add_flag("--no-lens", toy_opts.no_lens, "Omit the logit-lens block");
  toy->add_option("--out", toy_opts.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate) return cmd_validate(validate_opts, out, err);
    if (*score) return cmd_score(score_opts, out);
    if (*run) return cmd_run(run_opts, out);
    if (*sig) return cmd_signatures(sig_opts, out);
    if (*gen) return cmd_gen_synthetic(spec_path, synth_out, out);
    if (*toy) return cmd_toy_trace(toy_opts, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ftrc::FormatError& e) {
    err << "error: " << ftrc::to_string(e.kind()) << ": " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace factum::cli

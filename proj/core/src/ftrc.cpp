#include "factum/ftrc.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "factum/parallel.hpp"

namespace factum::ftrc {
namespace {

using json = nlohmann::json;

constexpr std::size_t kPreambleBytes = 10;  // magic + version + header_len
constexpr std::size_t kTrailerBytes = 4;
constexpr std::uint8_t kMaxRank = 4;

std::string tag_name(std::uint32_t tag) {
  std::string name(4, '?');
  for (int i = 0; i < 4; ++i) {
    const char c = static_cast<char>((tag >> (8 * i)) & 0xff);
    name[i] = (c >= 0x20 && c < 0x7f) ? c : '?';
  }
  return name;
}

std::uint32_t tag_value(const std::string& name) {
  if (name.size() != 4) return 0;
  std::uint32_t tag = 0;
  for (int i = 3; i >= 0; --i) tag = (tag << 8) | static_cast<std::uint8_t>(name[i]);
  return tag;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

struct PendingBlock {
  BlockTag tag;
  int citation;
  const Tensor* tensor;
  std::string field;
};

std::size_t block_bytes(const Tensor& t) { return 5 + 4 * t.rank() + 4 * t.size(); }

void append_block(std::vector<std::uint8_t>& out, BlockTag tag, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(tag));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (const auto d : t.shape()) put_u32(out, d);
  for (const float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

Tensor baseline_tensor(const BaselineScalars& b) {
  std::vector<float> values{b.token_logprob, b.dist_entropy, b.logit_logsumexp};
  if (b.p_true) values.push_back(*b.p_true);
  const auto n = static_cast<std::uint32_t>(values.size());
  return Tensor({n}, std::move(values));
}

// Locates block payloads inside a verified byte buffer.
struct BlockView {
  std::uint32_t tag;
  int citation;
  Tensor::Shape shape;
  std::size_t payload_at;
};

Tensor materialize(std::span<const std::uint8_t> bytes, const BlockView& view) {
  Tensor t(view.shape);
  auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, view.payload_at + 4 * i));
    if (!std::isfinite(values[i])) {
      throw FormatError(ErrorKind::non_finite, "block " + tag_name(view.tag) + " of citation " +
                                                   std::to_string(view.citation) + " holds a non-finite value");
    }
  }
  return t;
}

template <class T>
T header_field(const json& header, const char* key) {
  try {
    return header.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(ErrorKind::bad_header, std::string("header field '") + key + "': " + e.what());
  }
}

TokenSpan span_field(const json& header, const char* key) {
  const auto pair = header_field<std::vector<std::uint32_t>>(header, key);
  if (pair.size() != 2) {
    throw FormatError(ErrorKind::bad_header, std::string("header field '") + key + "' must be [start, end]");
  }
  return {pair[0], pair[1]};
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::bad_magic: return "bad_magic";
    case ErrorKind::bad_version: return "bad_version";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::trailing_data: return "trailing_data";
    case ErrorKind::crc_mismatch: return "crc_mismatch";
    case ErrorKind::bad_header: return "bad_header";
    case ErrorKind::offset_mismatch: return "offset_mismatch";
    case ErrorKind::dims_mismatch: return "dims_mismatch";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::invalid_trace: return "invalid_trace";
  }
  return "unknown";
}

FormatError::FormatError(ErrorKind kind, const std::string& message)
    : DataError("ftrc " + std::string(to_string(kind)) + ": " + message), kind_(kind) {}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes 32-bit lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t at = 0; at < bytes.size(); at += kChunk) {
    const auto n = static_cast<uInt>(std::min(kChunk, bytes.size() - at));
    crc = ::crc32(crc, bytes.data() + at, n);
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_report(const ReportTrace& trace) {
  std::vector<PendingBlock> blocks;
  blocks.push_back({BlockTag::prompt_hidden, -1, &trace.prompt_final_hidden, "prompt_final_hidden"});
  std::vector<Tensor> baselines;
  baselines.reserve(trace.citations.size());
  for (std::size_t c = 0; c < trace.citations.size(); ++c) {
    const auto& rec = trace.citations[c];
    const int ci = static_cast<int>(c);
    const std::string prefix = "citations[" + std::to_string(c) + "].";
    baselines.push_back(baseline_tensor(rec.baselines));
    blocks.push_back({BlockTag::attn_rows, ci, &rec.attn_rows, prefix + "attn_rows"});
    blocks.push_back({BlockTag::sink, ci, &rec.sink, prefix + "sink"});
    blocks.push_back({BlockTag::token_hidden, ci, &rec.token_final_hidden, prefix + "token_final_hidden"});
    blocks.push_back({BlockTag::x_input, ci, &rec.x_input, prefix + "x_input"});
    blocks.push_back({BlockTag::x_pre_ffn, ci, &rec.x_pre_ffn, prefix + "x_pre_ffn"});
    blocks.push_back({BlockTag::x_post_ffn, ci, &rec.x_post_ffn, prefix + "x_post_ffn"});
    blocks.push_back({BlockTag::baselines, ci, &baselines.back(), prefix + "baselines"});
    if (rec.logitlens_lp) {
      blocks.push_back({BlockTag::logit_lens, ci, &*rec.logitlens_lp, prefix + "logitlens_lp"});
    }
  }

  for (const auto& block : blocks) {
    for (const float v : block.tensor->values()) {
      if (!std::isfinite(v)) {
        throw FormatError(ErrorKind::non_finite, "refusing to write non-finite value in " + block.field);
      }
    }
    if (block.tensor->rank() == 0 || block.tensor->rank() > kMaxRank) {
      throw FormatError(ErrorKind::invalid_trace, block.field + " has unsupported rank");
    }
  }
  if (const auto report = validate_report(trace); !report.ok()) {
    throw FormatError(ErrorKind::invalid_trace,
                      "trace '" + trace.report_id + "' fails validation: " +
                          report.violations.front().to_string());
  }

  json header;
  header["report_id"] = trace.report_id;
  header["geometry"] = {{"num_layers", trace.geometry.num_layers},
                        {"num_heads", trace.geometry.num_heads},
                        {"hidden_dim", trace.geometry.hidden_dim},
                        {"model_id", trace.geometry.model_id}};
  header["context_span"] = {trace.context_span.start, trace.context_span.end};
  header["prompt_span"] = {trace.prompt_span.start, trace.prompt_span.end};
  header["citation_count"] = trace.citations.size();
  json citations = json::array();
  for (const auto& rec : trace.citations) {
    citations.push_back({{"citation_pos", rec.citation_pos},
                         {"cited_doc_id", rec.cited_doc_id},
                         {"label", std::string(to_string(rec.label))},
                         {"has_p_true", rec.baselines.p_true.has_value()},
                         {"has_logit_lens", rec.logitlens_lp.has_value()}});
  }
  header["citations"] = std::move(citations);
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& block : blocks) {
    const std::size_t n = block_bytes(*block.tensor);
    table.push_back({{"tag", tag_name(static_cast<std::uint32_t>(block.tag))},
                     {"citation", block.citation},
                     {"offset", offset},
                     {"bytes", n}});
    offset += n;
  }
  header["blocks"] = std::move(table);
  header["blocks_bytes"] = offset;
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreambleBytes + header_text.size() + offset + kTrailerBytes);
  for (const char c : {'F', 'T', 'R', 'C'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out.insert(out.end(), header_text.begin(), header_text.end());
  for (const auto& block : blocks) append_block(out, block.tag, *block.tensor);
  put_u32(out, crc32(out));
  return out;
}

ReportTrace decode_report(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleBytes) {
    throw FormatError(ErrorKind::truncated, "file shorter than the fixed preamble");
  }
  if (std::memcmp(bytes.data(), "FTRC", 4) != 0) {
    throw FormatError(ErrorKind::bad_magic, "magic is '" + tag_name(get_u32(bytes, 0)) + "'");
  }
  if (const auto version = get_u16(bytes, 4); version != kVersion) {
    throw FormatError(ErrorKind::bad_version, "version " + std::to_string(version) + " is not supported");
  }
  const std::size_t header_len = get_u32(bytes, 6);
  if (header_len > bytes.size() - kPreambleBytes) {
    throw FormatError(ErrorKind::truncated, "header extends past end of file");
  }

  auto crc_ok = [&] {
    if (bytes.size() < kPreambleBytes + kTrailerBytes) return false;
    const auto body = bytes.first(bytes.size() - kTrailerBytes);
    return crc32(body) == get_u32(bytes, bytes.size() - kTrailerBytes);
  };

  json header;
  try {
    const char* text = reinterpret_cast<const char*>(bytes.data() + kPreambleBytes);
    header = json::parse(text, text + header_len);
  } catch (const json::exception& e) {
    if (!crc_ok()) throw FormatError(ErrorKind::crc_mismatch, "checksum does not match contents");
    throw FormatError(ErrorKind::bad_header, e.what());
  }
  if (!header.is_object()) {
    if (!crc_ok()) throw FormatError(ErrorKind::crc_mismatch, "checksum does not match contents");
    throw FormatError(ErrorKind::bad_header, "header is not a JSON object");
  }

  const auto blocks_bytes = header_field<std::uint64_t>(header, "blocks_bytes");
  const std::size_t blocks_at = kPreambleBytes + header_len;
  const std::size_t available = bytes.size() - blocks_at;
  if (blocks_bytes > std::numeric_limits<std::size_t>::max() / 2 ||
      available < blocks_bytes + kTrailerBytes) {
    throw FormatError(ErrorKind::truncated, "file ends before the declared " +
                                                std::to_string(blocks_bytes) + " block bytes and trailer");
  }
  if (available > blocks_bytes + kTrailerBytes) {
    throw FormatError(ErrorKind::trailing_data,
                      std::to_string(available - blocks_bytes - kTrailerBytes) + " bytes after trailer");
  }
  if (!crc_ok()) throw FormatError(ErrorKind::crc_mismatch, "checksum does not match contents");

  ReportTrace trace;
  trace.report_id = header_field<std::string>(header, "report_id");
  const json geometry = header_field<json>(header, "geometry");
  trace.geometry.num_layers = header_field<std::uint32_t>(geometry, "num_layers");
  trace.geometry.num_heads = header_field<std::uint32_t>(geometry, "num_heads");
  trace.geometry.hidden_dim = header_field<std::uint32_t>(geometry, "hidden_dim");
  trace.geometry.model_id = header_field<std::string>(geometry, "model_id");
  trace.context_span = span_field(header, "context_span");
  trace.prompt_span = span_field(header, "prompt_span");

  const auto citation_meta = header_field<json>(header, "citations");
  const auto citation_count = header_field<std::size_t>(header, "citation_count");
  if (!citation_meta.is_array() || citation_meta.size() != citation_count) {
    throw FormatError(ErrorKind::bad_header, "citation table does not match citation_count");
  }

  // Walk the block table against the bytes before allocating any tensor.
  const auto table = header_field<json>(header, "blocks");
  if (!table.is_array()) throw FormatError(ErrorKind::bad_header, "blocks is not an array");
  std::vector<BlockView> views;
  views.reserve(table.size());
  std::size_t cursor = 0;
  for (const auto& entry : table) {
    const auto tag = tag_value(header_field<std::string>(entry, "tag"));
    const auto citation = header_field<int>(entry, "citation");
    const auto offset = header_field<std::uint64_t>(entry, "offset");
    const auto length = header_field<std::uint64_t>(entry, "bytes");
    if (offset != cursor || length > blocks_bytes - cursor || length < 5) {
      throw FormatError(ErrorKind::offset_mismatch, "block " + tag_name(tag) + " declared at offset " +
                                                        std::to_string(offset) + ", found at " +
                                                        std::to_string(cursor));
    }
    const std::size_t at = blocks_at + cursor;
    if (get_u32(bytes, at) != tag) {
      throw FormatError(ErrorKind::offset_mismatch, "block at offset " + std::to_string(cursor) +
                                                        " has tag " + tag_name(get_u32(bytes, at)) +
                                                        ", header says " + tag_name(tag));
    }
    const std::uint8_t rank = bytes[at + 4];
    if (rank == 0 || rank > kMaxRank || 5 + 4 * std::size_t{rank} > length) {
      throw FormatError(ErrorKind::dims_mismatch, "block " + tag_name(tag) + " has rank " + std::to_string(rank));
    }
    BlockView view{tag, citation, {}, at + 5 + 4 * std::size_t{rank}};
    std::uint64_t count = 1;
    for (std::size_t r = 0; r < rank; ++r) {
      const std::uint32_t d = get_u32(bytes, at + 5 + 4 * r);
      view.shape.push_back(d);
      count *= d;
      if (count > blocks_bytes) break;  // cannot fit; reported below
    }
    if (count > blocks_bytes || 5 + 4 * std::uint64_t{rank} + 4 * count != length) {
      throw FormatError(ErrorKind::dims_mismatch, "block " + tag_name(tag) + " dims " +
                                                      shape_string(view.shape) + " do not match its " +
                                                      std::to_string(length) + " declared bytes");
    }
    views.push_back(std::move(view));
    cursor += length;
  }
  if (cursor != blocks_bytes) {
    throw FormatError(ErrorKind::offset_mismatch, "block table covers " + std::to_string(cursor) +
                                                      " of " + std::to_string(blocks_bytes) + " bytes");
  }

  trace.citations.resize(citation_count);
  for (std::size_t c = 0; c < citation_count; ++c) {
    const json& meta = citation_meta[c];
    auto& rec = trace.citations[c];
    rec.citation_pos = header_field<std::uint32_t>(meta, "citation_pos");
    rec.cited_doc_id = header_field<std::int32_t>(meta, "cited_doc_id");
    const auto label = parse_label(header_field<std::string>(meta, "label"));
    if (!label) throw FormatError(ErrorKind::bad_header, "unknown label in citation " + std::to_string(c));
    rec.label = *label;
  }

  std::set<std::pair<std::uint32_t, int>> seen;
  bool have_prompt_hidden = false;
  for (const auto& view : views) {
    if (!seen.emplace(view.tag, view.citation).second) {
      throw FormatError(ErrorKind::bad_header, "duplicate block " + tag_name(view.tag));
    }
    if (view.citation < -1 || view.citation >= static_cast<int>(citation_count)) {
      throw FormatError(ErrorKind::bad_header, "block " + tag_name(view.tag) + " names citation " +
                                                   std::to_string(view.citation));
    }
    if (view.citation == -1) {
      if (view.tag != static_cast<std::uint32_t>(BlockTag::prompt_hidden)) {
        throw FormatError(ErrorKind::bad_header, "unexpected report-level block " + tag_name(view.tag));
      }
      trace.prompt_final_hidden = materialize(bytes, view);
      have_prompt_hidden = true;
      continue;
    }
    auto& rec = trace.citations[static_cast<std::size_t>(view.citation)];
    switch (static_cast<BlockTag>(view.tag)) {
      case BlockTag::attn_rows: rec.attn_rows = materialize(bytes, view); break;
      case BlockTag::sink: rec.sink = materialize(bytes, view); break;
      case BlockTag::token_hidden: rec.token_final_hidden = materialize(bytes, view); break;
      case BlockTag::x_input: rec.x_input = materialize(bytes, view); break;
      case BlockTag::x_pre_ffn: rec.x_pre_ffn = materialize(bytes, view); break;
      case BlockTag::x_post_ffn: rec.x_post_ffn = materialize(bytes, view); break;
      case BlockTag::logit_lens: rec.logitlens_lp = materialize(bytes, view); break;
      case BlockTag::baselines: {
        const Tensor t = materialize(bytes, view);
        const bool has_p_true = header_field<bool>(citation_meta[view.citation], "has_p_true");
        if (t.rank() != 1 || t.size() != (has_p_true ? 4u : 3u)) {
          throw FormatError(ErrorKind::bad_header, "baseline block of citation " +
                                                       std::to_string(view.citation) + " has wrong length");
        }
        const auto v = t.values();
        rec.baselines = {v[0], v[1], v[2], std::nullopt};
        if (has_p_true) rec.baselines.p_true = v[3];
        break;
      }
      default:
        throw FormatError(ErrorKind::bad_header, "unknown block tag " + tag_name(view.tag));
    }
  }

  constexpr BlockTag kRequired[] = {BlockTag::attn_rows, BlockTag::sink, BlockTag::token_hidden,
                                    BlockTag::x_input, BlockTag::x_pre_ffn, BlockTag::x_post_ffn,
                                    BlockTag::baselines};
  if (!have_prompt_hidden) throw FormatError(ErrorKind::bad_header, "missing block PHID");
  for (std::size_t c = 0; c < citation_count; ++c) {
    for (const auto tag : kRequired) {
      if (!seen.contains({static_cast<std::uint32_t>(tag), static_cast<int>(c)})) {
        throw FormatError(ErrorKind::bad_header, "citation " + std::to_string(c) + " is missing block " +
                                                     tag_name(static_cast<std::uint32_t>(tag)));
      }
    }
    const bool lens = header_field<bool>(citation_meta[c], "has_logit_lens");
    if (lens != trace.citations[c].logitlens_lp.has_value()) {
      throw FormatError(ErrorKind::bad_header, "citation " + std::to_string(c) +
                                                   " logit-lens flag disagrees with its blocks");
    }
  }

  if (const auto report = validate_report(trace); !report.ok()) {
    throw FormatError(ErrorKind::invalid_trace, report.violations.front().to_string());
  }
  return trace;
}

std::size_t write_report(const ReportTrace& trace, const std::filesystem::path& path) {
  const auto bytes = encode_report(trace);
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(ErrorKind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError(ErrorKind::io, "cannot move " + tmp.string() + " to " + path.string());
  return bytes.size();
}

ReportTrace read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(ErrorKind::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_report(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  Manifest manifest;
  try {
    manifest.version = doc.at("version").get<int>();
    if (manifest.version != 1) {
      throw DataError("manifest " + path.string() + ": unsupported version " + std::to_string(manifest.version));
    }
    for (const auto& item : doc.at("reports")) {
      ManifestEntry e;
      e.report_id = item.at("report_id").get<std::string>();
      e.path = item.at("path").get<std::string>();
      e.citations = item.value("citations", std::size_t{0});
      if (item.contains("labels")) {
        const auto& labels = item["labels"];
        e.correct = labels.value("correct", std::size_t{0});
        e.hallucinated = labels.value("hallucinated", std::size_t{0});
        e.unlabeled = labels.value("unlabeled", std::size_t{0});
      }
      manifest.reports.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json reports = json::array();
  for (const auto& e : manifest.reports) {
    reports.push_back({{"report_id", e.report_id},
                       {"path", e.path},
                       {"citations", e.citations},
                       {"labels",
                        {{"correct", e.correct}, {"hallucinated", e.hallucinated}, {"unlabeled", e.unlabeled}}}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << json{{"format", "ftrc-manifest"}, {"version", manifest.version}, {"reports", reports}}.dump(2) << '\n';
}

std::filesystem::path write_dataset(std::span<const ReportTrace> traces, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "reports");
  Manifest manifest;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    if (!ids.insert(t.report_id).second) throw DataError("duplicate report_id '" + t.report_id + "'");
    char name[32];
    std::snprintf(name, sizeof name, "r%05zu.ftrc", i);
    const std::string rel = std::string("reports/") + name;
    ManifestEntry e{t.report_id, rel, t.citations.size(), 0, 0, 0};
    for (const auto& c : t.citations) {
      (c.label == Label::correct ? e.correct : c.label == Label::hallucinated ? e.hallucinated : e.unlabeled)++;
    }
    manifest.reports.push_back(std::move(e));
  }
  parallel_for(traces.size(), [&](std::size_t i) { write_report(traces[i], dir / manifest.reports[i].path); });
  const auto manifest_path = dir / "manifest.json";
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

std::vector<ReportTrace> load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest manifest = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::set<std::string> ids;
  std::set<std::string> paths;
  for (const auto& e : manifest.reports) {
    if (!ids.insert(e.report_id).second) throw DataError("manifest: duplicate report_id '" + e.report_id + "'");
    if (!paths.insert(e.path).second) throw DataError("manifest: duplicate path '" + e.path + "'");
    if (!std::filesystem::exists(base / e.path)) {
      throw DataError("manifest: missing file " + (base / e.path).string());
    }
  }
  std::vector<ReportTrace> traces(manifest.reports.size());
  parallel_for(traces.size(), [&](std::size_t i) {
    const auto& e = manifest.reports[i];
    traces[i] = read_report(base / e.path);
    if (traces[i].report_id != e.report_id) {
      throw DataError((base / e.path).string() + ": holds report '" + traces[i].report_id +
                      "', manifest says '" + e.report_id + "'");
    }
  });
  return traces;
}

}  // namespace factum::ftrc

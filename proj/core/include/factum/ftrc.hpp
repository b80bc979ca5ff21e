#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "factum/errors.hpp"
#include "factum/trace.hpp"

// FTRC v1: one report trace per file. All integers and floats little-endian.
//
//   offset 0    "FTRC"                         4 bytes ASCII
//   offset 4    version = 1                    u16
//   offset 6    header_len                     u32
//   offset 10   header                         header_len bytes of UTF-8 JSON
//   ...         blocks                         tagged tensor blocks, back to back
//   end - 4     CRC-32 (IEEE) of every preceding byte
//
// Block: tag (u32, ASCII fourcc), rank (u8), dims (u32 x rank), payload (f32
// x prod(dims), row-major). The header lists every block with its tag, owning
// citation (-1 for report-level), byte offset relative to the first block and
// byte length, plus "blocks_bytes", the total length of the block section.
namespace factum::ftrc {

inline constexpr std::uint16_t kVersion = 1;

enum class ErrorKind {
  io,
  bad_magic,
  bad_version,
  truncated,
  trailing_data,
  crc_mismatch,
  bad_header,
  offset_mismatch,
  dims_mismatch,
  non_finite,
  invalid_trace,
};

std::string_view to_string(ErrorKind kind);

class FormatError : public DataError {
 public:
  FormatError(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Block tags as stored on disk.
enum class BlockTag : std::uint32_t {
  prompt_hidden = 0x44494850,  // "PHID"
  attn_rows = 0x4e545441,      // "ATTN"
  sink = 0x4b4e4953,           // "SINK"
  token_hidden = 0x44494854,   // "THID"
  x_input = 0x504e4958,        // "XINP"
  x_pre_ffn = 0x45525058,      // "XPRE"
  x_post_ffn = 0x54535058,     // "XPST"
  baselines = 0x45534142,      // "BASE"
  logit_lens = 0x534e454c,     // "LENS"
};

// Serializes a trace. Refuses non-finite values (naming the block) and traces
// that fail validate_report.
std::vector<std::uint8_t> encode_report(const ReportTrace& trace);

// Parses and validates a trace; every structural problem raises FormatError
// with a distinct kind before any tensor is materialized.
ReportTrace decode_report(std::span<const std::uint8_t> bytes);

std::size_t write_report(const ReportTrace& trace, const std::filesystem::path& path);
ReportTrace read_report(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

struct ManifestEntry {
  std::string report_id;
  std::string path;  // relative to the manifest's directory
  std::size_t citations = 0;
  std::size_t correct = 0;
  std::size_t hallucinated = 0;
  std::size_t unlabeled = 0;
};

struct Manifest {
  int version = 1;
  std::vector<ManifestEntry> reports;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Writes one FTRC file per trace under `dir` plus dir/manifest.json and
// returns the manifest path.
std::filesystem::path write_dataset(std::span<const ReportTrace> traces,
                                    const std::filesystem::path& dir);

// Reads every trace listed in the manifest, in manifest order. Missing files,
// duplicate ids or paths, and per-file failures abort with the offending name.
std::vector<ReportTrace> load_dataset(const std::filesystem::path& manifest_path);

}  // namespace factum::ftrc

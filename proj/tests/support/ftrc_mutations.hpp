#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factum/ftrc.hpp"

namespace factum::testing {

using Bytes = std::vector<std::uint8_t>;

inline std::uint32_t read_u32(const Bytes& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline void write_u32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::size_t header_len(const Bytes& b) { return read_u32(b, 6); }
inline std::size_t blocks_at(const Bytes& b) { return 10 + header_len(b); }

inline nlohmann::json header_of(const Bytes& b) {
  const char* text = reinterpret_cast<const char*>(b.data() + 10);
  return nlohmann::json::parse(text, text + header_len(b));
}

inline void fix_crc(Bytes& b) {
  write_u32(b, b.size() - 4, ftrc::crc32(std::span<const std::uint8_t>(b.data(), b.size() - 4)));
}

// Replaces the JSON header and repairs header_len and the checksum.
inline Bytes with_header(const Bytes& b, const std::string& text) {
  Bytes out(b.begin(), b.begin() + 6);
  out.resize(10);
  write_u32(out, 6, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(blocks_at(b)), b.end());
  fix_crc(out);
  return out;
}

inline Bytes edit_header(const Bytes& b, const std::function<void(nlohmann::json&)>& edit) {
  auto h = header_of(b);
  edit(h);
  return with_header(b, h.dump());
}

// Absolute byte offset of the first block with the given tag and citation.
inline std::size_t block_offset(const Bytes& b, const std::string& tag, int citation) {
  const auto header = header_of(b);
  for (const auto& e : header.at("blocks")) {
    if (e.at("tag") == tag && e.at("citation") == citation) return blocks_at(b) + e.at("offset").get<std::size_t>();
  }
  throw std::runtime_error("block not found: " + tag);
}

struct Mutation {
  std::string name;
  ftrc::ErrorKind expected;
  std::function<Bytes(Bytes)> apply;
};

// Corruptions of a valid encoded trace that has at least one citation with a
// logit-lens block, each paired with the error kind the reader must raise.
inline std::vector<Mutation> ftrc_mutations() {
  using K = ftrc::ErrorKind;
  return {
      {"magic FTRX", K::bad_magic, [](Bytes b) { b[3] = 'X'; return b; }},
      {"lowercase magic", K::bad_magic, [](Bytes b) { std::memcpy(b.data(), "ftrc", 4); return b; }},
      {"version 2", K::bad_version, [](Bytes b) { b[4] = 2; return b; }},
      {"version 0", K::bad_version, [](Bytes b) { b[4] = 0; return b; }},
      {"empty file", K::truncated, [](Bytes) { return Bytes{}; }},
      {"cut inside preamble", K::truncated, [](Bytes b) { b.resize(7); return b; }},
      {"header length past end", K::truncated,
       [](Bytes b) { write_u32(b, 6, static_cast<std::uint32_t>(b.size())); return b; }},
      {"last byte dropped", K::truncated, [](Bytes b) { b.pop_back(); return b; }},
      {"cut mid block", K::truncated, [](Bytes b) { b.resize(blocks_at(b) + 37); return b; }},
      {"byte appended", K::trailing_data, [](Bytes b) { b.push_back(0); return b; }},
      {"payload byte flipped", K::crc_mismatch, [](Bytes b) { b[b.size() - 9] ^= 0x40; return b; }},
      {"checksum byte flipped", K::crc_mismatch, [](Bytes b) { b[b.size() - 1] ^= 0x01; return b; }},
      {"report id byte flipped", K::crc_mismatch,
       [](Bytes b) {
         const std::string h(reinterpret_cast<const char*>(b.data() + 10), header_len(b));
         const auto at = h.find("\"report_id\":\"") + 13;
         b[10 + at] ^= 0x01;
         return b;
       }},
      {"header not JSON", K::bad_header,
       [](Bytes b) { return with_header(b, std::string(header_len(b), '#')); }},
      {"header missing geometry", K::bad_header,
       [](Bytes b) { return edit_header(b, [](nlohmann::json& h) { h.erase("geometry"); }); }},
      {"citation count disagrees", K::bad_header,
       [](Bytes b) {
         return edit_header(b, [](nlohmann::json& h) { h["citation_count"] = h["citation_count"].get<int>() + 1; });
       }},
      {"block offset shifted", K::offset_mismatch,
       [](Bytes b) {
         return edit_header(b, [](nlohmann::json& h) {
           auto& e = h["blocks"][1];
           e["offset"] = e["offset"].get<std::size_t>() + 4;
         });
       }},
      {"block tag overwritten", K::offset_mismatch,
       [](Bytes b) {
         std::memcpy(b.data() + block_offset(b, "SINK", 0), "ZZZZ", 4);
         fix_crc(b);
         return b;
       }},
      {"block dims enlarged", K::dims_mismatch,
       [](Bytes b) {
         const auto at = block_offset(b, "ATTN", 0);
         write_u32(b, at + 5, 0x40000000u);
         fix_crc(b);
         return b;
       }},
      {"block rank zeroed", K::dims_mismatch,
       [](Bytes b) {
         b[block_offset(b, "XINP", 0) + 4] = 0;
         fix_crc(b);
         return b;
       }},
      {"NaN in payload", K::non_finite,
       [](Bytes b) {
         const auto at = block_offset(b, "XPST", 0);
         write_u32(b, at + 5 + 4 * 2, std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN()));
         fix_crc(b);
         return b;
       }},
      {"attention weight 1.5", K::invalid_trace,
       [](Bytes b) {
         const auto at = block_offset(b, "ATTN", 0);
         write_u32(b, at + 5 + 4 * 3, std::bit_cast<std::uint32_t>(1.5f));
         fix_crc(b);
         return b;
       }},
  };
}

}  // namespace factum::testing

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "factum/trace.hpp"

namespace factum::oracle {

struct ToyConfig {
  std::uint32_t num_layers = 4;
  std::uint32_t num_heads = 2;
  std::uint32_t hidden_dim = 16;
  std::uint32_t vocab = 64;
  std::uint32_t max_positions = 256;
  std::uint64_t seed = 0;
};

// Row-major [rows x cols] float matrix used for the toy weights.
struct Weight {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;

  float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct ToyLayer {
  std::vector<float> attn_norm_gain;  // [d]
  Weight wq, wk, wv, wo;              // [d x d]; wv then wo form the OV circuit
  std::vector<float> ffn_norm_gain;   // [d]
  Weight w_in;                        // [d x 4d]
  Weight w_out;                       // [4d x d]
};

// Seeded random pre-norm decoder: RMSNorm before attention and FFN, GELU FFN,
// final RMSNorm and an untied unembedding.
struct ToyTransformerWeights {
  ToyConfig config;
  Weight token_embedding;     // [V x d]
  Weight position_embedding;  // [max_positions x d]
  std::vector<ToyLayer> layers;
  std::vector<float> final_norm_gain;  // [d]
  Weight unembedding;                  // [d x V]
};

ToyTransformerWeights make_toy_weights(const ToyConfig& config);

// Everything the forward pass computes, for every position.
struct ToyRun {
  std::size_t seq_len = 0;
  // [layer][position] residual snapshots, each of length d.
  std::vector<std::vector<std::vector<float>>> x_input, x_pre_ffn, x_post_ffn;
  // attention[layer][head][query * seq_len + key]; zero above the diagonal.
  std::vector<std::vector<std::vector<float>>> attention;
  std::vector<std::vector<float>> final_hidden;  // [position][d], after the final norm
  std::vector<std::vector<float>> logits;        // [position][V]
};

ToyRun run_toy(const ToyTransformerWeights& weights, std::span<const std::uint32_t> tokens);

// Token 0 is the sequence-initial token; the rest are seeded uniform draws.
std::vector<std::uint32_t> toy_tokens(const ToyConfig& config, std::size_t seq_len, std::uint64_t seed);

// Log-softmax of the unembedded, final-normalized residual state.
std::vector<double> lens_log_probs(const ToyTransformerWeights& weights, std::span<const float> residual);

// Probability of this token is recorded as P(True).
inline constexpr std::uint32_t kAffirmativeToken = 1;

struct TraceLayout {
  std::uint32_t prompt_length = 24;
  std::uint32_t prompt_start = 0;     // first stored prompt position; 1 leaves the sink out of the span
  std::uint32_t sequence_length = 0;  // 0: one past the last citation
  TokenSpan context;                  // empty: prompt minus a 4-token head and tail
  std::string report_id = "toy";
  bool logit_lens = true;
};

// Runs the toy model on seeded tokens and captures a full ReportTrace at the
// given citation positions. The stored prompt span is [prompt_start, prompt_length).
// Positions must lie in [prompt_length, sequence_length).
// The emitted citation token is the model's argmax at that position.
ReportTrace toy_forward_trace(const ToyTransformerWeights& weights, const TraceLayout& layout,
                              std::span<const std::uint32_t> citation_positions, std::uint64_t seed);

}  // namespace factum::oracle

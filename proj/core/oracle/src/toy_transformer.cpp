#include "factum/oracle/toy_transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "factum/errors.hpp"
#include "factum/random.hpp"

namespace factum::oracle {
namespace {

Weight random_weight(Rng& rng, std::uint32_t rows, std::uint32_t cols, double scale) {
  Weight w{rows, cols, std::vector<float>(static_cast<std::size_t>(rows) * cols)};
  for (auto& v : w.values) v = static_cast<float>(scale * standard_normal(rng));
  return w;
}

std::vector<float> random_gain(Rng& rng, std::uint32_t d) {
  std::vector<float> g(d);
  for (auto& v : g) v = static_cast<float>(1.0 + 0.1 * standard_normal(rng));
  return g;
}

std::vector<float> rms_norm(std::span<const float> x, std::span<const float> gain) {
  double ss = 0.0;
  for (const float v : x) ss += static_cast<double>(v) * v;
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + 1e-6);
  std::vector<float> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = static_cast<float>(x[k] * inv * gain[k]);
  return out;
}

// Row vector times matrix.
std::vector<float> vec_mat(std::span<const float> x, const Weight& w) {
  std::vector<float> out(w.cols);
  for (std::size_t c = 0; c < w.cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < w.rows; ++r) acc += static_cast<double>(x[r]) * w(r, c);
    out[c] = static_cast<float>(acc);
  }
  return out;
}

float gelu(float x) {
  const double v = x;
  return static_cast<float>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
}

std::vector<double> log_softmax(std::span<const float> logits) {
  const double mx = *std::ranges::max_element(logits);
  double z = 0.0;
  for (const float v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<float> unembed(const ToyTransformerWeights& w, std::span<const float> normalized) {
  return vec_mat(normalized, w.unembedding);
}

}  // namespace

ToyTransformerWeights make_toy_weights(const ToyConfig& config) {
  if (config.num_layers == 0 || config.num_heads == 0 || config.hidden_dim == 0 || config.vocab < 2 ||
      config.hidden_dim % config.num_heads != 0) {
    throw ConfigError("toy geometry needs L, H, d > 0, V >= 2 and d divisible by H");
  }
  const std::uint32_t d = config.hidden_dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(config.seed);
  ToyTransformerWeights w;
  w.config = config;
  w.token_embedding = random_weight(rng, config.vocab, d, 1.0);
  w.position_embedding = random_weight(rng, config.max_positions, d, 0.5);
  for (std::uint32_t l = 0; l < config.num_layers; ++l) {
    ToyLayer layer;
    layer.attn_norm_gain = random_gain(rng, d);
    layer.wq = random_weight(rng, d, d, 1.5 * s);
    layer.wk = random_weight(rng, d, d, 1.5 * s);
    layer.wv = random_weight(rng, d, d, s);
    layer.wo = random_weight(rng, d, d, 0.5 * s);
    layer.ffn_norm_gain = random_gain(rng, d);
    layer.w_in = random_weight(rng, d, 4 * d, s);
    layer.w_out = random_weight(rng, 4 * d, d, 0.5 / std::sqrt(4.0 * d));
    w.layers.push_back(std::move(layer));
  }
  w.final_norm_gain = random_gain(rng, d);
  w.unembedding = random_weight(rng, d, config.vocab, 2.0 * s);
  return w;
}

std::vector<std::uint32_t> toy_tokens(const ToyConfig& config, std::size_t seq_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint32_t> tokens(seq_len, 0);
  for (std::size_t t = 1; t < seq_len; ++t) {
    tokens[t] = 1 + static_cast<std::uint32_t>(uniform_index(rng, config.vocab - 1));
  }
  return tokens;
}

ToyRun run_toy(const ToyTransformerWeights& w, std::span<const std::uint32_t> tokens) {
  const auto& cfg = w.config;
  const std::size_t T = tokens.size();
  const std::size_t d = cfg.hidden_dim;
  const std::size_t H = cfg.num_heads;
  const std::size_t hd = d / H;
  if (T == 0 || T > cfg.max_positions) throw ConfigError("toy sequence length outside [1, max_positions]");

  ToyRun run;
  run.seq_len = T;
  std::vector<std::vector<float>> x(T, std::vector<float>(d));
  for (std::size_t t = 0; t < T; ++t) {
    if (tokens[t] >= cfg.vocab) throw ConfigError("toy token id outside the vocabulary");
    for (std::size_t k = 0; k < d; ++k) {
      x[t][k] = w.token_embedding(tokens[t], k) + w.position_embedding(t, k);
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (const auto& layer : w.layers) {
    run.x_input.push_back(x);
    std::vector<std::vector<float>> q(T), k(T), v(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto n = rms_norm(x[t], layer.attn_norm_gain);
      q[t] = vec_mat(n, layer.wq);
      k[t] = vec_mat(n, layer.wk);
      v[t] = vec_mat(n, layer.wv);
    }
    std::vector<std::vector<float>> attn(H, std::vector<float>(T * T, 0.0f));
    std::vector<std::vector<float>> mixed(T, std::vector<float>(d, 0.0f));
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> logits(t + 1);
        for (std::size_t s = 0; s <= t; ++s) {
          double dotp = 0.0;
          for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) dotp += static_cast<double>(q[t][c]) * k[s][c];
          logits[s] = dotp * scale;
        }
        const double mx = *std::ranges::max_element(logits);
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t s = 0; s <= t; ++s) attn[h][t * T + s] = static_cast<float>(logits[s] / z);
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) {
          double acc = 0.0;
          for (std::size_t s = 0; s <= t; ++s) acc += static_cast<double>(attn[h][t * T + s]) * v[s][c];
          mixed[t][c] = static_cast<float>(acc);
        }
      }
    }
    run.attention.push_back(std::move(attn));

    std::vector<std::vector<float>> pre(T), post(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto attn_out = vec_mat(mixed[t], layer.wo);
      pre[t].resize(d);
      for (std::size_t c = 0; c < d; ++c) pre[t][c] = x[t][c] + attn_out[c];
      auto hidden = vec_mat(rms_norm(pre[t], layer.ffn_norm_gain), layer.w_in);
      for (auto& h : hidden) h = gelu(h);
      const auto ffn_out = vec_mat(hidden, layer.w_out);
      post[t].resize(d);
      for (std::size_t c = 0; c < d; ++c) post[t][c] = pre[t][c] + ffn_out[c];
    }
    run.x_pre_ffn.push_back(pre);
    run.x_post_ffn.push_back(post);
    x = std::move(post);
  }

  for (std::size_t t = 0; t < T; ++t) {
    run.final_hidden.push_back(rms_norm(x[t], w.final_norm_gain));
    run.logits.push_back(unembed(w, run.final_hidden.back()));
  }
  return run;
}

std::vector<double> lens_log_probs(const ToyTransformerWeights& w, std::span<const float> residual) {
  return log_softmax(unembed(w, rms_norm(residual, w.final_norm_gain)));
}

ReportTrace toy_forward_trace(const ToyTransformerWeights& w, const TraceLayout& layout,
                              std::span<const std::uint32_t> citation_positions, std::uint64_t seed) {
  const auto& cfg = w.config;
  const std::uint32_t P = layout.prompt_length;
  const std::uint32_t P0 = layout.prompt_start;
  if (P < 2 || P0 >= P) throw DataError("toy trace: need prompt_length >= 2 and prompt_start < prompt_length");
  std::uint32_t T = layout.sequence_length;
  if (T == 0) {
    T = P;
    for (const auto pos : citation_positions) T = std::max(T, pos + 1);
  }
  if (T < P) throw DataError("toy trace: sequence shorter than the prompt");
  for (const auto pos : citation_positions) {
    if (pos < P || pos >= T) {
      throw DataError("toy trace: citation position " + std::to_string(pos) + " outside the generated range [" +
                      std::to_string(P) + ", " + std::to_string(T) + ")");
    }
  }
  TokenSpan context = layout.context;
  if (context.length() == 0) context = P - P0 >= 10 ? TokenSpan{P0 + 4, P - 4} : TokenSpan{P0, P};
  if (!TokenSpan{P0, P}.contains(context) || context.length() == 0) {
    throw DataError("toy trace: context span must be a nonempty part of the prompt");
  }

  const auto tokens = toy_tokens(cfg, T, seed);
  const ToyRun run = run_toy(w, tokens);
  const std::uint32_t L = cfg.num_layers;
  const std::uint32_t H = cfg.num_heads;
  const std::uint32_t d = cfg.hidden_dim;

  ReportTrace trace;
  trace.report_id = layout.report_id;
  trace.geometry = {L, H, d,
                    "toy-decoder-L" + std::to_string(L) + "-H" + std::to_string(H) + "-d" + std::to_string(d)};
  trace.context_span = context;
  trace.prompt_span = {P0, P};
  trace.prompt_final_hidden = Tensor({P - P0, d});
  for (std::size_t j = P0; j < P; ++j) {
    std::ranges::copy(run.final_hidden[j], trace.prompt_final_hidden.row(j - P0).begin());
  }

  Rng doc_rng(derive_seed(seed, 1));
  for (const auto i : citation_positions) {
    CitationRecord rec;
    rec.citation_pos = i;
    rec.cited_doc_id = 1 + static_cast<std::int32_t>(uniform_index(doc_rng, 5));
    rec.attn_rows = Tensor({L, H, P - P0});
    rec.sink = Tensor({L, H});
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t h = 0; h < H; ++h) {
        const auto& a = run.attention[l][h];
        for (std::size_t j = P0; j < P; ++j) rec.attn_rows(l, h, j - P0) = a[i * T + j];
        rec.sink(l, h) = a[i * T];
      }
    }
    rec.token_final_hidden = Tensor({d}, run.final_hidden[i]);
    rec.x_input = Tensor({L, d});
    rec.x_pre_ffn = Tensor({L, d});
    rec.x_post_ffn = Tensor({L, d});
    for (std::size_t l = 0; l < L; ++l) {
      std::ranges::copy(run.x_input[l][i], rec.x_input.row(l).begin());
      std::ranges::copy(run.x_pre_ffn[l][i], rec.x_pre_ffn.row(l).begin());
      std::ranges::copy(run.x_post_ffn[l][i], rec.x_post_ffn.row(l).begin());
    }

    const auto log_probs = log_softmax(run.logits[i]);
    const auto emitted = static_cast<std::size_t>(std::ranges::max_element(run.logits[i]) - run.logits[i].begin());
    double entropy = 0.0;
    for (const double lp : log_probs) entropy -= std::exp(lp) * lp;
    const double mx = *std::ranges::max_element(run.logits[i]);
    double z = 0.0;
    for (const float v : run.logits[i]) z += std::exp(v - mx);
    rec.baselines.token_logprob = static_cast<float>(std::min(0.0, log_probs[emitted]));
    rec.baselines.dist_entropy = static_cast<float>(std::max(0.0, entropy));
    rec.baselines.logit_logsumexp = static_cast<float>(mx + std::log(z));
    rec.baselines.p_true = static_cast<float>(std::exp(log_probs[kAffirmativeToken]));

    if (layout.logit_lens) {
      Tensor lens({L, 2});
      for (std::size_t l = 0; l < L; ++l) {
        lens(l, kLensPreFfn) = static_cast<float>(lens_log_probs(w, run.x_pre_ffn[l][i])[emitted]);
        lens(l, kLensPostFfn) = static_cast<float>(lens_log_probs(w, run.x_post_ffn[l][i])[emitted]);
      }
      rec.logitlens_lp = std::move(lens);
    }
    trace.citations.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace factum::oracle

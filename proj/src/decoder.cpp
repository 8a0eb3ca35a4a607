#include "amrdia/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "amrdia/error.hpp"

namespace amrdia::model {

using num::ParamStore;
using num::Tensor;

namespace {

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

// Multi-head cross-attention whose values are the (unprojected) encoder states.
Tensor cross_attention(const Tensor& queries, const Tensor& memory, const num::SoftmaxMask* mask, const Tensor& wq,
                       const Tensor& wk, const EncoderConfig& cfg, std::vector<Tensor>& weights) {
  const Tensor q = num::matmul(queries, wq);
  const Tensor k = num::matmul(memory, wk);
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const Tensor scores =
        num::scale(num::matmul(num::slice_cols(q, h * dh, dh), num::transpose(num::slice_cols(k, h * dh, dh))), inv_sqrt);
    const Tensor alpha = num::softmax_rows(scores, mask);
    weights.push_back(alpha);
    heads.push_back(num::matmul(alpha, num::slice_cols(memory, h * dh, dh)));
  }
  return num::concat_last_dim(heads);
}

}  // namespace

Encodings encode(const ModelInput& input, const ParamStore& params, const ModelConfig& config,
                 const ForwardContext& ctx) {
  const std::size_t d = config.encoder.d_model;
  Encodings enc;
  if (config.ablation == Ablation::NoText) {
    enc.sequence = {Tensor::zeros({1, d}), {1}};
  } else {
    enc.sequence = encode_sequence(input.context, params, config.encoder, ctx);
  }
  if (config.ablation == Ablation::NoAmr) {
    enc.graph = {Tensor::zeros({1, d})};
  } else {
    if (input.relations == nullptr) throw Error(ErrorCode::InvalidConfig, "graph input has no relation matrix");
    enc.graph = encode_graph(input.nodes, *input.relations, params, config.encoder, ctx);
  }
  return enc;
}

DualContext dual_attention(const Tensor& decoder_states, const Encodings& enc, const ParamStore& params,
                           const EncoderConfig& cfg, std::size_t layer) {
  const Tensor& hs = enc.sequence.states;
  const Tensor& hg = enc.graph.states;
  if (!hs.defined() || hs.rows() == 0) throw Error(ErrorCode::EmptyEncoding, "sequence encoding is empty");
  if (!hg.defined() || hg.rows() == 0) throw Error(ErrorCode::EmptyEncoding, "graph encoding is empty");

  DualContext out;
  const std::size_t t = decoder_states.rows();
  std::optional<num::SoftmaxMask> seq_mask;
  if (enc.sequence.key_mask.size() == hs.rows()) seq_mask = num::SoftmaxMask::keys(t, enc.sequence.key_mask);
  out.sequence_context = cross_attention(decoder_states, hs, seq_mask ? &*seq_mask : nullptr,
                                         params.get(names::dec(layer, "cross_seq.wq")),
                                         params.get(names::dec(layer, "cross_seq.wk")), cfg, out.sequence_weights);
  out.graph_context =
      cross_attention(decoder_states, hg, nullptr, params.get(names::dec(layer, "cross_graph.wq")),
                      params.get(names::dec(layer, "cross_graph.wk")), cfg, out.graph_weights);
  out.fused = num::add_row(
      num::matmul(num::concat_last_dim(out.sequence_context, out.graph_context), params.get(names::dec(layer, "fuse.w"))),
      params.get(names::dec(layer, "fuse.b")));
  return out;
}

DualContext dual_attention_step(const Tensor& d_t, const Encodings& enc, const ParamStore& params,
                                const EncoderConfig& cfg, std::size_t layer) {
  if (d_t.rows() != 1 || d_t.cols() != cfg.d_model) {
    throw Error(ErrorCode::ShapeMismatch, "decoder state must be 1 x " + std::to_string(cfg.d_model));
  }
  return dual_attention(d_t, enc, params, cfg, layer);
}

Tensor decoder_logits(std::span<const TokenId> prefix, const Encodings& enc, const ParamStore& params,
                      const ModelConfig& config, const ForwardContext& ctx) {
  const EncoderConfig& cfg = config.encoder;
  if (prefix.empty()) throw Error(ErrorCode::EmptyInput, "decoder prefix must start with BOS");
  if (prefix.size() > cfg.max_seq_len) {
    throw Error(ErrorCode::PrefixTooLong,
                std::to_string(prefix.size()) + " prefix tokens exceed max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  const Tensor& table = params.get(names::kTokenEmbedding);
  for (TokenId t : prefix) {
    if (t >= table.rows()) throw Error(ErrorCode::TokenOutOfVocab, "prefix token id " + std::to_string(t));
  }
  const std::size_t n = prefix.size();
  std::vector<std::size_t> ids(prefix.begin(), prefix.end());
  Tensor x = num::add(num::embedding(table, ids), positional_encoding(n, cfg.d_model));
  if (ctx.training && ctx.rng) x = num::dropout(x, cfg.dropout_rate, *ctx.rng);

  const num::SoftmaxMask causal = num::SoftmaxMask::causal(n);
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const Tensor q = num::matmul(x, params.get(names::dec(l, "self.wq")));
    const Tensor k = num::matmul(x, params.get(names::dec(l, "self.wk")));
    const Tensor v = num::matmul(x, params.get(names::dec(l, "self.wv")));
    std::vector<Tensor> heads;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const Tensor scores = num::scale(
          num::matmul(num::slice_cols(q, h * dh, dh), num::transpose(num::slice_cols(k, h * dh, dh))), inv_sqrt);
      const Tensor alpha = num::softmax_rows(scores, &causal);
      if (ctx.trace) ctx.trace->decoder_self.push_back(alpha);
      heads.push_back(num::matmul(alpha, num::slice_cols(v, h * dh, dh)));
    }
    x = detail::add_norm(x, num::concat_last_dim(heads), params, names::dec(l, "ln1"), cfg.dropout_rate, ctx);

    DualContext dual = dual_attention(x, enc, params, cfg, l);
    if (ctx.trace) {
      for (auto& w : dual.sequence_weights) ctx.trace->cross_sequence.push_back(w);
      for (auto& w : dual.graph_weights) ctx.trace->cross_graph.push_back(w);
    }
    x = detail::add_norm(x, dual.fused, params, names::dec(l, "ln2"), cfg.dropout_rate, ctx);
    x = detail::add_norm(x, detail::feed_forward(x, params, names::dec(l, "ffn"), cfg, ctx), params,
                         names::dec(l, "ln3"), cfg.dropout_rate, ctx);
  }
  return num::add_row(num::matmul(x, params.get(names::kOutputWeight)), params.get(names::kOutputBias));
}

Tensor decode_step(std::span<const TokenId> prefix, const Encodings& enc, const ParamStore& params,
                   const ModelConfig& config) {
  const Tensor all = decoder_logits(prefix, enc, params, config);
  return num::slice_rows(all, all.rows() - 1, 1).detach();
}

void DecodingConfig::validate() const {
  if (beam_width == 0) throw Error(ErrorCode::InvalidConfig, "beam_width must be >= 1");
  if (max_gen_len == 0) throw Error(ErrorCode::InvalidConfig, "max_gen_len must be >= 1");
}

double Hypothesis::score(double length_penalty) const {
  if (length_penalty == 0.0 || tokens.empty()) return log_prob;
  return log_prob / std::pow(static_cast<double>(tokens.size()), length_penalty);
}

std::vector<TokenId> Hypothesis::response() const {
  std::vector<TokenId> out = tokens;
  if (!out.empty() && out.back() == kEos) out.pop_back();
  return out;
}

Hypothesis greedy_search(const Encodings& enc, const ParamStore& params, const ModelConfig& config,
                         const DecodingConfig& dcfg) {
  dcfg.validate();
  Hypothesis hyp;
  std::vector<TokenId> prefix{kBos};
  for (std::size_t step = 0; step < dcfg.max_gen_len; ++step) {
    const auto lp = log_softmax(decode_step(prefix, enc, params, config).data());
    // max_element returns the first maximum, i.e. the lowest token id on ties.
    const TokenId best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    hyp.tokens.push_back(best);
    hyp.log_prob += lp[best];
    if (best == kEos) {
      hyp.finished = true;
      break;
    }
    prefix.push_back(best);
  }
  return hyp;
}

Hypothesis beam_search(const Encodings& enc, const ParamStore& params, const ModelConfig& config,
                       const DecodingConfig& dcfg) {
  dcfg.validate();
  const std::size_t width = dcfg.beam_width;
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;

  struct Candidate {
    double log_prob;
    std::size_t parent;
    TokenId token;
  };
  for (std::size_t step = 0; step < dcfg.max_gen_len && !alive.empty() && finished.size() < width; ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      std::vector<TokenId> prefix{kBos};
      prefix.insert(prefix.end(), alive[h].tokens.begin(), alive[h].tokens.end());
      const auto lp = log_softmax(decode_step(prefix, enc, params, config).data());
      for (TokenId v = 0; v < lp.size(); ++v) candidates.push_back({alive[h].log_prob + lp[v], h, v});
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Hypothesis hyp = alive[candidates[c].parent];
      hyp.tokens.push_back(candidates[c].token);
      hyp.log_prob = candidates[c].log_prob;
      if (candidates[c].token == kEos) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        next.push_back(std::move(hyp));
      }
    }
    alive = std::move(next);
  }

  std::vector<Hypothesis> pool = finished.empty() ? alive : finished;
  // The greedy path can fall off a narrow beam; keeping it as a finalist
  // guarantees the result never scores below greedy decoding.
  if (width > 1) pool.push_back(greedy_search(enc, params, config, dcfg));
  const auto best = std::max_element(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return a.score(dcfg.length_penalty) < b.score(dcfg.length_penalty);
  });
  return *best;
}

std::vector<TokenId> generate(const ModelInput& input, const ParamStore& params, const ModelConfig& config,
                              const DecodingConfig& dcfg) {
  dcfg.validate();
  const Encodings enc = encode(input, params, config);
  const Hypothesis hyp = dcfg.mode == DecodeMode::Greedy ? greedy_search(enc, params, config, dcfg)
                                                         : beam_search(enc, params, config, dcfg);
  return hyp.response();
}

}  // namespace amrdia::model

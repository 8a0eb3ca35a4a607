#include "amrdia/encoders.hpp"

#include <cmath>

#include "amrdia/error.hpp"

namespace amrdia::model {

using num::ParamStore;
using num::Tensor;

namespace {

void check_tokens(std::span<const TokenId> tokens, const ParamStore& params) {
  const std::size_t vocab = params.get(names::kTokenEmbedding).rows();
  for (TokenId t : tokens) {
    if (t >= vocab) {
      throw Error(ErrorCode::TokenOutOfVocab, "token id " + std::to_string(t) + " >= vocab size " + std::to_string(vocab));
    }
  }
}

Tensor self_attention(const Tensor& x, const ParamStore& p, const std::string& wq, const std::string& wk,
                      const std::string& wv, const num::SoftmaxMask* mask, const EncoderConfig& cfg,
                      std::vector<Tensor>* trace) {
  const Tensor q = num::matmul(x, p.get(wq));
  const Tensor k = num::matmul(x, p.get(wk));
  const Tensor v = num::matmul(x, p.get(wv));
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const Tensor qh = num::slice_cols(q, h * dh, dh);
    const Tensor kh = num::slice_cols(k, h * dh, dh);
    const Tensor vh = num::slice_cols(v, h * dh, dh);
    const Tensor alpha = num::softmax_rows(num::scale(num::matmul(qh, num::transpose(kh)), inv_sqrt), mask);
    if (trace) trace->push_back(alpha);
    heads.push_back(num::matmul(alpha, vh));
  }
  return num::concat_last_dim(heads);
}

void check_relations(std::size_t m, const amr::RelationIndexMatrix& relations, const ParamStore& params,
                     const EncoderConfig& cfg) {
  if (m == 0) throw Error(ErrorCode::EmptyEncoding, "graph has no nodes");
  if (relations.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, "relation matrix is " + std::to_string(relations.size()) + "x" +
                                              std::to_string(relations.size()) + " for " + std::to_string(m) +
                                              " nodes");
  }
  if (cfg.n_layers == 0) return;
  const std::size_t table = params.get(names::graph(0, "rel_k")).rows();
  for (amr::RelationId id : relations.ids()) {
    if (id >= table) {
      throw Error(ErrorCode::RelationIdOutOfRange,
                  "relation id " + std::to_string(id) + " >= relation table size " + std::to_string(table));
    }
  }
}

// One relation-aware attention sublayer; returns the concatenated head outputs.
Tensor graph_attention(const Tensor& x, const amr::RelationIndexMatrix& relations, const ParamStore& p,
                       const EncoderConfig& cfg, std::size_t layer, std::vector<Tensor>* alphas) {
  const Tensor q = num::matmul(x, p.get(names::graph(layer, "wq")));
  const Tensor k = num::matmul(x, p.get(names::graph(layer, "wk")));
  const Tensor v = num::matmul(x, p.get(names::graph(layer, "wv")));
  const Tensor& rel_k = p.get(names::graph(layer, "rel_k"));
  const Tensor& rel_v = p.get(names::graph(layer, "rel_v"));
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto ids = relations.ids();

  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const Tensor qh = num::slice_cols(q, h * dh, dh);
    const Tensor kh = num::slice_cols(k, h * dh, dh);
    const Tensor vh = num::slice_cols(v, h * dh, dh);
    const Tensor rk = num::slice_cols(rel_k, h * dh, dh);
    const Tensor rv = num::slice_cols(rel_v, h * dh, dh);
    // q_i . (k_j + r_ij) split into the content and relation terms.
    const Tensor scores = num::add(num::matmul(qh, num::transpose(kh)), num::gathered_dot(qh, rk, ids));
    const Tensor alpha = num::softmax_rows(num::scale(scores, inv_sqrt), nullptr);
    if (alphas) alphas->push_back(alpha);
    heads.push_back(num::add(num::matmul(alpha, vh), num::gathered_weighted_sum(alpha, rv, ids)));
  }
  return num::concat_last_dim(heads);
}

}  // namespace

SequenceEncoding encode_sequence(std::span<const TokenId> tokens, const ParamStore& params, const EncoderConfig& cfg,
                                 const ForwardContext& ctx) {
  if (tokens.size() > cfg.max_seq_len) {
    throw Error(ErrorCode::SequenceTooLong,
                std::to_string(tokens.size()) + " tokens exceed max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  check_tokens(tokens, params);
  const std::size_t n = tokens.size();
  std::vector<std::size_t> ids(tokens.begin(), tokens.end());
  Tensor x = num::add(num::embedding(params.get(names::kTokenEmbedding), ids), positional_encoding(n, cfg.d_model));
  if (ctx.training && ctx.rng) x = num::dropout(x, cfg.dropout_rate, *ctx.rng);

  SequenceEncoding out;
  out.key_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.key_mask[i] = tokens[i] == kPad ? 0 : 1;
  const num::SoftmaxMask mask = num::SoftmaxMask::keys(n, out.key_mask);

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const Tensor attn = self_attention(x, params, names::seq(l, "wq"), names::seq(l, "wk"), names::seq(l, "wh"), &mask,
                                       cfg, ctx.trace ? &ctx.trace->sequence_self : nullptr);
    x = detail::add_norm(x, attn, params, names::seq(l, "ln1"), cfg.dropout_rate, ctx);
    x = detail::add_norm(x, detail::feed_forward(x, params, names::seq(l, "ffn"), cfg, ctx), params,
                         names::seq(l, "ln2"), cfg.dropout_rate, ctx);
  }
  out.states = x;
  return out;
}

std::vector<Tensor> graph_attention_scores(const Tensor& node_states, const amr::RelationIndexMatrix& relations,
                                           const ParamStore& params, const EncoderConfig& cfg, std::size_t layer) {
  check_relations(node_states.rows(), relations, params, cfg);
  std::vector<Tensor> alphas;
  graph_attention(node_states, relations, params, cfg, layer, &alphas);
  return alphas;
}

GraphEncoding encode_graph(std::span<const TokenId> node_tokens, const amr::RelationIndexMatrix& relations,
                           const ParamStore& params, const EncoderConfig& cfg, const ForwardContext& ctx) {
  check_tokens(node_tokens, params);
  check_relations(node_tokens.size(), relations, params, cfg);
  std::vector<std::size_t> ids(node_tokens.begin(), node_tokens.end());
  Tensor x = num::embedding(params.get(names::kTokenEmbedding), ids);
  if (ctx.training && ctx.rng) x = num::dropout(x, cfg.dropout_rate, *ctx.rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const Tensor attn = graph_attention(x, relations, params, cfg, l, ctx.trace ? &ctx.trace->graph : nullptr);
    x = detail::add_norm(x, attn, params, names::graph(l, "ln1"), cfg.dropout_rate, ctx);
    x = detail::add_norm(x, detail::feed_forward(x, params, names::graph(l, "ffn"), cfg, ctx), params,
                         names::graph(l, "ln2"), cfg.dropout_rate, ctx);
  }
  return {x};
}

}  // namespace amrdia::model

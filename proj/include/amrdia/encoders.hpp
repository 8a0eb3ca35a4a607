#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amrdia/amr.hpp"
#include "amrdia/model.hpp"

namespace amrdia::model {

/// H_S: one contextual state per input token.
struct SequenceEncoding {
  num::Tensor states;                // S x d
  std::vector<std::uint8_t> key_mask;  // 0 for PAD positions
};

/// H_G: one state per graph node.
struct GraphEncoding {
  num::Tensor states;  // M x d
};

/// Transformer encoder over text: token embedding + sinusoidal positions, then
/// n_layers of multi-head self-attention (value projection W^H), add & norm,
/// feed-forward, add & norm. PAD keys are masked.
SequenceEncoding encode_sequence(std::span<const TokenId> tokens, const num::ParamStore& params,
                                 const EncoderConfig& cfg, const ForwardContext& ctx = {});

/// Relation-aware attention of one graph-encoder layer, one M x M matrix per head:
///   e_ij = (W^Q h_i) . (W^K h_j + R_k[r_ij]) / sqrt(d_head),  alpha = softmax_j(e).
std::vector<num::Tensor> graph_attention_scores(const num::Tensor& node_states,
                                                const amr::RelationIndexMatrix& relations,
                                                const num::ParamStore& params, const EncoderConfig& cfg,
                                                std::size_t layer = 0);

/// Graph Transformer over node concepts (no positions). Values carry the
/// relation term: h_i = sum_j alpha_ij (W^V h_j + R_v[r_ij]).
GraphEncoding encode_graph(std::span<const TokenId> node_tokens, const amr::RelationIndexMatrix& relations,
                           const num::ParamStore& params, const EncoderConfig& cfg, const ForwardContext& ctx = {});

}  // namespace amrdia::model

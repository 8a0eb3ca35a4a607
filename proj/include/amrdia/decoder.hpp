#pragma once

#include <span>
#include <string>
#include <vector>

#include "amrdia/encoders.hpp"

namespace amrdia::model {

/// Raw model inputs for one dialogue: context tokens X and the graph G as
/// node concept ids plus the pairwise relation-id matrix.
struct ModelInput {
  std::span<const TokenId> context;
  std::span<const TokenId> nodes;
  const amr::RelationIndexMatrix* relations = nullptr;
};

/// Both encoder outputs after applying the configured ablation.
struct Encodings {
  SequenceEncoding sequence;
  GraphEncoding graph;
};

/// Runs both encoders. An ablated side is replaced by a single zero state,
/// which makes its cross-attention context identically zero.
Encodings encode(const ModelInput& input, const num::ParamStore& params, const ModelConfig& config,
                 const ForwardContext& ctx = {});

/// Context vectors of one dual-attention sublayer for a block of decoder
/// states (one row per time step).
struct DualContext {
  num::Tensor sequence_context;  // c_tS, rows x d
  num::Tensor graph_context;     // c_tG, rows x d
  num::Tensor fused;             // c_t = W^C [c_tS ; c_tG] + b
  std::vector<num::Tensor> sequence_weights;  // per head, rows x S
  std::vector<num::Tensor> graph_weights;     // per head, rows x M
};

/// Scaled dot-product cross-attention of `decoder_states` over H_S and over
/// H_G (separate query/key projections, values are the encoder states), fused
/// by the layer's W^C and b.
DualContext dual_attention(const num::Tensor& decoder_states, const Encodings& enc, const num::ParamStore& params,
                           const EncoderConfig& cfg, std::size_t layer = 0);

/// Single-step form: `d_t` is 1 x d.
DualContext dual_attention_step(const num::Tensor& d_t, const Encodings& enc, const num::ParamStore& params,
                                const EncoderConfig& cfg, std::size_t layer = 0);

/// Teacher-forced decoder pass: logits for every prefix position, |prefix| x |V|.
num::Tensor decoder_logits(std::span<const TokenId> prefix, const Encodings& enc, const num::ParamStore& params,
                           const ModelConfig& config, const ForwardContext& ctx = {});

/// Logits (1 x |V|) for the token following `prefix`.
num::Tensor decode_step(std::span<const TokenId> prefix, const Encodings& enc, const num::ParamStore& params,
                        const ModelConfig& config);

enum class DecodeMode { Greedy, Beam };

struct DecodingConfig {
  DecodeMode mode = DecodeMode::Greedy;
  std::size_t beam_width = 4;
  std::size_t max_gen_len = 32;
  /// Final score = sum log p / length^length_penalty (0 disables normalisation).
  double length_penalty = 0.0;

  void validate() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens, BOS excluded, EOS included when finished
  double log_prob = 0.0;
  bool finished = false;

  double score(double length_penalty) const;
  /// Tokens without the trailing EOS.
  std::vector<TokenId> response() const;
};

Hypothesis greedy_search(const Encodings& enc, const num::ParamStore& params, const ModelConfig& config,
                         const DecodingConfig& dcfg);
Hypothesis beam_search(const Encodings& enc, const num::ParamStore& params, const ModelConfig& config,
                       const DecodingConfig& dcfg);

/// Encodes the input and decodes a response (BOS/EOS stripped).
std::vector<TokenId> generate(const ModelInput& input, const num::ParamStore& params, const ModelConfig& config,
                              const DecodingConfig& dcfg);

}  // namespace amrdia::model

#pragma once

// Shared model configuration, parameter layout and forward-pass context for
// the sequence encoder, the graph encoder and the dual-attention decoder.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "amrdia/tensor.hpp"

namespace amrdia::model {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;

enum class Ablation { None, NoText, NoAmr };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t ffn_dim = 256;
  std::size_t max_seq_len = 128;
  double dropout_rate = 0.1;

  /// Throws Error(InvalidConfig).
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }
  bool operator==(const EncoderConfig&) const = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t vocab_size = 0;
  std::size_t relation_vocab_size = 3;
  Ablation ablation = Ablation::None;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Attention distributions recorded during a forward pass, one matrix per head.
struct AttentionTrace {
  std::vector<num::Tensor> sequence_self;
  std::vector<num::Tensor> graph;
  std::vector<num::Tensor> decoder_self;
  std::vector<num::Tensor> cross_sequence;
  std::vector<num::Tensor> cross_graph;
};

struct ForwardContext {
  bool training = false;  // enables dropout; requires rng
  std::mt19937_64* rng = nullptr;
  AttentionTrace* trace = nullptr;
};

namespace names {
inline constexpr const char* kTokenEmbedding = "embed.tokens";
inline constexpr const char* kOutputWeight = "out.w";
inline constexpr const char* kOutputBias = "out.b";
std::string seq(std::size_t layer, const std::string& leaf);
std::string graph(std::size_t layer, const std::string& leaf);
std::string dec(std::size_t layer, const std::string& leaf);
}  // namespace names

/// Xavier-uniform matrices, zero biases, unit layer-norm gains, drawn from `rng`
/// in a fixed order.
num::ParamStore init_params(const ModelConfig& config, std::mt19937_64& rng);

/// Fixed sinusoidal position table, n x d.
num::Tensor positional_encoding(std::size_t n, std::size_t d);

// Building blocks shared by the encoders and decoder.
namespace detail {
num::Tensor feed_forward(const num::Tensor& x, const num::ParamStore& p, const std::string& prefix,
                         const EncoderConfig& cfg, const ForwardContext& ctx);
num::Tensor add_norm(const num::Tensor& residual, const num::Tensor& sub, const num::ParamStore& p,
                     const std::string& ln_prefix, double dropout_rate, const ForwardContext& ctx);
}  // namespace detail

}  // namespace amrdia::model

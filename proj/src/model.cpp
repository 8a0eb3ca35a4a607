#include "amrdia/model.hpp"

#include <cmath>

#include "amrdia/error.hpp"

namespace amrdia::model {

using num::ParamStore;
using num::Tensor;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoText: return "no_text";
    case Ablation::NoAmr: return "no_amr";
  }
  return "none";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none" || s.empty()) return Ablation::None;
  if (s == "no_text") return Ablation::NoText;
  if (s == "no_amr") return Ablation::NoAmr;
  throw Error(ErrorCode::InvalidConfig, "unknown ablation '" + s + "' (expected none, no_text or no_amr)");
}

void EncoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || ffn_dim == 0 || max_seq_len == 0) {
    throw Error(ErrorCode::InvalidConfig, "encoder sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::InvalidConfig,
                "d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout_rate must be in [0, 1)");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (vocab_size < 5) throw Error(ErrorCode::InvalidConfig, "vocab_size must cover the reserved ids and one token");
  if (relation_vocab_size < 3) throw Error(ErrorCode::InvalidConfig, "relation vocab must contain the reserved ids");
}

namespace names {
std::string seq(std::size_t layer, const std::string& leaf) { return "seq." + std::to_string(layer) + "." + leaf; }
std::string graph(std::size_t layer, const std::string& leaf) { return "graph." + std::to_string(layer) + "." + leaf; }
std::string dec(std::size_t layer, const std::string& leaf) { return "dec." + std::to_string(layer) + "." + leaf; }
}  // namespace names

namespace {

void add_layer_norm(ParamStore& p, const std::string& prefix, std::size_t d) {
  p.add(prefix + ".g", Tensor::full({1, d}, 1.0));
  p.add(prefix + ".b", Tensor::zeros({1, d}));
}

void add_ffn(ParamStore& p, const std::string& prefix, std::size_t d, std::size_t f, std::mt19937_64& rng) {
  p.add(prefix + ".w1", num::xavier_uniform(d, f, rng));
  p.add(prefix + ".b1", Tensor::zeros({1, f}));
  p.add(prefix + ".w2", num::xavier_uniform(f, d, rng));
  p.add(prefix + ".b2", Tensor::zeros({1, d}));
}

}  // namespace

ParamStore init_params(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.encoder.d_model;
  const std::size_t f = config.encoder.ffn_dim;
  const std::size_t v = config.vocab_size;
  const std::size_t r = config.relation_vocab_size;
  ParamStore p;
  p.add(names::kTokenEmbedding, num::xavier_uniform(v, d, rng));
  for (std::size_t l = 0; l < config.encoder.n_layers; ++l) {
    for (const char* w : {"wq", "wk", "wh"}) p.add(names::seq(l, w), num::xavier_uniform(d, d, rng));
    add_layer_norm(p, names::seq(l, "ln1"), d);
    add_ffn(p, names::seq(l, "ffn"), d, f, rng);
    add_layer_norm(p, names::seq(l, "ln2"), d);
  }
  for (std::size_t l = 0; l < config.encoder.n_layers; ++l) {
    for (const char* w : {"wq", "wk", "wv"}) p.add(names::graph(l, w), num::xavier_uniform(d, d, rng));
    p.add(names::graph(l, "rel_k"), num::xavier_uniform(r, d, rng));
    p.add(names::graph(l, "rel_v"), num::xavier_uniform(r, d, rng));
    add_layer_norm(p, names::graph(l, "ln1"), d);
    add_ffn(p, names::graph(l, "ffn"), d, f, rng);
    add_layer_norm(p, names::graph(l, "ln2"), d);
  }
  for (std::size_t l = 0; l < config.encoder.n_layers; ++l) {
    for (const char* w : {"self.wq", "self.wk", "self.wv"}) p.add(names::dec(l, w), num::xavier_uniform(d, d, rng));
    add_layer_norm(p, names::dec(l, "ln1"), d);
    for (const char* w : {"cross_seq.wq", "cross_seq.wk", "cross_graph.wq", "cross_graph.wk"}) {
      p.add(names::dec(l, w), num::xavier_uniform(d, d, rng));
    }
    p.add(names::dec(l, "fuse.w"), num::xavier_uniform(2 * d, d, rng));
    p.add(names::dec(l, "fuse.b"), Tensor::zeros({1, d}));
    add_layer_norm(p, names::dec(l, "ln2"), d);
    add_ffn(p, names::dec(l, "ffn"), d, f, rng);
    add_layer_norm(p, names::dec(l, "ln3"), d);
  }
  p.add(names::kOutputWeight, num::xavier_uniform(d, v, rng));
  p.add(names::kOutputBias, Tensor::zeros({1, v}));
  return p;
}

Tensor positional_encoding(std::size_t n, std::size_t d) {
  std::vector<double> pe(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      pe[pos * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({n, d}, std::move(pe));
}

namespace detail {

Tensor feed_forward(const Tensor& x, const ParamStore& p, const std::string& prefix, const EncoderConfig& cfg,
                    const ForwardContext& ctx) {
  Tensor h = num::relu(num::add_row(num::matmul(x, p.get(prefix + ".w1")), p.get(prefix + ".b1")));
  if (ctx.training && ctx.rng) h = num::dropout(h, cfg.dropout_rate, *ctx.rng);
  return num::add_row(num::matmul(h, p.get(prefix + ".w2")), p.get(prefix + ".b2"));
}

Tensor add_norm(const Tensor& residual, const Tensor& sub, const ParamStore& p, const std::string& ln_prefix,
                double dropout_rate, const ForwardContext& ctx) {
  Tensor s = (ctx.training && ctx.rng) ? num::dropout(sub, dropout_rate, *ctx.rng) : sub;
  return num::layer_norm(num::add(residual, s), p.get(ln_prefix + ".g"), p.get(ln_prefix + ".b"));
}

}  // namespace detail

}  // namespace amrdia::model

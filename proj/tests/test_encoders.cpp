#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "amrdia/encoders.hpp"
#include "amrdia/error.hpp"
#include "oracle.hpp"

using namespace amrdia;
using namespace amrdia::model;
using num::Tensor;

namespace {

ModelConfig small_config(std::size_t d, std::size_t heads, std::size_t layers, std::size_t vocab = 12,
                         std::size_t relations = 7) {
  ModelConfig c;
  c.encoder.d_model = d;
  c.encoder.n_heads = heads;
  c.encoder.n_layers = layers;
  c.encoder.ffn_dim = 2 * d;
  c.encoder.max_seq_len = 16;
  c.encoder.dropout_rate = 0.0;
  c.vocab_size = vocab;
  c.relation_vocab_size = relations;
  return c;
}

num::ParamStore params_for(const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_params(c, rng);
}

void set(num::ParamStore& p, const std::string& name, std::vector<double> v) {
  auto data = p.get(name).mutable_data();
  ASSERT_EQ(data.size(), v.size()) << name;
  std::copy(v.begin(), v.end(), data.begin());
}

// Non-trivial gains and biases so the layer norms are exercised.
void perturb_norms(num::ParamStore& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : p) {
    if (name.find(".ln") == std::string::npos && name.find(".b") == std::string::npos) continue;
    for (double& x : t.mutable_data()) x += 0.3 * (num::uniform01(rng) - 0.5);
  }
}

void zero_relations(num::ParamStore& p, std::size_t layers) {
  for (std::size_t l = 0; l < layers; ++l) {
    for (const char* r : {"rel_k", "rel_v"}) {
      for (double& x : p.get(names::graph(l, r)).mutable_data()) x = 0.0;
    }
  }
}

oracle::Mat seq_oracle(const std::vector<std::size_t>& tokens, const num::ParamStore& p, const EncoderConfig& cfg) {
  using namespace oracle;
  Mat x = plus(rows_of(param(p, names::kTokenEmbedding), tokens), sinusoid(tokens.size(), cfg.d_model));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const Mat a = attention(
        x, param(p, names::seq(l, "wq")), param(p, names::seq(l, "wk")), param(p, names::seq(l, "wh")), cfg.n_heads,
        [&](std::size_t, std::size_t j) { return tokens[j] != kPad; });
    x = add_norm(x, a, p, names::seq(l, "ln1"));
    x = add_norm(x, ffn(x, p, names::seq(l, "ffn")), p, names::seq(l, "ln2"));
  }
  return x;
}

oracle::Mat graph_oracle(const std::vector<std::size_t>& nodes, const amr::RelationIndexMatrix& rel,
                         const num::ParamStore& p, const EncoderConfig& cfg, bool use_relations) {
  using namespace oracle;
  Mat x = rows_of(param(p, names::kTokenEmbedding), nodes);
  const std::vector<std::uint32_t> ids(rel.ids().begin(), rel.ids().end());
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto all = [](std::size_t, std::size_t) { return true; };
    const Mat a = use_relations
                      ? attention(x, param(p, names::graph(l, "wq")), param(p, names::graph(l, "wk")),
                                  param(p, names::graph(l, "wv")), cfg.n_heads, all, param(p, names::graph(l, "rel_k")),
                                  param(p, names::graph(l, "rel_v")), ids)
                      : attention(x, param(p, names::graph(l, "wq")), param(p, names::graph(l, "wk")),
                                  param(p, names::graph(l, "wv")), cfg.n_heads, all);
    x = add_norm(x, a, p, names::graph(l, "ln1"));
    x = add_norm(x, ffn(x, p, names::graph(l, "ffn")), p, names::graph(l, "ln2"));
  }
  return x;
}

amr::RelationIndexMatrix random_relations(std::size_t m, std::size_t table, std::mt19937_64& rng) {
  amr::RelationIndexMatrix r(m, amr::RelationVocab::kNone);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) r(i, j) = i == j ? 0 : static_cast<amr::RelationId>(1 + rng() % (table - 1));
  return r;
}

}  // namespace

TEST(SequenceEncoder, ShapeContract) {
  const ModelConfig c = small_config(8, 2, 2);
  const auto p = params_for(c, 1);
  const std::vector<TokenId> toks{4, 5, 6, 7, 8};
  const auto enc = encode_sequence(toks, p, c.encoder);
  EXPECT_EQ(enc.states.shape(), (num::Shape{5, 8}));
  EXPECT_EQ(enc.key_mask.size(), 5u);
}

TEST(SequenceEncoder, ZeroLayersIsEmbeddingPlusPositions) {
  const ModelConfig c = small_config(6, 2, 0);
  const auto p = params_for(c, 2);
  const std::vector<TokenId> toks{4, 9, 4};
  const auto enc = encode_sequence(toks, p, c.encoder);
  const oracle::Mat expected =
      oracle::plus(oracle::rows_of(oracle::param(p, names::kTokenEmbedding), {4, 9, 4}), oracle::from(positional_encoding(3, 6)));
  EXPECT_EQ(oracle::max_abs_diff(expected, enc.states), 0.0);
  EXPECT_LT(oracle::max_abs_diff(oracle::sinusoid(3, 6), positional_encoding(3, 6)), 1e-14);
}

TEST(SequenceEncoder, PositionTableHandValues) {
  const Tensor pe = positional_encoding(2, 2);
  EXPECT_EQ(pe.at(0, 0), 0.0);
  EXPECT_EQ(pe.at(0, 1), 1.0);
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 1), std::cos(1.0), 1e-15);
}

TEST(SequenceEncoder, TinyHandStepThrough) {
  // d=2, one head, one layer, two tokens, fixed weights; every step below is
  // written out by hand rather than through the reference helpers.
  ModelConfig c = small_config(2, 1, 1, 6);
  c.encoder.ffn_dim = 2;
  auto p = params_for(c, 3);
  set(p, names::kTokenEmbedding, {0, 0, 0, 0, 0, 0, 0, 0, 0.5, -0.5, 0.1, 0.2});
  set(p, names::seq(0, "wq"), {1, 0, 0, 1});
  set(p, names::seq(0, "wk"), {0.5, 0, 0, 0.5});
  set(p, names::seq(0, "wh"), {0, 1, 1, 0});
  set(p, names::seq(0, "ffn.w1"), {1, 0, 0, 1});
  set(p, names::seq(0, "ffn.b1"), {0, 0});
  set(p, names::seq(0, "ffn.w2"), {1, 0, 0, 1});
  set(p, names::seq(0, "ffn.b2"), {0, 0});
  const std::vector<TokenId> toks{4, 5};

  // x_0 = [0.5, -0.5] + [sin 0, cos 0], x_1 = [0.1, 0.2] + [sin 1, cos 1]
  const double x0[2] = {0.5, 0.5};
  const double x1[2] = {0.1 + std::sin(1.0), 0.2 + std::cos(1.0)};
  // q = x, k = x/2, v = swap(x)
  auto score = [](const double* a, const double* b) { return (a[0] * b[0] * 0.5 + a[1] * b[1] * 0.5) / std::sqrt(2.0); };
  const double* xs[2] = {x0, x1};
  double h[2][2];
  for (int i = 0; i < 2; ++i) {
    const double e0 = score(xs[i], x0), e1 = score(xs[i], x1);
    const double a0 = std::exp(e0) / (std::exp(e0) + std::exp(e1)), a1 = 1.0 - a0;
    h[i][0] = a0 * x0[1] + a1 * x1[1];
    h[i][1] = a0 * x0[0] + a1 * x1[0];
  }
  // With d=2 layer norm maps any row [a, b] (a != b) to [-1, 1] or [1, -1], scaled by 1/sqrt(1 + eps/var).
  auto ln2 = [](double a, double b, double* out) {
    const double mean = (a + b) / 2, var = ((a - mean) * (a - mean) + (b - mean) * (b - mean)) / 2;
    out[0] = (a - mean) / std::sqrt(var + 1e-5);
    out[1] = (b - mean) / std::sqrt(var + 1e-5);
  };
  double expected[2][2];
  for (int i = 0; i < 2; ++i) {
    double y[2];
    ln2(xs[i][0] + h[i][0], xs[i][1] + h[i][1], y);
    const double f0 = std::max(0.0, y[0]), f1 = std::max(0.0, y[1]);
    ln2(y[0] + f0, y[1] + f1, expected[i]);
  }
  const auto enc = encode_sequence(toks, p, c.encoder);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(enc.states.at(i, j), expected[i][j], 1e-10);
}

TEST(SequenceEncoder, MatchesReferenceMultiHeadMultiLayer) {
  const ModelConfig c = small_config(8, 2, 2);
  auto p = params_for(c, 4);
  perturb_norms(p, 4);
  const std::vector<TokenId> toks{4, 11, 0, 7, 0, 5};
  const auto enc = encode_sequence(toks, p, c.encoder);
  EXPECT_LT(oracle::max_abs_diff(seq_oracle({4, 11, 0, 7, 0, 5}, p, c.encoder), enc.states), 1e-10);
  EXPECT_EQ(enc.key_mask, (std::vector<std::uint8_t>{1, 1, 0, 1, 0, 1}));
}

TEST(SequenceEncoder, PadKeysGetNoWeight) {
  const ModelConfig c = small_config(8, 2, 1);
  const auto p = params_for(c, 5);
  AttentionTrace trace;
  ForwardContext ctx;
  ctx.trace = &trace;
  const std::vector<TokenId> toks{4, 0, 6};
  encode_sequence(toks, p, c.encoder, ctx);
  ASSERT_EQ(trace.sequence_self.size(), 2u);
  for (const auto& a : trace.sequence_self) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a.at(i, 1), 0.0);
      EXPECT_NEAR(a.at(i, 0) + a.at(i, 2), 1.0, 1e-12);
    }
  }
}

TEST(SequenceEncoder, Errors) {
  const ModelConfig c = small_config(4, 1, 1);
  const auto p = params_for(c, 6);
  try {
    encode_sequence(std::vector<TokenId>(17, 4), p, c.encoder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SequenceTooLong);
  }
  try {
    encode_sequence(std::vector<TokenId>{4, 12}, p, c.encoder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TokenOutOfVocab);
  }
}

TEST(GraphAttention, SingleNode) {
  const ModelConfig c = small_config(4, 1, 1);
  const auto p = params_for(c, 7);
  const auto a = graph_attention_scores(Tensor::from({1, 4}, {0.1, 0.2, 0.3, 0.4}), amr::RelationIndexMatrix(1, 0), p,
                                        c.encoder);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].at(0, 0), 1.0);
}

TEST(GraphAttention, ZeroRelationsIdenticalStatesAreUniform) {
  const ModelConfig c = small_config(6, 3, 1);
  auto p = params_for(c, 8);
  zero_relations(p, 1);
  std::mt19937_64 rng(8);
  const std::vector<double> row{0.3, -0.2, 0.9, 0.1, 0.0, -0.5};
  std::vector<double> states;
  for (int i = 0; i < 4; ++i) states.insert(states.end(), row.begin(), row.end());
  const auto a = graph_attention_scores(Tensor::from({4, 6}, states), random_relations(4, 7, rng), p, c.encoder);
  for (const auto& head : a)
    for (double x : head.data()) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(GraphAttention, TwoNodeDirectFormula) {
  // M=2, d=2, single head: e_ij = (Wq h_i) . (Wk h_j + R[r_ij]) / sqrt(2).
  const ModelConfig c = small_config(2, 1, 1, 6, 5);
  auto p = params_for(c, 9);
  set(p, names::graph(0, "wq"), {1, 2, -1, 0.5});
  set(p, names::graph(0, "wk"), {0.3, 0, 0.7, -1});
  set(p, names::graph(0, "rel_k"), {0, 0, 9, 9, 9, 9, 0.4, -0.6, 1.5, 0.2});
  const double h[2][2] = {{0.2, -1.0}, {1.1, 0.4}};
  amr::RelationIndexMatrix rel(2, 0);
  rel(0, 1) = 3;
  rel(1, 0) = 4;
  const double R[5][2] = {{0, 0}, {9, 9}, {9, 9}, {0.4, -0.6}, {1.5, 0.2}};

  double q[2][2], k[2][2];
  for (int i = 0; i < 2; ++i) {
    // row vector times W (row-major 2x2)
    q[i][0] = h[i][0] * 1 + h[i][1] * -1;
    q[i][1] = h[i][0] * 2 + h[i][1] * 0.5;
    k[i][0] = h[i][0] * 0.3 + h[i][1] * 0.7;
    k[i][1] = h[i][0] * 0 + h[i][1] * -1;
  }
  double expected[2][2];
  for (int i = 0; i < 2; ++i) {
    double e[2];
    for (int j = 0; j < 2; ++j) {
      const auto& r = R[rel(i, j)];
      e[j] = (q[i][0] * (k[j][0] + r[0]) + q[i][1] * (k[j][1] + r[1])) / std::sqrt(2.0);
    }
    const double z = std::exp(e[0]) + std::exp(e[1]);
    expected[i][0] = std::exp(e[0]) / z;
    expected[i][1] = std::exp(e[1]) / z;
  }
  const auto a = graph_attention_scores(Tensor::from({2, 2}, {0.2, -1.0, 1.1, 0.4}), rel, p, c.encoder);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(a[0].at(i, j), expected[i][j], 1e-12);
}

TEST(GraphAttention, RelationIdOutOfRange) {
  const ModelConfig c = small_config(4, 1, 1, 12, 5);
  const auto p = params_for(c, 10);
  amr::RelationIndexMatrix rel(2, 0);
  rel(0, 1) = 5;
  try {
    graph_attention_scores(Tensor::zeros({2, 4}), rel, p, c.encoder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RelationIdOutOfRange);
  }
}

TEST(GraphEncoder, ShapeAndErrors) {
  const ModelConfig c = small_config(8, 2, 1);
  const auto p = params_for(c, 11);
  std::mt19937_64 rng(11);
  const std::vector<TokenId> nodes{4, 5, 6};
  EXPECT_EQ(encode_graph(nodes, random_relations(3, 7, rng), p, c.encoder).states.shape(), (num::Shape{3, 8}));
  EXPECT_THROW(encode_graph(nodes, random_relations(2, 7, rng), p, c.encoder), Error);
  try {
    encode_graph(std::vector<TokenId>{}, amr::RelationIndexMatrix(0, 0), p, c.encoder);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyEncoding);
  }
}

TEST(GraphEncoder, ZeroRelationsEqualsPlainSelfAttention) {
  const ModelConfig c = small_config(8, 2, 2);
  auto p = params_for(c, 12);
  perturb_norms(p, 12);
  zero_relations(p, 2);
  std::mt19937_64 rng(12);
  const std::vector<TokenId> nodes{4, 9, 6, 4, 10};
  const auto rel = random_relations(5, 7, rng);
  const auto enc = encode_graph(nodes, rel, p, c.encoder);
  EXPECT_LT(oracle::max_abs_diff(graph_oracle({4, 9, 6, 4, 10}, rel, p, c.encoder, false), enc.states), 1e-10);
}

TEST(GraphEncoder, WantGraphMatchesReference) {
  const amr::AmrGraph g = amr::simplify(amr::parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))"));
  const amr::RelationVocab rv = amr::RelationVocab::from_graphs(std::span(&g, 1));
  const auto rel = amr::relation_matrix(g, rv);
  const ModelConfig c = small_config(4, 1, 1, 8, rv.size());
  auto p = params_for(c, 13);
  perturb_norms(p, 13);
  const std::vector<TokenId> nodes{5, 6, 7};
  const auto enc = encode_graph(nodes, rel, p, c.encoder);
  EXPECT_LT(oracle::max_abs_diff(graph_oracle({5, 6, 7}, rel, p, c.encoder, true), enc.states), 1e-10);
  // The relation term matters: dropping it changes the states.
  EXPECT_GT(oracle::max_abs_diff(graph_oracle({5, 6, 7}, rel, p, c.encoder, false), enc.states), 1e-6);
}

TEST(GraphEncoder, PermutationEquivariant) {
  const ModelConfig c = small_config(8, 2, 2);
  const auto p = params_for(c, 14);
  std::mt19937_64 rng(14);
  const std::vector<TokenId> nodes{4, 5, 6, 7, 8};
  const auto rel = random_relations(5, 7, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<TokenId> pnodes(5);
  amr::RelationIndexMatrix prel(5, 0);
  for (std::size_t i = 0; i < 5; ++i) {
    pnodes[i] = nodes[perm[i]];
    for (std::size_t j = 0; j < 5; ++j) prel(i, j) = rel(perm[i], perm[j]);
  }
  const Tensor a = encode_graph(nodes, rel, p, c.encoder).states;
  const Tensor b = encode_graph(pnodes, prel, p, c.encoder).states;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(b.at(i, j), a.at(perm[i], j), 1e-12);
}

TEST(Encoders, AttentionRowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const ModelConfig c = small_config(8, 1 + seed % 2 * 3, 2);
    auto p = params_for(c, seed);
    AttentionTrace trace;
    ForwardContext ctx;
    ctx.trace = &trace;
    const std::size_t s = 1 + rng() % 6, m = 1 + rng() % 5;
    std::vector<TokenId> toks(s), nodes(m);
    for (auto& t : toks) t = rng() % 12;
    for (auto& t : nodes) t = 4 + rng() % 8;
    if (std::all_of(toks.begin(), toks.end(), [](TokenId t) { return t == kPad; })) toks[0] = 4;
    encode_sequence(toks, p, c.encoder, ctx);
    encode_graph(nodes, random_relations(m, 7, rng), p, c.encoder, ctx);
    for (const auto* list : {&trace.sequence_self, &trace.graph}) {
      ASSERT_FALSE(list->empty());
      for (const auto& a : *list)
        for (std::size_t i = 0; i < a.rows(); ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j < a.cols(); ++j) total += a.at(i, j);
          EXPECT_NEAR(total, 1.0, 1e-9);
        }
    }
  }
}

TEST(Encoders, ConfigValidation) {
  EncoderConfig e;
  e.d_model = 10;
  e.n_heads = 4;
  EXPECT_THROW(e.validate(), Error);
  e.n_heads = 5;
  EXPECT_NO_THROW(e.validate());
  e.dropout_rate = 1.0;
  EXPECT_THROW(e.validate(), Error);
}

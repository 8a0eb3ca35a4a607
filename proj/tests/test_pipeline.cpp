#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "amrdia/config.hpp"
#include "amrdia/dataset.hpp"
#include "amrdia/error.hpp"
#include "fixtures.hpp"

using namespace amrdia;
using namespace amrdia::data;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("amrdia_pipeline_" + name);
  std::ofstream(p) << text;
  return p;
}

using Strs = std::vector<std::string>;

}  // namespace

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Chest pain, doc?"), (Strs{"chest", "pain", ",", "doc", "?"}));
  EXPECT_EQ(tokenize("  It's 39.5  "), (Strs{"it", "'", "s", "39", ".", "5"}));
  EXPECT_TRUE(tokenize("   ").empty());
  const Strs t{"see", "a", "doctor", "."};
  EXPECT_EQ(detokenize(t), "see a doctor .");
  EXPECT_EQ(tokenize(detokenize(t)), t);
}

TEST(Vocab, ReservedIdsThenFrequencyOrder) {
  const std::vector<Strs> streams{{"a", "a", "b"}};
  const Vocab v = Vocab::build(streams);
  EXPECT_EQ(v.id("<pad>"), 0u);
  EXPECT_EQ(v.id("<bos>"), 1u);
  EXPECT_EQ(v.id("<eos>"), 2u);
  EXPECT_EQ(v.id("<unk>"), 3u);
  EXPECT_EQ(v.id("a"), 4u);
  EXPECT_EQ(v.id("b"), 5u);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id("zzz"), 3u);
}

TEST(Vocab, MinFreqSendsRareTokensToUnk) {
  const std::vector<Strs> streams{{"a", "a", "b"}};
  const Vocab v = Vocab::build(streams, 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.id("b"), 3u);
}

TEST(Vocab, TiesAreLexicographicAndBuildIsDeterministic) {
  const std::vector<Strs> s1{{"c", "b", "a"}, {"b"}};
  const std::vector<Strs> s2{{"b"}, {"a", "b", "c"}};
  const Vocab v1 = Vocab::build(s1), v2 = Vocab::build(s2);
  EXPECT_EQ(v1, v2);
  EXPECT_EQ(v1.id("b"), 4u);
  EXPECT_EQ(v1.id("a"), 5u);
  EXPECT_EQ(v1.id("c"), 6u);
  EXPECT_EQ(Vocab::from_tokens(v1.tokens()), v1);
}

TEST(Vocab, EmptyCorpus) {
  EXPECT_EQ(code_of([] { Vocab::build(std::vector<Strs>{}); }), ErrorCode::EmptyCorpus);
  EXPECT_EQ(code_of([] { Vocab::build(std::vector<Strs>{{}, {}}); }), ErrorCode::EmptyCorpus);
}

TEST(Vocab, EncodeDecodeRoundTrip) {
  const std::vector<Strs> streams{{"drink", "more", "water"}, {"rest", "."}};
  const Vocab v = Vocab::build(streams);
  for (const auto& s : streams) EXPECT_EQ(v.decode(v.encode(s)), s);
  EXPECT_EQ(v.decode(v.encode(Strs{"unseen"})), Strs{"<unk>"});
}

TEST(Ingest, MixedFileKeepsValidLinesInOrder) {
  const IngestResult r = ingest_dialogues(fixtures::data_path("dialogues_mixed.jsonl"));
  ASSERT_EQ(r.examples.size(), 3u);
  EXPECT_EQ(r.examples[0].id, "ok1");
  EXPECT_EQ(r.examples[1].id, "ok2");
  EXPECT_EQ(r.examples[2].id, "ok3");
  EXPECT_EQ(r.skipped, 3u);
  ASSERT_EQ(r.diagnostics.size(), 3u);
  EXPECT_EQ(r.diagnostics[0].rfind("line 2:", 0), 0u);
  EXPECT_EQ(r.diagnostics[1].rfind("line 3:", 0), 0u);
  EXPECT_EQ(r.diagnostics[2].rfind("line 5:", 0), 0u);
  EXPECT_EQ(r.examples[1].penman.size(), 1u);
  EXPECT_EQ(r.examples[2].turns.size(), 2u);
}

TEST(Ingest, MissingFileAndNothingValid) {
  EXPECT_EQ(code_of([] { ingest_dialogues("/nonexistent/dialogues.jsonl"); }), ErrorCode::FileNotFound);
  const fs::path bad = write_temp("bad.jsonl", "not json\n{\"id\": \"x\", \"turns\": [], \"response\": \"\", \"amr\": []}\n");
  EXPECT_EQ(code_of([&] { ingest_dialogues(bad); }), ErrorCode::NoValidExamples);
  fs::remove(bad);
}

TEST(Ingest, MultiSentenceGraphsAreMerged) {
  const IngestResult r = ingest_dialogues(fixtures::data_path("dialogues8.jsonl"));
  ASSERT_EQ(r.examples.size(), 8u);
  const DialogueExample& d2 = r.examples[1];
  ASSERT_EQ(d2.penman.size(), 3u);
  std::size_t nodes = 1, edges = 0;
  for (const auto& text : d2.penman) {
    const amr::AmrGraph g = amr::parse_penman(text);
    nodes += g.node_count();
    edges += g.edge_count() + 1;
  }
  EXPECT_EQ(d2.graph.node_count(), nodes);
  EXPECT_EQ(d2.graph.edge_count(), edges);
  EXPECT_EQ(d2.graph.nodes[d2.graph.root].label, "multi-sentence");
  EXPECT_TRUE(amr::is_valid(d2.graph));
  // Single-sentence dialogues keep their graph untouched.
  EXPECT_TRUE(amr::is_isomorphic(r.examples[0].graph, amr::parse_penman(r.examples[0].penman[0])));
}

TEST(Ingest, ContextCarriesSpeakers) {
  const IngestResult r = ingest_dialogues(fixtures::data_path("dialogues_mixed.jsonl"));
  const Strs ctx = context_tokens(r.examples[2]);
  EXPECT_EQ(ctx, (Strs{"doctor", ":", "any", "pain", "?", "patient", ":", "yes", ",", "in", "my", "arm", "."}));
  EXPECT_EQ(response_tokens(r.examples[2]), (Strs{"show", "me", "where", "."}));
}

TEST(Encode, TruncationKeepsRecentContext) {
  const IngestResult r = ingest_dialogues(fixtures::data_path("dialogues_mixed.jsonl"));
  const Vocab v = build_vocab(r.examples, 1);
  const amr::RelationVocab rel = build_relation_vocab(r.examples);
  const DialogueExample& ex = r.examples[2];
  const EncodedExample full = encode_example(ex, v, rel, {}, 1000, 1000);
  EXPECT_EQ(full.context, v.encode(context_tokens(ex)));
  EXPECT_EQ(full.response, v.encode(response_tokens(ex)));

  const EncodedExample cut = encode_example(ex, v, rel, {}, 4, 2);
  ASSERT_EQ(cut.context.size(), 4u);
  EXPECT_TRUE(std::equal(cut.context.begin(), cut.context.end(), full.context.end() - 4));
  EXPECT_EQ(cut.response, (std::vector<TokenId>{full.response[0], full.response[1]}));

  const amr::AmrGraph simple = amr::simplify(ex.graph);
  EXPECT_EQ(full.nodes.size(), simple.node_count());
  EXPECT_EQ(full.relations.size(), simple.node_count());
  for (TokenId id : full.nodes) EXPECT_LT(id, v.size());
}

TEST(Encode, VocabCoversLinearizedGraphs) {
  const IngestResult r = ingest_dialogues(fixtures::data_path("dialogues8.jsonl"));
  const Vocab v = build_vocab(r.examples, 1);
  for (const auto& ex : r.examples)
    for (const auto& tok : amr::linearize(amr::simplify(ex.graph))) EXPECT_TRUE(v.contains(tok)) << tok;
}

TEST(Config, BundledFilesLoad) {
  const RunConfig d = load_config(fixtures::config_path("default.json"));
  EXPECT_EQ(d.encoder.d_model, 64u);
  const RunConfig o = load_config(fixtures::config_path("overfit.json"));
  EXPECT_EQ(o.encoder.d_model, 32u);
  EXPECT_EQ(o.train.max_steps, 2000u);
  EXPECT_EQ(o.train.seed, 7u);
  EXPECT_EQ(o.decode.max_gen_len, 24u);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.encoder.d_model = 16;
  c.train.learning_rate = 0.25;
  c.train.ablation = model::Ablation::NoAmr;
  c.decode.mode = model::DecodeMode::Beam;
  c.decode.beam_width = 3;
  c.simplify.strip_sense_tags = false;
  c.min_freq = 2;
  const RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.train.ablation, model::Ablation::NoAmr);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  using nlohmann::json;
  EXPECT_EQ(code_of([] { config_from_json(json::parse(R"({"model": {"d_modle": 8}})")); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_json(json::parse(R"({"optimizer": {}})")); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_json(json::parse(R"({"train": {"batch_size": "eight"}})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_json(json::parse(R"({"train": {"ablation": "no_text_please"}})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/config.json"); }), ErrorCode::FileNotFound);
}

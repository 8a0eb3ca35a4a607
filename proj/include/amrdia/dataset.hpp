#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "amrdia/amr.hpp"
#include "amrdia/vocab.hpp"

namespace amrdia::data {

struct Turn {
  std::string speaker;
  std::string text;
};

/// One record of the line-delimited dialogue file:
///   {"id": "...", "turns": [{"speaker": "...", "text": "..."}], "response": "...", "amr": ["(...)", ...]}
struct DialogueExample {
  std::string id;
  std::vector<Turn> turns;
  std::string response;
  std::vector<std::string> penman;
  amr::AmrGraph graph;  // per-sentence graphs merged into one dialogue graph
};

struct IngestResult {
  std::vector<DialogueExample> examples;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;  // "line N: reason" per skipped line
};

/// Parses one record line; throws Error describing why the line is unusable.
DialogueExample parse_dialogue_line(const std::string& line);

/// Reads every line, keeps valid examples in file order and counts the rest.
/// Throws FileNotFound, or NoValidExamples when nothing survives.
IngestResult ingest_dialogues(const std::filesystem::path& path);

/// Context X: each turn contributes its speaker, ":", then its tokenized text.
std::vector<std::string> context_tokens(const DialogueExample& ex);
std::vector<std::string> response_tokens(const DialogueExample& ex);

/// Training-ready example: token ids for X and Y, node concept ids and the
/// relation-id matrix of the simplified dialogue graph.
struct EncodedExample {
  std::string id;
  std::vector<TokenId> context;
  std::vector<TokenId> response;
  std::vector<TokenId> nodes;
  amr::RelationIndexMatrix relations;
};

/// Joint vocabulary over context, response and linearized-graph tokens.
Vocab build_vocab(std::span<const DialogueExample> examples, std::size_t min_freq,
                  const amr::SimplifyConfig& simplify = {});
amr::RelationVocab build_relation_vocab(std::span<const DialogueExample> examples,
                                        const amr::SimplifyConfig& simplify = {});

/// Contexts longer than `max_context` keep their most recent tokens;
/// responses are cut to `max_response` tokens.
EncodedExample encode_example(const DialogueExample& ex, const Vocab& vocab, const amr::RelationVocab& relations,
                              const amr::SimplifyConfig& simplify, std::size_t max_context, std::size_t max_response);

}  // namespace amrdia::data

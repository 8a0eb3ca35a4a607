#include "amrdia/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "amrdia/error.hpp"

namespace amrdia::data {

using nlohmann::json;

DialogueExample parse_dialogue_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  auto need = [&](const char* key) -> const json& {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string("missing field '") + key + "'");
    return j.at(key);
  };
  DialogueExample ex;
  try {
    ex.id = need("id").is_string() ? need("id").get<std::string>() : need("id").dump();
    for (const auto& t : need("turns")) ex.turns.push_back({t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
    ex.response = need("response").get<std::string>();
    const json& amr = need("amr");
    if (amr.is_string()) {
      ex.penman.push_back(amr.get<std::string>());
    } else {
      for (const auto& g : amr) ex.penman.push_back(g.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad field type: ") + e.what());
  }
  if (ex.turns.empty()) throw Error(ErrorCode::InvalidConfig, "no context turns");
  if (tokenize(ex.response).empty()) throw Error(ErrorCode::EmptyResponse, "empty response");
  if (ex.penman.empty()) throw Error(ErrorCode::InvalidConfig, "no AMR graphs");

  std::vector<amr::AmrGraph> graphs;
  for (const auto& p : ex.penman) graphs.push_back(amr::parse_penman(p));
  ex.graph = amr::merge_graphs(graphs);
  return ex;
}

IngestResult ingest_dialogues(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.examples.push_back(parse_dialogue_line(line));
    } catch (const Error& e) {
      ++result.skipped;
      result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (result.examples.empty()) throw Error(ErrorCode::NoValidExamples, "no usable examples in " + path.string());
  return result;
}

std::vector<std::string> context_tokens(const DialogueExample& ex) {
  std::vector<std::string> out;
  for (const auto& turn : ex.turns) {
    auto speaker = tokenize(turn.speaker);
    out.insert(out.end(), speaker.begin(), speaker.end());
    out.emplace_back(":");
    auto text = tokenize(turn.text);
    out.insert(out.end(), text.begin(), text.end());
  }
  return out;
}

std::vector<std::string> response_tokens(const DialogueExample& ex) { return tokenize(ex.response); }

Vocab build_vocab(std::span<const DialogueExample> examples, std::size_t min_freq, const amr::SimplifyConfig& simplify) {
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no examples");
  std::vector<std::vector<std::string>> streams;
  for (const auto& ex : examples) {
    streams.push_back(context_tokens(ex));
    streams.push_back(response_tokens(ex));
    streams.push_back(amr::linearize(amr::simplify(ex.graph, simplify)));
  }
  return Vocab::build(streams, min_freq);
}

amr::RelationVocab build_relation_vocab(std::span<const DialogueExample> examples, const amr::SimplifyConfig& simplify) {
  std::vector<amr::AmrGraph> graphs;
  for (const auto& ex : examples) graphs.push_back(amr::simplify(ex.graph, simplify));
  return amr::RelationVocab::from_graphs(graphs);
}

EncodedExample encode_example(const DialogueExample& ex, const Vocab& vocab, const amr::RelationVocab& relations,
                              const amr::SimplifyConfig& simplify, std::size_t max_context, std::size_t max_response) {
  EncodedExample out;
  out.id = ex.id;
  auto ctx = context_tokens(ex);
  if (ctx.size() > max_context) ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(max_context));
  out.context = vocab.encode(ctx);
  auto resp = response_tokens(ex);
  if (resp.size() > max_response) resp.resize(max_response);
  out.response = vocab.encode(resp);

  const amr::AmrGraph g = amr::simplify(ex.graph, simplify);
  for (const auto& n : g.nodes) out.nodes.push_back(vocab.id(n.label));
  out.relations = amr::relation_matrix(g, relations);
  return out;
}

}  // namespace amrdia::data

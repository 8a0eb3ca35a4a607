#include "amrdia/config.hpp"

#include <fstream>
#include <set>

#include "amrdia/error.hpp"

namespace amrdia::data {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) throw Error(ErrorCode::InvalidConfig, "unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + j.at(key).dump());
  }
}

}  // namespace

json to_json(const model::EncoderConfig& c) {
  return {{"d_model", c.d_model},         {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},       {"ffn_dim", c.ffn_dim},
          {"max_seq_len", c.max_seq_len}, {"dropout_rate", c.dropout_rate}};
}

json to_json(const train::TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"grad_clip_norm", c.grad_clip_norm},
          {"ablation", model::to_string(c.ablation)},
          {"checkpoint_every", c.checkpoint_every}};
}

json to_json(const model::DecodingConfig& c) {
  return {{"mode", c.mode == model::DecodeMode::Beam ? "beam" : "greedy"},
          {"beam_width", c.beam_width},
          {"max_gen_len", c.max_gen_len},
          {"length_penalty", c.length_penalty}};
}

json to_json(const amr::SimplifyConfig& c) {
  return {{"strip_sense_tags", c.strip_sense_tags}, {"drop_wiki_edges", c.drop_wiki_edges}};
}

void from_json_into(const json& j, model::EncoderConfig& c) {
  check_keys(j, {"d_model", "n_heads", "n_layers", "ffn_dim", "max_seq_len", "dropout_rate"}, "model");
  read(j, "d_model", c.d_model);
  read(j, "n_heads", c.n_heads);
  read(j, "n_layers", c.n_layers);
  read(j, "ffn_dim", c.ffn_dim);
  read(j, "max_seq_len", c.max_seq_len);
  read(j, "dropout_rate", c.dropout_rate);
  c.validate();
}

void from_json_into(const json& j, train::TrainConfig& c) {
  check_keys(j,
             {"batch_size", "learning_rate", "max_epochs", "max_steps", "seed", "grad_clip_norm", "ablation",
              "checkpoint_every", "min_freq"},
             "train");
  read(j, "batch_size", c.batch_size);
  read(j, "learning_rate", c.learning_rate);
  read(j, "max_epochs", c.max_epochs);
  read(j, "max_steps", c.max_steps);
  read(j, "seed", c.seed);
  read(j, "grad_clip_norm", c.grad_clip_norm);
  std::string ablation = model::to_string(c.ablation);
  read(j, "ablation", ablation);
  c.ablation = model::ablation_from_string(ablation);
  read(j, "checkpoint_every", c.checkpoint_every);
  c.validate();
}

void from_json_into(const json& j, model::DecodingConfig& c) {
  check_keys(j, {"mode", "beam_width", "max_gen_len", "length_penalty"}, "decode");
  std::string mode = c.mode == model::DecodeMode::Beam ? "beam" : "greedy";
  read(j, "mode", mode);
  if (mode != "greedy" && mode != "beam") throw Error(ErrorCode::InvalidConfig, "decode.mode must be greedy or beam");
  c.mode = mode == "beam" ? model::DecodeMode::Beam : model::DecodeMode::Greedy;
  read(j, "beam_width", c.beam_width);
  read(j, "max_gen_len", c.max_gen_len);
  read(j, "length_penalty", c.length_penalty);
  c.validate();
}

void from_json_into(const json& j, amr::SimplifyConfig& c) {
  check_keys(j, {"strip_sense_tags", "drop_wiki_edges"}, "simplify");
  read(j, "strip_sense_tags", c.strip_sense_tags);
  read(j, "drop_wiki_edges", c.drop_wiki_edges);
}

RunConfig config_from_json(const json& j) {
  check_keys(j, {"model", "train", "decode", "simplify"}, "config");
  RunConfig c;
  if (j.contains("model")) from_json_into(j.at("model"), c.encoder);
  if (j.contains("train")) {
    from_json_into(j.at("train"), c.train);
    read(j.at("train"), "min_freq", c.min_freq);
  }
  if (j.contains("decode")) from_json_into(j.at("decode"), c.decode);
  if (j.contains("simplify")) from_json_into(j.at("simplify"), c.simplify);
  return c;
}

json config_to_json(const RunConfig& c) {
  json t = to_json(c.train);
  t["min_freq"] = c.min_freq;
  return {{"model", to_json(c.encoder)}, {"train", t}, {"decode", to_json(c.decode)}, {"simplify", to_json(c.simplify)}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace amrdia::data

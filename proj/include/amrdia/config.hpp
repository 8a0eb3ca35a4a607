#pragma once

// Run configuration file. JSON object with optional sections; absent keys keep
// their defaults:
//
//   {
//     "model":    {"d_model": 64, "n_heads": 4, "n_layers": 2, "ffn_dim": 256,
//                  "max_seq_len": 128, "dropout_rate": 0.1},
//     "train":    {"batch_size": 36, "learning_rate": 1e-4, "max_epochs": 10,
//                  "max_steps": 0, "seed": 13, "grad_clip_norm": 1.0,
//                  "ablation": "none", "checkpoint_every": 1, "min_freq": 1},
//     "decode":   {"mode": "greedy", "beam_width": 4, "max_gen_len": 32,
//                  "length_penalty": 0.0},
//     "simplify": {"strip_sense_tags": true, "drop_wiki_edges": true}
//   }

#include <filesystem>
#include <json.hpp>

#include "amrdia/amr.hpp"
#include "amrdia/decoder.hpp"
#include "amrdia/training.hpp"

namespace amrdia::data {

struct RunConfig {
  model::EncoderConfig encoder;
  train::TrainConfig train;
  model::DecodingConfig decode;
  amr::SimplifyConfig simplify;
  std::size_t min_freq = 1;
};

/// Throws Error(InvalidConfig) on unknown keys or wrong types.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const model::EncoderConfig& c);
nlohmann::json to_json(const train::TrainConfig& c);
nlohmann::json to_json(const model::DecodingConfig& c);
nlohmann::json to_json(const amr::SimplifyConfig& c);
void from_json_into(const nlohmann::json& j, model::EncoderConfig& c);
void from_json_into(const nlohmann::json& j, train::TrainConfig& c);
void from_json_into(const nlohmann::json& j, model::DecodingConfig& c);
void from_json_into(const nlohmann::json& j, amr::SimplifyConfig& c);

}  // namespace amrdia::data

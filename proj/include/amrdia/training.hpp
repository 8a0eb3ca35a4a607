#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "amrdia/dataset.hpp"
#include "amrdia/decoder.hpp"

namespace amrdia::train {

using data::EncodedExample;

struct TrainConfig {
  std::size_t batch_size = 36;
  double learning_rate = 1e-4;
  std::size_t max_epochs = 10;
  std::size_t max_steps = 0;  // optimizer steps across epochs; 0 = unlimited
  std::uint64_t seed = 13;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  model::Ablation ablation = model::Ablation::None;
  std::size_t checkpoint_every = 1;  // per-epoch checkpoint files; 0 = only best/last

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Per-token mean cross-entropy under teacher forcing: the decoder reads
/// BOS + Y and is scored against Y + EOS, one position apart.
num::Tensor compute_loss(std::span<const EncodedExample> batch, const num::ParamStore& params,
                         const model::ModelConfig& config, const model::ForwardContext& ctx = {});

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  model::ModelConfig model;
  TrainConfig train;
  data::Vocab vocab;
  amr::RelationVocab relations;
  num::ParamStore params;
  num::AdamState adam;
  std::string rng_state;
  std::uint64_t epoch = 0;
  double best_loss = 0.0;  // meaningful once epoch > 0
  std::vector<double> loss_log;
};

/// Binary layout (little-endian):
///   "AMRDCKPT" | u32 version | u64 header length | JSON header |
///   u32 tensor count | tensors | u32 moment count | moments | u64 FNV-1a of all prior bytes
/// A tensor is u32 name length, name, u32 rank, u64 dims, f64 values.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Fresh state: parameters drawn from a generator seeded with `train.seed`;
/// the same generator then drives shuffling and dropout.
Checkpoint initial_checkpoint(model::ModelConfig model, TrainConfig train, data::Vocab vocab,
                              amr::RelationVocab relations);

class Trainer {
 public:
  explicit Trainer(Checkpoint state);

  /// One seeded shuffle-and-batch pass; returns the mean batch loss.
  /// Throws NonFiniteLoss if a batch loss is NaN or infinite.
  double run_epoch(std::span<const EncodedExample> data);
  bool done() const;

  std::uint64_t steps() const { return state_.adam.step; }
  const Checkpoint& state() const { return state_; }
  Checkpoint& state() { return state_; }
  /// Refreshes the stored generator state from the live one.
  const Checkpoint& snapshot();

 private:
  Checkpoint state_;
  std::mt19937_64 rng_;
};

struct TrainOutputs {
  std::filesystem::path dir;  // empty: keep everything in memory
};

/// Runs epochs until max_epochs or max_steps, writing `last.ckpt`,
/// `best.ckpt`, `epoch-NNNN.ckpt` and `loss_log.tsv` under `out.dir`.
Checkpoint train(std::span<const EncodedExample> data, Checkpoint state, const TrainOutputs& out = {},
                 const std::function<void(std::uint64_t epoch, double loss)>& on_epoch = {});

/// Mean per-token loss with dropout off.
double evaluate_loss(std::span<const EncodedExample> data, const Checkpoint& ckpt);

model::ModelInput model_input(const EncodedExample& ex);

}  // namespace amrdia::train

#include "amrdia/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "amrdia/error.hpp"

namespace amrdia::train {

using num::ParamStore;
using num::Tensor;

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate must be finite and non-negative");
  }
}

model::ModelInput model_input(const EncodedExample& ex) { return {ex.context, ex.nodes, &ex.relations}; }

Tensor compute_loss(std::span<const EncodedExample> batch, const ParamStore& params, const model::ModelConfig& config,
                    const model::ForwardContext& ctx) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "compute_loss on an empty batch");
  Tensor total;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    if (ex.response.empty()) throw Error(ErrorCode::EmptyResponse, "example '" + ex.id + "' has no response tokens");
    const model::Encodings enc = model::encode(model_input(ex), params, config, ctx);
    std::vector<model::TokenId> prefix{model::kBos};
    prefix.insert(prefix.end(), ex.response.begin(), ex.response.end());
    std::vector<std::size_t> targets(ex.response.begin(), ex.response.end());
    targets.push_back(model::kEos);
    const Tensor ce = num::cross_entropy_sum(model::decoder_logits(prefix, enc, params, config, ctx), targets);
    total = total.defined() ? num::add(total, ce) : ce;
    tokens += targets.size();
  }
  return num::scale(total, 1.0 / static_cast<double>(tokens));
}

Checkpoint initial_checkpoint(model::ModelConfig model, TrainConfig train, data::Vocab vocab,
                              amr::RelationVocab relations) {
  train.validate();
  model.vocab_size = vocab.size();
  model.relation_vocab_size = relations.size();
  model.ablation = train.ablation;
  std::mt19937_64 rng(train.seed);
  Checkpoint c;
  c.params = model::init_params(model, rng);
  c.model = model;
  c.train = train;
  c.vocab = std::move(vocab);
  c.relations = std::move(relations);
  std::ostringstream os;
  os << rng;
  c.rng_state = os.str();
  return c;
}

Trainer::Trainer(Checkpoint state) : state_(std::move(state)) {
  state_.train.validate();
  // Tensors are shared handles; training must not write through the caller's copy.
  state_.params = state_.params.clone();
  if (state_.rng_state.empty()) {
    rng_.seed(state_.train.seed);
  } else {
    std::istringstream is(state_.rng_state);
    is >> rng_;
    if (!is) throw Error(ErrorCode::InvalidConfig, "unreadable generator state");
  }
}

bool Trainer::done() const {
  const auto& t = state_.train;
  return state_.epoch >= t.max_epochs || (t.max_steps > 0 && state_.adam.step >= t.max_steps);
}

double Trainer::run_epoch(std::span<const EncodedExample> data) {
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "training set is empty");
  const TrainConfig& cfg = state_.train;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates on raw generator output so the order does not depend on the standard library.
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng_() % (i + 1)]);

  model::ForwardContext ctx;
  ctx.training = state_.model.encoder.dropout_rate > 0.0;
  ctx.rng = &rng_;

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    if (cfg.max_steps > 0 && state_.adam.step >= cfg.max_steps) break;
    std::vector<EncodedExample> batch;
    for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.push_back(data[order[k]]);

    state_.params.zero_grad();
    const Tensor loss = compute_loss(batch, state_.params, state_.model, ctx);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss " + std::to_string(value) + " at epoch " +
                                                std::to_string(state_.epoch + 1) + ", step " +
                                                std::to_string(state_.adam.step + 1));
    }
    num::backward(loss);
    // An ablated encoder is off the tape; a zero gradient keeps its weights fixed.
    for (auto& [name, p] : state_.params) p.mutable_grad();
    num::clip_grad_norm(state_.params, cfg.grad_clip_norm);
    num::adam_step(state_.params, state_.adam, cfg.learning_rate);
    loss_sum += value;
    ++batches;
  }
  state_.params.zero_grad();
  const double mean = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  ++state_.epoch;
  state_.loss_log.push_back(mean);
  if (state_.loss_log.size() == 1 || mean < state_.best_loss) state_.best_loss = mean;
  snapshot();
  return mean;
}

const Checkpoint& Trainer::snapshot() {
  std::ostringstream os;
  os << rng_;
  state_.rng_state = os.str();
  return state_;
}

Checkpoint train(std::span<const EncodedExample> data, Checkpoint state, const TrainOutputs& out,
                 const std::function<void(std::uint64_t, double)>& on_epoch) {
  Trainer trainer(std::move(state));
  if (!out.dir.empty()) std::filesystem::create_directories(out.dir);
  while (!trainer.done()) {
    const double loss = trainer.run_epoch(data);
    const Checkpoint& s = trainer.snapshot();
    if (on_epoch) on_epoch(s.epoch, loss);
    if (out.dir.empty()) continue;
    save_checkpoint(s, out.dir / "last.ckpt");
    if (s.best_loss == loss) save_checkpoint(s, out.dir / "best.ckpt");
    if (s.train.checkpoint_every > 0 && s.epoch % s.train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%04llu.ckpt", static_cast<unsigned long long>(s.epoch));
      save_checkpoint(s, out.dir / name);
    }
    std::ofstream log(out.dir / "loss_log.tsv");
    log << "epoch\tloss\n";
    log.precision(17);
    for (std::size_t e = 0; e < s.loss_log.size(); ++e) log << e + 1 << '\t' << s.loss_log[e] << '\n';
  }
  return trainer.snapshot();
}

double evaluate_loss(std::span<const EncodedExample> data, const Checkpoint& ckpt) {
  return compute_loss(data, ckpt.params, ckpt.model).item();
}

}  // namespace amrdia::train

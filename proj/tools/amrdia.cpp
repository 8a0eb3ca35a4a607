// amrdia: parse / train / generate / eval / gradcheck / report.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "amrdia/amr.hpp"
#include "amrdia/config.hpp"
#include "amrdia/dataset.hpp"
#include "amrdia/error.hpp"
#include "amrdia/metrics.hpp"
#include "amrdia/training.hpp"

namespace fs = std::filesystem;
using namespace amrdia;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return kUsage;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::NotScalar:
    case ErrorCode::MissingGrad:
    case ErrorCode::NonFiniteLoss:
      return kNumeric;
    default:
      return kData;
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

data::IngestResult ingest(const fs::path& path) {
  auto r = data::ingest_dialogues(path);
  for (const auto& d : r.diagnostics) std::cerr << "skip: " << d << "\n";
  std::cerr << path.string() << ": " << r.examples.size() << " examples, " << r.skipped << " skipped\n";
  return r;
}

// --- parse --------------------------------------------------------------------

struct ParseArgs {
  std::string in, out, config;
};

int run_parse(const ParseArgs& a) {
  data::RunConfig cfg;
  if (!a.config.empty()) cfg = data::load_config(a.config);
  const auto r = ingest(a.in);
  auto out = open_out(a.out);
  for (const auto& ex : r.examples) {
    const amr::AmrGraph g = amr::simplify(ex.graph, cfg.simplify);
    const auto lin = amr::linearize(g);
    out << "# ::id " << ex.id << "\n";
    out << "# ::nodes " << g.node_count() << " ::edges " << g.edge_count() << "\n";
    out << "# ::linearized " << data::detokenize(lin) << "\n";
    out << amr::serialize_penman(g) << "\n\n";
  }
  return kOk;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, ablation;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, steps;
  std::optional<double> lr;
};

int run_train(const TrainArgs& a) {
  data::RunConfig cfg;
  if (!a.config.empty()) cfg = data::load_config(a.config);
  if (!a.ablation.empty()) cfg.train.ablation = model::ablation_from_string(a.ablation);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  if (a.steps) cfg.train.max_steps = *a.steps;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  cfg.train.validate();

  const auto r = ingest(a.data);
  data::Vocab vocab = data::build_vocab(r.examples, cfg.min_freq, cfg.simplify);
  amr::RelationVocab rels = data::build_relation_vocab(r.examples, cfg.simplify);
  std::vector<data::EncodedExample> encoded;
  for (const auto& ex : r.examples) {
    encoded.push_back(data::encode_example(ex, vocab, rels, cfg.simplify, cfg.encoder.max_seq_len,
                                           cfg.encoder.max_seq_len - 1));
  }
  model::ModelConfig mc;
  mc.encoder = cfg.encoder;
  std::cerr << "vocab " << vocab.size() << ", relations " << rels.size() << ", ablation "
            << model::to_string(cfg.train.ablation) << "\n";
  train::Checkpoint init = train::initial_checkpoint(mc, cfg.train, std::move(vocab), std::move(rels));
  std::cerr << "parameters " << init.params.scalar_count() << "\n";

  const fs::path dir = a.out;
  fs::create_directories(dir);
  open_out(dir / "config.json") << data::config_to_json(cfg).dump(2) << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  const train::Checkpoint final_state =
      train::train(encoded, std::move(init), {dir}, [&](std::uint64_t epoch, double loss) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %llu  loss %.6f  (%.1fs)\n", static_cast<unsigned long long>(epoch), loss, s);
      });
  std::printf("trained %llu epochs, %llu steps, final loss %.6f, best %.6f\n",
              static_cast<unsigned long long>(final_state.epoch),
              static_cast<unsigned long long>(final_state.adam.step), final_state.loss_log.back(),
              final_state.best_loss);
  return kOk;
}

// --- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string ckpt, data, out, refs_out, config;
  std::size_t beam = 0;
  std::optional<std::size_t> max_len;
};

int run_generate(const GenerateArgs& a) {
  data::RunConfig cfg;
  if (!a.config.empty()) cfg = data::load_config(a.config);
  if (a.beam > 0) {
    cfg.decode.mode = a.beam > 1 ? model::DecodeMode::Beam : model::DecodeMode::Greedy;
    cfg.decode.beam_width = a.beam;
  }
  if (a.max_len) cfg.decode.max_gen_len = *a.max_len;
  cfg.decode.validate();

  const train::Checkpoint ckpt = train::load_checkpoint(a.ckpt);
  const auto r = ingest(a.data);
  auto out = open_out(a.out);
  std::ofstream refs;
  if (!a.refs_out.empty()) refs = open_out(a.refs_out);

  const std::size_t max_len = ckpt.model.encoder.max_seq_len;
  for (const auto& ex : r.examples) {
    const auto enc = data::encode_example(ex, ckpt.vocab, ckpt.relations, cfg.simplify, max_len, max_len - 1);
    const auto ids = model::generate(train::model_input(enc), ckpt.params, ckpt.model, cfg.decode);
    out << data::detokenize(ckpt.vocab.decode(ids)) << "\n";
    if (refs.is_open()) refs << data::detokenize(data::response_tokens(ex)) << "\n";
  }
  return kOk;
}

// --- eval / report ------------------------------------------------------------

struct EvalArgs {
  std::string preds, refs, out, records, label = "model";
};

int run_eval(const EvalArgs& a) {
  std::vector<metrics::Tokens> cands, refs;
  for (const auto& l : read_lines(a.preds)) cands.push_back(data::tokenize(l));
  for (const auto& l : read_lines(a.refs)) refs.push_back(data::tokenize(l));
  if (refs.empty()) throw Error(ErrorCode::EmptyCorpus, a.refs + " is empty");
  const auto report = metrics::evaluate(cands, refs);
  const std::pair<std::string, metrics::ScoreReport> row{a.label, report};
  const std::string table = metrics::format_table(std::span(&row, 1));
  open_out(a.out) << table;
  open_out(a.records.empty() ? a.out + ".jsonl" : a.records) << metrics::to_record(a.label, report) << "\n";
  std::cout << table;
  return kOk;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::vector<std::pair<std::string, metrics::ScoreReport>> rows;
  for (const auto& path : a.inputs) {
    for (const auto& line : read_lines(path)) {
      if (!line.empty()) rows.push_back(metrics::from_record(line));
    }
  }
  const std::string table = metrics::format_table(rows);
  if (!a.out.empty()) open_out(a.out) << table;
  std::cout << table;
  return kOk;
}

// --- gradcheck ----------------------------------------------------------------

struct GradcheckArgs {
  std::string config;
  std::size_t vocab = 16, nodes = 4, context = 5, response = 4;
};

int run_gradcheck(const GradcheckArgs& a) {
  data::RunConfig cfg;
  if (!a.config.empty()) cfg = data::load_config(a.config);
  model::ModelConfig mc;
  mc.encoder = cfg.encoder;
  mc.encoder.dropout_rate = 0.0;
  mc.vocab_size = a.vocab;
  amr::RelationVocab rels({":ARG0", ":ARG1", ":mod"});
  mc.relation_vocab_size = rels.size();
  mc.ablation = cfg.train.ablation;
  mc.validate();

  std::mt19937_64 rng(cfg.train.seed);
  num::ParamStore params = model::init_params(mc, rng);
  auto draw = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo); };

  data::EncodedExample ex;
  ex.id = "gradcheck";
  for (std::size_t i = 0; i < a.context; ++i) ex.context.push_back(draw(4, a.vocab));
  for (std::size_t i = 0; i < a.response; ++i) ex.response.push_back(draw(4, a.vocab));
  for (std::size_t i = 0; i < a.nodes; ++i) ex.nodes.push_back(draw(4, a.vocab));
  ex.relations = amr::RelationIndexMatrix(a.nodes, amr::RelationVocab::kNone);
  for (std::size_t i = 0; i < a.nodes; ++i) {
    for (std::size_t j = 0; j < a.nodes; ++j) {
      ex.relations(i, j) = i == j ? amr::RelationVocab::kSelf : static_cast<amr::RelationId>(draw(1, rels.size()));
    }
  }
  const std::vector<data::EncodedExample> batch{ex};

  const auto t0 = std::chrono::steady_clock::now();
  const auto res = num::grad_check(
      [&](const num::ParamStore& p) { return train::compute_loss(batch, p, mc); }, params);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("parameters %zu  max relative error %.3e  (worst %s[%zu]: analytic %.10g numeric %.10g)  %.2fs\n",
              params.scalar_count(), res.max_rel_error, res.worst_param.c_str(), res.worst_index, res.analytic,
              res.numeric, s);
  return res.max_rel_error < 1e-4 ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AMR-augmented dialogue generation"};
  app.require_subcommand(1);

  ParseArgs pa;
  auto* parse = app.add_subcommand("parse", "validate, simplify and linearize dialogue graphs");
  parse->add_option("--in", pa.in, "dialogue records (jsonl)")->required();
  parse->add_option("--out", pa.out, "graph dump")->required();
  parse->add_option("--config", pa.config, "run config (simplify section)");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "train a model");
  trn->add_option("--config", ta.config, "run config");
  trn->add_option("--data", ta.data, "training records (jsonl)")->required();
  trn->add_option("--out", ta.out, "checkpoint directory")->required();
  trn->add_option("--ablation", ta.ablation, "none | no_text | no_amr")
      ->check(CLI::IsMember({"none", "no_text", "no_amr"}));
  trn->add_option("--seed", ta.seed);
  trn->add_option("--epochs", ta.epochs);
  trn->add_option("--steps", ta.steps, "optimizer step budget");
  trn->add_option("--lr", ta.lr);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "decode responses");
  gen->add_option("--ckpt", ga.ckpt, "checkpoint file")->required();
  gen->add_option("--data", ga.data, "records (jsonl)")->required();
  gen->add_option("--out", ga.out, "one response per line")->required();
  gen->add_option("--beam", ga.beam, "beam width (1 = greedy)");
  gen->add_option("--max-len", ga.max_len);
  gen->add_option("--refs-out", ga.refs_out, "also write tokenized gold responses");
  gen->add_option("--config", ga.config, "run config (decode, simplify sections)");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score predictions against references");
  ev->add_option("--preds", ea.preds)->required();
  ev->add_option("--refs", ea.refs)->required();
  ev->add_option("--out", ea.out, "text table")->required();
  ev->add_option("--records", ea.records, "jsonl record file (default <out>.jsonl)");
  ev->add_option("--label", ea.label, "row label");

  GradcheckArgs gca;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the training loss");
  gc->add_option("--config", gca.config, "run config (model section)");
  gc->add_option("--vocab", gca.vocab);
  gc->add_option("--nodes", gca.nodes);
  gc->add_option("--context", gca.context);

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "merge score records into one table");
  rep->add_option("inputs", ra.inputs, "record files")->required();
  rep->add_option("--out", ra.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*parse) return run_parse(pa);
    if (*trn) return run_train(ta);
    if (*gen) return run_generate(ga);
    if (*ev) return run_eval(ea);
    if (*gc) return run_gradcheck(gca);
    if (*rep) return run_report(ra);
  } catch (const PenmanError& e) {
    std::cerr << "error: " << to_string(e.code()) << " at byte " << e.offset() << ": " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

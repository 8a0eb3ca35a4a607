#include <cstring>
#include <fstream>
#include <iterator>

#include "amrdia/config.hpp"
#include "amrdia/error.hpp"
#include "amrdia/training.hpp"

namespace amrdia::train {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'M', 'R', 'D', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::string& bytes, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  void tensor(const std::string& name, const num::Shape& shape, std::span<const double> values) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    pod<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) pod<std::uint64_t>(d);
    for (double x : values) pod(x);
  }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, num::Tensor> tensor() {
    std::string name = bytes(pod<std::uint32_t>());
    const auto rank = pod<std::uint32_t>();
    if (rank == 0 || rank > 2) throw Error(ErrorCode::CorruptChecksum, "bad tensor rank in checkpoint");
    num::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(pod<std::uint64_t>());
    const std::size_t n = num::numel(shape);
    need(n * sizeof(double));
    std::vector<double> values(n);
    for (double& x : values) x = pod<double>();
    return {std::move(name), num::Tensor::from(std::move(shape), std::move(values))};
  }
  bool at_end() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw Error(ErrorCode::CorruptChecksum, "checkpoint is truncated");
  }
  const std::string& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  json header;
  header["model"] = data::to_json(c.model.encoder);
  header["model"]["vocab_size"] = c.model.vocab_size;
  header["model"]["relation_vocab_size"] = c.model.relation_vocab_size;
  header["model"]["ablation"] = model::to_string(c.model.ablation);
  header["train"] = data::to_json(c.train);
  header["vocab"] = c.vocab.tokens();
  header["relations"] = c.relations.labels();
  header["rng"] = c.rng_state;
  header["epoch"] = c.epoch;
  header["best_loss"] = c.best_loss;
  header["loss_log"] = c.loss_log;
  header["adam_step"] = c.adam.step;
  const std::string header_text = header.dump();

  Writer w;
  w.bytes(std::string(kMagic, sizeof kMagic));
  w.pod<std::uint32_t>(c.format_version);
  w.pod<std::uint64_t>(header_text.size());
  w.bytes(header_text);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, t] : c.params) w.tensor(name, t.shape(), t.data());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(c.adam.m.size() + c.adam.v.size()));
  for (const auto& [name, m] : c.adam.m) w.tensor("m/" + name, {m.size()}, m);
  for (const auto& [name, v] : c.adam.v) w.tensor("v/" + name, {v.size()}, v);
  w.pod<std::uint64_t>(fnv1a(w.buffer(), w.buffer().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kMinSize = sizeof kMagic + 4 + 8 + 8;
  if (bytes.size() < kMinSize) throw Error(ErrorCode::CorruptChecksum, path.string() + " is truncated");
  if (bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::IoFailure, path.string() + " is not a checkpoint file");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(bytes, body)) throw Error(ErrorCode::CorruptChecksum, path.string() + " failed its checksum");

  Reader r(bytes, body);
  r.bytes(sizeof kMagic);
  Checkpoint c;
  c.format_version = r.pod<std::uint32_t>();
  if (c.format_version != Checkpoint::kFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(c.format_version) + ", expected " +
                                                std::to_string(Checkpoint::kFormatVersion));
  }
  const json header = json::parse(r.bytes(r.pod<std::uint64_t>()));
  json enc = header.at("model");
  c.model.vocab_size = enc.at("vocab_size").get<std::size_t>();
  c.model.relation_vocab_size = enc.at("relation_vocab_size").get<std::size_t>();
  c.model.ablation = model::ablation_from_string(enc.at("ablation").get<std::string>());
  for (const char* k : {"vocab_size", "relation_vocab_size", "ablation"}) enc.erase(k);
  data::from_json_into(enc, c.model.encoder);
  data::from_json_into(header.at("train"), c.train);
  c.vocab = data::Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  c.relations = amr::RelationVocab(header.at("relations").get<std::vector<std::string>>());
  c.rng_state = header.at("rng").get<std::string>();
  c.epoch = header.at("epoch").get<std::uint64_t>();
  c.best_loss = header.at("best_loss").get<double>();
  c.loss_log = header.at("loss_log").get<std::vector<double>>();
  c.adam.step = header.at("adam_step").get<std::uint64_t>();

  const auto n_params = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    auto [name, t] = r.tensor();
    c.params.add(name, std::move(t));
  }
  const auto n_moments = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    auto [name, t] = r.tensor();
    auto& slot = name.rfind("m/", 0) == 0 ? c.adam.m : c.adam.v;
    slot[name.substr(2)] = std::vector<double>(t.data().begin(), t.data().end());
  }
  if (!r.at_end()) throw Error(ErrorCode::CorruptChecksum, "trailing bytes in " + path.string());
  return c;
}

}  // namespace amrdia::train

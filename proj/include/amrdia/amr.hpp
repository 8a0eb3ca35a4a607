#pragma once

// AMR graphs: PENMAN ingestion and serialization, simplification,
// linearization and the pairwise relation-id matrix fed to the graph encoder.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace amrdia::amr {

struct AmrNode {
  std::optional<std::string> variable;
  std::string label;  // concept or constant value
  bool is_constant = false;

  bool operator==(const AmrNode&) const = default;
};

struct RelationTriple {
  std::size_t source = 0;
  std::string label;
  std::size_t target = 0;

  bool operator==(const RelationTriple&) const = default;
};

/// Rooted, labeled, directed graph. Node 0 is the root for parsed graphs; `root`
/// is kept explicit so hand-built graphs may differ.
struct AmrGraph {
  std::vector<AmrNode> nodes;
  std::vector<RelationTriple> edges;
  std::size_t root = 0;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }
  /// Indices into `edges` of outgoing edges of `node`, in stored order.
  std::vector<std::size_t> outgoing(std::size_t node) const;

  bool operator==(const AmrGraph&) const = default;
};

/// Throws Error(InvariantViolation) describing the first violated invariant.
void validate(const AmrGraph& graph);
bool is_valid(const AmrGraph& graph) noexcept;

/// Parses one PENMAN expression. Throws PenmanError with the byte offset of the problem.
AmrGraph parse_penman(std::string_view text);

/// Splits a PENMAN file into blank-line separated blocks, dropping `#` comment lines.
std::vector<std::string> split_penman_blocks(std::string_view file_text);

/// Canonical single-line PENMAN. Variables are regenerated from concept initials
/// (`d`, `d2`, ...); every node must be reachable from the root along edge direction.
std::string serialize_penman(const AmrGraph& graph);

/// Structural equality up to node renumbering: same concepts/constant flags,
/// same edge multiset, root mapped to root.
bool is_isomorphic(const AmrGraph& a, const AmrGraph& b);

struct SimplifyConfig {
  bool strip_sense_tags = true;
  bool drop_wiki_edges = true;
};

AmrGraph simplify(const AmrGraph& graph, const SimplifyConfig& config = {});

/// Removes a trailing `-NN` sense suffix ("want-01" -> "want").
std::string strip_sense_tag(std::string_view label);

/// Variable-free depth-first flattening, e.g.
/// (w / want-01 :ARG0 (b / boy)) -> want-01 :ARG0 boy
std::vector<std::string> linearize(const AmrGraph& graph);

AmrGraph merge_graphs(std::span<const AmrGraph> graphs);

using RelationId = std::uint32_t;

/// Relation label -> id. Ids 0..2 are reserved; every known label owns a
/// forward id and a distinct reverse id.
class RelationVocab {
 public:
  static constexpr RelationId kSelf = 0;
  static constexpr RelationId kNone = 1;
  static constexpr RelationId kUnknown = 2;

  RelationVocab() = default;
  /// Labels are deduplicated and sorted so construction order does not matter.
  explicit RelationVocab(std::vector<std::string> labels);

  static RelationVocab from_graphs(std::span<const AmrGraph> graphs);

  RelationId forward(std::string_view label) const;
  RelationId reverse(std::string_view label) const;
  std::size_t size() const { return 3 + 2 * labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const RelationVocab&) const = default;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, RelationId, std::less<>> index_;
};

/// Dense row-major M x M matrix of relation ids.
class RelationIndexMatrix {
 public:
  RelationIndexMatrix() = default;
  RelationIndexMatrix(std::size_t size, RelationId fill) : size_(size), ids_(size * size, fill) {}

  std::size_t size() const { return size_; }
  RelationId operator()(std::size_t i, std::size_t j) const { return ids_[i * size_ + j]; }
  RelationId& operator()(std::size_t i, std::size_t j) { return ids_[i * size_ + j]; }
  std::span<const RelationId> ids() const { return ids_; }

  bool operator==(const RelationIndexMatrix&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<RelationId> ids_;
};

RelationIndexMatrix relation_matrix(const AmrGraph& graph, const RelationVocab& vocab);

}  // namespace amrdia::amr

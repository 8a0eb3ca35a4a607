#include "amrdia/amr.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "amrdia/error.hpp"

namespace amrdia::amr {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Variables look like `b`, `b2`, `x17`.
bool is_variable_shaped(std::string_view s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

enum class TokKind { LParen, RParen, Slash, Role, String, Symbol };

struct Token {
  TokKind kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (c == '(') {
      out.push_back({TokKind::LParen, "(", i++});
    } else if (c == ')') {
      out.push_back({TokKind::RParen, ")", i++});
    } else if (c == '/') {
      out.push_back({TokKind::Slash, "/", i++});
    } else if (c == '"') {
      const std::size_t start = i++;
      std::string value;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          value.push_back(text[i + 1]);
          i += 2;
        } else if (text[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          value.push_back(text[i++]);
        }
      }
      if (!closed) throw PenmanError(ErrorCode::UnexpectedToken, start, "unterminated string literal");
      out.push_back({TokKind::String, std::move(value), start});
    } else {
      const std::size_t start = i;
      while (i < text.size() && !is_space(text[i]) && text[i] != '(' && text[i] != ')' && text[i] != '/' &&
             text[i] != '"') {
        ++i;
      }
      std::string word(text.substr(start, i - start));
      const TokKind kind = word.front() == ':' ? TokKind::Role : TokKind::Symbol;
      out.push_back({kind, std::move(word), start});
    }
  }
  return out;
}

void check_balance(const std::vector<Token>& toks) {
  std::vector<std::size_t> open;
  for (const auto& t : toks) {
    if (t.kind == TokKind::LParen) {
      open.push_back(t.offset);
    } else if (t.kind == TokKind::RParen) {
      if (open.empty()) throw PenmanError(ErrorCode::UnbalancedParens, t.offset, "unmatched ')'");
      open.pop_back();
    }
  }
  if (!open.empty()) throw PenmanError(ErrorCode::UnbalancedParens, open.back(), "unclosed '('");
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks, std::size_t text_size) : toks_(std::move(toks)), end_offset_(text_size) {
    for (std::size_t i = 0; i + 1 < toks_.size(); ++i) {
      if (toks_[i].kind == TokKind::LParen && toks_[i + 1].kind == TokKind::Symbol) defined_.insert(toks_[i + 1].text);
    }
  }

  AmrGraph run() {
    if (toks_.empty()) throw PenmanError(ErrorCode::EmptyInput, 0, "no PENMAN expression");
    if (peek().kind != TokKind::LParen) throw PenmanError(ErrorCode::UnexpectedToken, peek().offset, "expected '('");
    parse_node();
    if (pos_ != toks_.size()) {
      throw PenmanError(ErrorCode::UnexpectedToken, toks_[pos_].offset, "trailing content after root expression");
    }
    for (const auto& ref : pending_) {
      // defined_ was collected from the same token stream, so every pending name resolves.
      graph_.edges[ref.edge].target = variables_.at(ref.name);
    }
    std::set<std::tuple<std::size_t, std::string, std::size_t>> seen;
    for (std::size_t k = 0; k < graph_.edges.size(); ++k) {
      const auto& e = graph_.edges[k];
      if (e.source == e.target) {
        throw PenmanError(ErrorCode::InvariantViolation, edge_offsets_[k], "self-loop on '" + e.label + "'");
      }
      if (!seen.emplace(e.source, e.label, e.target).second) {
        throw PenmanError(ErrorCode::InvariantViolation, edge_offsets_[k], "duplicate relation '" + e.label + "'");
      }
    }
    graph_.root = 0;
    return std::move(graph_);
  }

 private:
  struct PendingRef {
    std::size_t edge;
    std::string name;
  };

  const Token& peek() const {
    static const Token eof{TokKind::RParen, "", 0};
    return pos_ < toks_.size() ? toks_[pos_] : eof;
  }
  bool at_end() const { return pos_ >= toks_.size(); }
  std::size_t here() const { return at_end() ? end_offset_ : toks_[pos_].offset; }

  std::size_t parse_node() {
    ++pos_;  // '('
    if (at_end() || peek().kind != TokKind::Symbol) {
      throw PenmanError(ErrorCode::UnexpectedToken, here(), "expected variable after '('");
    }
    const Token& var = toks_[pos_++];
    if (variables_.count(var.text) != 0) {
      throw PenmanError(ErrorCode::DuplicateVariable, var.offset, "variable '" + var.text + "' defined twice");
    }
    if (at_end() || peek().kind != TokKind::Slash) {
      throw PenmanError(ErrorCode::MissingSlash, here(), "expected '/' after variable '" + var.text + "'");
    }
    ++pos_;
    if (at_end() || (peek().kind != TokKind::Symbol && peek().kind != TokKind::String) ||
        (peek().kind == TokKind::String && peek().text.empty())) {
      throw PenmanError(ErrorCode::EmptyConcept, here(), "missing concept for variable '" + var.text + "'");
    }
    const std::size_t index = graph_.nodes.size();
    graph_.nodes.push_back({var.text, toks_[pos_++].text, false});
    variables_.emplace(var.text, index);

    while (true) {
      if (at_end()) throw PenmanError(ErrorCode::UnbalancedParens, end_offset_, "unclosed '('");
      const Token& t = peek();
      if (t.kind == TokKind::RParen) {
        ++pos_;
        return index;
      }
      if (t.kind != TokKind::Role || t.text.size() < 2) {
        throw PenmanError(ErrorCode::UnexpectedToken, t.offset, "expected relation or ')', got '" + t.text + "'");
      }
      const std::size_t role_offset = t.offset;
      std::string label = t.text;
      ++pos_;
      parse_child(index, std::move(label), role_offset);
    }
  }

  void parse_child(std::size_t source, std::string label, std::size_t role_offset) {
    if (at_end()) throw PenmanError(ErrorCode::UnexpectedToken, end_offset_, "relation without a value");
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::LParen: {
        const std::size_t edge = graph_.edges.size();
        graph_.edges.push_back({source, std::move(label), 0});
        edge_offsets_.push_back(role_offset);
        graph_.edges[edge].target = parse_node();
        return;
      }
      case TokKind::String:
        add_constant(source, std::move(label), t.text, role_offset);
        ++pos_;
        return;
      case TokKind::Symbol: {
        ++pos_;
        if (defined_.count(t.text) != 0) {
          pending_.push_back({graph_.edges.size(), t.text});
          graph_.edges.push_back({source, std::move(label), 0});
          edge_offsets_.push_back(role_offset);
        } else if (is_variable_shaped(t.text)) {
          throw PenmanError(ErrorCode::UnknownVariableReference, t.offset, "unknown variable '" + t.text + "'");
        } else {
          add_constant(source, std::move(label), t.text, role_offset);
        }
        return;
      }
      default:
        throw PenmanError(ErrorCode::UnexpectedToken, t.offset, "relation without a value");
    }
  }

  void add_constant(std::size_t source, std::string label, const std::string& value, std::size_t role_offset) {
    if (value.empty()) throw PenmanError(ErrorCode::EmptyConcept, toks_[pos_].offset, "empty constant");
    const std::size_t index = graph_.nodes.size();
    graph_.nodes.push_back({std::nullopt, value, true});
    graph_.edges.push_back({source, std::move(label), index});
    edge_offsets_.push_back(role_offset);
  }

  std::vector<Token> toks_;
  std::size_t end_offset_;
  std::size_t pos_ = 0;
  AmrGraph graph_;
  std::unordered_map<std::string, std::size_t> variables_;
  std::unordered_set<std::string> defined_;
  std::vector<PendingRef> pending_;
  std::vector<std::size_t> edge_offsets_;
};

bool needs_quotes(std::string_view s, bool is_constant) {
  if (s.empty()) return true;
  const bool plain = std::none_of(s.begin(), s.end(), [](char c) {
    return is_space(c) || c == '(' || c == ')' || c == '/' || c == '"' || c == ':' || c == '\\';
  });
  if (!is_constant) return !plain;
  if (s == "-" || s == "+") return false;
  // Bare constants must not be mistaken for variable references on re-parse.
  const bool numeric = std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '-' || c == 'e' || c == '+';
  }) && std::isdigit(static_cast<unsigned char>(s.back())) != 0;
  return !(plain && numeric);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<std::size_t> AmrGraph::outgoing(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].source == node) out.push_back(k);
  }
  return out;
}

void validate(const AmrGraph& g) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvariantViolation, why); };
  if (g.nodes.empty()) fail("graph has no nodes");
  if (g.root >= g.nodes.size()) fail("root index out of range");
  if (g.nodes[g.root].is_constant) fail("root is a constant");
  std::set<std::string> vars;
  for (const auto& n : g.nodes) {
    if (n.label.empty()) fail("empty concept");
    if (n.is_constant && n.variable) fail("constant node carries a variable");
    if (n.variable && !vars.insert(*n.variable).second) fail("duplicate variable '" + *n.variable + "'");
  }
  std::set<std::tuple<std::size_t, std::string, std::size_t>> seen;
  for (const auto& e : g.edges) {
    if (e.source >= g.nodes.size() || e.target >= g.nodes.size()) fail("edge endpoint out of range");
    if (e.label.size() < 2 || e.label.front() != ':') fail("relation label must start with ':'");
    if (e.source == e.target) fail("self-loop on '" + e.label + "'");
    if (g.nodes[e.source].is_constant) fail("constant node has an outgoing edge");
    if (!seen.emplace(e.source, e.label, e.target).second) fail("duplicate relation triple");
  }
  // Undirected connectivity.
  std::vector<std::size_t> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (const auto& e : g.edges) parent[find(e.source)] = find(e.target);
  const std::size_t r = find(g.root);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (find(i) != r) fail("node " + std::to_string(i) + " is disconnected from the root");
  }
}

bool is_valid(const AmrGraph& graph) noexcept {
  try {
    validate(graph);
    return true;
  } catch (const Error&) {
    return false;
  }
}

AmrGraph parse_penman(std::string_view text) {
  auto toks = lex(text);
  check_balance(toks);
  return Parser(std::move(toks), text.size()).run();
}

std::vector<std::string> split_penman_blocks(std::string_view file_text) {
  std::vector<std::string> blocks;
  std::string current;
  std::size_t start = 0;
  while (start <= file_text.size()) {
    std::size_t end = file_text.find('\n', start);
    if (end == std::string_view::npos) end = file_text.size();
    std::string_view line = file_text.substr(start, end - start);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
    } else if (line[first] != '#') {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    start = end + 1;
  }
  if (!current.empty()) blocks.push_back(std::move(current));
  return blocks;
}

std::string serialize_penman(const AmrGraph& g) {
  validate(g);
  std::vector<std::string> vars(g.nodes.size());
  std::map<char, int> used;
  std::vector<bool> expanded(g.nodes.size(), false);
  std::vector<int> constant_uses(g.nodes.size(), 0);
  std::string out;

  std::function<void(std::size_t)> emit = [&](std::size_t node) {
    expanded[node] = true;
    const auto& n = g.nodes[node];
    char initial = std::isalpha(static_cast<unsigned char>(n.label.front())) != 0
                       ? static_cast<char>(std::tolower(static_cast<unsigned char>(n.label.front())))
                       : 'x';
    const int count = ++used[initial];
    vars[node] = count == 1 ? std::string(1, initial) : initial + std::to_string(count);
    out += "(" + vars[node] + " / " + (needs_quotes(n.label, false) ? quote(n.label) : n.label);
    for (std::size_t k : g.outgoing(node)) {
      const auto& e = g.edges[k];
      const auto& child = g.nodes[e.target];
      out += " " + e.label + " ";
      if (child.is_constant) {
        if (++constant_uses[e.target] > 1) {
          throw Error(ErrorCode::InvariantViolation, "constant node shared by several relations");
        }
        expanded[e.target] = true;
        out += needs_quotes(child.label, true) ? quote(child.label) : child.label;
      } else if (expanded[e.target]) {
        out += vars[e.target];
      } else {
        emit(e.target);
      }
    }
    out += ")";
  };
  emit(g.root);
  if (std::find(expanded.begin(), expanded.end(), false) != expanded.end()) {
    throw Error(ErrorCode::InvariantViolation, "node not reachable from the root along edge direction");
  }
  return out;
}

bool is_isomorphic(const AmrGraph& a, const AmrGraph& b) {
  const std::size_t n = a.nodes.size();
  if (n != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
  if (n == 0) return true;

  auto signature = [](const AmrNode& x) { return std::make_pair(x.label, x.is_constant); };
  {
    std::vector<std::pair<std::string, bool>> sa, sb;
    for (const auto& x : a.nodes) sa.push_back(signature(x));
    for (const auto& x : b.nodes) sb.push_back(signature(x));
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  using PairLabels = std::map<std::pair<std::size_t, std::size_t>, std::vector<std::string>>;
  auto pair_labels = [](const AmrGraph& g) {
    PairLabels m;
    for (const auto& e : g.edges) m[{e.source, e.target}].push_back(e.label);
    for (auto& [k, v] : m) std::sort(v.begin(), v.end());
    return m;
  };
  const PairLabels la = pair_labels(a), lb = pair_labels(b);
  auto labels = [](const PairLabels& m, std::size_t i, std::size_t j) {
    static const std::vector<std::string> none;
    auto it = m.find({i, j});
    return it == m.end() ? none : it->second;
  };

  // Visit order: undirected BFS from the root so each step is constrained by mapped neighbours.
  std::vector<std::size_t> order{a.root};
  std::vector<bool> queued(n, false);
  queued[a.root] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (const auto& e : a.edges) {
      for (auto [from, to] : {std::pair{e.source, e.target}, std::pair{e.target, e.source}}) {
        if (from == order[head] && !queued[to]) {
          queued[to] = true;
          order.push_back(to);
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!queued[i]) order.push_back(i);
  }

  std::vector<std::size_t> map(n, n);
  std::vector<bool> taken(n, false);
  std::function<bool(std::size_t)> extend = [&](std::size_t depth) -> bool {
    if (depth == n) return true;
    const std::size_t u = order[depth];
    for (std::size_t v = 0; v < n; ++v) {
      if (taken[v] || signature(a.nodes[u]) != signature(b.nodes[v])) continue;
      if (depth == 0 && v != b.root) continue;
      bool ok = labels(la, u, u) == labels(lb, v, v);
      for (std::size_t k = 0; ok && k < depth; ++k) {
        const std::size_t w = order[k];
        ok = labels(la, u, w) == labels(lb, v, map[w]) && labels(la, w, u) == labels(lb, map[w], v);
      }
      if (!ok) continue;
      map[u] = v;
      taken[v] = true;
      if (extend(depth + 1)) return true;
      taken[v] = false;
    }
    return false;
  };
  return extend(0);
}

std::string strip_sense_tag(std::string_view label) {
  const std::size_t n = label.size();
  if (n >= 4 && label[n - 3] == '-' && std::isdigit(static_cast<unsigned char>(label[n - 2])) != 0 &&
      std::isdigit(static_cast<unsigned char>(label[n - 1])) != 0) {
    return std::string(label.substr(0, n - 3));
  }
  return std::string(label);
}

AmrGraph simplify(const AmrGraph& graph, const SimplifyConfig& config) {
  AmrGraph g = graph;
  if (config.strip_sense_tags) {
    for (auto& n : g.nodes) {
      if (!n.is_constant) n.label = strip_sense_tag(n.label);
    }
  }
  if (!config.drop_wiki_edges) return g;

  std::vector<bool> drop_node(g.nodes.size(), false);
  std::vector<RelationTriple> kept;
  for (const auto& e : g.edges) {
    if (e.label == ":wiki" && g.nodes[e.target].is_constant) {
      drop_node[e.target] = true;
    } else {
      kept.push_back(e);
    }
  }
  // A constant still referenced by a surviving edge stays.
  for (const auto& e : kept) drop_node[e.target] = false;

  std::vector<std::size_t> remap(g.nodes.size());
  AmrGraph out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (drop_node[i]) continue;
    remap[i] = out.nodes.size();
    out.nodes.push_back(g.nodes[i]);
  }
  for (auto e : kept) {
    e.source = remap[e.source];
    e.target = remap[e.target];
    out.edges.push_back(std::move(e));
  }
  out.root = remap[g.root];
  return out;
}

std::vector<std::string> linearize(const AmrGraph& g) {
  std::vector<std::string> out;
  std::vector<bool> visited(g.nodes.size(), false);
  std::function<void(std::size_t)> walk = [&](std::size_t node) {
    visited[node] = true;
    out.push_back(g.nodes[node].label);
    for (std::size_t k : g.outgoing(node)) {
      const auto& e = g.edges[k];
      out.push_back(e.label);
      if (visited[e.target]) {
        out.push_back(g.nodes[e.target].label);
      } else if (g.outgoing(e.target).empty()) {
        visited[e.target] = true;
        out.push_back(g.nodes[e.target].label);
      } else {
        out.push_back("(");
        walk(e.target);
        out.push_back(")");
      }
    }
  };
  if (!g.nodes.empty()) walk(g.root);
  return out;
}

AmrGraph merge_graphs(std::span<const AmrGraph> graphs) {
  if (graphs.empty()) throw Error(ErrorCode::EmptyInput, "merge_graphs needs at least one graph");
  if (graphs.size() == 1) return graphs.front();

  AmrGraph out;
  out.nodes.push_back({std::nullopt, "multi-sentence", false});
  out.root = 0;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const auto& g = graphs[s];
    const std::size_t base = out.nodes.size();
    for (const auto& n : g.nodes) {
      // Per-sentence variables collide across sentences; serialization regenerates them.
      out.nodes.push_back({std::nullopt, n.label, n.is_constant});
    }
    out.edges.push_back({0, ":snt" + std::to_string(s + 1), base + g.root});
    for (const auto& e : g.edges) out.edges.push_back({base + e.source, e.label, base + e.target});
  }
  return out;
}

RelationVocab::RelationVocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (std::size_t k = 0; k < labels_.size(); ++k) index_.emplace(labels_[k], static_cast<RelationId>(k));
}

RelationVocab RelationVocab::from_graphs(std::span<const AmrGraph> graphs) {
  std::vector<std::string> labels;
  for (const auto& g : graphs) {
    for (const auto& e : g.edges) labels.push_back(e.label);
  }
  return RelationVocab(std::move(labels));
}

RelationId RelationVocab::forward(std::string_view label) const {
  auto it = index_.find(label);
  return it == index_.end() ? kUnknown : 3 + 2 * it->second;
}

RelationId RelationVocab::reverse(std::string_view label) const {
  auto it = index_.find(label);
  return it == index_.end() ? kUnknown : 4 + 2 * it->second;
}

RelationIndexMatrix relation_matrix(const AmrGraph& graph, const RelationVocab& vocab) {
  const std::size_t m = graph.nodes.size();
  RelationIndexMatrix rel(m, RelationVocab::kNone);
  for (std::size_t i = 0; i < m; ++i) rel(i, i) = RelationVocab::kSelf;
  for (const auto& e : graph.edges) {
    if (rel(e.source, e.target) == RelationVocab::kNone) rel(e.source, e.target) = vocab.forward(e.label);
    if (rel(e.target, e.source) == RelationVocab::kNone) rel(e.target, e.source) = vocab.reverse(e.label);
  }
  return rel;
}

}  // namespace amrdia::amr

#include "amrdia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <set>

#include "amrdia/error.hpp"

namespace amrdia::metrics {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (n == 0 || toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

std::size_t overlap(const std::map<Ngram, std::size_t>& cand, const std::map<Ngram, std::size_t>& ref) {
  std::size_t m = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

void check_lengths(std::span<const Tokens> c, std::span<const Tokens> r) {
  if (c.size() != r.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(c.size()) + " candidates vs " + std::to_string(r.size()) + " references");
  }
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

NgramCount modified_precision(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t n) {
  check_lengths(candidates, references);
  NgramCount out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = ngram_counts(candidates[i], n);
    out.matched += overlap(cand, ngram_counts(references[i], n));
    for (const auto& [g, c] : cand) out.total += c;
  }
  return out;
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c == 0) return 0.0;
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

std::vector<double> bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t max_n) {
  check_lengths(candidates, references);
  std::size_t c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c_len += candidates[i].size();
    r_len += references[i].size();
  }
  const double bp = brevity_penalty(c_len, r_len);
  std::vector<double> log_p(max_n);
  bool unigram_zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCount c = modified_precision(candidates, references, n);
    double p;
    if (c.matched > 0) {
      p = static_cast<double>(c.matched) / static_cast<double>(c.total);
    } else if (n >= 2) {
      p = 1.0 / static_cast<double>(c.total + 1);
    } else {
      p = 0.0;
      unigram_zero = true;
    }
    log_p[n - 1] = p > 0.0 ? std::log(p) : 0.0;
  }
  std::vector<double> out(max_n, 0.0);
  if (bp == 0.0 || unigram_zero) return out;
  double acc = 0.0;
  for (std::size_t k = 1; k <= max_n; ++k) {
    acc += log_p[k - 1];
    // B-k weights each order 1/k: exp(sum_{n<=k} log p_n / k).
    out[k - 1] = bp * std::exp(acc / static_cast<double>(k));
  }
  return out;
}

RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t c_total = 0, r_total = 0;
  for (const auto& [g, c] : cand) c_total += c;
  for (const auto& [g, c] : ref) r_total += c;
  const double m = static_cast<double>(overlap(cand, ref));
  RougeScore s;
  s.recall = r_total ? m / static_cast<double>(r_total) : 0.0;
  s.precision = c_total ? m / static_cast<double>(c_total) : 0.0;
  s.f1 = f1(s.precision, s.recall);
  return s;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l_score(const Tokens& candidate, const Tokens& reference) {
  const double l = static_cast<double>(lcs_length(candidate, reference));
  RougeScore s;
  s.recall = reference.empty() ? 0.0 : l / static_cast<double>(reference.size());
  s.precision = candidate.empty() ? 0.0 : l / static_cast<double>(candidate.size());
  s.f1 = f1(s.precision, s.recall);
  return s;
}

double rouge_l(const Tokens& candidate, const Tokens& reference) { return 100.0 * rouge_l_score(candidate, reference).f1; }

double corpus_rouge_n(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t n) {
  check_lengths(candidates, references);
  if (candidates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) acc += rouge_n(candidates[i], references[i], n).f1;
  return 100.0 * acc / static_cast<double>(candidates.size());
}

double corpus_rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_lengths(candidates, references);
  if (candidates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) acc += rouge_l(candidates[i], references[i]);
  return acc / static_cast<double>(candidates.size());
}

double distinct_n(std::span<const Tokens> candidates, std::size_t n) {
  std::set<Ngram> unique;
  std::size_t total = 0;
  for (const auto& c : candidates) {
    for (const auto& [g, k] : ngram_counts(c, n)) {
      unique.insert(g);
      total += k;
    }
  }
  return total ? static_cast<double>(unique.size()) / static_cast<double>(total) : 0.0;
}

ScoreReport evaluate(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_lengths(candidates, references);
  ScoreReport r;
  const auto b = bleu(candidates, references, 4);
  std::copy(b.begin(), b.end(), r.bleu.begin());
  r.rouge1 = corpus_rouge_n(candidates, references, 1);
  r.rouge2 = corpus_rouge_n(candidates, references, 2);
  r.rougeL = corpus_rouge_l(candidates, references);
  for (std::size_t n = 1; n <= 4; ++n) r.distinct[n - 1] = distinct_n(candidates, n);
  r.corpus_size = candidates.size();
  return r;
}

std::string format_table(std::span<const std::pair<std::string, ScoreReport>> rows) {
  std::size_t label_w = 5;
  for (const auto& [label, r] : rows) label_w = std::max(label_w, label.size());
  const char* heads[] = {"B-1", "B-2", "B-3", "B-4", "R-1", "R-2", "R-L", "Dist-1", "Dist-2", "Dist-3", "Dist-4"};
  std::string out;
  char cell[64];
  out += "Model" + std::string(label_w - 5, ' ');
  for (const char* h : heads) {
    std::snprintf(cell, sizeof cell, " | %8s", h);
    out += cell;
  }
  out += "\n" + std::string(label_w, '-');
  for (std::size_t i = 0; i < std::size(heads); ++i) out += "-+---------";
  out += "\n";
  for (const auto& [label, r] : rows) {
    out += label + std::string(label_w - label.size(), ' ');
    const double values[] = {r.bleu[0],     r.bleu[1],     r.bleu[2],     r.bleu[3],    r.rouge1,     r.rouge2,
                             r.rougeL,      r.distinct[0], r.distinct[1], r.distinct[2], r.distinct[3]};
    for (std::size_t i = 0; i < std::size(values); ++i) {
      std::snprintf(cell, sizeof cell, " | %8.4f", values[i]);
      out += cell;
    }
    out += "\n";
  }
  return out;
}

std::string to_record(const std::string& label, const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["label"] = label;
  for (int i = 0; i < 4; ++i) j["B-" + std::to_string(i + 1)] = r.bleu[i];
  j["R-1"] = r.rouge1;
  j["R-2"] = r.rouge2;
  j["R-L"] = r.rougeL;
  for (int i = 0; i < 4; ++i) j["Dist-" + std::to_string(i + 1)] = r.distinct[i];
  j["n"] = r.corpus_size;
  return j.dump();
}

std::pair<std::string, ScoreReport> from_record(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ScoreReport r;
    for (int i = 0; i < 4; ++i) r.bleu[i] = j.at("B-" + std::to_string(i + 1)).get<double>();
    r.rouge1 = j.at("R-1").get<double>();
    r.rouge2 = j.at("R-2").get<double>();
    r.rougeL = j.at("R-L").get<double>();
    for (int i = 0; i < 4; ++i) r.distinct[i] = j.at("Dist-" + std::to_string(i + 1)).get<double>();
    r.corpus_size = j.at("n").get<std::size_t>();
    return {j.at("label").get<std::string>(), r};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad score record: ") + e.what());
  }
}

}  // namespace amrdia::metrics

#pragma once

// Referenced (BLEU, ROUGE) and unreferenced (Distinct-n) generation metrics.
//
// BLEU is corpus level: clipped n-gram counts and lengths are summed over the
// corpus before taking precisions. An order n >= 2 whose clipped count is zero
// is smoothed to (0 + 1) / (total + 1). ROUGE is averaged per example and
// reported on a 0-100 scale.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace amrdia::metrics {

using Tokens = std::vector<std::string>;

struct NgramCount {
  std::size_t matched = 0;  // clipped
  std::size_t total = 0;    // candidate n-grams
};

/// Corpus modified n-gram precision (clipped by reference counts).
NgramCount modified_precision(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t n);

double brevity_penalty(std::size_t candidate_length, std::size_t reference_length);

/// B-1..B-max_n, where B-k uses uniform weights over orders 1..k.
/// Throws Error(LengthMismatch) if the lists differ in size.
std::vector<double> bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t max_n = 4);

struct RougeScore {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// Raw ratios in [0, 1].
RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n);
RougeScore rouge_l_score(const Tokens& candidate, const Tokens& reference);
/// ROUGE-L F1 x 100.
double rouge_l(const Tokens& candidate, const Tokens& reference);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// Mean per-example F1 x 100.
double corpus_rouge_n(std::span<const Tokens> candidates, std::span<const Tokens> references, std::size_t n);
double corpus_rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Unique n-grams / total n-grams over all candidates; 0 when there are none.
double distinct_n(std::span<const Tokens> candidates, std::size_t n);

struct ScoreReport {
  std::array<double, 4> bleu{};      // B-1..B-4, [0, 1]
  double rouge1 = 0.0;               // 0-100
  double rouge2 = 0.0;
  double rougeL = 0.0;
  std::array<double, 4> distinct{};  // Dist-1..Dist-4, [0, 1]
  std::size_t corpus_size = 0;
};

ScoreReport evaluate(std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Aligned text table with columns B-1 B-2 B-3 B-4 R-1 R-2 R-L Dist-1..Dist-4.
std::string format_table(std::span<const std::pair<std::string, ScoreReport>> rows);
/// One JSON object per line: {"label": ..., "B-1": ..., ..., "n": ...}.
std::string to_record(const std::string& label, const ScoreReport& report);
std::pair<std::string, ScoreReport> from_record(const std::string& line);

}  // namespace amrdia::metrics

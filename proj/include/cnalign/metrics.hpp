#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cnalign/embedding.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

using Tokens = std::vector<std::string>;

/// Additive smoothing applied to zero-count n-gram precisions.
inline constexpr double kBleuEpsilon = 1e-9;

/// Sentence BLEU over 1- and 2-grams with uniform weights and brevity
/// penalty. Empty candidate scores 0.
double bleu2(const Tokens& candidate, const Tokens& reference);
double bleu2(std::string_view candidate, std::string_view reference, const Tokenizer& tok);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// LCS-based F-measure (beta = 1).
double rouge_l(const Tokens& candidate, const Tokens& reference);
double rouge_l(std::string_view candidate, std::string_view reference, const Tokenizer& tok);

/// Greedy cosine matching without idf weighting or baseline rescaling.
/// F is the harmonic mean of precision and recall, 0 when they differ in
/// sign or are both 0. Throws EmptyText.
double bert_score_f(const Tokens& candidate, const Tokens& reference, const EmbeddingBackend& emb);
double bert_score_f(std::string_view candidate, std::string_view reference, const Tokenizer& tok,
                    const EmbeddingBackend& emb);

/// Token vocabulary of a set of training counter narratives.
class NoveltyIndex {
 public:
  /// Throws EmptyCorpus when training_cns is empty.
  NoveltyIndex(const std::vector<std::string>& training_cns, const Tokenizer& tok);

  /// Fraction of candidate token occurrences absent from the vocabulary;
  /// 0 for an empty candidate.
  double novelty(const Tokens& candidate) const;
  bool contains(const std::string& token) const { return vocabulary_.contains(token); }

 private:
  std::unordered_set<std::string> vocabulary_;
};

double novelty(std::string_view candidate, const std::vector<std::string>& training_cns,
               const Tokenizer& tok);

std::size_t gen_len(std::string_view candidate, const Tokenizer& tok);

}  // namespace cnalign

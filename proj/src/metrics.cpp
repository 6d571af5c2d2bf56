#include "cnalign/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>

#include "cnalign/errors.hpp"

namespace cnalign {

namespace {

using NGramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NGramCounts ngram_counts(const Tokens& tokens, std::size_t n) {
  NGramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[std::move(gram)];
  }
  return counts;
}

double modified_precision(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& [gram, count] : cand) {
    total += count;
    auto it = ref.find(gram);
    if (it != ref.end()) matched += std::min(count, it->second);
  }
  const double numerator = matched == 0 ? kBleuEpsilon : static_cast<double>(matched);
  return numerator / static_cast<double>(std::max<std::size_t>(total, 1));
}

// Tokens of up to 7 bytes pack losslessly into a key; longer ones hash and
// are confirmed by a full comparison when keys collide.
std::uint64_t token_key(const std::string& t) {
  if (t.size() <= 7) {
    std::uint64_t key = t.size();
    for (std::size_t i = 0; i < t.size(); ++i) key |= std::uint64_t{static_cast<unsigned char>(t[i])} << (8 * (i + 1));
    return key;
  }
  return (std::hash<std::string>{}(t) << 8) | 0xFF;
}

double cosine(const Vector& a, const Vector& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

}  // namespace

double bleu2(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty()) return 0.0;
  const double p1 = modified_precision(candidate, reference, 1);
  const double p2 = modified_precision(candidate, reference, 2);
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(brevity * std::sqrt(p1 * p2), 0.0, 1.0);
}

double bleu2(std::string_view candidate, std::string_view reference, const Tokenizer& tok) {
  return bleu2(tok.tokenize(candidate), tok.tokenize(reference));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  if (b.size() <= 64) {
    // Bit-parallel LCS (Allison-Dix / Hyyro): one word op sequence per token of a.
    std::array<std::uint64_t, 64> keys{};
    for (std::size_t j = 0; j < b.size(); ++j) keys[j] = token_key(b[j]);
    const std::uint64_t all = b.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << b.size()) - 1;
    std::uint64_t v = all;
    for (const auto& token : a) {
      const std::uint64_t key = token_key(token);
      std::uint64_t match = 0;
      for (std::size_t j = 0; j < b.size(); ++j) match |= std::uint64_t{keys[j] == key} << j;
      if ((key & 0xFF) == 0xFF) {
        for (std::uint64_t m = match; m; m &= m - 1) {
          const auto j = static_cast<std::size_t>(__builtin_ctzll(m));
          if (b[j] != token) match &= ~(std::uint64_t{1} << j);
        }
      }
      const std::uint64_t u = v & match;
      v = ((v + u) | (v - u)) & all;
    }
    return static_cast<std::size_t>(__builtin_popcountll(~v & all));
  }

  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
      diagonal = above;
    }
  }
  return row[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double rouge_l(std::string_view candidate, std::string_view reference, const Tokenizer& tok) {
  return rouge_l(tok.tokenize(candidate), tok.tokenize(reference));
}

double bert_score_f(const Tokens& candidate, const Tokens& reference, const EmbeddingBackend& emb) {
  if (candidate.empty()) throw EmptyText("candidate");
  if (reference.empty()) throw EmptyText("reference");
  const auto cand = emb.embed(candidate);
  const auto ref = emb.embed(reference);

  std::vector<double> best_for_cand(cand.size(), -1.0);
  std::vector<double> best_for_ref(ref.size(), -1.0);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      const double s = cosine(cand[i], ref[j]);
      best_for_cand[i] = std::max(best_for_cand[i], s);
      best_for_ref[j] = std::max(best_for_ref[j], s);
    }
  }
  double precision = 0.0;
  for (double s : best_for_cand) precision += s;
  precision /= static_cast<double>(cand.size());
  double recall = 0.0;
  for (double s : best_for_ref) recall += s;
  recall /= static_cast<double>(ref.size());

  if (precision * recall <= 0.0) return 0.0;
  return std::clamp(2.0 * precision * recall / (precision + recall), -1.0, 1.0);
}

double bert_score_f(std::string_view candidate, std::string_view reference, const Tokenizer& tok,
                    const EmbeddingBackend& emb) {
  return bert_score_f(tok.tokenize(candidate), tok.tokenize(reference), emb);
}

NoveltyIndex::NoveltyIndex(const std::vector<std::string>& training_cns, const Tokenizer& tok) {
  if (training_cns.empty()) throw EmptyCorpus("novelty reference");
  for (const auto& cn : training_cns) {
    for (auto& token : tok.tokenize(cn)) vocabulary_.insert(std::move(token));
  }
}

double NoveltyIndex::novelty(const Tokens& candidate) const {
  if (candidate.empty()) return 0.0;
  std::size_t unseen = 0;
  for (const auto& token : candidate) unseen += vocabulary_.contains(token) ? 0 : 1;
  return static_cast<double>(unseen) / static_cast<double>(candidate.size());
}

double novelty(std::string_view candidate, const std::vector<std::string>& training_cns,
               const Tokenizer& tok) {
  return NoveltyIndex(training_cns, tok).novelty(tok.tokenize(candidate));
}

std::size_t gen_len(std::string_view candidate, const Tokenizer& tok) {
  return tok.tokenize(candidate).size();
}

}  // namespace cnalign

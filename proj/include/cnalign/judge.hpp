#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cnalign/corpus.hpp"
#include "cnalign/http_endpoint.hpp"

namespace cnalign {

enum class Verdict { A, B, Tie };
std::string to_string(Verdict verdict);

/// Pairwise judge of two candidate counter narratives for one HS/KN
/// context. Implementations must be safe to call from several threads.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual Verdict compare(std::string_view hate_speech, std::string_view knowledge,
                          std::string_view candidate_a, std::string_view candidate_b) = 0;
};

class ConstantJudge final : public JudgeClient {
 public:
  explicit ConstantJudge(Verdict verdict) : verdict_(verdict) {}
  Verdict compare(std::string_view, std::string_view, std::string_view, std::string_view) override {
    return verdict_;
  }

 private:
  Verdict verdict_;
};

/// Prefers the lexicographically smaller candidate; equal texts tie.
class LexicographicJudge final : public JudgeClient {
 public:
  Verdict compare(std::string_view, std::string_view, std::string_view a, std::string_view b) override {
    if (a == b) return Verdict::Tie;
    return a < b ? Verdict::A : Verdict::B;
  }
};

class FunctionJudge final : public JudgeClient {
 public:
  using Fn = std::function<Verdict(std::string_view, std::string_view, std::string_view, std::string_view)>;
  explicit FunctionJudge(Fn fn) : fn_(std::move(fn)) {}
  Verdict compare(std::string_view hs, std::string_view kn, std::string_view a, std::string_view b) override {
    return fn_(hs, kn, a, b);
  }

 private:
  Fn fn_;
};

/// Chat-completion judge. The reply's first word decides: "A", "B" or
/// "TIE" (case-insensitive); anything else is a TransportError.
class HttpJudgeClient final : public JudgeClient {
 public:
  explicit HttpJudgeClient(EndpointSettings settings);
  Verdict compare(std::string_view hate_speech, std::string_view knowledge,
                  std::string_view candidate_a, std::string_view candidate_b) override;

  static std::string render_request(std::string_view hate_speech, std::string_view knowledge,
                                    std::string_view candidate_a, std::string_view candidate_b);
  static Verdict parse_reply(std::string_view reply);

 private:
  std::unique_ptr<JsonEndpoint> endpoint_;
};

struct EloSettings {
  double initial_rating = 1000.0;
  double k_factor = 32.0;
  int parallelism = 4;
};

struct EloTable {
  std::map<std::string, double> ratings;
  std::map<std::string, int> games_played;
};

/// Expected score of a player rated `rating` against `opponent`.
double elo_expected(double rating, double opponent);

/// Round-robin tournament. For each example in order, every system pair
/// (i < j in label order) is judged once with system i as candidate A. Judge
/// calls may run concurrently; ratings are replayed sequentially in that
/// fixed order. A tie scores 0.5 each. Throws MisalignedOutputs.
EloTable judge_tournament(const std::map<std::string, std::vector<std::string>>& outputs_by_system,
                          const std::vector<ExampleRecord>& contexts, JudgeClient& judge,
                          const EloSettings& settings = {});

}  // namespace cnalign

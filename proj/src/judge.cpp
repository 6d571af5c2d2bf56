#include "cnalign/judge.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "cnalign/errors.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::A: return "A";
    case Verdict::B: return "B";
    case Verdict::Tie: return "TIE";
  }
  return "?";
}

HttpJudgeClient::HttpJudgeClient(EndpointSettings settings)
    : endpoint_(std::make_unique<JsonEndpoint>(std::move(settings))) {}

std::string HttpJudgeClient::render_request(std::string_view hate_speech, std::string_view knowledge,
                                            std::string_view candidate_a, std::string_view candidate_b) {
  std::string out =
      "You are judging counter narratives written in response to hate speech. Given the hate "
      "speech (HS) and the background knowledge (KN), decide which counter narrative is more "
      "relevant, factual, specific and effective. Answer with a single word: A, B or TIE.\n\n";
  out.append("HS: ").append(hate_speech).append("\n\n");
  out.append("KN: ").append(knowledge).append("\n\n");
  out.append("Counter narrative A: ").append(candidate_a).append("\n\n");
  out.append("Counter narrative B: ").append(candidate_b).append("\n\n");
  out.append("Answer:");
  return out;
}

Verdict HttpJudgeClient::parse_reply(std::string_view reply) {
  const auto words = split_whitespace(reply);
  if (!words.empty()) {
    std::string word;
    for (char c : words.front()) {
      if (std::isalpha(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (word == "A") return Verdict::A;
    if (word == "B") return Verdict::B;
    if (word == "TIE") return Verdict::Tie;
  }
  throw TransportError("judge", "unrecognized verdict '" + std::string(reply) + "'");
}

Verdict HttpJudgeClient::compare(std::string_view hate_speech, std::string_view knowledge,
                                 std::string_view candidate_a, std::string_view candidate_b) {
  const auto& s = endpoint_->settings();
  const std::string reply = chat_completion(
      *endpoint_, render_request(hate_speech, knowledge, candidate_a, candidate_b), s.temperature,
      s.max_tokens);
  return parse_reply(reply);
}

double elo_expected(double rating, double opponent) {
  return 1.0 / (1.0 + std::pow(10.0, (opponent - rating) / 400.0));
}

EloTable judge_tournament(const std::map<std::string, std::vector<std::string>>& outputs_by_system,
                          const std::vector<ExampleRecord>& contexts, JudgeClient& judge,
                          const EloSettings& settings) {
  std::vector<std::string> labels;
  for (const auto& [label, outputs] : outputs_by_system) {
    if (outputs.size() != contexts.size()) {
      const std::size_t at = std::min(outputs.size(), contexts.size());
      const std::string id = at < contexts.size() ? contexts[at].id : "<extra output>";
      throw MisalignedOutputs(id, "system '" + label + "' has " + std::to_string(outputs.size()) +
                                      " outputs for " + std::to_string(contexts.size()) + " examples");
    }
    labels.push_back(label);
  }

  EloTable table;
  for (const auto& label : labels) {
    table.ratings[label] = settings.initial_rating;
    table.games_played[label] = 0;
  }

  struct Game {
    std::size_t example;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Game> games;
  for (std::size_t e = 0; e < contexts.size(); ++e) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) games.push_back({e, i, j});
    }
  }

  std::vector<Verdict> verdicts(games.size(), Verdict::Tie);
  std::vector<std::string> knowledge(contexts.size());
  for (std::size_t e = 0; e < contexts.size(); ++e) knowledge[e] = contexts[e].knowledge_text();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t g = next.fetch_add(1); g < games.size(); g = next.fetch_add(1)) {
      const Game& game = games[g];
      try {
        verdicts[g] = judge.compare(contexts[game.example].hate_speech, knowledge[game.example],
                                    outputs_by_system.at(labels[game.a])[game.example],
                                    outputs_by_system.at(labels[game.b])[game.example]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(games.size());
      }
    }
  };
  {
    const std::size_t workers =
        std::min<std::size_t>(std::max(settings.parallelism, 1), std::max<std::size_t>(games.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t g = 0; g < games.size(); ++g) {
    double& ra = table.ratings[labels[games[g].a]];
    double& rb = table.ratings[labels[games[g].b]];
    const double score_a = verdicts[g] == Verdict::A ? 1.0 : verdicts[g] == Verdict::B ? 0.0 : 0.5;
    const double expected_a = elo_expected(ra, rb);
    const double delta = settings.k_factor * (score_a - expected_a);
    ra += delta;
    rb -= delta;
    ++table.games_played[labels[games[g].a]];
    ++table.games_played[labels[games[g].b]];
  }
  return table;
}

}  // namespace cnalign

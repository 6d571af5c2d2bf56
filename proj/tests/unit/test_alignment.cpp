#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "cnalign/errors.hpp"
#include "cnalign/losses.hpp"
#include "cnalign/optimizer.hpp"
#include "cnalign/prompting.hpp"
#include "cnalign/toy_backend.hpp"
#include "cnalign/training.hpp"
#include "../support/oracles.hpp"

using namespace cnalign;
namespace fs = std::filesystem;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<RenderedExample> tiny_sft_set() {
  std::vector<RenderedExample> out;
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"HS: cats", "cats are kind"}, {"HS: dogs", "dogs are loyal"}, {"HS: birds", "birds are free"},
      {"HS: fish", "fish are calm"}, {"HS: cows", "cows are gentle"}};
  for (const auto& [prompt, cn] : rows) {
    RenderedExample r;
    r.prompt_text = prompt + " CN:";
    r.target_text = render_target(PromptStyle::Base, cn);
    r.full_text = r.prompt_text + r.target_text;
    r.source_id = prompt;
    out.push_back(r);
  }
  return out;
}

ToyBigramBackend tiny_backend(int rank = 0) {
  std::vector<std::string> texts;
  for (const auto& r : tiny_sft_set()) texts.push_back(r.full_text);
  ToyBackendOptions options;
  options.adapter_rank = rank;
  options.seed = 3;
  return ToyBigramBackend(ToyBigramBackend::build_vocabulary(texts, 32), options);
}

SftConfig quick_sft(int epochs, int every) {
  SftConfig c;
  c.learning_rate = 0.05;
  c.epochs = epochs;
  c.checkpoint_every = every;
  c.batch_size = 2;
  c.gradient_accumulation_steps = 1;
  return c;
}

}  // namespace

TEST_CASE("sft loss is the negative masked mean") {
  const std::vector<double> lp = {-1.0, -2.0, -3.0};
  CHECK(sft_loss(lp) == doctest::Approx(2.0));
  const TokenMask mask = {1, 0, 1};
  CHECK(sft_loss(lp, mask) == doctest::Approx(2.0));
  CHECK(sft_loss_gradient(lp, mask) == std::vector<double>{-0.5, 0.0, -0.5});
  CHECK_THROWS_AS(sft_loss(lp, TokenMask{0, 0, 0}), EmptyMask);
}

TEST_CASE("dpo loss against high-precision values") {
  for (double margin : {-50.0, -3.0, -0.1, 0.0, 0.5, 2.0, 40.0}) {
    for (double beta : {0.1, 1.0}) {
      const auto s = dpo_loss(margin, 0.0, 0.0, 0.0, beta);
      CHECK(s.loss == doctest::Approx(oracle::neg_log_sigmoid(beta * margin)).epsilon(1e-13));
      CHECK(s.margin == doctest::Approx(margin));
      CHECK(s.reward_accuracy == (margin > 0 ? 1.0 : 0.0));
    }
  }
  CHECK(dpo_loss(2.0, 0.0, 0.0, 0.0, 0.1).loss == doctest::Approx(0.598138869).epsilon(1e-9));
  CHECK(std::isfinite(dpo_loss(-1e6, 0.0, 0.0, 0.0, 10.0).loss));
  CHECK_THROWS_AS(dpo_loss(0, 0, 0, 0, 0.0), NonPositiveBeta);
  CHECK_THROWS_AS(dpo_loss(0, 0, 0, 0, -1.0), NonPositiveBeta);
  CHECK(dpo_loss_margin_gradient(0.0, 0.1) == doctest::Approx(-0.05));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
}

TEST_CASE("AdamW first step moves each weight by lr against the gradient sign") {
  AdamSettings s;
  s.learning_rate = 0.01;
  s.weight_decay = 0.1;
  AdamW opt(s);
  std::vector<double> p = {1.0, -2.0, 0.0};
  const std::vector<double> g = {0.5, -3.0, 0.0};
  opt.step(p, g);
  // Bias-corrected first step: m_hat/sqrt(v_hat) = sign(g); decay is decoupled.
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.1 * 1.0 - 0.01 * 0.5 / (0.5 + 1e-8)));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 0.1 * 2.0 + 0.01 * 3.0 / (3.0 + 1e-8)));
  CHECK(p[2] == 0.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("toy backend vocabulary, encoding and scoring") {
  const auto vocab = ToyBigramBackend::build_vocabulary({"b a a <end_of_text>", "c a"}, 5);
  CHECK(vocab == std::vector<std::string>{"<unk>", "<end_of_text>", "<|eot_id|>", "a", "b"});
  ToyBigramBackend backend(vocab);
  CHECK(ToyBigramBackend::pretokenize("x<|eot_id|>y z") == std::vector<std::string>{"x", "<|eot_id|>", "y", "z"});
  const auto ids = backend.encode("a b zzz<end_of_text>");
  CHECK(ids == std::vector<TokenId>{3, 4, 0, 1});
  CHECK(backend.decode(std::vector<TokenId>{3, 4, 1}) == "a b<end_of_text>");
  CHECK(backend.marker_id("<|eot_id|>") == 2);

  backend.set_base_logit(3, 4, 2.0);
  double total = 0;
  for (double lp : backend.next_token_logprobs(std::vector<TokenId>{3})) total += std::exp(lp);
  CHECK(total == doctest::Approx(1.0));
  const auto scores = backend.score(std::vector<TokenId>{3}, std::vector<TokenId>{4, 3});
  CHECK(scores[0] == doctest::Approx(backend.next_token_logprobs(std::vector<TokenId>{3})[4]));
  CHECK(scores[1] == doctest::Approx(backend.next_token_logprobs(std::vector<TokenId>{4})[3]));
}

TEST_CASE("toy backend adapter starts as a no-op and checkpoints round trip") {
  auto full = tiny_backend(0);
  auto lora = tiny_backend(4);
  const std::vector<TokenId> p = {3}, c = {4, 5};
  CHECK(sum(full.score(p, c)) == doctest::Approx(sum(lora.score(p, c))));
  CHECK(lora.parameters().size() == 2 * 4 * lora.vocab_size());

  for (double& w : lora.mutable_parameters()) w += 0.01;
  const fs::path path = fs::temp_directory_path() / "cnalign-toy.json";
  lora.save(path);
  const auto loaded = ToyBigramBackend::load(path);
  CHECK(loaded.vocabulary() == lora.vocabulary());
  CHECK(std::vector<double>(loaded.parameters().begin(), loaded.parameters().end()) ==
        std::vector<double>(lora.parameters().begin(), lora.parameters().end()));
  CHECK(sum(loaded.score(p, c)) == sum(lora.score(p, c)));
  fs::remove(path);

  ToyBackendOptions dropout;
  dropout.adapter_rank = 2;
  dropout.adapter_dropout = 0.1;
  CHECK_THROWS_AS(ToyBigramBackend(lora.vocabulary(), dropout), ConfigError);
}

TEST_CASE("frozen backends refuse mutation; clones are independent") {
  auto backend = tiny_backend(2);
  auto copy = backend.clone();
  copy->freeze();
  CHECK_THROWS_AS(copy->accumulate_gradient(std::vector<TokenId>{3}, std::vector<TokenId>{4}, std::vector<double>{1.0}),
                  BackendFailure);
  CHECK_THROWS_AS(copy->mutable_parameters(), BackendFailure);
  backend.mutable_parameters()[0] += 1.0;
  CHECK(copy->parameters()[0] != backend.parameters()[0]);
  CHECK_FALSE(copy->clone()->frozen());
}

TEST_CASE("truncation cuts the completion first, then the head of the prompt") {
  auto backend = tiny_backend();
  const auto seq = encode_truncated(backend, "HS: cats CN:", "cats are kind", 5);
  CHECK(seq.prompt.size() == 3);
  CHECK(seq.completion.size() == 2);
  const auto cut = encode_truncated(backend, "HS: cats CN: HS: dogs CN:", "cats are kind", 4);
  const auto tail = backend.encode("HS: dogs CN:");
  CHECK(cut.prompt == tail);
  CHECK(cut.completion.size() == 1);
}

TEST_CASE("sft training lowers the loss and checkpoints on schedule") {
  auto backend = tiny_backend(4);
  const auto data = tiny_sft_set();
  const auto run = train_sft(backend, data, data, quick_sft(500, 150));
  REQUIRE(run.checkpoints.size() == 3);
  CHECK(run.checkpoints[0].epoch == 150);
  CHECK(run.checkpoints[2].epoch == 450);
  CHECK(run.epoch_losses.size() == 500);
  CHECK(run.epoch_losses.back() < run.epoch_losses.front());
  CHECK(run.checkpoints[0].scores.contains("loss"));
  CHECK(run.updates == 500 * 3);

  auto again = tiny_backend(4);
  const auto rerun = train_sft(again, data, data, quick_sft(500, 150));
  CHECK(rerun.epoch_losses == run.epoch_losses);

  auto untouched = tiny_backend(4);
  CHECK(train_sft(untouched, data, data, quick_sft(0, 1)).checkpoints.empty());
}

TEST_CASE("sft config validation") {
  SftConfig c;
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  DpoConfig d;
  d.beta = 0;
  CHECK_THROWS_AS(d.validate(), NonPositiveBeta);
}

TEST_CASE("checkpoint selection direction and ties") {
  std::vector<CheckpointRecord> cps(3);
  for (int i = 0; i < 3; ++i) cps[i].epoch = 10 * (i + 1);
  cps[0].scores = {{"loss", 1.0}, {"rouge_l", 0.2}};
  cps[1].scores = {{"loss", 0.5}, {"rouge_l", 0.4}};
  cps[2].scores = {{"loss", 0.5}, {"rouge_l", 0.4}};
  CHECK(select_checkpoint(cps, "loss").epoch == 20);
  CHECK(select_checkpoint(cps, "rouge_l").epoch == 20);
  CHECK_THROWS_AS(select_checkpoint(cps, "bleu"), ConfigError);
  CHECK_THROWS_AS(select_checkpoint({}, "loss"), NoCheckpoints);
}

TEST_CASE("dpo training requires a frozen, unchanged reference") {
  auto policy = tiny_backend(0);
  std::vector<PreferencePair> pairs;
  for (const auto& r : tiny_sft_set()) {
    PreferencePair p;
    p.source_id = r.source_id;
    p.prompt_text = r.prompt_text;
    p.chosen = r.target_text.substr(0, r.target_text.size() - 13);
    p.rejected = "no";
    pairs.push_back(p);
  }
  auto reference = policy.clone();
  DpoConfig config;
  config.epochs = 4;
  config.checkpoint_every = 2;
  config.learning_rate = 0.05;
  CHECK_THROWS_AS(train_dpo(policy, *reference, pairs, {}, config), BackendFailure);
  reference->freeze();
  const auto run = train_dpo(policy, *reference, pairs, pairs, config);
  REQUIRE(run.checkpoints.size() == 2);
  for (const char* key : {"train_loss", "loss", "margin", "reward_accuracy"}) {
    CHECK(run.checkpoints[0].scores.contains(key));
  }
  CHECK(run.checkpoints[1].scores.at("margin") > 0);
  CHECK(evaluate_dpo(*reference, *reference, pairs, 0.1, 640).loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("greedy generation stops at the terminator") {
  auto backend = tiny_backend(0);
  const auto cats = backend.encode("cats");
  const auto are = backend.encode("are");
  const auto kind = backend.encode("kind");
  const auto colon = backend.encode("CN:");
  const TokenId end = *backend.marker_id("<end_of_text>");
  backend.set_base_logit(colon[0], cats[0], 10);
  backend.set_base_logit(cats[0], are[0], 10);
  backend.set_base_logit(are[0], kind[0], 10);
  backend.set_base_logit(kind[0], end, 10);
  ExampleRecord r;
  r.id = "g";
  r.hate_speech = "cats";
  r.knowledge = {"kind"};
  r.counter_narrative = "x";
  // The base layout ends the prompt with "CN:" followed by blank lines.
  CHECK(generate_cn(backend, r, PromptStyle::Base) == "cats are kind");
  GenerationOptions two;
  two.max_new_tokens = 2;
  CHECK(generate_cn(backend, r, PromptStyle::Base, two) == "cats are");
}

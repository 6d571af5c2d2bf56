#include "cnalign/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "cnalign/errors.hpp"
#include "cnalign/prompting.hpp"
#include "cnalign/text.hpp"

namespace cnalign {

namespace {

constexpr std::array<std::string_view, 5> kMarkers = {
    markers::kEndOfText, markers::kBeginOfText, markers::kStartHeader, markers::kEndHeader,
    markers::kEndOfTurn};

bool is_marker(std::string_view token) {
  return std::find(kMarkers.begin(), kMarkers.end(), token) != kMarkers.end();
}

double log_sum_exp(const std::vector<double>& values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace

ToyBigramBackend::ToyBigramBackend(std::vector<std::string> vocabulary, ToyBackendOptions options)
    : vocab_(std::move(vocabulary)), options_(options) {
  if (vocab_.empty() || vocab_.front() != kUnknown) {
    throw ConfigError("vocabulary", "first entry must be <unk>");
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!ids_.emplace(vocab_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("vocabulary", "duplicate token '" + vocab_[i] + "'");
    }
  }
  if (options_.adapter_rank < 0) throw ConfigError("adapter_rank", "must be non-negative");
  if (options_.adapter_rank > 0 && !(options_.adapter_scale > 0)) {
    throw ConfigError("adapter_scale", "must be positive");
  }
  if (options_.adapter_dropout != 0.0) {
    throw ConfigError("adapter_dropout", "the toy backend supports only 0");
  }

  const std::size_t v = vocab_.size();
  const std::size_t r = static_cast<std::size_t>(options_.adapter_rank);
  std::mt19937_64 rng(options_.seed);
  base_.assign(v * v, 0.0);
  if (options_.base_init_std > 0) {
    std::normal_distribution<double> normal(0.0, options_.base_init_std);
    for (double& w : base_) w = normal(rng);
  }
  if (r > 0) {
    adapter_.assign(2 * v * r, 0.0);
    // A is random, B starts at zero so the adapter delta is initially zero.
    std::normal_distribution<double> normal(0.0, options_.adapter_init_std);
    for (std::size_t i = 0; i < v * r; ++i) adapter_[i] = normal(rng);
  }
  gradient_.assign(r > 0 ? adapter_.size() : base_.size(), 0.0);
}

std::vector<std::string> ToyBigramBackend::pretokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& chunk : split_whitespace(text)) {
    std::string_view rest = chunk;
    while (!rest.empty()) {
      std::size_t best = std::string_view::npos;
      std::string_view found;
      for (auto m : kMarkers) {
        const std::size_t pos = rest.find(m);
        if (pos < best) {
          best = pos;
          found = m;
        }
      }
      if (best == std::string_view::npos) {
        out.emplace_back(rest);
        break;
      }
      if (best > 0) out.emplace_back(rest.substr(0, best));
      out.emplace_back(found);
      rest.remove_prefix(best + found.size());
    }
  }
  return out;
}

std::vector<std::string> ToyBigramBackend::build_vocabulary(const std::vector<std::string>& texts,
                                                            std::size_t max_size) {
  std::vector<std::string> vocab = {std::string(kUnknown), std::string(markers::kEndOfText),
                                    std::string(markers::kEndOfTurn)};
  if (max_size < vocab.size()) throw ConfigError("vocab_size", "must be at least 3");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& token : pretokenize(text)) ++counts[token];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (const auto& [token, count] : ranked) {
    if (vocab.size() >= max_size) break;
    if (std::find(vocab.begin(), vocab.end(), token) == vocab.end()) vocab.push_back(token);
  }
  return vocab;
}

std::vector<TokenId> ToyBigramBackend::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& token : pretokenize(text)) {
    auto it = ids_.find(token);
    out.push_back(it == ids_.end() ? 0 : it->second);
  }
  return out;
}

std::string ToyBigramBackend::decode(std::span<const TokenId> tokens) const {
  std::string out;
  bool previous_marker = true;
  for (TokenId id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
      throw BackendFailure("decode", "token id out of range: " + std::to_string(id));
    }
    const std::string& token = vocab_[static_cast<std::size_t>(id)];
    const bool marker = is_marker(token);
    if (!out.empty() && !marker && !previous_marker) out.push_back(' ');
    out += token;
    previous_marker = marker;
  }
  return out;
}

std::optional<TokenId> ToyBigramBackend::marker_id(std::string_view marker) const {
  auto it = ids_.find(marker);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

double ToyBigramBackend::adapter_factor() const {
  return options_.adapter_rank > 0 ? options_.adapter_scale / options_.adapter_rank : 0.0;
}

double ToyBigramBackend::logit(TokenId context, TokenId next) const {
  double value = base_[index(context, next)];
  const std::size_t r = static_cast<std::size_t>(options_.adapter_rank);
  if (r > 0) {
    const std::size_t v = vocab_.size();
    const double* a = adapter_.data() + static_cast<std::size_t>(context) * r;
    const double* b = adapter_.data() + v * r;
    double delta = 0.0;
    for (std::size_t k = 0; k < r; ++k) delta += a[k] * b[k * v + static_cast<std::size_t>(next)];
    value += adapter_factor() * delta;
  }
  return value;
}

void ToyBigramBackend::set_base_logit(TokenId context, TokenId next, double value) {
  if (frozen()) throw BackendFailure("set_base_logit", "backend is frozen");
  base_[index(context, next)] = value;
}

std::vector<double> ToyBigramBackend::row_logits(TokenId context) const {
  if (context < 0 || static_cast<std::size_t>(context) >= vocab_.size()) {
    throw BackendFailure("score", "token id out of range: " + std::to_string(context));
  }
  std::vector<double> row(vocab_.size());
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = logit(context, static_cast<TokenId>(j));
  return row;
}

std::vector<double> ToyBigramBackend::row_logprobs(TokenId context) const {
  std::vector<double> row = row_logits(context);
  const double norm = log_sum_exp(row);
  for (double& x : row) x = std::min(x - norm, 0.0);
  return row;
}

std::vector<double> ToyBigramBackend::score(std::span<const TokenId> prompt,
                                            std::span<const TokenId> completion) const {
  std::vector<double> out;
  out.reserve(completion.size());
  TokenId context = prompt.empty() ? 0 : prompt.back();
  for (TokenId next : completion) {
    if (next < 0 || static_cast<std::size_t>(next) >= vocab_.size()) {
      throw BackendFailure("score", "token id out of range: " + std::to_string(next));
    }
    const auto row = row_logits(context);
    out.push_back(std::min(row[static_cast<std::size_t>(next)] - log_sum_exp(row), 0.0));
    context = next;
  }
  return out;
}

std::vector<double> ToyBigramBackend::next_token_logprobs(std::span<const TokenId> context) const {
  return row_logprobs(context.empty() ? 0 : context.back());
}

void ToyBigramBackend::do_accumulate_gradient(std::span<const TokenId> prompt,
                                              std::span<const TokenId> completion,
                                              std::span<const double> upstream) {
  const std::size_t v = vocab_.size();
  const std::size_t r = static_cast<std::size_t>(options_.adapter_rank);
  // dLoss/dlogit[context][j] = upstream * (1[j == next] - p_j), per position.
  std::map<TokenId, std::vector<double>> logit_grad;
  TokenId context = prompt.empty() ? 0 : prompt.back();
  for (std::size_t t = 0; t < completion.size(); ++t) {
    const TokenId next = completion[t];
    const auto logprobs = row_logprobs(context);
    auto& g = logit_grad.try_emplace(context, std::vector<double>(v, 0.0)).first->second;
    for (std::size_t j = 0; j < v; ++j) g[j] -= upstream[t] * std::exp(logprobs[j]);
    g[static_cast<std::size_t>(next)] += upstream[t];
    context = next;
  }

  if (r == 0) {
    for (const auto& [row, g] : logit_grad) {
      for (std::size_t j = 0; j < v; ++j) gradient_[index(row, static_cast<TokenId>(j))] += g[j];
    }
    return;
  }
  const double factor = adapter_factor();
  const double* b = adapter_.data() + v * r;
  double* grad_a = gradient_.data();
  double* grad_b = gradient_.data() + v * r;
  for (const auto& [row, g] : logit_grad) {
    const double* a = adapter_.data() + static_cast<std::size_t>(row) * r;
    for (std::size_t k = 0; k < r; ++k) {
      double da = 0.0;
      for (std::size_t j = 0; j < v; ++j) {
        da += g[j] * b[k * v + j];
        grad_b[k * v + j] += factor * a[k] * g[j];
      }
      grad_a[static_cast<std::size_t>(row) * r + k] += factor * da;
    }
  }
}

std::span<const double> ToyBigramBackend::parameters() const {
  return options_.adapter_rank > 0 ? std::span<const double>(adapter_) : std::span<const double>(base_);
}

std::span<double> ToyBigramBackend::trainable_parameters() {
  return options_.adapter_rank > 0 ? std::span<double>(adapter_) : std::span<double>(base_);
}

std::unique_ptr<ModelBackend> ToyBigramBackend::clone() const {
  auto copy = std::make_unique<ToyBigramBackend>(*this);
  copy->clear_frozen();
  return copy;
}

void ToyBigramBackend::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json doc;
  doc["kind"] = "toy-bigram";
  doc["vocabulary"] = vocab_;
  doc["adapter_rank"] = options_.adapter_rank;
  doc["adapter_scale"] = options_.adapter_scale;
  doc["seed"] = options_.seed;
  doc["base"] = base_;
  doc["adapter"] = adapter_;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write checkpoint");
  out << doc.dump() << '\n';
}

ToyBigramBackend ToyBigramBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("kind") != "toy-bigram") throw ConfigError(path.string(), "not a toy-bigram checkpoint");
    ToyBackendOptions options;
    options.adapter_rank = doc.at("adapter_rank").get<int>();
    options.adapter_scale = doc.at("adapter_scale").get<double>();
    options.seed = doc.at("seed").get<std::uint64_t>();
    ToyBigramBackend backend(doc.at("vocabulary").get<std::vector<std::string>>(), options);
    auto base = doc.at("base").get<std::vector<double>>();
    auto adapter = doc.at("adapter").get<std::vector<double>>();
    if (base.size() != backend.base_.size() || adapter.size() != backend.adapter_.size()) {
      throw ConfigError(path.string(), "parameter shapes do not match the vocabulary");
    }
    backend.base_ = std::move(base);
    backend.adapter_ = std::move(adapter);
    return backend;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string(), std::string("bad checkpoint: ") + e.what());
  }
}

}  // namespace cnalign

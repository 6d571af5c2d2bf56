#include "cnalign/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "cnalign/errors.hpp"

namespace cnalign {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t count_selected(std::span<const double> logprobs, std::span<const std::uint8_t> mask) {
  if (logprobs.size() != mask.size()) {
    throw std::invalid_argument("sft_loss: logprobs and mask differ in length");
  }
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  if (n == 0) throw EmptyMask();
  return n;
}

}  // namespace

double sft_loss(std::span<const double> logprobs, std::span<const std::uint8_t> mask) {
  const std::size_t n = count_selected(logprobs, mask);
  double sum = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    if (mask[i]) sum += logprobs[i];
  }
  return -sum / static_cast<double>(n);
}

double sft_loss(std::span<const double> logprobs) {
  const TokenMask all(logprobs.size(), 1);
  return sft_loss(logprobs, all);
}

std::vector<double> sft_loss_gradient(std::span<const double> logprobs,
                                      std::span<const std::uint8_t> mask) {
  const double n = static_cast<double>(count_selected(logprobs, mask));
  std::vector<double> grad(logprobs.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (mask[i]) grad[i] = -1.0 / n;
  }
  return grad;
}

LossStats dpo_loss(double policy_chosen_lp, double policy_rejected_lp, double reference_chosen_lp,
                   double reference_rejected_lp, double beta) {
  if (!(beta > 0.0)) throw NonPositiveBeta(beta);
  LossStats stats;
  stats.margin = (policy_chosen_lp - reference_chosen_lp) - (policy_rejected_lp - reference_rejected_lp);
  stats.loss = softplus(-beta * stats.margin);
  stats.reward_accuracy = stats.margin > 0.0 ? 1.0 : 0.0;
  return stats;
}

double dpo_loss_margin_gradient(double margin, double beta) {
  if (!(beta > 0.0)) throw NonPositiveBeta(beta);
  return -beta * sigmoid(-beta * margin);
}

}  // namespace cnalign

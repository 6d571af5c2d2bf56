#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cnalign {

/// Per-token inclusion flags (nonzero = include).
using TokenMask = std::vector<std::uint8_t>;

/// Negative mean of the masked-in log-probabilities. Throws EmptyMask when
/// no token is selected and std::invalid_argument on a length mismatch.
double sft_loss(std::span<const double> logprobs, std::span<const std::uint8_t> mask);
double sft_loss(std::span<const double> logprobs);

/// d(sft_loss)/d(logprob_t); zero for masked-out tokens.
std::vector<double> sft_loss_gradient(std::span<const double> logprobs,
                                      std::span<const std::uint8_t> mask);

struct LossStats {
  double loss = 0.0;
  double margin = 0.0;           // implicit-reward margin, chosen minus rejected
  double reward_accuracy = 0.0;  // fraction of pairs with margin > 0
};

/// Sequence-level DPO objective on summed completion log-probabilities:
/// loss = -log sigmoid(beta * margin) with
/// margin = (policy_chosen - reference_chosen) - (policy_rejected - reference_rejected).
/// Throws NonPositiveBeta.
LossStats dpo_loss(double policy_chosen_lp, double policy_rejected_lp, double reference_chosen_lp,
                   double reference_rejected_lp, double beta);

/// d(loss)/d(margin) = -beta * sigmoid(-beta * margin). The policy chosen
/// log-probability receives this value, the rejected one its negation.
double dpo_loss_margin_gradient(double margin, double beta);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace cnalign

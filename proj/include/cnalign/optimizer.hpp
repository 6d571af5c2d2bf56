#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cnalign {

struct AdamSettings {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied to every parameter
};

/// Adam with decoupled weight decay. Moment buffers are sized on first step.
class AdamW {
 public:
  explicit AdamW(AdamSettings settings);

  void step(std::span<double> parameters, std::span<const double> gradient);
  std::int64_t steps() const noexcept { return t_; }
  const AdamSettings& settings() const noexcept { return settings_; }

 private:
  AdamSettings settings_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace cnalign

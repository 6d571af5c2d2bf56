#include "cnalign/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "cnalign/errors.hpp"

namespace cnalign {

AdamW::AdamW(AdamSettings settings) : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (settings_.beta1 < 0.0 || settings_.beta1 >= 1.0) throw ConfigError("adam.beta1", "must be in [0,1)");
  if (settings_.beta2 < 0.0 || settings_.beta2 >= 1.0) throw ConfigError("adam.beta2", "must be in [0,1)");
  if (!(settings_.epsilon > 0.0)) throw ConfigError("adam.epsilon", "must be positive");
  if (settings_.weight_decay < 0.0) throw ConfigError("weight_decay", "must be non-negative");
}

void AdamW::step(std::span<double> parameters, std::span<const double> gradient) {
  if (parameters.size() != gradient.size()) throw std::invalid_argument("AdamW: size mismatch");
  if (m_.empty()) {
    m_.assign(parameters.size(), 0.0);
    v_.assign(parameters.size(), 0.0);
  } else if (m_.size() != parameters.size()) {
    throw std::invalid_argument("AdamW: parameter count changed between steps");
  }
  ++t_;
  const auto& s = settings_;
  const double bias1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const double g = gradient[i];
    m_[i] = s.beta1 * m_[i] + (1.0 - s.beta1) * g;
    v_[i] = s.beta2 * v_[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = m_[i] / bias1;
    const double v_hat = v_[i] / bias2;
    parameters[i] -= s.learning_rate * s.weight_decay * parameters[i];
    parameters[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace cnalign

#include "cnalign/backend.hpp"

#include <algorithm>
#include <stdexcept>

#include "cnalign/errors.hpp"
#include "cnalign/optimizer.hpp"

namespace cnalign {

void ModelBackend::ensure_mutable(const char* operation) const {
  if (frozen_) throw BackendFailure("frozen backend", std::string(operation) + " on a frozen backend");
}

void ModelBackend::accumulate_gradient(std::span<const TokenId> prompt,
                                       std::span<const TokenId> completion,
                                       std::span<const double> upstream) {
  ensure_mutable("accumulate_gradient");
  if (upstream.size() != completion.size()) {
    throw std::invalid_argument("accumulate_gradient: one upstream value per completion token");
  }
  do_accumulate_gradient(prompt, completion, upstream);
}

void ModelBackend::zero_gradient() {
  auto g = gradient_buffer();
  std::fill(g.begin(), g.end(), 0.0);
}

void ModelBackend::apply_update(AdamW& optimizer) {
  ensure_mutable("apply_update");
  optimizer.step(trainable_parameters(), gradient());
  zero_gradient();
}

BackendSnapshot ModelBackend::snapshot() const {
  const auto p = parameters();
  return BackendSnapshot{std::vector<double>(p.begin(), p.end())};
}

void ModelBackend::restore(const BackendSnapshot& snapshot) {
  ensure_mutable("restore");
  auto p = trainable_parameters();
  if (p.size() != snapshot.parameters.size()) {
    throw BackendFailure("restore", "snapshot has " + std::to_string(snapshot.parameters.size()) +
                                        " parameters, backend has " + std::to_string(p.size()));
  }
  std::copy(snapshot.parameters.begin(), snapshot.parameters.end(), p.begin());
}

std::span<double> ModelBackend::mutable_parameters() {
  ensure_mutable("parameter write");
  return trainable_parameters();
}

}  // namespace cnalign

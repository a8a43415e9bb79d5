// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/adam.hpp"

#include <cmath>

#include "robustnmt/error.hpp"

namespace robustnmt {

std::vector<std::string> AdamState::step(std::vector<NamedTensor>& params, double lr) {
  std::vector<std::string> warnings;
  t_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (NamedTensor& p : params) {
    if (!p.tensor.has_grad()) {
      warnings.push_back("adam: no gradient for " + p.name + "; parameter skipped");
      continue;
    }
    const std::size_t n = p.tensor.numel();
    AdamSlot& slot = slots_[p.name];
    if (slot.m.empty()) {
      slot.m.assign(n, 0.0);
      slot.v.assign(n, 0.0);
    } else if (slot.m.size() != n) {
      throw NumericalError("adam: moment size " + std::to_string(slot.m.size()) +
                           " does not match parameter " + p.name + " of size " +
                           std::to_string(n));
    }
    const std::vector<double>& g = p.tensor.grad();
    std::vector<double>& val = p.tensor.values();
    for (std::size_t i = 0; i < n; ++i) {
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g[i];
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return warnings;
}

void AdamState::restore(std::uint64_t t, std::map<std::string, AdamSlot> slots) {
  t_ = t;
  slots_ = std::move(slots);
}

}  // namespace robustnmt

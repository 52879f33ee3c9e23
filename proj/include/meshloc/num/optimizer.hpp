#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "meshloc/num/tape.hpp"

namespace meshloc::num {

template <typename S>
struct AdamConfigT {
  S learning_rate = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

/// Outcome of one optimizer step.
struct StepReport {
  bool applied = false;
  std::vector<std::string> non_finite;  // parameters whose gradients were not finite
};

/// Adaptive-moment optimizer over the trainable entries of a ParamSet.
/// A step with any non-finite gradient is skipped entirely and flagged.
template <typename S>
class AdamT {
 public:
  explicit AdamT(AdamConfigT<S> config = {}) : config_(config) {}

  AdamConfigT<S>& config() { return config_; }
  const AdamConfigT<S>& config() const { return config_; }
  long step_count() const { return step_; }

  StepReport step(ParamSetT<S>& params, const std::map<std::string, TensorT<S>>& grads) {
    StepReport report;
    for (const auto& [name, g] : grads)
      if (!g.all_finite()) report.non_finite.push_back(name);
    if (!report.non_finite.empty()) return report;

    ++step_;
    const S bc1 = S(1) - std::pow(config_.beta1, static_cast<S>(step_));
    const S bc2 = S(1) - std::pow(config_.beta2, static_cast<S>(step_));
    for (const auto& [name, g] : grads) {
      auto it = params.entries().find(name);
      if (it == params.entries().end() || !it->second.trainable) continue;
      TensorT<S>& theta = it->second.value;
      if (!theta.same_shape(g))
        throw std::invalid_argument("Adam: gradient shape " + g.shape_str() +
                                    " does not match parameter " + name + " " + theta.shape_str());
      Moments& m = moments_[name];
      if (m.m.size() != theta.size()) {
        m.m = TensorT<S>::zeros(theta.shape());
        m.v = TensorT<S>::zeros(theta.shape());
      }
      m.m.array() = config_.beta1 * m.m.array() + (S(1) - config_.beta1) * g.array();
      m.v.array() = config_.beta2 * m.v.array() + (S(1) - config_.beta2) * g.array().square();
      theta.array() -= config_.learning_rate * (m.m.array() / bc1) /
                       ((m.v.array() / bc2).sqrt() + config_.eps);
    }
    report.applied = true;
    return report;
  }

 private:
  struct Moments {
    TensorT<S> m, v;
  };
  AdamConfigT<S> config_;
  std::map<std::string, Moments> moments_;
  long step_ = 0;
};

using Adam = AdamT<double>;
using AdamConfig = AdamConfigT<double>;

}  // namespace meshloc::num

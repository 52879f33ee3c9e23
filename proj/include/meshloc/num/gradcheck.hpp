#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "meshloc/common/rng.hpp"
#include "meshloc/num/ops.hpp"
#include "meshloc/num/tape.hpp"

namespace meshloc::num {

template <typename S>
struct GradCheckReportT {
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int coords_checked = 0;
  bool all_finite = true;  // false when any probe evaluation was non-finite
};

/// Central finite differences against the tape gradients, coordinate by
/// coordinate over the trainable parameters. `build` must construct the same
/// scalar loss for the current parameter values on a fresh tape.
/// `max_coords >= 0` samples that many coordinates (seeded); -1 checks all.
/// The relative error denominator is floored at `scale_floor`: coordinates
/// where both gradients are below it are compared absolutely at that scale,
/// which keeps difference-quotient round-off noise out of the verdict.
template <typename S>
GradCheckReportT<S> finite_difference_check(
    ParamSetT<S>& params, const std::function<VarT<S>(TapeT<S>&, ParamSetT<S>&)>& build, S eps,
    int max_coords = -1, std::uint64_t seed = 0, double scale_floor = 1e-4) {
  if (!(eps > S(0))) throw std::invalid_argument("finite_difference_check: eps must be > 0");

  std::map<std::string, TensorT<S>> analytic;
  {
    TapeT<S> tape;
    VarT<S> loss = build(tape, params);
    tape.backward(loss);
    analytic = tape.param_grads();
  }

  auto eval = [&]() -> S {
    TapeT<S> tape;
    return build(tape, params).value().array()[0];
  };

  std::vector<std::pair<std::string, Eigen::Index>> coords;
  for (const auto& name : params.trainable_names()) {
    if (analytic.find(name) == analytic.end()) continue;
    for (Eigen::Index i = 0; i < params.at(name).size(); ++i) coords.emplace_back(name, i);
  }
  if (max_coords >= 0 && static_cast<int>(coords.size()) > max_coords) {
    Rng rng(seed);
    for (std::size_t i = coords.size(); i > 1; --i)
      std::swap(coords[i - 1], coords[rng.index(i)]);
    coords.resize(static_cast<std::size_t>(max_coords));
  }

  GradCheckReportT<S> report;
  for (const auto& [name, i] : coords) {
    TensorT<S>& theta = params.at(name);
    const S saved = theta[i];
    theta[i] = saved + eps;
    const S up = eval();
    theta[i] = saved - eps;
    const S down = eval();
    theta[i] = saved;
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down))) {
      report.all_finite = false;
      continue;
    }
    const double numeric = static_cast<double>((up - down) / (S(2) * eps));
    const double an = static_cast<double>(analytic.at(name)[i]);
    const double denom = std::max({std::abs(numeric), std::abs(an), scale_floor});
    const double rel = std::abs(numeric - an) / denom;
    ++report.coords_checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = name;
      report.worst_coord = i;
      report.worst_analytic = an;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

using GradCheckReport = GradCheckReportT<double>;

}  // namespace meshloc::num

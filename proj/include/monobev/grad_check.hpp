#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "monobev/model.hpp"

namespace monobev::nn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
};

namespace detail {
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central differences over a parameter set. `loss` must be deterministic
// (eval mode); `backward` leaves analytic gradients in the param tensors.
inline GradCheckResult check_params(const std::vector<ParamRef>& params,
                                    const std::function<double()>& loss,
                                    const std::function<void()>& backprop,
                                    double eps, std::int64_t max_params, Rng* pick) {
  backprop();
  std::vector<std::pair<Tensor*, size_t>> sites;
  for (const auto& p : params) {
    if (p.owner->frozen()) continue;  // frozen layers are out of the check set
    for (size_t i = 0; i < p.tensor->values.size(); ++i) {
      sites.push_back({p.tensor, i});
    }
  }
  if (max_params > 0 && static_cast<std::int64_t>(sites.size()) > max_params &&
      pick != nullptr) {
    // Partial Fisher-Yates: exactly max_params distinct sites.
    for (std::int64_t i = 0; i < max_params; ++i) {
      const std::uint32_t j = static_cast<std::uint32_t>(
          i + pick->uniform_int(static_cast<std::uint32_t>(sites.size() - i)));
      std::swap(sites[static_cast<size_t>(i)], sites[j]);
    }
    sites.resize(static_cast<size_t>(max_params));
  }
  GradCheckResult res;
  for (auto& [t, i] : sites) {
    const double saved = t->values[i];
    const double analytic = t->grad[i];
    t->values[i] = saved + eps;
    const double lp = loss();
    t->values[i] = saved - eps;
    const double lm = loss();
    t->values[i] = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, numeric));
    ++res.checked;
  }
  return res;
}
}  // namespace detail

// Checks one branch against finite differences under an MSE loss.
inline GradCheckResult grad_check_branch(Branch& branch, const Tensor& input,
                                         const Tensor& target, double eps = 1e-5) {
  Rng unused(0);
  auto loss = [&]() {
    Tensor out = branch.forward(input, /*train=*/false, unused);
    return mse_loss(out, target);
  };
  auto backprop = [&]() {
    Tensor out = branch.forward(input, false, unused);
    Tensor g;
    mse_loss(out, target, &g);
    branch.backward(g);
  };
  std::vector<ParamRef> params;
  for (auto& l : branch.layers()) {
    for (Tensor* t : l->params()) params.push_back({t, l.get()});
  }
  return detail::check_params(params, loss, backprop, eps, 0, nullptr);
}

// Checks the full BR-1..BR-4 composite under the summed two-head MSE loss.
// Large nets are subsampled down to at least `max_params` random sites.
inline GradCheckResult grad_check_model(Model& model, const Tensor& crops,
                                        const Tensor& bbox, const Tensor& bev_target,
                                        const Tensor& tgt_target, double eps = 1e-5,
                                        std::int64_t max_params = 200,
                                        std::uint64_t pick_seed = 1) {
  Rng unused(0);
  auto loss = [&]() {
    auto out = model.forward(crops, bbox, /*train=*/false, unused);
    return mse_loss(out.bev, bev_target) + mse_loss(out.target, tgt_target);
  };
  auto backprop = [&]() {
    auto out = model.forward(crops, bbox, false, unused);
    Tensor g3, g4;
    mse_loss(out.bev, bev_target, &g3);
    mse_loss(out.target, tgt_target, &g4);
    model.backward(&g3, &g4);
  };
  Rng pick(pick_seed);
  return detail::check_params(model.params(), loss, backprop, eps, max_params, &pick);
}

}  // namespace monobev::nn

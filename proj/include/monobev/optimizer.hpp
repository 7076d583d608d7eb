#pragma once

#include <vector>

#include "monobev/layers.hpp"

namespace monobev::nn {

// Step-decay schedule: lr0 divided by ten every `period` epochs. The
// divisor is an exact power of ten so the values match their decimal
// spellings bit for bit.
inline double lr_schedule(int epoch, double lr0 = 0.01, int period = 100) {
  int k = epoch / period;
  double div = 1.0;
  while (k-- > 0) div *= 10.0;
  return lr0 / div;
}

struct ParamRef {
  Tensor* tensor;
  Layer* owner;
};

// Classic heavy-ball SGD: v <- mu v - lr g; p <- p + v. Frozen parameters
// are skipped entirely, velocities included.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  void attach(const std::vector<ParamRef>& params) {
    params_ = params;
    velocity_.clear();
    velocity_.reserve(params.size());
    for (const auto& p : params_) {
      velocity_.emplace_back(p.tensor->values.size(), 0.0);
    }
  }

  void step(double lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].owner->frozen()) continue;
      Tensor& t = *params_[i].tensor;
      std::vector<double>& v = velocity_[i];
      for (size_t k = 0; k < v.size(); ++k) {
        v[k] = momentum_ * v[k] - lr * t.grad[k];
        t.values[k] += v[k];
      }
    }
  }

  double momentum() const { return momentum_; }

 private:
  double momentum_;
  std::vector<ParamRef> params_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace monobev::nn

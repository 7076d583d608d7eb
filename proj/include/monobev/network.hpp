#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "monobev/layers.hpp"

namespace monobev::nn {

// An ordered stack of layers with explicit forward caching and a
// branch-level freeze flag. Initialization picks He-uniform ahead of ReLU
// and Xavier-uniform ahead of tanh or a linear output. Two departures from
// the plain textbook recipe, both load-bearing for small-data training:
// tanh-bounded output layers start at a tenth of Xavier so the outputs are
// unsaturated from step one, and conv biases spread over +-0.45 so the
// first-layer ReLU thresholds tile the intensity range instead of all
// cutting at zero.
class Branch {
 public:
  Branch() = default;
  Branch(std::string name, std::vector<LayerSpec> specs) : name_(std::move(name)) {
    for (const auto& s : specs) layers_.push_back(make_layer(s));
  }

  const std::string& name() const { return name_; }

  Tensor forward(const Tensor& x, bool train, Rng& rng) {
    Tensor t = x;
    for (auto& l : layers_) t = l->forward(t, train, rng);
    return t;
  }

  Tensor backward(const Tensor& dy) {
    Tensor g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    return g;
  }

  void init_params(Rng& rng) {
    for (size_t i = 0; i < layers_.size(); ++i) {
      Layer* l = layers_[i].get();
      const LayerSpec& s = l->spec();
      if (s.kind != LayerKind::Dense && s.kind != LayerKind::Conv3x3) continue;
      const Activation next = next_activation(i);
      const int fan_in = s.kind == LayerKind::Dense ? s.in_dim : s.in_dim * 9;
      const int fan_out = s.kind == LayerKind::Dense ? s.out_dim : s.out_dim * 9;
      double limit = next == Activation::Relu
                         ? std::sqrt(6.0 / fan_in)
                         : std::sqrt(6.0 / (fan_in + fan_out));
      if (next == Activation::Tanh) limit *= 0.1;
      auto ps = l->params();
      for (double& v : ps[0]->values) v = rng.uniform(-limit, limit);
      if (s.kind == LayerKind::Conv3x3) {
        for (double& v : ps[1]->values) v = rng.uniform(-0.45, 0.45);
      }
      // dense biases stay zero
    }
  }

  void set_trainable(bool trainable) {
    for (auto& l : layers_) l->set_frozen(!trainable);
  }
  bool trainable() const {
    for (const auto& l : layers_) {
      if (!l->params().empty()) return !l->frozen();
    }
    return true;
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
      for (Tensor* t : l->params()) out.push_back(t);
    }
    return out;
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers_) {
      for (Tensor* t : const_cast<Layer*>(l.get())->params()) n += t->numel();
    }
    return n;
  }

  int dense_count() const {
    int n = 0;
    for (const auto& l : layers_) {
      if (l->spec().kind == LayerKind::Dense) ++n;
    }
    return n;
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
  }

  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  enum class Activation { Relu, Tanh, None };

  Activation next_activation(size_t i) const {
    for (size_t j = i + 1; j < layers_.size(); ++j) {
      const LayerKind k = layers_[j]->spec().kind;
      if (k == LayerKind::Relu) return Activation::Relu;
      if (k == LayerKind::Tanh) return Activation::Tanh;
      if (k == LayerKind::Dense || k == LayerKind::Conv3x3) break;
    }
    return Activation::None;  // linear outputs share the Xavier limit
  }

  std::string name_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Mean over batch rows of the squared residual norm; the per-element
// gradient is 2 (pred - target) / batch.
inline double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr) {
  if (!pred.same_shape(target)) throw ShapeMismatchError("mse: shape mismatch");
  const int n = pred.shape.empty() ? 1 : pred.dim(0);
  double acc = 0.0;
  if (grad) *grad = Tensor(pred.shape);
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - target.values[i];
    acc += d * d;
    if (grad) grad->values[i] = 2.0 * d / n;
  }
  return acc / n;
}

}  // namespace monobev::nn

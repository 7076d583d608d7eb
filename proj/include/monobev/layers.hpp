#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "monobev/rng.hpp"
#include "monobev/tensor.hpp"

namespace monobev::nn {

enum class LayerKind { Dense, Conv3x3, AvgPool2, GlobalAvgPool, Relu, Tanh, Dropout };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::AvgPool2: return "avgpool2";
    case LayerKind::GlobalAvgPool: return "globalavgpool";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Dropout: return "dropout";
  }
  return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "dense") return LayerKind::Dense;
  if (s == "conv3x3") return LayerKind::Conv3x3;
  if (s == "avgpool2") return LayerKind::AvgPool2;
  if (s == "globalavgpool") return LayerKind::GlobalAvgPool;
  if (s == "relu") return LayerKind::Relu;
  if (s == "tanh") return LayerKind::Tanh;
  if (s == "dropout") return LayerKind::Dropout;
  throw std::runtime_error("unknown layer kind: " + s);
}

// in_dim/out_dim are feature widths for dense and channel counts for conv.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int in_dim = 0;
  int out_dim = 0;
  double dropout_p = 0.0;
};

// A layer caches whatever its backward pass needs during forward. Backward
// overwrites the parameter gradients (one backward per step); frozen layers
// keep dx flowing but leave their gradients untouched.
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, bool train, Rng& rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual std::vector<Tensor*> params() { return {}; }

  const LayerSpec& spec() const { return spec_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

 protected:
  void require_cache() const {
    if (!has_cache_) throw NoForwardCacheError("backward before forward");
  }
  LayerSpec spec_;
  bool has_cache_ = false;
  bool frozen_ = false;
};

class DenseLayer final : public Layer {
 public:
  explicit DenseLayer(LayerSpec spec)
      : Layer(spec),
        weight_({spec.out_dim, spec.in_dim}),
        bias_({spec.out_dim}) {
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    if (x.shape.size() != 2 || x.dim(1) != spec_.in_dim) {
      throw ShapeMismatchError("dense: input width mismatch");
    }
    const int n = x.dim(0), in = spec_.in_dim, out = spec_.out_dim;
    input_ = x;
    has_cache_ = true;
    Tensor y({n, out});
    const double* xv = x.values.data();
    const double* w = weight_.values.data();
    double* yv = y.values.data();
    for (int i = 0; i < n; ++i) {
      const double* xi = xv + static_cast<std::int64_t>(i) * in;
      double* yi = yv + static_cast<std::int64_t>(i) * out;
      for (int j = 0; j < out; ++j) {
        const double* wj = w + static_cast<std::int64_t>(j) * in;
        double acc = bias_.values[static_cast<size_t>(j)];
        for (int k = 0; k < in; ++k) acc += xi[k] * wj[k];
        yi[j] = acc;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    const int n = input_.dim(0), in = spec_.in_dim, out = spec_.out_dim;
    if (dy.shape != std::vector<int>{n, out}) {
      throw ShapeMismatchError("dense: gradient shape mismatch");
    }
    Tensor dx({n, in});
    const double* dyv = dy.values.data();
    const double* xv = input_.values.data();
    const double* w = weight_.values.data();
    double* dxv = dx.values.data();
    if (!frozen_) {
      std::fill(weight_.grad.begin(), weight_.grad.end(), 0.0);
      std::fill(bias_.grad.begin(), bias_.grad.end(), 0.0);
    }
    for (int i = 0; i < n; ++i) {
      const double* dyi = dyv + static_cast<std::int64_t>(i) * out;
      double* dxi = dxv + static_cast<std::int64_t>(i) * in;
      for (int j = 0; j < out; ++j) {
        const double g = dyi[j];
        if (g == 0.0) continue;
        const double* wj = w + static_cast<std::int64_t>(j) * in;
        for (int k = 0; k < in; ++k) dxi[k] += g * wj[k];
      }
    }
    if (!frozen_) {
      double* wg = weight_.grad.data();
      double* bg = bias_.grad.data();
      for (int i = 0; i < n; ++i) {
        const double* dyi = dyv + static_cast<std::int64_t>(i) * out;
        const double* xi = xv + static_cast<std::int64_t>(i) * in;
        for (int j = 0; j < out; ++j) {
          const double g = dyi[j];
          bg[j] += g;
          if (g == 0.0) continue;
          double* wgj = wg + static_cast<std::int64_t>(j) * in;
          for (int k = 0; k < in; ++k) wgj[k] += g * xi[k];
        }
      }
    }
    return dx;
  }

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;  // [out, in]
  Tensor bias_;    // [out]
  Tensor input_;
};

// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
class Conv3x3Layer final : public Layer {
 public:
  explicit Conv3x3Layer(LayerSpec spec)
      : Layer(spec),
        weight_({spec.out_dim, spec.in_dim, 3, 3}),
        bias_({spec.out_dim}) {
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    if (x.shape.size() != 4 || x.dim(1) != spec_.in_dim) {
      throw ShapeMismatchError("conv3x3: input channel mismatch");
    }
    const int n = x.dim(0), ci = spec_.in_dim, co = spec_.out_dim;
    const int hh = x.dim(2), ww = x.dim(3);
    input_ = x;
    has_cache_ = true;
    Tensor y({n, co, hh, ww});
    const std::int64_t in_plane = static_cast<std::int64_t>(hh) * ww;
    for (int b = 0; b < n; ++b) {
      const double* xb = x.values.data() + b * ci * in_plane;
      double* yb = y.values.data() + b * co * in_plane;
      for (int oc = 0; oc < co; ++oc) {
        double* yo = yb + oc * in_plane;
        const double bv = bias_.values[static_cast<size_t>(oc)];
        for (std::int64_t i = 0; i < in_plane; ++i) yo[i] = bv;
        for (int ic = 0; ic < ci; ++ic) {
          const double* xi = xb + ic * in_plane;
          const double* wk = weight_.values.data() +
                             ((static_cast<std::int64_t>(oc) * ci + ic) * 9);
          for (int dy0 = -1; dy0 <= 1; ++dy0) {
            for (int dx0 = -1; dx0 <= 1; ++dx0) {
              const double wv = wk[(dy0 + 1) * 3 + (dx0 + 1)];
              if (wv == 0.0) continue;
              const int y0 = std::max(0, -dy0), y1 = std::min(hh, hh - dy0);
              const int x0 = std::max(0, -dx0), x1 = std::min(ww, ww - dx0);
              for (int yy = y0; yy < y1; ++yy) {
                const double* xrow = xi + static_cast<std::int64_t>(yy + dy0) * ww + dx0;
                double* yrow = yo + static_cast<std::int64_t>(yy) * ww;
                for (int xx = x0; xx < x1; ++xx) yrow[xx] += wv * xrow[xx];
              }
            }
          }
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    const int n = input_.dim(0), ci = spec_.in_dim, co = spec_.out_dim;
    const int hh = input_.dim(2), ww = input_.dim(3);
    if (dy.shape != std::vector<int>{n, co, hh, ww}) {
      throw ShapeMismatchError("conv3x3: gradient shape mismatch");
    }
    Tensor dx({n, ci, hh, ww});
    const std::int64_t plane = static_cast<std::int64_t>(hh) * ww;
    if (!frozen_) {
      std::fill(weight_.grad.begin(), weight_.grad.end(), 0.0);
      std::fill(bias_.grad.begin(), bias_.grad.end(), 0.0);
    }
    for (int b = 0; b < n; ++b) {
      const double* xb = input_.values.data() + b * ci * plane;
      const double* gb = dy.values.data() + b * co * plane;
      double* dxb = dx.values.data() + b * ci * plane;
      for (int oc = 0; oc < co; ++oc) {
        const double* go = gb + oc * plane;
        if (!frozen_) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < plane; ++i) acc += go[i];
          bias_.grad[static_cast<size_t>(oc)] += acc;
        }
        for (int ic = 0; ic < ci; ++ic) {
          const double* xi = xb + ic * plane;
          double* dxi = dxb + ic * plane;
          const std::int64_t wbase = (static_cast<std::int64_t>(oc) * ci + ic) * 9;
          const double* wk = weight_.values.data() + wbase;
          double* wg = frozen_ ? nullptr : weight_.grad.data() + wbase;
          for (int dy0 = -1; dy0 <= 1; ++dy0) {
            for (int dx0 = -1; dx0 <= 1; ++dx0) {
              const int ki = (dy0 + 1) * 3 + (dx0 + 1);
              const double wv = wk[ki];
              const int y0 = std::max(0, -dy0), y1 = std::min(hh, hh - dy0);
              const int x0 = std::max(0, -dx0), x1 = std::min(ww, ww - dx0);
              double wacc = 0.0;
              for (int yy = y0; yy < y1; ++yy) {
                const double* grow = go + static_cast<std::int64_t>(yy) * ww;
                const double* xrow = xi + static_cast<std::int64_t>(yy + dy0) * ww + dx0;
                double* dxrow = dxi + static_cast<std::int64_t>(yy + dy0) * ww + dx0;
                for (int xx = x0; xx < x1; ++xx) {
                  const double g = grow[xx];
                  wacc += g * xrow[xx];
                  dxrow[xx] += g * wv;
                }
              }
              if (wg) wg[ki] += wacc;
            }
          }
        }
      }
    }
    return dx;
  }

  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }

 private:
  Tensor weight_;  // [co, ci, 3, 3]
  Tensor bias_;    // [co]
  Tensor input_;
};

// 2x2 average pooling, stride 2. Requires even spatial dims.
class AvgPool2Layer final : public Layer {
 public:
  explicit AvgPool2Layer(LayerSpec spec) : Layer(spec) {}

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    if (x.shape.size() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
      throw ShapeMismatchError("avgpool2: needs NCHW input with even H and W");
    }
    in_shape_ = x.shape;
    has_cache_ = true;
    const int n = x.dim(0), c = x.dim(1), hh = x.dim(2), ww = x.dim(3);
    const int ho = hh / 2, wo = ww / 2;
    Tensor y({n, c, ho, wo});
    const double* xv = x.values.data();
    double* yv = y.values.data();
    for (int bc = 0; bc < n * c; ++bc) {
      const double* xi = xv + static_cast<std::int64_t>(bc) * hh * ww;
      double* yi = yv + static_cast<std::int64_t>(bc) * ho * wo;
      for (int yy = 0; yy < ho; ++yy) {
        const double* r0 = xi + static_cast<std::int64_t>(2 * yy) * ww;
        const double* r1 = r0 + ww;
        for (int xx = 0; xx < wo; ++xx) {
          yi[static_cast<std::int64_t>(yy) * wo + xx] =
              0.25 * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    const int n = in_shape_[0], c = in_shape_[1], hh = in_shape_[2], ww = in_shape_[3];
    Tensor dx({n, c, hh, ww});
    const int ho = hh / 2, wo = ww / 2;
    const double* gv = dy.values.data();
    double* dxv = dx.values.data();
    for (int bc = 0; bc < n * c; ++bc) {
      const double* gi = gv + static_cast<std::int64_t>(bc) * ho * wo;
      double* di = dxv + static_cast<std::int64_t>(bc) * hh * ww;
      for (int yy = 0; yy < ho; ++yy) {
        double* r0 = di + static_cast<std::int64_t>(2 * yy) * ww;
        double* r1 = r0 + ww;
        for (int xx = 0; xx < wo; ++xx) {
          const double g = 0.25 * gi[static_cast<std::int64_t>(yy) * wo + xx];
          r0[2 * xx] = g;
          r0[2 * xx + 1] = g;
          r1[2 * xx] = g;
          r1[2 * xx + 1] = g;
        }
      }
    }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

class GlobalAvgPoolLayer final : public Layer {
 public:
  explicit GlobalAvgPoolLayer(LayerSpec spec) : Layer(spec) {}

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    if (x.shape.size() != 4) throw ShapeMismatchError("globalavgpool: needs NCHW");
    in_shape_ = x.shape;
    has_cache_ = true;
    const int n = x.dim(0), c = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    Tensor y({n, c});
    for (int i = 0; i < n * c; ++i) {
      const double* xi = x.values.data() + i * plane;
      double acc = 0.0;
      for (std::int64_t k = 0; k < plane; ++k) acc += xi[k];
      y.values[static_cast<size_t>(i)] = acc / static_cast<double>(plane);
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    Tensor dx(in_shape_);
    const std::int64_t plane =
        static_cast<std::int64_t>(in_shape_[2]) * in_shape_[3];
    const double inv = 1.0 / static_cast<double>(plane);
    for (size_t i = 0; i < dy.values.size(); ++i) {
      double* di = dx.values.data() + static_cast<std::int64_t>(i) * plane;
      const double g = dy.values[i] * inv;
      for (std::int64_t k = 0; k < plane; ++k) di[k] = g;
    }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

class ReluLayer final : public Layer {
 public:
  explicit ReluLayer(LayerSpec spec) : Layer(spec) {}

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    mask_.assign(x.values.size(), 0);
    Tensor y(x.shape);
    for (size_t i = 0; i < x.values.size(); ++i) {
      if (x.values[i] > 0.0) {
        y.values[i] = x.values[i];
        mask_[i] = 1;
      }
    }
    has_cache_ = true;
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    Tensor dx(dy.shape);
    for (size_t i = 0; i < dy.values.size(); ++i) {
      dx.values[i] = mask_[i] ? dy.values[i] : 0.0;
    }
    return dx;
  }

 private:
  std::vector<unsigned char> mask_;
};

class TanhLayer final : public Layer {
 public:
  explicit TanhLayer(LayerSpec spec) : Layer(spec) {}

  Tensor forward(const Tensor& x, bool /*train*/, Rng& /*rng*/) override {
    out_ = Tensor(x.shape);
    for (size_t i = 0; i < x.values.size(); ++i) out_.values[i] = std::tanh(x.values[i]);
    has_cache_ = true;
    return out_;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    Tensor dx(dy.shape);
    for (size_t i = 0; i < dy.values.size(); ++i) {
      const double y = out_.values[i];
      dx.values[i] = dy.values[i] * (1.0 - y * y);
    }
    return dx;
  }

 private:
  Tensor out_;
};

// Inverted dropout: kept activations are scaled by 1/(1-p) at train time,
// so eval-mode forwards need no rescale and never touch the RNG. A frozen
// branch is not being trained, so its dropout also runs as identity.
class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(LayerSpec spec) : Layer(spec) {}

  Tensor forward(const Tensor& x, bool train, Rng& rng) override {
    const double p = spec_.dropout_p;
    has_cache_ = true;
    if (!train || frozen_ || p <= 0.0) {
      mask_.assign(x.values.size(), 1.0);
      return x;
    }
    const double scale = 1.0 / (1.0 - p);
    mask_.resize(x.values.size());
    Tensor y(x.shape);
    for (size_t i = 0; i < x.values.size(); ++i) {
      const double m = rng.uniform01() >= p ? scale : 0.0;
      mask_[i] = m;
      y.values[i] = x.values[i] * m;
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    require_cache();
    Tensor dx(dy.shape);
    for (size_t i = 0; i < dy.values.size(); ++i) dx.values[i] = dy.values[i] * mask_[i];
    return dx;
  }

 private:
  std::vector<double> mask_;
};

inline std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<DenseLayer>(spec);
    case LayerKind::Conv3x3: return std::make_unique<Conv3x3Layer>(spec);
    case LayerKind::AvgPool2: return std::make_unique<AvgPool2Layer>(spec);
    case LayerKind::GlobalAvgPool: return std::make_unique<GlobalAvgPoolLayer>(spec);
    case LayerKind::Relu: return std::make_unique<ReluLayer>(spec);
    case LayerKind::Tanh: return std::make_unique<TanhLayer>(spec);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer>(spec);
  }
  throw std::runtime_error("unreachable layer kind");
}

}  // namespace monobev::nn

#pragma once

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "monobev/geometry.hpp"
#include "monobev/network.hpp"
#include "monobev/optimizer.hpp"

namespace monobev::nn {

struct UnknownBranchError : std::runtime_error {
  explicit UnknownBranchError(const std::string& what) : std::runtime_error(what) {}
};

enum class BranchId { BR1 = 1, BR2 = 2, BR3 = 3, BR4 = 4 };

// Widths of the four branches. BR-2 is a 4-layer FC encoder ending at 256;
// BR-3 and BR-4 are 8-layer FC heads with tanh-bounded outputs (4 BEV corner
// values and out_dim regression targets). The backbone is a small trainable
// conv stack ending in global average pooling of width feature_dim.
struct BranchConfig {
  int crop_size = 32;
  int feature_dim = 32;
  std::vector<int> br2_widths = {64, 128, 256, 256};
  std::vector<int> br3_widths = {256, 256, 128, 128, 64, 64, 32, 4};
  std::vector<int> br4_widths = {256, 256, 128, 128, 64, 64, 32, 8};
  int out_dim = 8;  // 8 = sin/cos yaw encoding, 7 = single yaw/pi output
  // Dropout is implemented and configurable but defaults off: at the
  // desk-scale step budget its mask noise swamps the corner regression.
  double dropout_p = 0.0;
  bool backbone_trainable = true;

  void validate() const {
    if (crop_size <= 0 || crop_size % 8 != 0) {
      throw std::invalid_argument("crop_size must be a positive multiple of 8");
    }
    if (feature_dim <= 0) throw std::invalid_argument("feature_dim must be positive");
    if (br2_widths.size() != 4 || br2_widths.back() != 256) {
      throw std::invalid_argument("BR-2 needs 4 FC layers ending at 256");
    }
    if (br3_widths.size() != 8 || br3_widths.back() != 4) {
      throw std::invalid_argument("BR-3 needs 8 FC layers ending at 4");
    }
    if (out_dim != 7 && out_dim != 8) {
      throw std::invalid_argument("out_dim must be 7 or 8");
    }
    if (br4_widths.size() != 8 || br4_widths.back() != out_dim) {
      throw std::invalid_argument("BR-4 needs 8 FC layers ending at out_dim");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
      throw std::invalid_argument("dropout_p must be in [0, 1)");
    }
  }

  int semantic_dim() const { return feature_dim + 256; }
};

namespace detail {
inline std::vector<LayerSpec> backbone_specs(const BranchConfig& cfg) {
  const int c3 = cfg.feature_dim;
  std::vector<LayerSpec> s;
  const int chans[4] = {1, 8, 16, c3};
  for (int i = 0; i < 3; ++i) {
    s.push_back({LayerKind::Conv3x3, chans[i], chans[i + 1], 0.0});
    s.push_back({LayerKind::Relu, 0, 0, 0.0});
    s.push_back({LayerKind::AvgPool2, 0, 0, 0.0});
  }
  s.push_back({LayerKind::GlobalAvgPool, 0, 0, 0.0});
  return s;
}

inline std::vector<LayerSpec> mlp_specs(int in_dim, const std::vector<int>& widths,
                                        double dropout_p, LayerKind final_act) {
  std::vector<LayerSpec> s;
  int in = in_dim;
  for (size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    s.push_back({LayerKind::Dense, in, widths[i], 0.0});
    if (!last) {
      s.push_back({LayerKind::Relu, 0, 0, 0.0});
      if (dropout_p > 0.0) s.push_back({LayerKind::Dropout, 0, 0, dropout_p});
    } else if (final_act == LayerKind::Tanh) {
      s.push_back({LayerKind::Tanh, 0, 0, 0.0});
    }
    in = widths[i];
  }
  return s;
}
}  // namespace detail

// The four-branch network: BR-1 conv backbone over the crop, BR-2 bbox
// encoder, shared semantic vector, BR-3 BEV-corner head, BR-4 3D-target
// head. BR-2 hidden layers are plain ReLU; dropout sits on the hidden
// layers of BR-3/BR-4 only, never on outputs.
class Model {
 public:
  explicit Model(BranchConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    backbone_ = Branch("br1", detail::backbone_specs(cfg_));
    br2_ = Branch("br2", detail::mlp_specs(4, cfg_.br2_widths, 0.0, LayerKind::Dense));
    br3_ = Branch("br3", detail::mlp_specs(cfg_.semantic_dim(), cfg_.br3_widths,
                                           cfg_.dropout_p, LayerKind::Tanh));
    br4_ = Branch("br4", detail::mlp_specs(cfg_.semantic_dim(), cfg_.br4_widths,
                                           cfg_.dropout_p, LayerKind::Tanh));
    backbone_.set_trainable(cfg_.backbone_trainable);
  }

  void init_params(Rng& rng) {
    backbone_.init_params(rng);
    br2_.init_params(rng);
    br3_.init_params(rng);
    br4_.init_params(rng);
  }

  const BranchConfig& config() const { return cfg_; }

  Tensor backbone_forward(const Tensor& crops, bool train, Rng& rng) {
    require_shape(crops, {crops.dim(0), 1, cfg_.crop_size, cfg_.crop_size},
                  "backbone_forward");
    return backbone_.forward(crops, train, rng);
  }

  Tensor br2_forward(const Tensor& bbox, bool train, Rng& rng) {
    require_shape(bbox, {bbox.dim(0), 4}, "br2_forward");
    return br2_.forward(bbox, train, rng);
  }

  // Feature first, encoding second; the order is part of the contract.
  static Tensor semantic_concat(const Tensor& feat, const Tensor& enc) {
    if (feat.shape.size() != 2 || enc.shape.size() != 2 || feat.dim(0) != enc.dim(0)) {
      throw ShapeMismatchError("semantic_concat: row counts differ");
    }
    const int n = feat.dim(0), d = feat.dim(1), e = enc.dim(1);
    Tensor out({n, d + e});
    for (int i = 0; i < n; ++i) {
      const auto* f = feat.values.data() + static_cast<std::int64_t>(i) * d;
      const auto* g = enc.values.data() + static_cast<std::int64_t>(i) * e;
      auto* o = out.values.data() + static_cast<std::int64_t>(i) * (d + e);
      std::copy(f, f + d, o);
      std::copy(g, g + e, o + d);
    }
    return out;
  }

  Tensor br3_forward(const Tensor& semantic, bool train, Rng& rng) {
    require_shape(semantic, {semantic.dim(0), cfg_.semantic_dim()}, "br3_forward");
    return br3_.forward(semantic, train, rng);
  }

  Tensor br4_forward(const Tensor& semantic, bool train, Rng& rng) {
    require_shape(semantic, {semantic.dim(0), cfg_.semantic_dim()}, "br4_forward");
    return br4_.forward(semantic, train, rng);
  }

  struct Output {
    Tensor bev;     // [N, 4], empty when not requested
    Tensor target;  // [N, out_dim], empty when not requested
  };

  Output forward(const Tensor& crops, const Tensor& bbox, bool train, Rng& rng,
                 bool want_bev = true, bool want_target = true) {
    Tensor feat = backbone_forward(crops, train, rng);
    Tensor enc = br2_forward(bbox, train, rng);
    Tensor sem = semantic_concat(feat, enc);
    Output out;
    if (want_bev) out.bev = br3_.forward(sem, train, rng);
    if (want_target) out.target = br4_.forward(sem, train, rng);
    return out;
  }

  // Reverse pass for whichever heads were forwarded; pass nullptr for the
  // other. Frozen BR-1/BR-2 are skipped entirely (their parameters receive
  // no gradient and nothing upstream needs dx).
  void backward(const Tensor* d_bev, const Tensor* d_target) {
    Tensor ds;
    if (d_bev) ds = br3_.backward(*d_bev);
    if (d_target) {
      Tensor ds4 = br4_.backward(*d_target);
      if (ds.values.empty()) {
        ds = std::move(ds4);
      } else {
        for (size_t i = 0; i < ds.values.size(); ++i) ds.values[i] += ds4.values[i];
      }
    }
    if (ds.values.empty()) return;
    const int n = ds.dim(0), d = cfg_.feature_dim, e = 256;
    const bool need_bb = backbone_.trainable();
    const bool need_b2 = br2_.trainable();
    if (!need_bb && !need_b2) return;
    if (need_bb) {
      Tensor df({n, d});
      for (int i = 0; i < n; ++i) {
        const auto* s = ds.values.data() + static_cast<std::int64_t>(i) * (d + e);
        std::copy(s, s + d, df.values.data() + static_cast<std::int64_t>(i) * d);
      }
      backbone_.backward(df);
    }
    if (need_b2) {
      Tensor de({n, e});
      for (int i = 0; i < n; ++i) {
        const auto* s = ds.values.data() + static_cast<std::int64_t>(i) * (d + e) + d;
        std::copy(s, s + e, de.values.data() + static_cast<std::int64_t>(i) * e);
      }
      br2_.backward(de);
    }
  }

  Branch& branch(BranchId id) {
    switch (id) {
      case BranchId::BR1: return backbone_;
      case BranchId::BR2: return br2_;
      case BranchId::BR3: return br3_;
      case BranchId::BR4: return br4_;
    }
    throw UnknownBranchError("branch id out of range");
  }

  void set_trainable(BranchId id, bool trainable) { branch(id).set_trainable(trainable); }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (Branch* b : {&backbone_, &br2_, &br3_, &br4_}) {
      for (auto& l : b->layers()) {
        for (Tensor* t : l->params()) out.push_back({t, l.get()});
      }
    }
    return out;
  }

  std::vector<Branch*> branches() { return {&backbone_, &br2_, &br3_, &br4_}; }

 private:
  BranchConfig cfg_;
  Branch backbone_, br2_, br3_, br4_;
};

// Target row layout fed to BR-4: 8 values keep (sin, cos); the 7-value
// variant stores yaw/pi in the last slot.
inline std::vector<double> target_row(const TargetVector& t, int out_dim) {
  if (out_dim == 8) return {t.tx, t.ty, t.tz, t.tw, t.tl, t.th, t.tsin, t.tcos};
  const double yaw = decode_yaw(t.tsin, t.tcos);
  return {t.tx, t.ty, t.tz, t.tw, t.tl, t.th, yaw / std::numbers::pi};
}

inline TargetVector target_from_row(const double* v, int out_dim) {
  TargetVector t;
  t.tx = v[0];
  t.ty = v[1];
  t.tz = v[2];
  t.tw = v[3];
  t.tl = v[4];
  t.th = v[5];
  if (out_dim == 8) {
    t.tsin = v[6];
    t.tcos = v[7];
  } else {
    const double yaw = v[6] * std::numbers::pi;
    t.tsin = std::sin(yaw);
    t.tcos = std::cos(yaw);
  }
  return t;
}

}  // namespace monobev::nn

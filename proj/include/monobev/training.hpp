#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "monobev/checkpoint.hpp"
#include "monobev/model.hpp"
#include "monobev/synthdata.hpp"

namespace monobev::train {

struct EmptyDatasetError : std::runtime_error {
  explicit EmptyDatasetError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  int epochs_stage1 = 80;
  int epochs_stage2 = 60;
  int batch_size = 32;
  double lr0 = 0.01;
  int decay_period = 0;     // 0 = round(stage epochs * 0.4)
  double momentum = 0.9;
  double lambda_depth = 0.1;
  std::uint64_t seed = 0;
  int eval_every = 0;       // extra checkpoint cadence; 0 = stage end only
  // The augmentation ops exist (and are tested) but the loop defaults to
  // clean samples: the generator supplies unlimited data, and brightness /
  // contrast shifts corrupt the renderer's intensity-coded depth cue.
  bool augment = false;
};

inline int effective_decay_period(const TrainConfig& cfg, int stage_epochs) {
  if (cfg.decay_period > 0) return cfg.decay_period;
  return std::max(1, static_cast<int>(std::lround(0.4 * stage_epochs)));
}

struct Metrics {
  double mean_iou = 0.0;
  double hit50 = 0.0, hit75 = 0.0, hit90 = 0.0;
  double med_z_err = 0.0;    // meters
  double med_x_err = 0.0;    // meters
  double med_dim_err = 0.0;  // meters, mean over w/l/h per sample
  double med_yaw_deg = 0.0;  // degrees
};

struct HistoryRow {
  int stage = 1;
  int epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_loc = 0.0;
  double loss_dim = 0.0;
  double loss_yaw = 0.0;
  double loss_depth = 0.0;
  Metrics val;
};

inline constexpr const char* kHistoryHeader =
    "stage,epoch,lr,loss_total,loss_loc,loss_dim,loss_yaw,loss_depth,"
    "val_mean_iou,val_hit50,val_hit75,val_hit90,val_med_z_err,val_med_yaw_deg";

inline void write_history(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw nn::IoError("cannot write history: " + path);
  out << kHistoryHeader << '\n';
  char buf[40];
  auto g17 = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.stage << ',' << r.epoch << ',' << g17(r.lr) << ',' << g17(r.loss_total)
        << ',' << g17(r.loss_loc) << ',' << g17(r.loss_dim) << ',' << g17(r.loss_yaw)
        << ',' << g17(r.loss_depth) << ',' << g17(r.val.mean_iou) << ','
        << g17(r.val.hit50) << ',' << g17(r.val.hit75) << ',' << g17(r.val.hit90)
        << ',' << g17(r.val.med_z_err) << ',' << g17(r.val.med_yaw_deg) << '\n';
  }
}

// 80/20 split on a hash of the sample index; independent of seed and
// worker count so the same dataset always splits the same way.
inline bool is_validation_index(size_t index) {
  return splitmix64(static_cast<std::uint64_t>(index) + 1) % 5 == 0;
}

struct SplitIndices {
  std::vector<size_t> train, val;
};

inline SplitIndices split_dataset(size_t n) {
  SplitIndices s;
  for (size_t i = 0; i < n; ++i) {
    (is_validation_index(i) ? s.val : s.train).push_back(i);
  }
  return s;
}

// Depth anchor from the (frozen) BEV head: the squared gap between BR-4's
// normalized depth and the rectangle's mid-z, both already in the shared
// Eq frame.
inline double depth_penalty(const BevRect& pred_bev, const TargetVector& pred_target) {
  const double z_bev = 0.5 * (pred_bev.z1 + pred_bev.z2);
  const double d = pred_target.tz - z_bev;
  return d * d;
}

namespace detail {

inline void fill_batch(const std::vector<synth::Sample>& samples,
                       const std::vector<size_t>& order, size_t begin, size_t end,
                       bool augment, Rng& rng, int crop_size, int out_dim,
                       nn::Tensor& crops, nn::Tensor& bbox, nn::Tensor& bev,
                       nn::Tensor& target) {
  const int b = static_cast<int>(end - begin);
  crops = nn::Tensor({b, 1, crop_size, crop_size});
  bbox = nn::Tensor({b, 4});
  bev = nn::Tensor({b, 4});
  target = nn::Tensor({b, out_dim});
  for (size_t i = begin; i < end; ++i) {
    synth::Sample s = samples[order[i]];
    if (augment) s = synth::augment(std::move(s), rng);
    const int row = static_cast<int>(i - begin);
    std::copy(s.crop.begin(), s.crop.end(),
              crops.values.begin() +
                  static_cast<std::int64_t>(row) * crop_size * crop_size);
    bbox.values[row * 4 + 0] = s.bbox_norm.x1;
    bbox.values[row * 4 + 1] = s.bbox_norm.y1;
    bbox.values[row * 4 + 2] = s.bbox_norm.x2;
    bbox.values[row * 4 + 3] = s.bbox_norm.y2;
    bev.values[row * 4 + 0] = s.bev_rect.x1;
    bev.values[row * 4 + 1] = s.bev_rect.z1;
    bev.values[row * 4 + 2] = s.bev_rect.x2;
    bev.values[row * 4 + 3] = s.bev_rect.z2;
    const auto t = nn::target_row(s.target, out_dim);
    std::copy(t.begin(), t.end(),
              target.values.begin() + static_cast<std::int64_t>(row) * out_dim);
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void shuffle(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = rng.uniform_int(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace detail

// Eval-mode pass over the validation split: BEV IoU statistics always,
// 3D-regression medians when the BR-4 head is live (stage 2).
inline Metrics evaluate_epoch(nn::Model& model, const std::vector<synth::Sample>& samples,
                              const std::vector<size_t>& val_idx, int stage) {
  Metrics m;
  if (val_idx.empty()) return m;
  Rng unused(0);
  const int crop_size = model.config().crop_size;
  const int out_dim = model.config().out_dim;
  std::vector<double> ious, z_err, x_err, dim_err, yaw_deg;
  const size_t batch = 256;
  for (size_t begin = 0; begin < val_idx.size(); begin += batch) {
    const size_t end = std::min(val_idx.size(), begin + batch);
    nn::Tensor crops, bbox, bev, target;
    detail::fill_batch(samples, val_idx, begin, end, /*augment=*/false, unused,
                       crop_size, out_dim, crops, bbox, bev, target);
    auto out = model.forward(crops, bbox, /*train=*/false, unused,
                             /*want_bev=*/true, /*want_target=*/stage >= 2);
    for (size_t r = 0; r < end - begin; ++r) {
      const synth::Sample& s = samples[val_idx[begin + r]];
      const double* p = out.bev.values.data() + r * 4;
      const BevRect pred = canonicalize_rect({p[0], p[1], p[2], p[3]});
      const double iou = pred.valid() ? iou_axis_aligned(pred, s.bev_rect) : 0.0;
      ious.push_back(iou);
      if (stage >= 2) {
        const double* t = out.target.values.data() +
                          static_cast<std::int64_t>(r) * out_dim;
        const TargetVector tv = nn::target_from_row(t, out_dim);
        z_err.push_back(std::abs(tv.tz - s.target.tz) * kZHalfRange);
        x_err.push_back(std::abs(tv.tx - s.target.tx) * kXHalfRange);
        dim_err.push_back((std::abs(tv.tw - s.target.tw) * kWHalfRange +
                           std::abs(tv.tl - s.target.tl) * kLHalfRange +
                           std::abs(tv.th - s.target.th) * kHHalfRange) /
                          3.0);
        double err;
        if (tv.tsin * tv.tsin + tv.tcos * tv.tcos < 1e-12) {
          err = std::numbers::pi;  // undecodable yaw counts as worst case
        } else {
          const double pred_yaw = std::atan2(tv.tsin, tv.tcos);
          const double gt_yaw = decode_yaw(s.target.tsin, s.target.tcos);
          err = std::abs(wrap_angle(pred_yaw - gt_yaw));
        }
        yaw_deg.push_back(err * 180.0 / std::numbers::pi);
      }
    }
  }
  double sum = 0.0;
  int h50 = 0, h75 = 0, h90 = 0;
  for (double v : ious) {
    sum += v;
    if (v >= 0.5) ++h50;
    if (v >= 0.75) ++h75;
    if (v >= 0.9) ++h90;
  }
  const double n = static_cast<double>(ious.size());
  m.mean_iou = sum / n;
  m.hit50 = h50 / n;
  m.hit75 = h75 / n;
  m.hit90 = h90 / n;
  if (stage >= 2) {
    m.med_z_err = detail::median(z_err);
    m.med_x_err = detail::median(x_err);
    m.med_dim_err = detail::median(dim_err);
    m.med_yaw_deg = detail::median(yaw_deg);
  }
  return m;
}

// Eval-mode MSE of one head over the given indices (corner MSE for the
// BEV head, target MSE for BR-4).
inline double eval_mse(nn::Model& model, const std::vector<synth::Sample>& samples,
                       const std::vector<size_t>& idx, int stage) {
  Rng unused(0);
  const int crop_size = model.config().crop_size;
  const int out_dim = model.config().out_dim;
  double acc = 0.0;
  const size_t batch = 256;
  for (size_t begin = 0; begin < idx.size(); begin += batch) {
    const size_t end = std::min(idx.size(), begin + batch);
    nn::Tensor crops, bbox, bev, target;
    detail::fill_batch(samples, idx, begin, end, false, unused, crop_size, out_dim,
                       crops, bbox, bev, target);
    auto out = model.forward(crops, bbox, false, unused, stage == 1, stage == 2);
    const double mse = stage == 1 ? nn::mse_loss(out.bev, bev)
                                  : nn::mse_loss(out.target, target);
    acc += mse * static_cast<double>(end - begin);
  }
  return acc / static_cast<double>(idx.size());
}

struct StageResult {
  std::vector<HistoryRow> history;
  std::string checkpoint_path;
};

namespace detail {
inline void maybe_periodic_checkpoint(nn::Model& model, const TrainConfig& cfg,
                                      int stage, int epoch, Rng& rng,
                                      const std::string& out_dir) {
  if (cfg.eval_every <= 0 || (epoch + 1) % cfg.eval_every != 0) return;
  char name[64];
  std::snprintf(name, sizeof name, "ckpt_stage%d_epoch%04d.bin", stage, epoch);
  nn::CheckpointMeta meta{epoch, stage, rng.state(), rng.inc()};
  nn::save_checkpoint(model, meta, (std::filesystem::path(out_dir) / name).string());
}
}  // namespace detail

// Stage 1: BR-1 (when trainable) + BR-2 + BR-3 against the BEV corner MSE.
// BR-4 exists but stays frozen and is never forwarded.
inline StageResult train_stage1(const std::vector<synth::Sample>& samples,
                                const TrainConfig& cfg, const nn::BranchConfig& bcfg,
                                const std::string& out_dir) {
  if (samples.empty()) throw EmptyDatasetError("stage 1: empty dataset");
  std::filesystem::create_directories(out_dir);
  const SplitIndices split = split_dataset(samples.size());
  if (split.train.empty()) throw EmptyDatasetError("stage 1: empty train split");

  Rng rng(cfg.seed, /*stream=*/1);
  nn::Model model(bcfg);
  model.init_params(rng);
  model.set_trainable(nn::BranchId::BR4, false);
  model.set_trainable(nn::BranchId::BR1, bcfg.backbone_trainable);

  nn::SgdMomentum opt(cfg.momentum);
  opt.attach(model.params());
  const int period = effective_decay_period(cfg, cfg.epochs_stage1);
  const int crop_size = bcfg.crop_size;

  StageResult result;
  std::vector<size_t> order = split.train;
  for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const double lr = nn::lr_schedule(epoch, cfg.lr0, period);
    detail::shuffle(order, rng);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      nn::Tensor crops, bbox, bev, target;
      detail::fill_batch(samples, order, begin, end, cfg.augment, rng, crop_size,
                         bcfg.out_dim, crops, bbox, bev, target);
      auto out = model.forward(crops, bbox, /*train=*/true, rng,
                               /*want_bev=*/true, /*want_target=*/false);
      nn::Tensor grad;
      const double loss = nn::mse_loss(out.bev, bev, &grad);
      model.backward(&grad, nullptr);
      opt.step(lr);
      loss_sum += loss * static_cast<double>(end - begin);
    }
    HistoryRow row;
    row.stage = 1;
    row.epoch = epoch;
    row.lr = lr;
    row.loss_total = loss_sum / static_cast<double>(order.size());
    row.val = evaluate_epoch(model, samples, split.val, /*stage=*/1);
    result.history.push_back(row);
    detail::maybe_periodic_checkpoint(model, cfg, 1, epoch, rng, out_dir);
  }

  nn::CheckpointMeta meta{cfg.epochs_stage1, 1, rng.state(), rng.inc()};
  result.checkpoint_path =
      (std::filesystem::path(out_dir) / "ckpt_stage1.bin").string();
  nn::save_checkpoint(model, meta, result.checkpoint_path);
  return result;
}

// Stage 2: BR-1..BR-3 frozen bit-for-bit, BR-4 against target MSE plus the
// depth-aware penalty. Loss splits match the history columns exactly:
// total = loc + dim + yaw + lambda * depth.
inline StageResult train_stage2(const std::vector<synth::Sample>& samples,
                                const TrainConfig& cfg, const std::string& stage1_ckpt,
                                const std::string& out_dir) {
  if (samples.empty()) throw EmptyDatasetError("stage 2: empty dataset");
  std::filesystem::create_directories(out_dir);
  const SplitIndices split = split_dataset(samples.size());
  if (split.train.empty()) throw EmptyDatasetError("stage 2: empty train split");

  auto loaded = nn::load_checkpoint(stage1_ckpt);
  nn::Model& model = loaded.model;
  model.set_trainable(nn::BranchId::BR1, false);
  model.set_trainable(nn::BranchId::BR2, false);
  model.set_trainable(nn::BranchId::BR3, false);
  model.set_trainable(nn::BranchId::BR4, true);

  const std::string frozen_before = nn::serialize_params(
      model, {nn::BranchId::BR1, nn::BranchId::BR2, nn::BranchId::BR3});

  Rng rng(cfg.seed, /*stream=*/2);
  nn::SgdMomentum opt(cfg.momentum);
  opt.attach(model.params());
  const nn::BranchConfig& bcfg = model.config();
  const int out_dim = bcfg.out_dim;
  const int period = effective_decay_period(cfg, cfg.epochs_stage2);
  const int tz_col = 2;

  StageResult result;
  std::vector<size_t> order = split.train;
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    const double lr = nn::lr_schedule(epoch, cfg.lr0, period);
    detail::shuffle(order, rng);
    double loc_sum = 0.0, dim_sum = 0.0, yaw_sum = 0.0, depth_sum = 0.0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      const int b = static_cast<int>(end - begin);
      nn::Tensor crops, bbox, bev, target;
      detail::fill_batch(samples, order, begin, end, cfg.augment, rng,
                         bcfg.crop_size, out_dim, crops, bbox, bev, target);
      auto out = model.forward(crops, bbox, /*train=*/true, rng,
                               /*want_bev=*/true, /*want_target=*/true);
      nn::Tensor grad({b, out_dim});
      for (int r = 0; r < b; ++r) {
        const double* pv = out.target.values.data() + static_cast<std::int64_t>(r) * out_dim;
        const double* tv = target.values.data() + static_cast<std::int64_t>(r) * out_dim;
        double* gv = grad.values.data() + static_cast<std::int64_t>(r) * out_dim;
        for (int c = 0; c < out_dim; ++c) {
          const double d = pv[c] - tv[c];
          gv[c] = 2.0 * d / b;
          const double sq = d * d;
          if (c < 3) loc_sum += sq;
          else if (c < 6) dim_sum += sq;
          else yaw_sum += sq;
        }
        // Depth anchor against the frozen BEV prediction (detached).
        const double* bevp = out.bev.values.data() + static_cast<std::int64_t>(r) * 4;
        const double z_bev = 0.5 * (bevp[1] + bevp[3]);
        const double dd = pv[tz_col] - z_bev;
        depth_sum += dd * dd;
        gv[tz_col] += cfg.lambda_depth * 2.0 * dd / b;
      }
      model.backward(nullptr, &grad);
      opt.step(lr);
    }
    const double n = static_cast<double>(order.size());
    HistoryRow row;
    row.stage = 2;
    row.epoch = epoch;
    row.lr = lr;
    row.loss_loc = loc_sum / n;
    row.loss_dim = dim_sum / n;
    row.loss_yaw = yaw_sum / n;
    row.loss_depth = depth_sum / n;
    row.loss_total =
        row.loss_loc + row.loss_dim + row.loss_yaw + cfg.lambda_depth * row.loss_depth;
    row.val = evaluate_epoch(model, samples, split.val, /*stage=*/2);
    result.history.push_back(row);
    detail::maybe_periodic_checkpoint(model, cfg, 2, epoch, rng, out_dir);
  }

  const std::string frozen_after = nn::serialize_params(
      model, {nn::BranchId::BR1, nn::BranchId::BR2, nn::BranchId::BR3});
  if (frozen_before != frozen_after) {
    throw std::logic_error("stage 2 modified frozen BR-1..BR-3 parameters");
  }

  nn::CheckpointMeta meta{cfg.epochs_stage2, 2, rng.state(), rng.inc()};
  result.checkpoint_path =
      (std::filesystem::path(out_dir) / "ckpt_stage2.bin").string();
  nn::save_checkpoint(model, meta, result.checkpoint_path);
  return result;
}

}  // namespace monobev::train

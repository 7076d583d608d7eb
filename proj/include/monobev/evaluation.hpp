#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "monobev/geometry.hpp"
#include "monobev/kitti_io.hpp"

namespace monobev::eval {

struct FrameMismatchError : std::runtime_error {
  explicit FrameMismatchError(const std::string& what) : std::runtime_error(what) {}
};
struct LengthMismatchError : std::runtime_error {
  explicit LengthMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Per-detection outcome after greedy matching. Detections whose only
// overlap is with an ignored ground truth drop out of the counting
// entirely (they are neither TP nor FP).
enum MatchFlag : int { kFalsePositive = 0, kTruePositive = 1, kIgnoredDetection = -1 };

struct MatchResult {
  std::vector<int> flags;  // aligned with the input detections
  int num_tp = 0;
  int num_fp = 0;
};

// Greedy score-descending assignment: each detection takes the unmatched
// active gt of highest IoU when that IoU clears the threshold. Ties in
// score keep input order.
inline MatchResult match_detections(
    const std::vector<double>& scores, const std::vector<bool>& gt_ignored,
    double iou_thr, const std::function<double(size_t, size_t)>& iou) {
  const size_t nd = scores.size();
  const size_t ng = gt_ignored.size();
  std::vector<size_t> order(nd);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  MatchResult res;
  res.flags.assign(nd, kFalsePositive);
  std::vector<bool> taken(ng, false);
  for (size_t oi : order) {
    double best = 0.0;
    size_t best_gt = ng;
    for (size_t g = 0; g < ng; ++g) {
      if (gt_ignored[g] || taken[g]) continue;
      const double o = iou(oi, g);
      if (o >= iou_thr && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best_gt != ng) {
      taken[best_gt] = true;
      res.flags[oi] = kTruePositive;
      ++res.num_tp;
      continue;
    }
    bool on_ignored = false;
    for (size_t g = 0; g < ng && !on_ignored; ++g) {
      if (gt_ignored[g] && iou(oi, g) >= iou_thr) on_ignored = true;
    }
    if (on_ignored) {
      res.flags[oi] = kIgnoredDetection;
    } else {
      ++res.num_fp;
    }
  }
  return res;
}

struct PRCurve {
  std::vector<double> recall;     // after each counted detection
  std::vector<double> precision;
  int tp = 0;
  int fp = 0;
  int num_gt = 0;
};

// Running precision/recall over flags already in descending-score order.
// Ignored detections contribute no point.
inline PRCurve precision_recall_curve(const std::vector<int>& flags, int num_gt) {
  PRCurve c;
  c.num_gt = num_gt;
  for (int f : flags) {
    if (f == kIgnoredDetection) continue;
    if (f == kTruePositive) ++c.tp;
    else ++c.fp;
    const int seen = c.tp + c.fp;
    c.precision.push_back(static_cast<double>(c.tp) / seen);
    c.recall.push_back(num_gt > 0 ? static_cast<double>(c.tp) / num_gt : 0.0);
  }
  return c;
}

// 11-point interpolated AP: mean over recall levels {0.0, 0.1, ..., 1.0}
// of the maximum precision at recall >= the level (0 when unreachable).
inline double ap_11point(const PRCurve& curve) {
  double acc = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double r = k / 10.0;
    double best = 0.0;
    for (size_t i = 0; i < curve.recall.size(); ++i) {
      if (curve.recall[i] >= r) best = std::max(best, curve.precision[i]);
    }
    acc += best;
  }
  return acc / 11.0;
}

// Regression-style hit rate: one predicted rectangle per ground truth.
inline double iou_hit_rate(const std::vector<BevRect>& preds,
                           const std::vector<BevRect>& gts, double thr) {
  if (preds.size() != gts.size()) {
    throw LengthMismatchError("prediction/ground-truth count mismatch");
  }
  if (preds.empty()) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (iou_axis_aligned(preds[i], gts[i]) >= thr) ++hits;
  }
  return static_cast<double>(hits) / preds.size();
}

enum class IouGeometry { Bev, Frontal };

struct EvalObject {
  BevQuad quad;
  Box2D box2d;
  kitti::Difficulty difficulty = kitti::Difficulty::Easy;
};

struct EvalDetection {
  BevQuad quad;
  Box2D box2d;
  double score = 0.0;
};

struct ApCell {
  kitti::Difficulty tier = kitti::Difficulty::Easy;
  double iou_thr = 0.5;
  double ap = 0.0;
  int num_gt = 0;
  int num_det = 0;  // counted detections (ignored ones excluded)
  PRCurve curve;
};

// Pools matches across frames (standard pooled counting, no per-frame AP).
// A gt participates in a tier when its difficulty is at most the tier;
// harder and Ignored gts neither match nor penalize.
inline std::vector<ApCell> evaluate_ap_table(
    const std::vector<std::vector<EvalDetection>>& dets_by_frame,
    const std::vector<std::vector<EvalObject>>& gts_by_frame,
    const std::vector<double>& thresholds,
    const std::vector<kitti::Difficulty>& tiers,
    IouGeometry geom = IouGeometry::Bev) {
  if (dets_by_frame.size() != gts_by_frame.size()) {
    throw FrameMismatchError("detection and ground-truth frame counts differ");
  }
  std::vector<ApCell> table;
  for (kitti::Difficulty tier : tiers) {
    for (double thr : thresholds) {
      ApCell cell;
      cell.tier = tier;
      cell.iou_thr = thr;
      std::vector<std::pair<double, int>> pooled;  // (score, flag)
      for (size_t f = 0; f < dets_by_frame.size(); ++f) {
        const auto& dets = dets_by_frame[f];
        const auto& gts = gts_by_frame[f];
        std::vector<double> scores(dets.size());
        for (size_t i = 0; i < dets.size(); ++i) scores[i] = dets[i].score;
        std::vector<bool> ignored(gts.size());
        for (size_t g = 0; g < gts.size(); ++g) {
          ignored[g] = static_cast<int>(gts[g].difficulty) > static_cast<int>(tier);
          if (!ignored[g]) ++cell.num_gt;
        }
        auto iou = [&](size_t d, size_t g) {
          return geom == IouGeometry::Bev
                     ? iou_rotated(dets[d].quad, gts[g].quad)
                     : iou_axis_aligned(dets[d].box2d, gts[g].box2d);
        };
        const MatchResult m = match_detections(scores, ignored, thr, iou);
        for (size_t i = 0; i < dets.size(); ++i) {
          if (m.flags[i] != kIgnoredDetection) {
            pooled.push_back({scores[i], m.flags[i]});
          }
        }
      }
      std::stable_sort(pooled.begin(), pooled.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::vector<int> flags;
      flags.reserve(pooled.size());
      for (const auto& [s, fl] : pooled) flags.push_back(fl);
      cell.num_det = static_cast<int>(flags.size());
      cell.curve = precision_recall_curve(flags, cell.num_gt);
      if (cell.num_gt == 0) {
        cell.ap = cell.num_det == 0 ? 1.0 : 0.0;
      } else {
        cell.ap = ap_11point(cell.curve);
      }
      table.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace monobev::eval

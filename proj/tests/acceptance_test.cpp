// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
// The training-dependent criteria share one synthetic dataset and one
// stage-1 run, built lazily on first use.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "monobev/bev_render.hpp"
#include "monobev/evaluation.hpp"
#include "monobev/grad_check.hpp"
#include "monobev/kitti_io.hpp"
#include "monobev/synthdata.hpp"
#include "monobev/training.hpp"

using namespace monobev;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared fixture for the scaled-training criteria (5, 6, 7).
struct TrainedPipeline {
  std::string dataset_dir;
  synth::Dataset dataset;
  train::TrainConfig tcfg;        // defaults
  nn::BranchConfig bcfg;          // defaults
  train::StageResult stage1;
  double stage1_seconds = 0.0;
  train::StageResult stage2_penalty;  // lambda = 0.1 (default)
  train::StageResult stage2_plain;    // lambda = 0
  double stage2_seconds = 0.0;

  static TrainedPipeline& instance() {
    static TrainedPipeline p = build();
    return p;
  }

 private:
  static TrainedPipeline build() {
    TrainedPipeline p;
    const fs::path base = fs::temp_directory_path() / "monobev_acceptance";
    fs::remove_all(base);
    p.dataset_dir = (base / "dataset").string();
    synth::SynthConfig scfg;
    scfg.n = 5000;  // hash split gives ~4000 train / ~1000 val
    scfg.seed = 2024;
    synth::make_dataset(scfg, p.dataset_dir);
    p.dataset = synth::load_dataset(p.dataset_dir);
    p.tcfg.seed = 5;

    double t0 = now_seconds();
    p.stage1 = train::train_stage1(p.dataset.samples, p.tcfg, p.bcfg,
                                   (base / "stage1").string());
    p.stage1_seconds = now_seconds() - t0;

    t0 = now_seconds();
    p.stage2_penalty = train::train_stage2(p.dataset.samples, p.tcfg,
                                           p.stage1.checkpoint_path,
                                           (base / "stage2").string());
    train::TrainConfig plain = p.tcfg;
    plain.lambda_depth = 0.0;
    p.stage2_plain = train::train_stage2(p.dataset.samples, plain,
                                         p.stage1.checkpoint_path,
                                         (base / "stage2_plain").string());
    p.stage2_seconds = now_seconds() - t0;
    return p;
  }
};

// --- Criterion 1: normalization round-trip --------------------------------

TEST(Acceptance, C01_NormalizationRoundTrip) {
  Rng rng(101);
  const double t0 = now_seconds();
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Box3D b;
    b.x = rng.uniform(-40.0, 40.0);
    b.y = rng.uniform(0.0, 4.0);
    b.z = rng.uniform(0.0, 100.0);
    b.w = rng.uniform(0.3, 3.0);
    b.l = rng.uniform(0.3, 7.0);
    b.h = rng.uniform(0.3, 3.0);
    b.yaw = rng.uniform(-kPi, kPi);
    const Box3D r = denormalize_targets(normalize_targets(b));
    worst = std::max({worst, std::abs(r.x - b.x), std::abs(r.y - b.y),
                      std::abs(r.z - b.z), std::abs(r.w - b.w),
                      std::abs(r.l - b.l), std::abs(r.h - b.h),
                      std::abs(wrap_angle(r.yaw - b.yaw))});
  }
  const double elapsed = now_seconds() - t0;
  const bool pass = worst < 1e-9 && elapsed < 1.0;
  report(1, pass, "10k round-trips, worst err " + std::to_string(worst) +
                      ", " + std::to_string(elapsed) + " s");
  EXPECT_LT(worst, 1e-9);
  EXPECT_LT(elapsed, 1.0);
}

// --- Criterion 2: rotated IoU vs rasterization oracle ----------------------

double iou_rasterized_1024(const BevQuad& a, const BevQuad& b) {
  double x1 = a.v[0].x, x2 = x1, z1 = a.v[0].z, z2 = z1;
  for (const auto& q : {a, b}) {
    for (const auto& p : q.v) {
      x1 = std::min(x1, p.x);
      x2 = std::max(x2, p.x);
      z1 = std::min(z1, p.z);
      z2 = std::max(z2, p.z);
    }
  }
  struct Edge {
    double nx, nz, c;
  };
  auto edges_of = [](const BevQuad& q) {
    std::array<Edge, 4> e;
    for (int i = 0; i < 4; ++i) {
      const BevPoint& u = q.v[i];
      const BevPoint& v = q.v[(i + 1) & 3];
      e[i] = {-(v.z - u.z), v.x - u.x, 0.0};
      e[i].c = e[i].nx * u.x + e[i].nz * u.z;
    }
    return e;
  };
  const auto ea = edges_of(a), eb = edges_of(b);
  auto inside = [](const std::array<Edge, 4>& e, double px, double pz) {
    for (const auto& g : e) {
      if (g.nx * px + g.nz * pz < g.c) return false;
    }
    return true;
  };
  const int grid = 1024;
  const double dx = (x2 - x1) / grid, dz = (z2 - z1) / grid;
  long inter = 0, uni = 0;
  for (int i = 0; i < grid; ++i) {
    const double pz = z1 + (i + 0.5) * dz;
    for (int j = 0; j < grid; ++j) {
      const double px = x1 + (j + 0.5) * dx;
      const bool ia = inside(ea, px, pz);
      const bool ib = inside(eb, px, pz);
      if (ia && ib) ++inter;
      if (ia || ib) ++uni;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

TEST(Acceptance, C02_RotatedIouOracle) {
  const double t0 = now_seconds();
  // exact analytic case first
  BevQuad sq, sq45;
  {
    Box3D b{0.0, 0.0, 50.0, 1.0, 1.0, 1.0, 0.0};
    sq = bev_footprint(b);
    b.yaw = kPi / 4.0;
    sq45 = bev_footprint(b);
  }
  const double analytic = iou_rotated(sq, sq45);
  const double want = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(analytic, want, 1e-9);

  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Box3D b1;
    b1.x = rng.uniform(-10.0, 10.0);
    b1.y = 1.65;
    b1.z = rng.uniform(20.0, 60.0);
    b1.w = rng.uniform(0.8, 3.0);
    b1.l = rng.uniform(1.5, 7.0);
    b1.h = 1.5;
    b1.yaw = rng.uniform(-kPi, kPi);
    Box3D b2 = b1;
    b2.x += rng.uniform(-3.0, 3.0);
    b2.z += rng.uniform(-3.0, 3.0);
    b2.w = rng.uniform(0.8, 3.0);
    b2.l = rng.uniform(1.5, 7.0);
    b2.yaw = rng.uniform(-kPi, kPi);
    const BevQuad qa = bev_footprint(b1);
    const BevQuad qb = bev_footprint(b2);
    worst = std::max(worst,
                     std::abs(iou_rotated(qa, qb) - iou_rasterized_1024(qa, qb)));
  }
  const double elapsed = now_seconds() - t0;
  const bool pass = worst <= 0.01 && std::abs(analytic - want) <= 1e-9 &&
                    elapsed < 60.0;
  report(2, pass, "1000 pairs, worst |analytic - raster| " +
                      std::to_string(worst) + ", " + std::to_string(elapsed) + " s");
  EXPECT_LE(worst, 0.01);
  EXPECT_LT(elapsed, 60.0);
}

// --- Criterion 3: gradient checks ------------------------------------------

TEST(Acceptance, C03_GradientChecks) {
  const double t0 = now_seconds();
  Rng rng(303);
  double worst_layer = 0.0;
  {
    using nn::LayerKind;
    struct Case {
      std::vector<nn::LayerSpec> specs;
      std::vector<int> in_shape;
      std::vector<int> out_shape;
    };
    const std::vector<Case> cases = {
        {{{LayerKind::Dense, 6, 4, 0.0}}, {3, 6}, {3, 4}},
        {{{LayerKind::Dense, 6, 8, 0.0}, {LayerKind::Relu, 0, 0, 0.0},
          {LayerKind::Dense, 8, 4, 0.0}}, {3, 6}, {3, 4}},
        {{{LayerKind::Dense, 6, 8, 0.0}, {LayerKind::Tanh, 0, 0, 0.0},
          {LayerKind::Dense, 8, 4, 0.0}}, {3, 6}, {3, 4}},
        {{{LayerKind::Conv3x3, 2, 3, 0.0}, {LayerKind::GlobalAvgPool, 0, 0, 0.0}},
         {2, 2, 8, 8}, {2, 3}},
        {{{LayerKind::Conv3x3, 1, 4, 0.0}, {LayerKind::Relu, 0, 0, 0.0},
          {LayerKind::AvgPool2, 0, 0, 0.0}, {LayerKind::GlobalAvgPool, 0, 0, 0.0}},
         {2, 1, 8, 8}, {2, 4}},
    };
    for (const auto& c : cases) {
      nn::Branch branch("t", c.specs);
      branch.init_params(rng);
      nn::Tensor x(c.in_shape);
      for (double& v : x.values) v = rng.uniform(-1.0, 1.0);
      nn::Tensor target(c.out_shape);
      for (double& v : target.values) v = rng.uniform(-1.0, 1.0);
      worst_layer =
          std::max(worst_layer, nn::grad_check_branch(branch, x, target).max_rel_err);
    }
  }
  // dropout gradient path (fixed mask via a frozen RNG replay)
  {
    nn::Branch branch("t", {{nn::LayerKind::Dense, 6, 8, 0.0},
                            {nn::LayerKind::Dropout, 0, 0, 0.25},
                            {nn::LayerKind::Dense, 8, 4, 0.0}});
    branch.init_params(rng);
    nn::Tensor x({3, 6});
    for (double& v : x.values) v = rng.uniform(-1.0, 1.0);
    nn::Tensor target({3, 4});
    for (double& v : target.values) v = rng.uniform(-1.0, 1.0);
    // In eval mode dropout is identity; the check still exercises its
    // backward path.
    worst_layer =
        std::max(worst_layer, nn::grad_check_branch(branch, x, target).max_rel_err);
  }

  nn::BranchConfig bcfg;  // default model, full composite
  nn::Model model(bcfg);
  model.init_params(rng);
  nn::Tensor crops({2, 1, bcfg.crop_size, bcfg.crop_size});
  for (double& v : crops.values) v = rng.uniform01();
  nn::Tensor bbox({2, 4});
  for (double& v : bbox.values) v = rng.uniform(-1.0, 1.0);
  nn::Tensor bev({2, 4}), tgt({2, bcfg.out_dim});
  for (double& v : bev.values) v = rng.uniform(-0.5, 0.5);
  for (double& v : tgt.values) v = rng.uniform(-0.5, 0.5);
  const auto comp = nn::grad_check_model(model, crops, bbox, bev, tgt, 1e-5, 400, 7);

  const double elapsed = now_seconds() - t0;
  const bool pass =
      worst_layer <= 1e-4 && comp.max_rel_err <= 1e-4 && elapsed < 120.0;
  report(3, pass, "layers worst " + std::to_string(worst_layer) + ", composite " +
                      std::to_string(comp.max_rel_err) + " over " +
                      std::to_string(comp.checked) + " params, " +
                      std::to_string(elapsed) + " s");
  EXPECT_LE(worst_layer, 1e-4);
  EXPECT_LE(comp.max_rel_err, 1e-4);
  EXPECT_GE(comp.checked, 200);
  EXPECT_LT(elapsed, 120.0);
}

// --- Criterion 4: AP oracle -------------------------------------------------

double ap_bruteforce(const std::vector<int>& flags, int num_gt) {
  int tp = 0, fp = 0;
  std::vector<std::pair<double, double>> pts;
  for (int f : flags) {
    if (f == eval::kIgnoredDetection) continue;
    if (f == eval::kTruePositive) ++tp;
    else ++fp;
    pts.push_back({static_cast<double>(tp) / num_gt,
                   static_cast<double>(tp) / (tp + fp)});
  }
  double acc = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double r = k / 10.0;
    double best = 0.0;
    for (const auto& [rec, prec] : pts) {
      if (rec >= r && prec > best) best = prec;
    }
    acc += best;
  }
  return acc / 11.0;
}

TEST(Acceptance, C04_ApOracle) {
  const double t0 = now_seconds();
  bool example_ok = false;
  {
    const eval::PRCurve c = eval::precision_recall_curve(
        {eval::kTruePositive, eval::kFalsePositive, eval::kTruePositive}, 2);
    const double ap = eval::ap_11point(c);
    example_ok = std::abs(ap - 28.0 / 33.0) < 1e-15;  // summation-order ulp
    EXPECT_NEAR(ap, 28.0 / 33.0, 1e-15);
  }
  Rng rng(404);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const int num_gt = 1 + static_cast<int>(rng.uniform_int(5));
    const int nd = static_cast<int>(rng.uniform_int(11));
    std::vector<int> flags;
    int budget = num_gt;
    for (int d = 0; d < nd; ++d) {
      if (rng.uniform01() < 0.45 && budget > 0) {
        flags.push_back(eval::kTruePositive);
        --budget;
      } else {
        flags.push_back(eval::kFalsePositive);
      }
    }
    const double got = eval::ap_11point(eval::precision_recall_curve(flags, num_gt));
    if (got != ap_bruteforce(flags, num_gt)) ++mismatches;
  }
  const double elapsed = now_seconds() - t0;
  const bool pass = mismatches == 0 && example_ok && elapsed < 10.0;
  report(4, pass, "200 instances, " + std::to_string(mismatches) +
                      " mismatches, worked example 28/33 " +
                      (example_ok ? "ok" : "WRONG") + ", " +
                      std::to_string(elapsed) + " s");
  EXPECT_EQ(mismatches, 0);
  EXPECT_TRUE(example_ok);
  EXPECT_LT(elapsed, 10.0);
}

// --- Criteria 5-7: the scaled training pipeline ----------------------------

TEST(Acceptance, C05_FreezeContract) {
  auto& p = TrainedPipeline::instance();
  auto s1 = nn::load_checkpoint(p.stage1.checkpoint_path);
  auto s2 = nn::load_checkpoint(p.stage2_penalty.checkpoint_path);
  const std::string a = nn::serialize_params(
      s1.model, {nn::BranchId::BR1, nn::BranchId::BR2, nn::BranchId::BR3});
  const std::string b = nn::serialize_params(
      s2.model, {nn::BranchId::BR1, nn::BranchId::BR2, nn::BranchId::BR3});
  const bool pass = a == b;
  report(5, pass, "BR-1..BR-3 blob " + std::to_string(a.size()) +
                      " bytes byte-identical across stage 2: " +
                      (pass ? "yes" : "no"));
  EXPECT_EQ(a, b);
}

TEST(Acceptance, C06_Stage1Learnability) {
  auto& p = TrainedPipeline::instance();
  const auto& last = p.stage1.history.back().val;
  const bool pass =
      last.hit50 >= 0.70 && last.mean_iou >= 0.50 && p.stage1_seconds <= 900.0;
  report(6, pass, "val hit@0.5 " + std::to_string(last.hit50) + " (need 0.70), mean IoU " +
                      std::to_string(last.mean_iou) + " (need 0.50), " +
                      std::to_string(p.stage1_seconds) + " s (cap 900)");
  EXPECT_GE(last.hit50, 0.70);
  EXPECT_GE(last.mean_iou, 0.50);
  EXPECT_LE(p.stage1_seconds, 900.0);
}

TEST(Acceptance, C07_Stage2Regression) {
  auto& p = TrainedPipeline::instance();
  const auto& pen = p.stage2_penalty.history.back().val;
  const auto& plain = p.stage2_plain.history.back().val;
  const bool pass = pen.med_z_err <= 5.0 && pen.med_yaw_deg <= 15.0 &&
                    pen.med_z_err <= plain.med_z_err + 0.5 &&
                    p.stage2_seconds <= 900.0;
  report(7, pass, "median |dZ| " + std::to_string(pen.med_z_err) +
                      " m (need <=5), median yaw " + std::to_string(pen.med_yaw_deg) +
                      " deg (need <=15), lambda=0 run |dZ| " +
                      std::to_string(plain.med_z_err) + " m, both runs " +
                      std::to_string(p.stage2_seconds) + " s (cap 900)");
  EXPECT_LE(pen.med_z_err, 5.0);
  EXPECT_LE(pen.med_yaw_deg, 15.0);
  EXPECT_LE(pen.med_z_err, plain.med_z_err + 0.5);
  EXPECT_LE(p.stage2_seconds, 900.0);
}

// --- Criterion 8: overfit smoke tests --------------------------------------

TEST(Acceptance, C08_OverfitSmoke) {
  // Memorization sanity: regularizers off (no dropout, no augmentation),
  // default everything else.
  synth::SynthConfig scfg;
  scfg.seed = 9;
  scfg.min_objects = scfg.max_objects = 1;
  std::vector<synth::Sample> samples;
  const auto k = scfg.intrinsics();
  for (std::uint64_t i = 0; samples.size() < 10; ++i) {
    Rng rng(scfg.seed + i);
    const synth::Scene scene = synth::sample_scene(rng, scfg);
    for (const auto& b : scene.objects) {
      if (samples.size() < 10) samples.push_back(synth::make_sample(k, b, 32));
    }
  }
  train::TrainConfig tcfg;
  tcfg.epochs_stage1 = 500;
  tcfg.epochs_stage2 = 500;
  tcfg.seed = 1;
  tcfg.augment = false;
  nn::BranchConfig bcfg;
  bcfg.dropout_p = 0.0;
  const fs::path base = fs::temp_directory_path() / "monobev_overfit";
  fs::remove_all(base);
  const auto s1 = train::train_stage1(samples, tcfg, bcfg, (base / "s1").string());
  const auto split = train::split_dataset(samples.size());
  auto m1 = nn::load_checkpoint(s1.checkpoint_path);
  const double mse1 = train::eval_mse(m1.model, samples, split.train, 1);
  const auto s2 =
      train::train_stage2(samples, tcfg, s1.checkpoint_path, (base / "s2").string());
  auto m2 = nn::load_checkpoint(s2.checkpoint_path);
  const double mse2 = train::eval_mse(m2.model, samples, split.train, 2);
  const bool pass = mse1 < 1e-3 && mse2 < 1e-3;
  report(8, pass, "stage-1 corner MSE " + std::to_string(mse1) +
                      ", stage-2 target MSE " + std::to_string(mse2) +
                      " (both need < 1e-3)");
  EXPECT_LT(mse1, 1e-3);
  EXPECT_LT(mse2, 1e-3);
}

// --- Criterion 9: LR schedule ----------------------------------------------

TEST(Acceptance, C09_LrSchedule) {
  const bool pass = nn::lr_schedule(0, 0.01, 100) == 0.01 &&
                    nn::lr_schedule(100, 0.01, 100) == 0.001 &&
                    nn::lr_schedule(250, 0.01, 100) == 0.0001;
  report(9, pass, "lr(0)=0.01, lr(100)=0.001, lr(250)=0.0001 exactly");
  EXPECT_EQ(nn::lr_schedule(0, 0.01, 100), 0.01);
  EXPECT_EQ(nn::lr_schedule(100, 0.01, 100), 0.001);
  EXPECT_EQ(nn::lr_schedule(250, 0.01, 100), 0.0001);
}

// --- Criterion 10: determinism ----------------------------------------------

TEST(Acceptance, C10_Determinism) {
  const fs::path base = fs::temp_directory_path() / "monobev_determinism";
  fs::remove_all(base);
  synth::SynthConfig scfg;
  scfg.n = 60;
  scfg.seed = 31;
  synth::make_dataset(scfg, (base / "da").string());
  synth::make_dataset(scfg, (base / "db").string());
  bool pass = slurp(base / "da" / "index.csv") == slurp(base / "db" / "index.csv") &&
              slurp(base / "da" / "crops" / "000000.pgm") ==
                  slurp(base / "db" / "crops" / "000000.pgm") &&
              slurp(base / "da" / "manifest.json") ==
                  slurp(base / "db" / "manifest.json");

  const auto ds = synth::load_dataset((base / "da").string());
  train::TrainConfig tcfg;
  tcfg.epochs_stage1 = 3;
  tcfg.epochs_stage2 = 2;
  tcfg.seed = 77;
  nn::BranchConfig bcfg;
  const auto r1 = train::train_stage1(ds.samples, tcfg, bcfg, (base / "ta").string());
  const auto r2 = train::train_stage1(ds.samples, tcfg, bcfg, (base / "tb").string());
  train::write_history((base / "ta" / "history.csv").string(), r1.history);
  train::write_history((base / "tb" / "history.csv").string(), r2.history);
  pass = pass &&
         slurp(base / "ta" / "history.csv") == slurp(base / "tb" / "history.csv") &&
         slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path);

  const auto s2a =
      train::train_stage2(ds.samples, tcfg, r1.checkpoint_path, (base / "sa").string());
  const auto s2b =
      train::train_stage2(ds.samples, tcfg, r2.checkpoint_path, (base / "sb").string());
  pass = pass && slurp(s2a.checkpoint_path) == slurp(s2b.checkpoint_path);

  // rendered images
  const std::vector<BevRect> pred = {{-0.2, -0.3, -0.1, -0.2}};
  const std::vector<BevRect> gt = {{-0.21, -0.31, -0.11, -0.21}};
  render::write_image(render::render_overlay(pred, gt), (base / "ra.ppm").string(),
                      render::ImageFormat::PPM);
  render::write_image(render::render_overlay(pred, gt), (base / "rb.ppm").string(),
                      render::ImageFormat::PPM);
  pass = pass && slurp(base / "ra.ppm") == slurp(base / "rb.ppm");

  report(10, pass, "dataset, history, checkpoints, and images byte-identical");
  EXPECT_TRUE(pass);
}

// --- Criterion 11: KITTI parser ----------------------------------------------

TEST(Acceptance, C11_KittiParser) {
  bool pass = true;
  const std::string fixture =
      "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59\n"
      "Van 0.20 1 2.00 100.00 110.00 220.00 190.00 2.10 1.90 5.20 8.00 1.70 22.00 -3.10\n"
      "Pedestrian 0.00 0 0.50 300.00 120.00 340.00 260.00 1.80 0.60 0.90 2.10 1.60 12.30 0.40 0.91\n";
  const auto records = kitti::parse_label_text(fixture);
  pass = pass && records.size() == 3;
  const std::string once = kitti::serialize_labels(records);
  pass = pass && once == fixture;
  pass = pass && kitti::serialize_labels(kitti::parse_label_text(once)) == once;

  int rejected = 0;
  for (const char* bad :
       {"Car 0.0 0 -1.58 587 173 614 200 1.6 1.6 3.6 -0.6 1.7 46",      // 14 fields
        "Car x 0 -1.58 587 173 614 200 1.6 1.6 3.6 -0.6 1.7 46 -1.5",   // non-numeric
        "Car 0.0 0 -1.58 614 173 587 200 1.6 1.6 3.6 -0.6 1.7 46 -1.5"  // bad bbox
       }) {
    try {
      kitti::parse_label_line(bad);
    } catch (const std::exception&) {
      ++rejected;
    }
  }
  pass = pass && rejected == 3;

  struct Case {
    double height;
    int occ;
    double trunc;
    kitti::Difficulty want;
  };
  const Case cases[] = {
      {50.0, 0, 0.00, kitti::Difficulty::Easy},
      {40.0, 0, 0.15, kitti::Difficulty::Easy},
      {50.0, 1, 0.00, kitti::Difficulty::Moderate},
      {50.0, 0, 0.20, kitti::Difficulty::Moderate},
      {30.0, 1, 0.20, kitti::Difficulty::Moderate},
      {25.0, 1, 0.30, kitti::Difficulty::Moderate},
      {30.0, 2, 0.20, kitti::Difficulty::Hard},
      {50.0, 2, 0.50, kitti::Difficulty::Hard},
      {25.0, 1, 0.45, kitti::Difficulty::Hard},
      {20.0, 0, 0.00, kitti::Difficulty::Ignored},
      {50.0, 3, 0.00, kitti::Difficulty::Ignored},
      {50.0, 0, 0.60, kitti::Difficulty::Ignored},
  };
  int diff_ok = 0;
  for (const auto& c : cases) {
    kitti::LabelRecord r;
    r.class_name = "Car";
    r.bbox = {100.0, 100.0, 150.0, 100.0 + c.height};
    r.occluded = c.occ;
    r.truncated = c.trunc;
    if (kitti::classify_difficulty(r) == c.want) ++diff_ok;
  }
  pass = pass && diff_ok == 12;

  report(11, pass, "round-trip fixpoint, 3/3 malformed rejected, difficulty " +
                       std::to_string(diff_ok) + "/12");
  EXPECT_TRUE(pass);
}

}  // namespace

#include "monobev/synthdata.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "monobev/geometry.hpp"

using namespace monobev;
using namespace monobev::synth;

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

SynthConfig tiny_config(int n = 8, std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.crop_size = 32;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

TEST(SampleScene, CountAndFrustum) {
  SynthConfig cfg = tiny_config();
  cfg.min_objects = cfg.max_objects = 1;
  Rng rng(3);
  const Scene s = sample_scene(rng, cfg);
  ASSERT_EQ(s.objects.size(), 1u);
  const FrontalBox fb = frontal_bbox(cfg.intrinsics(), s.objects[0]);
  EXPECT_DOUBLE_EQ(fb.truncation, 0.0);
}

TEST(SampleScene, TenThousandObjectsAllNormalize) {
  SynthConfig cfg = tiny_config();
  cfg.min_objects = 1;
  cfg.max_objects = 3;
  int total = 0;
  for (std::uint64_t i = 0; total < 10000; ++i) {
    Rng rng(cfg.seed + i);
    const Scene s = sample_scene(rng, cfg);
    for (const auto& b : s.objects) {
      EXPECT_NO_THROW(normalize_targets(b));
      EXPECT_GE(b.z, 5.0);
      EXPECT_LE(b.z, 95.0);
      ++total;
    }
  }
}

TEST(SampleScene, SameSeedSameScene) {
  SynthConfig cfg = tiny_config();
  Rng a(42), b(42);
  const Scene sa = sample_scene(a, cfg);
  const Scene sb = sample_scene(b, cfg);
  ASSERT_EQ(sa.objects.size(), sb.objects.size());
  for (size_t i = 0; i < sa.objects.size(); ++i) {
    EXPECT_EQ(sa.objects[i].x, sb.objects[i].x);
    EXPECT_EQ(sa.objects[i].yaw, sb.objects[i].yaw);
  }
}

TEST(SampleScene, ObjectsDoNotStack) {
  SynthConfig cfg = tiny_config();
  cfg.min_objects = cfg.max_objects = 4;
  Rng rng(11);
  const Scene s = sample_scene(rng, cfg);
  for (size_t i = 0; i < s.objects.size(); ++i) {
    for (size_t j = i + 1; j < s.objects.size(); ++j) {
      EXPECT_LE(iou_rotated(bev_footprint(s.objects[i]), bev_footprint(s.objects[j])),
                cfg.max_bev_overlap + 1e-12);
    }
  }
}

TEST(RenderCrop, NearBrighterThanFar) {
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Box3D near_box{0.0, 1.65, 10.0, 1.6, 3.9, 1.5, 0.4};
  Box3D far_box = near_box;
  far_box.z = 90.0;
  const auto near_crop = render_crop(k, near_box, 32);
  const auto far_crop = render_crop(k, far_box, 32);
  EXPECT_GT(mean_of(near_crop), mean_of(far_crop));
}

TEST(RenderCrop, BackgroundStaysBelowNoiseCeiling) {
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  // A long thin box at 45 degrees leaves background in the crop corners.
  Box3D b{0.0, 1.65, 30.0, 1.0, 6.0, 1.0, kPi / 4.0};
  const auto crop = render_crop(k, b, 64);
  int background = 0;
  double lowest = 1.0;
  for (double v : crop) {
    if (v < 0.1) ++background;
    lowest = std::min(lowest, v);
  }
  EXPECT_GT(background, 64 * 4);  // corners exist and carry only noise
  EXPECT_LT(lowest, 0.05);        // noise is uniform over [0, 0.1)
}

TEST(RenderCrop, YawChangesPixels) {
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Box3D a{0.0, 1.65, 30.0, 1.6, 3.9, 1.5, 0.0};
  Box3D b = a;
  b.yaw = kPi / 2.0;
  const auto ca = render_crop(k, a, 32);
  const auto cb = render_crop(k, b, 32);
  EXPECT_GT(std::abs(mean_of(ca) - mean_of(cb)), 1e-6);
}

TEST(RenderCrop, HalfTurnIsDistinguishable) {
  // The heading-dependent shading separates yaw from yaw + pi even though
  // the silhouette is identical.
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Box3D a{5.0, 1.65, 25.0, 1.6, 3.9, 1.5, 0.3};
  Box3D b = a;
  b.yaw = wrap_angle(a.yaw + kPi);
  const auto ca = render_crop(k, a, 32);
  const auto cb = render_crop(k, b, 32);
  double diff = 0.0;
  for (size_t i = 0; i < ca.size(); ++i) diff += std::abs(ca[i] - cb[i]);
  EXPECT_GT(diff / ca.size(), 1e-3);
}

TEST(RenderCrop, Deterministic) {
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Box3D b{2.0, 1.65, 40.0, 1.6, 3.9, 1.5, -1.0};
  EXPECT_EQ(render_crop(k, b, 32), render_crop(k, b, 32));
}

TEST(MakeSample, LabelsConsistentWithGeometry) {
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Rng rng(5);
  const Scene s = sample_scene(rng, cfg);
  for (const auto& b : s.objects) {
    const Sample smp = make_sample(k, b, cfg.crop_size);
    const BevRect want_bev = bev_axis_aligned_normalized(bev_footprint(b));
    EXPECT_EQ(smp.bev_rect.x1, want_bev.x1);
    EXPECT_EQ(smp.bev_rect.z2, want_bev.z2);
    const TargetVector want_t = normalize_targets(b);
    EXPECT_EQ(smp.target.tx, want_t.tx);
    EXPECT_EQ(smp.target.tsin, want_t.tsin);
  }
}

TEST(Augment, ForcedFlipIsInvolution) {
  SynthConfig cfg = tiny_config();
  Rng rng(9);
  const Scene scene = sample_scene(rng, cfg);
  Sample s = make_sample(cfg.intrinsics(), scene.objects[0], cfg.crop_size);
  Sample twice = s;
  flip_sample(twice);
  flip_sample(twice);
  EXPECT_EQ(twice.crop, s.crop);
  EXPECT_EQ(twice.bbox_norm.x1, s.bbox_norm.x1);
  EXPECT_EQ(twice.bev_rect.x1, s.bev_rect.x1);
  EXPECT_EQ(twice.target.tx, s.target.tx);
  EXPECT_EQ(twice.target.tcos, s.target.tcos);
  EXPECT_NEAR(std::abs(wrap_angle(twice.box.yaw - s.box.yaw)), 0.0, 1e-15);
}

TEST(Augment, FlippedLabelsStayDerivableFromFlippedBox) {
  SynthConfig cfg = tiny_config();
  Rng rng(13);
  const Scene scene = sample_scene(rng, cfg);
  Sample s = make_sample(cfg.intrinsics(), scene.objects[0], cfg.crop_size);
  flip_sample(s);
  const TargetVector t = normalize_targets(s.box);
  EXPECT_NEAR(t.tx, s.target.tx, 1e-12);
  EXPECT_NEAR(t.tsin, s.target.tsin, 1e-12);
  EXPECT_NEAR(t.tcos, s.target.tcos, 1e-12);
  const BevRect r = bev_axis_aligned_normalized(bev_footprint(s.box));
  EXPECT_NEAR(r.x1, s.bev_rect.x1, 1e-12);
  EXPECT_NEAR(r.x2, s.bev_rect.x2, 1e-12);
  EXPECT_NEAR(r.z1, s.bev_rect.z1, 1e-12);
}

TEST(Augment, MirroredProjectionMatchesMirroredBbox) {
  // With the principal point at the image center, projecting the mirrored
  // box equals mirroring the projected bbox.
  SynthConfig cfg = tiny_config();
  const CameraIntrinsics k = cfg.intrinsics();
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    Rng scene_rng(rng.next_u64());
    const Scene scene = sample_scene(scene_rng, cfg);
    const Box3D& b = scene.objects[0];
    Box3D m = b;
    m.x = -m.x;
    m.yaw = wrap_angle(kPi - m.yaw);
    const Box2D orig = frontal_bbox(k, b).box;
    const Box2D mirr = frontal_bbox(k, m).box;
    EXPECT_NEAR(mirr.x1 - k.cx, -(orig.x2 - k.cx), 1e-6);
    EXPECT_NEAR(mirr.x2 - k.cx, -(orig.x1 - k.cx), 1e-6);
    EXPECT_NEAR(mirr.y1, orig.y1, 1e-6);
    EXPECT_NEAR(mirr.y2, orig.y2, 1e-6);
  }
}

TEST(Augment, NonFlipTransformsLeaveLabels) {
  SynthConfig cfg = tiny_config();
  Rng rng(21);
  const Scene scene = sample_scene(rng, cfg);
  const Sample s = make_sample(cfg.intrinsics(), scene.objects[0], cfg.crop_size);
  // Drive the augmenter with a stream that never fires the flip: probe for
  // a seed whose first gate draw is >= p but later gates fire.
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Rng probe(seed);
    if (probe.uniform01() < 0.25) continue;  // flip would fire
    Rng use(seed);
    const Sample out = augment(s, use);
    EXPECT_EQ(out.bbox_norm.x1, s.bbox_norm.x1);
    EXPECT_EQ(out.bev_rect.x1, s.bev_rect.x1);
    EXPECT_EQ(out.target.tx, s.target.tx);
    EXPECT_EQ(out.target.tcos, s.target.tcos);
    for (double v : out.crop) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Augment, PixelsStayInUnitInterval) {
  SynthConfig cfg = tiny_config();
  Rng rng(23);
  const Scene scene = sample_scene(rng, cfg);
  const Sample s = make_sample(cfg.intrinsics(), scene.objects[0], cfg.crop_size);
  Rng aug_rng(1);
  for (int i = 0; i < 200; ++i) {
    const Sample out = augment(s, aug_rng);
    for (double v : out.crop) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(MakeDataset, DeterministicAndReDerivable) {
  const fs::path base = fs::temp_directory_path() / "monobev_synth_test";
  fs::remove_all(base);
  const SynthConfig cfg = tiny_config(20, 7);
  make_dataset(cfg, (base / "a").string());
  make_dataset(cfg, (base / "b").string());

  EXPECT_EQ(slurp(base / "a" / "index.csv"), slurp(base / "b" / "index.csv"));
  EXPECT_EQ(slurp(base / "a" / "manifest.json"), slurp(base / "b" / "manifest.json"));
  EXPECT_EQ(slurp(base / "a" / "crops" / "000000.pgm"),
            slurp(base / "b" / "crops" / "000000.pgm"));

  const Dataset ds = load_dataset((base / "a").string());
  ASSERT_EQ(ds.samples.size(), 20u);
  EXPECT_EQ(ds.config.crop_size, cfg.crop_size);
  for (const auto& s : ds.samples) {
    // labels re-derivable from the stored box, bit-exact through %.17g
    const TargetVector t = normalize_targets(s.box);
    EXPECT_EQ(t.tx, s.target.tx);
    EXPECT_EQ(t.tsin, s.target.tsin);
    const BevRect r = bev_axis_aligned_normalized(bev_footprint(s.box));
    EXPECT_EQ(r.x1, s.bev_rect.x1);
    EXPECT_EQ(r.z2, s.bev_rect.z2);
    for (double v : s.crop) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  fs::remove_all(base);
}

TEST(MakeDataset, WorkerCountDoesNotChangeBytes) {
  const fs::path base = fs::temp_directory_path() / "monobev_synth_threads";
  fs::remove_all(base);
  const SynthConfig cfg = tiny_config(12, 3);
  setenv("MONO_BEV3D_THREADS", "1", 1);
  make_dataset(cfg, (base / "a").string());
  setenv("MONO_BEV3D_THREADS", "4", 1);
  make_dataset(cfg, (base / "b").string());
  unsetenv("MONO_BEV3D_THREADS");
  EXPECT_EQ(slurp(base / "a" / "index.csv"), slurp(base / "b" / "index.csv"));
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.pgm", i);
    EXPECT_EQ(slurp(base / "a" / "crops" / name), slurp(base / "b" / "crops" / name));
  }
  fs::remove_all(base);
}

}  // namespace

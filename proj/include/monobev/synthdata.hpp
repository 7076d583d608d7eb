#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "monobev/geometry.hpp"
#include "monobev/image_io.hpp"
#include "monobev/kitti_io.hpp"
#include "monobev/rng.hpp"

namespace monobev::synth {

struct CannotPlaceError : std::runtime_error {
  explicit CannotPlaceError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kDatasetFormatVersion = 1;

struct SynthConfig {
  int n = 5000;
  std::uint64_t seed = 0;
  int crop_size = 32;
  double fx = 721.5, fy = 721.5;  // KITTI-like frustum
  int image_w = 1242, image_h = 375;
  int min_objects = 1, max_objects = 3;
  double max_bev_overlap = 0.05;

  CameraIntrinsics intrinsics() const {
    return {fx, fy, image_w / 2.0, image_h / 2.0, image_w, image_h};
  }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"n", c.n},
                     {"seed", c.seed},
                     {"crop_size", c.crop_size},
                     {"fx", c.fx},
                     {"fy", c.fy},
                     {"image_w", c.image_w},
                     {"image_h", c.image_h},
                     {"min_objects", c.min_objects},
                     {"max_objects", c.max_objects},
                     {"max_bev_overlap", c.max_bev_overlap}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  j.at("n").get_to(c.n);
  j.at("seed").get_to(c.seed);
  j.at("crop_size").get_to(c.crop_size);
  j.at("fx").get_to(c.fx);
  j.at("fy").get_to(c.fy);
  j.at("image_w").get_to(c.image_w);
  j.at("image_h").get_to(c.image_h);
  j.at("min_objects").get_to(c.min_objects);
  j.at("max_objects").get_to(c.max_objects);
  j.at("max_bev_overlap").get_to(c.max_bev_overlap);
}

struct Scene {
  CameraIntrinsics intrinsics;
  std::vector<Box3D> objects;
  std::uint64_t seed = 0;
};

// One training tuple: crop pixels plus every label the branches consume,
// all derived from the same Box3D.
struct Sample {
  std::vector<double> crop;  // crop_size^2 grayscale, [0, 1]
  int crop_size = 0;
  Box2D bbox_norm;           // [-1, 1] frontal bbox
  BevRect bev_rect;          // normalized BEV enclosing rectangle
  TargetVector target;
  Box3D box;
  kitti::Difficulty difficulty = kitti::Difficulty::Easy;
};

namespace detail {

struct Pt {
  double u, v;
};

inline double cross(Pt o, Pt a, Pt b) {
  return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

// Monotone chain; returns the hull with positive orientation.
inline std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
    return a.u < b.u || (a.u == b.u && a.v < b.v);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Pt& a, const Pt& b) {
                          return a.u == b.u && a.v == b.v;
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Pt> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool inside_convex(const std::vector<Pt>& poly, Pt p) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if (cross(poly[i], poly[(i + 1) % n], p) < 0.0) return false;
  }
  return true;
}

inline std::vector<Pt> oriented(std::vector<Pt> poly) {
  double area = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % poly.size()];
    area += a.u * b.v - b.u * a.v;
  }
  if (area < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

inline std::uint64_t box_hash(const Box3D& b) {
  std::uint64_t h = 0x6d6f6e6f62657633ULL;
  for (double f : {b.x, b.y, b.z, b.w, b.l, b.h, b.yaw}) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(f));
  }
  return h;
}

}  // namespace detail

// Rendered pixel cues, kept orthogonal so globally pooled statistics stay
// informative:
//   * silhouette base level 0.9 (1 - z/100), uniform -> depth alone
//   * a zero-sum multiplicative shading plane whose horizontal slope is
//     cos(yaw) and vertical slope is sin(yaw) -> orientation as two
//     directly pooled statistics, mean intensity untouched
//   * a bright disk at the projected front-face center and a dark disk at
//     the rear-face center -> a heading dipole that survives pooling and
//     breaks the half-turn symmetry of the box geometry
//   * projected box edges at 1.0 -> silhouette shape
//   * background uniform noise in [0, 0.1)
// The shading plane is mirror-consistent: flipping the crop horizontally
// matches relabeling yaw -> pi - yaw.
// The crop window is the unclipped frontal bbox resampled to crop_size^2.
// Rendering is pure: the noise stream is seeded from the box itself.
inline std::vector<double> render_crop(const CameraIntrinsics& k, const Box3D& b,
                                       int crop_size) {
  const FrontalBox fb = frontal_bbox(k, b);  // throws BehindCamera
  const auto corners3 = box_corners_3d(b);
  std::array<detail::Pt, 8> px;
  for (int i = 0; i < 8; ++i) {
    const Pixel p = project_point(k, corners3[i]);
    px[i] = {p.u, p.v};
  }
  const auto hull =
      detail::convex_hull(std::vector<detail::Pt>(px.begin(), px.end()));

  // Projected front/rear face centers for the heading dipole.
  const double cy = std::cos(b.yaw), sy = std::sin(b.yaw);
  const Vec3 heading{cy, 0.0, -sy};
  detail::Pt front_px{0.0, 0.0}, rear_px{0.0, 0.0};
  bool have_heading = false;
  {
    const Vec3 front{b.x + 0.5 * b.l * heading.x, b.y - 0.5 * b.h,
                     b.z + 0.5 * b.l * heading.z};
    const Vec3 rear{b.x - 0.5 * b.l * heading.x, b.y - 0.5 * b.h,
                    b.z - 0.5 * b.l * heading.z};
    if (front.z > 0.0 && rear.z > 0.0) {
      const Pixel pf = project_point(k, front);
      const Pixel pr = project_point(k, rear);
      front_px = {pf.u, pf.v};
      rear_px = {pr.u, pr.v};
      have_heading = true;
    }
  }
  const double base_level = 0.9 * (1.0 - b.z / 100.0);
  const double du = fb.box.width() / crop_size;
  const double dv = fb.box.height() / crop_size;

  // Two passes: gather the silhouette means of the normalized crop
  // coordinates so the shading plane is exactly zero-sum over the
  // silhouette and the mean intensity stays a pure depth readout.
  std::vector<std::uint8_t> inside(static_cast<size_t>(crop_size) * crop_size, 0);
  double xi_sum = 0.0, eta_sum = 0.0;
  int count = 0;
  for (int i = 0; i < crop_size; ++i) {
    for (int j = 0; j < crop_size; ++j) {
      const detail::Pt p{fb.box.x1 + (j + 0.5) * du, fb.box.y1 + (i + 0.5) * dv};
      if (!detail::inside_convex(hull, p)) continue;
      inside[static_cast<size_t>(i) * crop_size + j] = 1;
      xi_sum += (j + 0.5) / crop_size;
      eta_sum += (i + 0.5) / crop_size;
      ++count;
    }
  }
  const double xi_mean = count > 0 ? xi_sum / count : 0.5;
  const double eta_mean = count > 0 ? eta_sum / count : 0.5;

  Rng noise(detail::box_hash(b));
  std::vector<double> crop(static_cast<size_t>(crop_size) * crop_size, 0.0);
  for (int i = 0; i < crop_size; ++i) {
    for (int j = 0; j < crop_size; ++j) {
      const size_t idx = static_cast<size_t>(i) * crop_size + j;
      if (inside[idx]) {
        const double xi = (j + 0.5) / crop_size - xi_mean;
        const double eta = (i + 0.5) / crop_size - eta_mean;
        const double shade = 1.0 + 0.7 * (xi * cy + eta * sy);
        crop[idx] = base_level * shade;
      } else {
        crop[idx] = noise.uniform01() * 0.1;
      }
    }
  }

  // Box edges at full intensity: bottom ring, top ring, verticals.
  constexpr std::array<std::array<int, 2>, 12> edges = {{{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                                         {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                                         {0, 4}, {1, 5}, {2, 6}, {3, 7}}};
  const int steps = 4 * crop_size;
  for (const auto& e : edges) {
    const detail::Pt a = px[e[0]], c = px[e[1]];
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const double u = a.u + t * (c.u - a.u);
      const double v = a.v + t * (c.v - a.v);
      const int col = static_cast<int>(std::floor((u - fb.box.x1) / du));
      const int row = static_cast<int>(std::floor((v - fb.box.y1) / dv));
      if (col >= 0 && col < crop_size && row >= 0 && row < crop_size) {
        crop[static_cast<size_t>(row) * crop_size + col] = 1.0;
      }
    }
  }

  // Heading dipole: bright disk on the front-face center, dark disk on the
  // rear-face center.
  if (have_heading) {
    const double radius = std::max(1.5, crop_size / 12.0);
    auto stamp = [&](const detail::Pt& at, double value) {
      const double fc = (at.u - fb.box.x1) / du;
      const double fr = (at.v - fb.box.y1) / dv;
      const int r0 = std::max(0, static_cast<int>(std::floor(fr - radius)));
      const int r1 = std::min(crop_size - 1, static_cast<int>(std::ceil(fr + radius)));
      const int c0 = std::max(0, static_cast<int>(std::floor(fc - radius)));
      const int c1 = std::min(crop_size - 1, static_cast<int>(std::ceil(fc + radius)));
      for (int i = r0; i <= r1; ++i) {
        for (int j = c0; j <= c1; ++j) {
          const double dr = i + 0.5 - fr, dc = j + 0.5 - fc;
          if (dr * dr + dc * dc <= radius * radius) {
            crop[static_cast<size_t>(i) * crop_size + j] = value;
          }
        }
      }
    };
    // The nearer face is the visible one; stamp it last so it wins overlap.
    const bool front_nearer = heading.z < 0.0;
    if (front_nearer) {
      stamp(rear_px, 0.0);
      stamp(front_px, 1.0);
    } else {
      stamp(front_px, 1.0);
      stamp(rear_px, 0.0);
    }
  }

  for (double& v : crop) v = std::clamp(v, 0.0, 1.0);
  return crop;
}

// Draws boxes from KITTI-like marginals, clipped to the normalization
// ranges, and rejects placements that leave the frustum or stack on an
// already-placed footprint.
inline Scene sample_scene(Rng& rng, const SynthConfig& cfg) {
  Scene scene;
  scene.intrinsics = cfg.intrinsics();
  const int count =
      cfg.min_objects +
      static_cast<int>(rng.uniform_int(
          static_cast<std::uint32_t>(cfg.max_objects - cfg.min_objects + 1)));
  std::vector<BevQuad> footprints;
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      Box3D b;
      b.z = rng.uniform(5.0, 95.0);
      b.x = rng.uniform(-40.0, 40.0);
      b.y = std::clamp(1.65 + rng.normal(0.0, 0.05), 0.0, 4.0);
      b.w = std::clamp(rng.normal(1.6, 0.1), 0.2, 3.0);
      b.l = std::clamp(rng.normal(3.9, 0.4), 0.2, 7.0);
      b.h = std::clamp(rng.normal(1.5, 0.1), 0.2, 3.0);
      b.yaw = std::numbers::pi - rng.uniform01() * 2.0 * std::numbers::pi;
      try {
        const FrontalBox fb = frontal_bbox(scene.intrinsics, b);
        if (fb.truncation > 0.0) continue;  // keep crops whole
        const BevQuad quad = bev_footprint(b);
        bev_axis_aligned_normalized(quad);  // footprint must stay in extent
        bool overlaps = false;
        for (const auto& other : footprints) {
          if (iou_rotated(quad, other) > cfg.max_bev_overlap) {
            overlaps = true;
            break;
          }
        }
        if (overlaps) continue;
        footprints.push_back(quad);
        scene.objects.push_back(b);
        placed = true;
      } catch (const BehindCameraError&) {
      } catch (const FullyOutsideImageError&) {
      } catch (const OutOfRangeError&) {
      }
    }
    if (!placed) {
      throw CannotPlaceError("no valid placement after 100 attempts");
    }
  }
  return scene;
}

inline Sample make_sample(const CameraIntrinsics& k, const Box3D& b, int crop_size) {
  Sample s;
  s.crop = render_crop(k, b, crop_size);
  s.crop_size = crop_size;
  const FrontalBox fb = frontal_bbox(k, b);
  s.bbox_norm = kitti::normalize_bbox(fb.box, k.image_w, k.image_h);
  s.bev_rect = bev_axis_aligned_normalized(bev_footprint(b));
  s.target = normalize_targets(b);
  s.box = b;
  kitti::LabelRecord r;
  r.class_name = "Car";
  r.truncated = fb.truncation;
  r.occluded = 0;
  r.bbox = fb.box;
  s.difficulty = kitti::classify_difficulty(r);
  return s;
}

// Mirror about the vertical image axis; every label transforms with the
// pixels so the sample stays self-consistent.
inline void flip_sample(Sample& s) {
  const int n = s.crop_size;
  for (int i = 0; i < n; ++i) {
    double* row = s.crop.data() + static_cast<std::int64_t>(i) * n;
    std::reverse(row, row + n);
  }
  s.bbox_norm = {-s.bbox_norm.x2, s.bbox_norm.y1, -s.bbox_norm.x1, s.bbox_norm.y2};
  s.bev_rect = {-s.bev_rect.x2, s.bev_rect.z1, -s.bev_rect.x1, s.bev_rect.z2};
  s.target.tx = -s.target.tx;
  s.target.tcos = -s.target.tcos;
  s.box.x = -s.box.x;
  s.box.yaw = wrap_angle(std::numbers::pi - s.box.yaw);
}

// Each of flip / brightness / contrast / noise fires independently with
// probability 0.25. Only the flip touches labels.
inline Sample augment(Sample s, Rng& rng, double p = 0.25) {
  if (rng.uniform01() < p) flip_sample(s);
  if (rng.uniform01() < p) {
    const double delta = rng.uniform(-0.2, 0.2);
    for (double& v : s.crop) v += delta;
  }
  if (rng.uniform01() < p) {
    const double c = rng.uniform(0.8, 1.25);
    for (double& v : s.crop) v = (v - 0.5) * c + 0.5;
  }
  if (rng.uniform01() < p) {
    for (double& v : s.crop) v += rng.normal(0.0, 0.02);
  }
  for (double& v : s.crop) v = std::clamp(v, 0.0, 1.0);
  return s;
}

namespace detail {
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw std::runtime_error("bad number in index.csv: " + std::string(tok));
  }
  return v;
}

inline int generation_threads() {
  if (const char* env = std::getenv("MONO_BEV3D_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace detail

inline const char* kIndexHeader =
    "sample_id,crop_path,bbox_x1,bbox_y1,bbox_x2,bbox_y2,"
    "bev_x1,bev_z1,bev_x2,bev_z2,"
    "t_x,t_y,t_z,t_w,t_l,t_h,t_sin,t_cos,"
    "box_x,box_y,box_z,box_w,box_l,box_h,box_yaw,difficulty";

inline render::Image crop_to_image(const std::vector<double>& crop, int crop_size) {
  render::Image img(crop_size, crop_size, 1);
  for (size_t i = 0; i < crop.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(crop[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

// Samples scenes serially (cheap, per-scene streams seeded seed+index so
// worker count can never change the result), renders crops in parallel,
// then writes index.csv + PGM crops + manifest.json deterministically.
inline void make_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "crops");

  const CameraIntrinsics k = cfg.intrinsics();
  std::vector<Box3D> boxes;
  boxes.reserve(static_cast<size_t>(cfg.n));
  std::uint64_t scene_index = 0;
  while (static_cast<int>(boxes.size()) < cfg.n) {
    Rng rng(cfg.seed + scene_index);
    const Scene scene = sample_scene(rng, cfg);
    for (const auto& b : scene.objects) {
      if (static_cast<int>(boxes.size()) < cfg.n) boxes.push_back(b);
    }
    ++scene_index;
  }

  std::vector<Sample> samples(boxes.size());
  const int threads = std::max(
      1, std::min(detail::generation_threads(), static_cast<int>(boxes.size())));
  if (threads <= 1) {
    for (size_t i = 0; i < boxes.size(); ++i) {
      samples[i] = make_sample(k, boxes[i], cfg.crop_size);
    }
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (size_t i = static_cast<size_t>(t); i < boxes.size();
             i += static_cast<size_t>(threads)) {
          samples[i] = make_sample(k, boxes[i], cfg.crop_size);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::ofstream index(fs::path(out_dir) / "index.csv");
  if (!index) throw render::IoError("cannot write index.csv under " + out_dir);
  index << kIndexHeader << '\n';
  char id[32];
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    std::snprintf(id, sizeof id, "%06zu", i);
    const std::string crop_rel = std::string("crops/") + id + ".pgm";
    render::write_image(crop_to_image(s.crop, s.crop_size),
                        (fs::path(out_dir) / crop_rel).string(),
                        render::ImageFormat::PGM);
    index << id << ',' << crop_rel;
    for (double v : {s.bbox_norm.x1, s.bbox_norm.y1, s.bbox_norm.x2, s.bbox_norm.y2,
                     s.bev_rect.x1, s.bev_rect.z1, s.bev_rect.x2, s.bev_rect.z2,
                     s.target.tx, s.target.ty, s.target.tz, s.target.tw, s.target.tl,
                     s.target.th, s.target.tsin, s.target.tcos, s.box.x, s.box.y,
                     s.box.z, s.box.w, s.box.l, s.box.h, s.box.yaw}) {
      index << ',' << detail::fmt_g17(v);
    }
    index << ',' << static_cast<int>(s.difficulty) << '\n';
  }
  index.close();

  nlohmann::json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["config"] = cfg;
  manifest["seed"] = cfg.seed;
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << '\n';
}

struct Dataset {
  SynthConfig config;
  std::vector<Sample> samples;
};

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw render::IoError("missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw std::runtime_error("unsupported dataset format_version");
    }
    ds.config = manifest.at("config").get<SynthConfig>();
  }
  std::ifstream index(fs::path(dir) / "index.csv");
  if (!index) throw render::IoError("missing index.csv in " + dir);
  std::string line;
  if (!std::getline(index, line) || line != kIndexHeader) {
    throw std::runtime_error("unexpected index.csv header in " + dir);
  }
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view sv(line);
    size_t start = 0;
    for (size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == ',') {
        cols.push_back(sv.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 26) throw std::runtime_error("bad index.csv row: " + line);
    Sample s;
    double f[23];
    for (int i = 0; i < 23; ++i) f[i] = detail::parse_double(cols[static_cast<size_t>(i) + 2]);
    s.bbox_norm = {f[0], f[1], f[2], f[3]};
    s.bev_rect = {f[4], f[5], f[6], f[7]};
    s.target = {f[8], f[9], f[10], f[11], f[12], f[13], f[14], f[15]};
    s.box = {f[16], f[17], f[18], f[19], f[20], f[21], f[22]};
    s.difficulty = static_cast<kitti::Difficulty>(
        static_cast<int>(detail::parse_double(cols[25])));
    const render::Image img =
        render::read_image((fs::path(dir) / std::string(cols[1])).string());
    s.crop_size = img.w;
    s.crop.resize(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) s.crop[i] = img.data[i] / 255.0;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace monobev::synth

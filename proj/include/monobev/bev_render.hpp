#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "monobev/geometry.hpp"
#include "monobev/image_io.hpp"

namespace monobev::render {

// Top-view raster over x in [-40, 40], z in [0, 100] (the Eq-frame extent).
// 200x250 cells = 0.4 m/cell. Row 0 is the far edge (z_max) so the raster
// reads like a map with the camera at the bottom.
struct GridConfig {
  int width = 200;
  int height = 250;
  double x_min = -kXHalfRange, x_max = kXHalfRange;
  double z_min = 0.0, z_max = 2.0 * kZHalfRange;

  double res_x() const { return (x_max - x_min) / width; }
  double res_z() const { return (z_max - z_min) / height; }
};

struct GridMap {
  int width = 0, height = 0;
  GridConfig config;
  std::vector<std::uint8_t> cells;  // 1 = occupied, row-major

  std::uint8_t& at(int row, int col) {
    return cells[static_cast<size_t>(row) * width + col];
  }
  std::uint8_t at(int row, int col) const {
    return cells[static_cast<size_t>(row) * width + col];
  }
  int occupied_count() const {
    int n = 0;
    for (auto c : cells) n += c;
    return n;
  }
};

namespace detail {
struct CellSpan {
  int c0, c1, r0, r1;  // inclusive; empty when c0 > c1 or r0 > r1
};

// Cells whose centers fall inside the rectangle, clipped to the grid.
inline CellSpan span_of(const BevRect& rect_norm, const GridConfig& cfg) {
  const BevRect r = denormalize_bev_rect(canonicalize_rect(rect_norm));
  CellSpan s;
  s.c0 = std::max(0, static_cast<int>(std::ceil((r.x1 - cfg.x_min) / cfg.res_x() - 0.5)));
  s.c1 = std::min(cfg.width - 1,
                  static_cast<int>(std::floor((r.x2 - cfg.x_min) / cfg.res_x() - 0.5)));
  s.r0 = std::max(0, static_cast<int>(std::ceil((cfg.z_max - r.z2) / cfg.res_z() - 0.5)));
  s.r1 = std::min(cfg.height - 1,
                  static_cast<int>(std::floor((cfg.z_max - r.z1) / cfg.res_z() - 0.5)));
  return s;
}
}  // namespace detail

// Union occupancy: a cell is occupied when its center lies inside any
// rectangle. Order-independent and idempotent by construction.
inline GridMap rasterize_grid(const std::vector<BevRect>& rects_norm,
                              const GridConfig& cfg = {}) {
  GridMap g;
  g.width = cfg.width;
  g.height = cfg.height;
  g.config = cfg;
  g.cells.assign(static_cast<size_t>(cfg.width) * cfg.height, 0);
  for (const auto& rect : rects_norm) {
    const auto s = detail::span_of(rect, cfg);
    for (int r = s.r0; r <= s.r1; ++r) {
      for (int c = s.c0; c <= s.c1; ++c) g.at(r, c) = 1;
    }
  }
  return g;
}

inline Image grid_to_image(const GridMap& g) {
  Image img(g.width, g.height, 1);
  for (size_t i = 0; i < g.cells.size(); ++i) img.data[i] = g.cells[i] ? 255 : 0;
  return img;
}

namespace detail {
inline void outline(Image& img, const BevRect& rect_norm, const GridConfig& cfg,
                    std::uint8_t rr, std::uint8_t gg, std::uint8_t bb) {
  const auto s = span_of(rect_norm, cfg);
  if (s.c0 > s.c1 || s.r0 > s.r1) return;
  for (int c = s.c0; c <= s.c1; ++c) {
    for (int r : {s.r0, s.r1}) {
      img.at(r, c, 0) = rr;
      img.at(r, c, 1) = gg;
      img.at(r, c, 2) = bb;
    }
  }
  for (int r = s.r0; r <= s.r1; ++r) {
    for (int c : {s.c0, s.c1}) {
      img.at(r, c, 0) = rr;
      img.at(r, c, 1) = gg;
      img.at(r, c, 2) = bb;
    }
  }
}
}  // namespace detail

// Ground truth outlined in pure red, predictions in pure blue, drawn in
// that order so agreeing boxes read blue. Dark background.
inline Image render_overlay(const std::vector<BevRect>& pred,
                            const std::vector<BevRect>& gt,
                            const GridConfig& cfg = {}) {
  Image img(cfg.width, cfg.height, 3);
  for (const auto& r : gt) detail::outline(img, r, cfg, 255, 0, 0);
  for (const auto& r : pred) detail::outline(img, r, cfg, 0, 0, 255);
  return img;
}

}  // namespace monobev::render

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace monobev {

// Regression frame of the target transform: x in [-40,40] m, y in [0,4] m,
// z in [0,100] m, w/h around 1.5 m, l around 3.5 m. Every normalized
// quantity in the pipeline (targets, BEV rectangles, grid extents) uses
// these constants so BEV depth and 3D depth live in one shared frame.
inline constexpr double kXHalfRange = 40.0;
inline constexpr double kYOffset = 2.0;
inline constexpr double kYHalfRange = 2.0;
inline constexpr double kZOffset = 50.0;
inline constexpr double kZHalfRange = 50.0;
inline constexpr double kWOffset = 1.5;
inline constexpr double kWHalfRange = 1.5;
inline constexpr double kLOffset = 3.5;
inline constexpr double kLHalfRange = 3.5;
inline constexpr double kHOffset = 1.5;
inline constexpr double kHHalfRange = 1.5;

struct OutOfRangeError : std::runtime_error {
  explicit OutOfRangeError(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateYawError : std::runtime_error {
  explicit DegenerateYawError(const std::string& what) : std::runtime_error(what) {}
};
struct BehindCameraError : std::runtime_error {
  explicit BehindCameraError(const std::string& what) : std::runtime_error(what) {}
};
struct FullyOutsideImageError : std::runtime_error {
  explicit FullyOutsideImageError(const std::string& what) : std::runtime_error(what) {}
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// A point in the BEV (ground) plane, camera x-z coordinates in meters.
struct BevPoint {
  double x = 0.0, z = 0.0;
};

inline BevPoint operator-(BevPoint a, BevPoint b) { return {a.x - b.x, a.z - b.z}; }
inline double bev_cross(BevPoint a, BevPoint b) { return a.x * b.z - a.z * b.x; }

// 3D object box in camera coordinates (x right, y down, z forward),
// anchored at the bottom-face center. Yaw rotates about the camera's
// vertical axis; yaw = 0 points the heading (length) axis along +x.
struct Box3D {
  double x = 0.0, y = 0.0, z = 0.0;  // bottom-center, meters
  double w = 0.0, l = 0.0, h = 0.0;  // width, length, height, meters
  double yaw = 0.0;                  // radians in [-pi, pi]

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
           std::isfinite(yaw) && w > 0.0 && l > 0.0 && h > 0.0 &&
           yaw >= -std::numbers::pi && yaw <= std::numbers::pi;
  }
};

// The 8 normalized regression targets, each in [-1, 1].
struct TargetVector {
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double tw = 0.0, tl = 0.0, th = 0.0;
  double tsin = 0.0, tcos = 1.0;
};

// Axis-aligned 2D box, pixel coordinates unless normalized by the caller.
struct Box2D {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 < x2 && y1 < y2;
  }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

// Axis-aligned top-view rectangle in normalized [-1, 1] BEV coordinates.
struct BevRect {
  double x1 = 0.0, z1 = 0.0, x2 = 0.0, z2 = 0.0;

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(z1) && std::isfinite(x2) &&
           std::isfinite(z2) && x1 < x2 && z1 < z2;
  }
  double area() const { return (x2 - x1) * (z2 - z1); }
};

// Rotated BEV footprint: four (x, z) vertices in meters, counter-clockwise.
struct BevQuad {
  std::array<BevPoint, 4> v{};
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int image_w = 0, image_h = 0;

  bool valid() const { return fx > 0.0 && fy > 0.0 && image_w > 0 && image_h > 0; }
};

inline void validate_box(const Box3D& b) {
  if (!b.valid()) throw OutOfRangeError("invalid Box3D");
}

// Eq-style affine map of annotations into [-1, 1]. Out-of-range inputs are
// rejected by default; clamping is opt-in so callers can choose to skip
// samples instead.
inline TargetVector normalize_targets(const Box3D& b, bool clamp = false) {
  validate_box(b);
  Box3D c = b;
  if (clamp) {
    c.x = std::clamp(c.x, -kXHalfRange, kXHalfRange);
    c.y = std::clamp(c.y, 0.0, 2.0 * kYHalfRange);
    c.z = std::clamp(c.z, 0.0, 2.0 * kZHalfRange);
    c.w = std::min(c.w, 2.0 * kWHalfRange);
    c.l = std::min(c.l, 2.0 * kLHalfRange);
    c.h = std::min(c.h, 2.0 * kHHalfRange);
  } else {
    if (std::abs(c.x) > kXHalfRange || c.y < 0.0 || c.y > 2.0 * kYHalfRange ||
        c.z < 0.0 || c.z > 2.0 * kZHalfRange || c.w > 2.0 * kWHalfRange ||
        c.l > 2.0 * kLHalfRange || c.h > 2.0 * kHHalfRange) {
      throw OutOfRangeError("Box3D outside normalization range");
    }
  }
  TargetVector t;
  t.tx = c.x / kXHalfRange;
  t.ty = (c.y - kYOffset) / kYHalfRange;
  t.tz = (c.z - kZOffset) / kZHalfRange;
  t.tw = (c.w - kWOffset) / kWHalfRange;
  t.tl = (c.l - kLOffset) / kLHalfRange;
  t.th = (c.h - kHOffset) / kHHalfRange;
  t.tsin = std::sin(c.yaw);
  t.tcos = std::cos(c.yaw);
  return t;
}

// Yaw decoded via atan2; invariant under positive scaling of (tsin, tcos).
inline double decode_yaw(double tsin, double tcos) {
  if (tsin * tsin + tcos * tcos < 1e-12) {
    throw DegenerateYawError("sin/cos pair too small to decode yaw");
  }
  return std::atan2(tsin, tcos);
}

// Exact algebraic inverse of normalize_targets. Accepts any finite input;
// raw network outputs may sit slightly outside [-1, 1].
inline Box3D denormalize_targets(const TargetVector& t) {
  Box3D b;
  b.x = t.tx * kXHalfRange;
  b.y = t.ty * kYHalfRange + kYOffset;
  b.z = t.tz * kZHalfRange + kZOffset;
  b.w = t.tw * kWHalfRange + kWOffset;
  b.l = t.tl * kLHalfRange + kLOffset;
  b.h = t.th * kHHalfRange + kHOffset;
  b.yaw = decode_yaw(t.tsin, t.tcos);
  return b;
}

// The 8 box corners: bottom face first, then top, each CCW in the (x, z)
// plane. Camera y points down, so the top face sits at y - h.
inline std::array<Vec3, 8> box_corners_3d(const Box3D& b) {
  validate_box(b);
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  // Local (lx, lz) bottom corners, CCW for positive shoelace area.
  const std::array<std::array<double, 2>, 4> local = {{
      {hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    const double lx = local[i][0];
    const double lz = local[i][1];
    const double gx = c * lx + s * lz + b.x;
    const double gz = -s * lx + c * lz + b.z;
    out[i] = {gx, b.y, gz};
    out[i + 4] = {gx, b.y - b.h, gz};
  }
  return out;
}

struct Pixel {
  double u = 0.0, v = 0.0;
};

inline Pixel project_point(const CameraIntrinsics& k, const Vec3& p) {
  if (p.z <= 0.0) throw BehindCameraError("point at or behind the camera plane");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

struct FrontalBox {
  Box2D box;          // unclipped pixel extent of the projected corners
  double truncation;  // 1 - clipped_area / unclipped_area
};

// Axis-aligned pixel extent of the projected 3D box. The returned box is
// unclipped; truncation reports how much of it falls outside the image.
inline FrontalBox frontal_bbox(const CameraIntrinsics& k, const Box3D& b) {
  const auto corners = box_corners_3d(b);
  double u1 = std::numeric_limits<double>::infinity(), v1 = u1;
  double u2 = -u1, v2 = -u1;
  for (const auto& c : corners) {
    const Pixel p = project_point(k, c);  // throws BehindCamera on z <= 0
    u1 = std::min(u1, p.u);
    v1 = std::min(v1, p.v);
    u2 = std::max(u2, p.u);
    v2 = std::max(v2, p.v);
  }
  const Box2D full{u1, v1, u2, v2};
  const double cx1 = std::max(u1, 0.0), cy1 = std::max(v1, 0.0);
  const double cx2 = std::min(u2, static_cast<double>(k.image_w));
  const double cy2 = std::min(v2, static_cast<double>(k.image_h));
  if (cx1 >= cx2 || cy1 >= cy2) {
    throw FullyOutsideImageError("projected box does not intersect the image");
  }
  const double clipped_area = (cx2 - cx1) * (cy2 - cy1);
  return {full, 1.0 - clipped_area / full.area()};
}

// The 4 bottom corners dropped to the (x, z) plane, counter-clockwise.
inline BevQuad bev_footprint(const Box3D& b) {
  const auto corners = box_corners_3d(b);
  BevQuad q;
  for (int i = 0; i < 4; ++i) q.v[i] = {corners[i].x, corners[i].z};
  return q;
}

inline double quad_area(const BevQuad& q) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    s += bev_cross(q.v[i], q.v[(i + 1) & 3]);
  }
  return 0.5 * s;
}

// Axis-aligned enclosing rectangle of a footprint, normalized with the
// Eq-frame constants so BEV rectangles and depth targets share one frame.
inline BevRect bev_axis_aligned_normalized(const BevQuad& q) {
  double x1 = q.v[0].x, x2 = x1, z1 = q.v[0].z, z2 = z1;
  for (const auto& p : q.v) {
    x1 = std::min(x1, p.x);
    x2 = std::max(x2, p.x);
    z1 = std::min(z1, p.z);
    z2 = std::max(z2, p.z);
  }
  if (x1 < -kXHalfRange || x2 > kXHalfRange || z1 < 0.0 || z2 > 2.0 * kZHalfRange) {
    throw OutOfRangeError("BEV footprint outside the normalization extent");
  }
  return {x1 / kXHalfRange, (z1 - kZOffset) / kZHalfRange,
          x2 / kXHalfRange, (z2 - kZOffset) / kZHalfRange};
}

inline BevRect denormalize_bev_rect(const BevRect& r) {
  return {r.x1 * kXHalfRange, r.z1 * kZHalfRange + kZOffset,
          r.x2 * kXHalfRange, r.z2 * kZHalfRange + kZOffset};
}

// Sorts corner pairs so x1 <= x2, z1 <= z2 (raw network outputs may be
// unordered).
inline BevRect canonicalize_rect(const BevRect& r) {
  return {std::min(r.x1, r.x2), std::min(r.z1, r.z2),
          std::max(r.x1, r.x2), std::max(r.z1, r.z2)};
}

namespace detail {
inline double iou_axis_aligned_impl(double ax1, double ay1, double ax2, double ay2,
                                    double bx1, double by1, double bx2, double by2) {
  const double ix = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double iy = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  return inter / uni;
}
}  // namespace detail

inline double iou_axis_aligned(const Box2D& a, const Box2D& b) {
  return detail::iou_axis_aligned_impl(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2);
}

inline double iou_axis_aligned(const BevRect& a, const BevRect& b) {
  return detail::iou_axis_aligned_impl(a.x1, a.z1, a.x2, a.z2, b.x1, b.z1, b.x2, b.z2);
}

inline double polygon_area(const std::vector<BevPoint>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const BevPoint& p = poly[i];
    const BevPoint& q = poly[(i + 1) % poly.size()];
    s += p.x * q.z - q.x * p.z;
  }
  return 0.5 * s;
}

namespace detail {
// Keeps the part of poly on the left of the directed edge a->b.
inline std::vector<BevPoint> clip_half_plane(const std::vector<BevPoint>& poly,
                                             BevPoint a, BevPoint b) {
  std::vector<BevPoint> out;
  out.reserve(poly.size() + 1);
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const BevPoint& p = poly[i];
    const BevPoint& q = poly[(i + 1) % n];
    const double dp = bev_cross(b - a, p - a);
    const double dq = bev_cross(b - a, q - a);
    const bool pin = dp >= 0.0;
    const bool qin = dq >= 0.0;
    if (pin) out.push_back(p);
    if (pin != qin) {
      const double t = dp / (dp - dq);
      out.push_back({p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)});
    }
  }
  return out;
}
}  // namespace detail

// Convex intersection area via successive half-plane clips + shoelace.
inline double quad_intersection_area(const BevQuad& a, const BevQuad& b) {
  std::vector<BevPoint> poly(a.v.begin(), a.v.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i) {
    poly = detail::clip_half_plane(poly, b.v[i], b.v[(i + 1) & 3]);
  }
  return poly.empty() ? 0.0 : std::abs(polygon_area(poly));
}

inline double iou_rotated(const BevQuad& a, const BevQuad& b) {
  const double inter = quad_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = std::abs(quad_area(a)) + std::abs(quad_area(b)) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace monobev

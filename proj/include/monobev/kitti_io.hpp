#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "monobev/geometry.hpp"

namespace monobev::kitti {

struct MalformedLineError : std::runtime_error {
  explicit MalformedLineError(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidBboxError : std::runtime_error {
  explicit InvalidBboxError(const std::string& what) : std::runtime_error(what) {}
};
struct MissingP2Error : std::runtime_error {
  explicit MissingP2Error(const std::string& what) : std::runtime_error(what) {}
};
struct MalformedMatrixError : std::runtime_error {
  explicit MalformedMatrixError(const std::string& what) : std::runtime_error(what) {}
};
struct OutOfImageError : std::runtime_error {
  explicit OutOfImageError(const std::string& what) : std::runtime_error(what) {}
};

// One object annotation in the devkit label format. Field order in the
// file: type truncated occluded alpha bbox(l t r b) dims(h w l)
// location(x y z) rotation_y [score].
struct LabelRecord {
  std::string class_name;
  double truncated = 0.0;  // [0, 1]
  int occluded = 0;        // 0..3; -1 in the wild is canonicalized to 3
  double alpha = 0.0;      // observation angle, radians
  Box2D bbox;              // pixels
  double h = 0.0, w = 0.0, l = 0.0;   // meters
  double x = 0.0, y = 0.0, z = 0.0;   // bottom-center, camera frame
  double rotation_y = 0.0;            // yaw, radians
  std::optional<double> score;
};

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };

inline const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
    default: return "ignored";
  }
}

namespace detail {
inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r' || line[i] == '\n')) {
      ++i;
    }
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r' && line[j] != '\n') {
      ++j;
    }
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_number(std::string_view tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw MalformedLineError("non-numeric field '" + std::string(tok) + "'");
  }
  return v;
}
}  // namespace detail

inline LabelRecord parse_label_line(std::string_view line) {
  const auto tok = detail::split_ws(line);
  if (tok.size() != 15 && tok.size() != 16) {
    throw MalformedLineError("expected 15 or 16 fields, got " +
                             std::to_string(tok.size()));
  }
  LabelRecord r;
  r.class_name = std::string(tok[0]);
  double num[15];
  for (size_t i = 1; i < tok.size(); ++i) num[i - 1] = detail::parse_number(tok[i]);
  r.truncated = std::max(0.0, num[0]);  // -1 marks "unknown" in the wild
  const double occ = num[1];
  if (occ != static_cast<int>(occ) || occ < -1.0 || occ > 3.0) {
    throw MalformedLineError("occluded field must be an integer in -1..3");
  }
  r.occluded = occ < 0.0 ? 3 : static_cast<int>(occ);
  r.alpha = num[2];
  r.bbox = {num[3], num[4], num[5], num[6]};
  if (!r.bbox.valid()) throw InvalidBboxError("degenerate 2D bbox");
  r.h = num[7];
  r.w = num[8];
  r.l = num[9];
  r.x = num[10];
  r.y = num[11];
  r.z = num[12];
  r.rotation_y = num[13];
  if (tok.size() == 16) r.score = num[14];
  return r;
}

// Canonical devkit-style serialization: fixed two decimals, occlusion as an
// integer. parse(serialize(r)) is a fixpoint.
inline std::string serialize_label(const LabelRecord& r) {
  char buf[512];
  int n = std::snprintf(
      buf, sizeof buf,
      "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
      r.class_name.c_str(), r.truncated, r.occluded, r.alpha, r.bbox.x1,
      r.bbox.y1, r.bbox.x2, r.bbox.y2, r.h, r.w, r.l, r.x, r.y, r.z,
      r.rotation_y);
  std::string out(buf, static_cast<size_t>(n));
  if (r.score) {
    std::snprintf(buf, sizeof buf, " %.2f", *r.score);
    out += buf;
  }
  return out;
}

inline std::vector<LabelRecord> parse_label_text(const std::string& text) {
  std::vector<LabelRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::split_ws(line).empty()) continue;
    out.push_back(parse_label_line(line));
  }
  return out;
}

inline std::vector<LabelRecord> load_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_label_text(ss.str());
}

inline std::string serialize_labels(const std::vector<LabelRecord>& recs) {
  std::string out;
  for (const auto& r : recs) {
    out += serialize_label(r);
    out += '\n';
  }
  return out;
}

// Reads the "P2:" projection row (12 floats, row-major 3x4). The
// translation column is ignored; only a single camera is modeled.
inline CameraIntrinsics parse_calib(const std::string& text, int image_w = 1242,
                                    int image_h = 375) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] != "P2:") continue;
    if (tok.size() != 13) {
      throw MalformedMatrixError("P2 row must carry 12 values, got " +
                                 std::to_string(tok.size() - 1));
    }
    double p[12];
    for (int i = 0; i < 12; ++i) p[i] = detail::parse_number(tok[i + 1]);
    CameraIntrinsics k;
    k.fx = p[0];
    k.cx = p[2];
    k.fy = p[5];
    k.cy = p[6];
    k.image_w = image_w;
    k.image_h = image_h;
    if (!k.valid()) throw MalformedMatrixError("non-positive focal length in P2");
    return k;
  }
  throw MissingP2Error("no P2: row in calibration text");
}

inline CameraIntrinsics load_calib_file(const std::string& path, int image_w = 1242,
                                        int image_h = 375) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calib file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calib(ss.str(), image_w, image_h);
}

// Devkit convention: min bbox height 40/25/25 px, max occlusion 0/1/2, max
// truncation 0.15/0.30/0.50 for easy/moderate/hard.
inline Difficulty classify_difficulty(const LabelRecord& r) {
  const double height = r.bbox.height();
  if (height >= 40.0 && r.occluded == 0 && r.truncated <= 0.15) {
    return Difficulty::Easy;
  }
  if (height >= 25.0 && r.occluded <= 1 && r.truncated <= 0.30) {
    return Difficulty::Moderate;
  }
  if (height >= 25.0 && r.occluded <= 2 && r.truncated <= 0.50) {
    return Difficulty::Hard;
  }
  return Difficulty::Ignored;
}

// Affine map of pixel coordinates into [-1, 1] per image dimension.
inline Box2D normalize_bbox(const Box2D& b, int image_w, int image_h) {
  if (!b.valid()) throw InvalidBboxError("degenerate bbox");
  if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > image_w || b.y2 > image_h) {
    throw OutOfImageError("bbox extends outside the image");
  }
  return {2.0 * b.x1 / image_w - 1.0, 2.0 * b.y1 / image_h - 1.0,
          2.0 * b.x2 / image_w - 1.0, 2.0 * b.y2 / image_h - 1.0};
}

inline Box2D denormalize_bbox(const Box2D& b, int image_w, int image_h) {
  return {(b.x1 + 1.0) * 0.5 * image_w, (b.y1 + 1.0) * 0.5 * image_h,
          (b.x2 + 1.0) * 0.5 * image_w, (b.y2 + 1.0) * 0.5 * image_h};
}

// Label ->3D box in the shared camera frame.
inline Box3D to_box3d(const LabelRecord& r) {
  return {r.x, r.y, r.z, r.w, r.l, r.h, wrap_angle(r.rotation_y)};
}

}  // namespace monobev::kitti

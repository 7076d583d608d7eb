#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace monobev::render {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

enum class ImageFormat { PGM, PPM };

// 8-bit raster, 1 channel (gray) or 3 (RGB), row-major.
struct Image {
  int w = 0, h = 0, channels = 1;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w_, int h_, int channels_)
      : w(w_), h(h_), channels(channels_),
        data(static_cast<size_t>(w_) * h_ * channels_, 0) {}

  std::uint8_t& at(int row, int col, int c = 0) {
    return data[(static_cast<size_t>(row) * w + col) * channels + c];
  }
  std::uint8_t at(int row, int col, int c = 0) const {
    return data[(static_cast<size_t>(row) * w + col) * channels + c];
  }
};

// Canonical header, no comment lines: "P5\n<w> <h>\n255\n" + payload.
// Byte-reproducible so renders can be golden-file tested.
inline std::string encode_image(const Image& img, ImageFormat fmt) {
  const int want = fmt == ImageFormat::PGM ? 1 : 3;
  if (img.channels != want) {
    throw IoError("channel count does not match the requested format");
  }
  std::string out = fmt == ImageFormat::PGM ? "P5\n" : "P6\n";
  out += std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

inline void write_image(const Image& img, const std::string& path, ImageFormat fmt) {
  const std::string bytes = encode_image(img, fmt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open image for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short image write: " + path);
}

inline Image decode_image(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw IoError("unsupported image magic: " + magic);
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw IoError("bad image header");
  in.get();  // the single whitespace byte before the payload
  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw IoError("truncated image payload");
  }
  return img;
}

inline Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_image(ss.str());
}

}  // namespace monobev::render

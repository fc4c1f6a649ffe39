#pragma once

// Netpbm images: PPM (P3/P6) input, 16-bit PGM and plain PBM output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "posekit/io/text.hpp"
#include "posekit/visibility.hpp"

namespace posekit::io {

// Intensities are rescaled to [0, 255] when maxval differs from 255.
inline RgbImage parse_ppm(std::string_view bytes, const std::string& source = "<memory>") {
  std::size_t pos = 0;
  auto skip_space = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto number = [&](const char* what) -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const auto v = parse_long(bytes.substr(start, pos - start));
    if (!v) throw ParseError(source, start, std::string("expected ") + what);
    return *v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '3' && bytes[1] != '6'))
    throw ParseError(source, 0, "not a P3/P6 PPM image");
  const bool binary = bytes[1] == '6';
  pos = 2;
  const long w = number("width"), h = number("height"), maxval = number("maxval");
  if (w < 1 || h < 1 || w > 1 << 15 || h > 1 << 15) throw ParseError(source, pos, "unsupported image size");
  if (maxval < 1 || maxval > 65535) throw ParseError(source, pos, "maxval out of range");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  const double scale = 255.0 / static_cast<double>(maxval);
  RgbImage img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  std::vector<double> values;
  values.reserve(std::min(n, bytes.size()));
  if (binary) {
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
      throw ParseError(source, pos, "missing separator before pixel data");
    ++pos;
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() - pos < n * bpp) throw ParseError(source, pos, "truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
      const long v = bpp == 1 ? p[0] : (p[0] << 8) | p[1];
      if (v > maxval) throw ParseError(source, pos + i * bpp, "sample exceeds maxval");
      values.push_back(static_cast<double>(v));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const long v = number("sample");
      if (v > maxval) throw ParseError(source, pos, "sample exceeds maxval");
      values.push_back(static_cast<double>(v));
    }
  }
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(y, x, c) = std::min(255.0, values[(y * img.width() + x) * 3 + c] * scale);
  return img;
}

inline RgbImage load_ppm(const std::filesystem::path& path) { return parse_ppm(read_file(path), path.string()); }

// Binary P6, 8-bit, values rounded and clamped.
inline std::string format_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out += static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(img.at(y, x, c)), 0L, 255L)));
  return out;
}

// Binary 16-bit PGM; `values` row-major, scaled so the maximum maps to 65535.
inline std::string format_pgm16(const std::vector<double>& values, std::size_t w, std::size_t h) {
  if (values.size() != w * h) throw ShapeError("format_pgm16: value count does not match size");
  double peak = 0.0;
  for (double v : values)
    if (std::isfinite(v)) peak = std::max(peak, v);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (double v : values) {
    const double s = peak > 0.0 && std::isfinite(v) ? std::max(0.0, v) / peak : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(s * 65535.0));
    out += static_cast<char>(q >> 8);
    out += static_cast<char>(q & 0xff);
  }
  return out;
}

// Plain (P1) bitmap, 1 = set.
inline std::string format_pbm(const std::vector<bool>& bits, std::size_t w, std::size_t h) {
  if (bits.size() != w * h) throw ShapeError("format_pbm: bit count does not match size");
  std::string out = "P1\n" + std::to_string(w) + " " + std::to_string(h) + "\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x) out += ' ';
      out += bits[y * w + x] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace posekit::io

#pragma once

// Minimal PLY reader: ASCII and binary little-endian, any element layout,
// returning the x/y/z of the "vertex" element.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "posekit/io/text.hpp"
#include "posekit/rotation.hpp"

namespace posekit::io {

namespace ply_detail {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

inline bool scalar_from_name(std::string_view n, Scalar& out) {
  if (n == "char" || n == "int8") out = Scalar::I8;
  else if (n == "uchar" || n == "uint8") out = Scalar::U8;
  else if (n == "short" || n == "int16") out = Scalar::I16;
  else if (n == "ushort" || n == "uint16") out = Scalar::U16;
  else if (n == "int" || n == "int32") out = Scalar::I32;
  else if (n == "uint" || n == "uint32") out = Scalar::U32;
  else if (n == "float" || n == "float32") out = Scalar::F32;
  else if (n == "double" || n == "float64") out = Scalar::F64;
  else return false;
  return true;
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8:
    case Scalar::U8: return 1;
    case Scalar::I16:
    case Scalar::U16: return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool is_list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

template <class T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;  // host assumed little-endian
}

inline double decode(Scalar s, const unsigned char* p) {
  switch (s) {
    case Scalar::I8: return static_cast<double>(static_cast<std::int8_t>(p[0]));
    case Scalar::U8: return static_cast<double>(p[0]);
    case Scalar::I16: return static_cast<double>(load_le<std::int16_t>(p));
    case Scalar::U16: return static_cast<double>(load_le<std::uint16_t>(p));
    case Scalar::I32: return static_cast<double>(load_le<std::int32_t>(p));
    case Scalar::U32: return static_cast<double>(load_le<std::uint32_t>(p));
    case Scalar::F32: return static_cast<double>(load_le<float>(p));
    case Scalar::F64: return load_le<double>(p);
  }
  return 0.0;
}

}  // namespace ply_detail

// Parses PLY bytes; `source` names the origin in error messages.
inline std::vector<Vec3> parse_ply(std::string_view bytes, const std::string& source = "<memory>") {
  using namespace ply_detail;
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> ParseError { return ParseError(source, pos, what); };
  auto next_line = [&]() -> std::string_view {
    if (pos >= bytes.size()) throw fail("unexpected end of header");
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end == bytes.size() ? end : end + 1;
    return line;
  };

  if (next_line() != "ply") throw ParseError(source, 0, "missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<Element> elements;
  for (;;) {
    const std::size_t line_start = pos;
    const std::string_view line = next_line();
    const auto tok = tokens(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw ParseError(source, line_start, "malformed format line");
      if (tok[1] == "ascii") binary = false;
      else if (tok[1] == "binary_little_endian") binary = true;
      else throw ParseError(source, line_start, "unsupported format '" + std::string(tok[1]) + "'");
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(source, line_start, "malformed element line");
      const auto count = parse_long(tok[2]);
      if (!count || *count < 0) throw ParseError(source, line_start, "bad element count");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError(source, line_start, "property before element");
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        p.is_list = true;
        if (!scalar_from_name(tok[2], p.count_type) || !scalar_from_name(tok[3], p.type))
          throw ParseError(source, line_start, "unknown list property type");
        p.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        if (!scalar_from_name(tok[1], p.type)) throw ParseError(source, line_start, "unknown property type");
        p.name = std::string(tok[2]);
      } else {
        throw ParseError(source, line_start, "malformed property line");
      }
      elements.back().props.push_back(p);
    } else {
      throw ParseError(source, line_start, "unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_format) throw fail("missing format line");

  std::vector<Vec3> vertices;
  std::size_t ascii_cursor = pos;
  // ASCII token reader over the body.
  auto next_token = [&]() -> std::string_view {
    while (ascii_cursor < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[ascii_cursor]))) ++ascii_cursor;
    const std::size_t start = ascii_cursor;
    while (ascii_cursor < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[ascii_cursor]))) ++ascii_cursor;
    if (start == ascii_cursor) {
      pos = start;
      throw fail("unexpected end of data");
    }
    return bytes.substr(start, ascii_cursor - start);
  };
  auto read_value = [&](Scalar s) -> double {
    if (binary) {
      const std::size_t n = scalar_size(s);
      if (pos + n > bytes.size()) throw fail("truncated binary data");
      const double v = decode(s, reinterpret_cast<const unsigned char*>(bytes.data() + pos));
      pos += n;
      return v;
    }
    const std::size_t tok_pos = ascii_cursor;
    const std::string_view t = next_token();
    const auto v = parse_double(t);
    if (!v) {
      pos = tok_pos;
      throw fail("bad number '" + std::string(t) + "'");
    }
    return *v;
  };

  for (const Element& e : elements) {
    const bool is_vertex = e.name == "vertex";
    int ix = -1, iy = -1, iz = -1;
    if (is_vertex) {
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        if (e.props[i].is_list) continue;
        if (e.props[i].name == "x") ix = static_cast<int>(i);
        if (e.props[i].name == "y") iy = static_cast<int>(i);
        if (e.props[i].name == "z") iz = static_cast<int>(i);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw fail("vertex element lacks x/y/z properties");
      vertices.reserve(std::min(e.count, bytes.size()));
    }
    std::vector<double> row(e.props.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      for (std::size_t i = 0; i < e.props.size(); ++i) {
        const Property& p = e.props[i];
        if (p.is_list) {
          const double n = read_value(p.count_type);
          if (n < 0 || n > 1e7) throw fail("bad list length");
          for (long k = 0; k < static_cast<long>(n); ++k) read_value(p.type);
        } else {
          row[i] = read_value(p.type);
        }
      }
      if (is_vertex) {
        const Vec3 v(row[static_cast<std::size_t>(ix)], row[static_cast<std::size_t>(iy)],
                     row[static_cast<std::size_t>(iz)]);
        if (!v.allFinite()) throw fail("non-finite vertex");
        vertices.push_back(v);
      }
    }
  }
  if (vertices.empty()) throw fail("no vertices");
  return vertices;
}

inline std::vector<Vec3> load_ply(const std::filesystem::path& path) { return parse_ply(read_file(path), path.string()); }

// ASCII PLY with one vertex element.
inline std::string format_ply(const std::vector<Vec3>& points) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const Vec3& p : points)
    out += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  return out;
}

}  // namespace posekit::io

#pragma once

// SEMW weight container.
//
//   "SEMW" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes | u8 dtype | u32 rank | rank x u64 dim | values )
//
// All integers and values little-endian; dtype 0 = float32, 1 = float64.
// Tensors keep their raw payload bytes so a load/save cycle is bit-exact.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/io/text.hpp"
#include "posekit/network.hpp"

namespace posekit::io {

inline constexpr std::uint32_t kWeightsVersion = 1;
inline constexpr std::uint32_t kMaxRank = 8;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

struct NamedTensor {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
  std::vector<unsigned char> payload;  // little-endian values

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }

  double value(std::size_t i) const {
    if (dtype == DType::F32) {
      float f;
      std::memcpy(&f, payload.data() + i * 4, 4);
      return static_cast<double>(f);
    }
    double d;
    std::memcpy(&d, payload.data() + i * 8, 8);
    return d;
  }

  std::vector<double> values() const {
    std::vector<double> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
    return out;
  }

  static NamedTensor f64(std::string name, std::vector<std::uint64_t> dims, const std::vector<double>& v) {
    NamedTensor t{std::move(name), DType::F64, std::move(dims), {}};
    if (t.element_count() != v.size()) throw ShapeError("tensor " + t.name + ": dims do not match value count");
    t.payload.resize(v.size() * 8);
    if (!v.empty()) std::memcpy(t.payload.data(), v.data(), t.payload.size());
    return t;
  }

  static NamedTensor f32(std::string name, std::vector<std::uint64_t> dims, const std::vector<float>& v) {
    NamedTensor t{std::move(name), DType::F32, std::move(dims), {}};
    if (t.element_count() != v.size()) throw ShapeError("tensor " + t.name + ": dims do not match value count");
    t.payload.resize(v.size() * 4);
    if (!v.empty()) std::memcpy(t.payload.data(), v.data(), t.payload.size());
    return t;
  }

  bool operator==(const NamedTensor&) const = default;
};

using TensorList = std::vector<NamedTensor>;

namespace semw_detail {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace semw_detail

inline std::string serialize_tensors(const TensorList& tensors) {
  using semw_detail::put;
  std::set<std::string> names;
  std::string out = "SEMW";
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (!names.insert(t.name).second) throw DataError("duplicate tensor name '" + t.name + "'");
    if (t.dims.size() > kMaxRank) throw ShapeError("tensor " + t.name + ": rank too large");
    if (t.payload.size() != t.element_count() * dtype_size(t.dtype))
      throw ShapeError("tensor " + t.name + ": payload size does not match dims");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.payload.data()), t.payload.size());
  }
  return out;
}

inline TensorList parse_tensors(std::string_view bytes, const std::string& source = "<memory>") {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (n > bytes.size() - pos) throw ParseError(source, pos, std::string("truncated ") + what);
  };
  auto get = [&]<class T>(T*, const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  };
  need(4, "magic");
  if (bytes.substr(0, 4) != "SEMW") throw ParseError(source, 0, "bad magic, expected SEMW");
  pos = 4;
  const auto version = get(static_cast<std::uint32_t*>(nullptr), "version");
  if (version != kWeightsVersion) throw ParseError(source, 4, "unsupported version " + std::to_string(version));
  const auto count = get(static_cast<std::uint32_t*>(nullptr), "count");
  TensorList out;
  std::set<std::string> names;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t start = pos;
    const auto name_len = get(static_cast<std::uint32_t*>(nullptr), "name length");
    need(name_len, "name");
    NamedTensor t;
    t.name = std::string(bytes.substr(pos, name_len));
    pos += name_len;
    if (!names.insert(t.name).second) throw ParseError(source, start, "duplicate tensor name '" + t.name + "'");
    const auto dtype = get(static_cast<std::uint8_t*>(nullptr), "dtype");
    if (dtype > 1) throw ParseError(source, pos - 1, "unknown dtype " + std::to_string(dtype));
    t.dtype = static_cast<DType>(dtype);
    const auto rank = get(static_cast<std::uint32_t*>(nullptr), "rank");
    if (rank > kMaxRank) throw ParseError(source, pos - 4, "rank " + std::to_string(rank) + " too large");
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = get(static_cast<std::uint64_t*>(nullptr), "dims");
      t.dims.push_back(d);
      if (d != 0 && elements > std::numeric_limits<std::uint64_t>::max() / d)
        throw ParseError(source, pos - 8, "tensor size overflows");
      elements *= d;
    }
    const std::uint64_t remaining = bytes.size() - pos;
    if (elements > remaining / dtype_size(t.dtype))
      throw ParseError(source, pos, "tensor '" + t.name + "' declares more values than the file holds");
    const std::size_t n = static_cast<std::size_t>(elements) * dtype_size(t.dtype);
    t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    out.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw ParseError(source, pos, "trailing bytes after last tensor");
  return out;
}

inline void save_tensors(const TensorList& t, const std::filesystem::path& path) {
  write_file(path, serialize_tensors(t));
}

inline TensorList load_tensors(const std::filesystem::path& path) {
  return parse_tensors(read_file(path), path.string());
}

// Network weights as tensors: "meta.config" (7 float64: c3, c4, c5,
// fpn_width, head_width, num_classes, gn_groups), "<conv>.weight"
// [out, in/groups, kh, kw], "<conv>.bias" [out], "<norm>.gamma" and
// "<norm>.beta" [channels].
inline TensorList network_to_tensors(NetworkWeights w) {
  TensorList out;
  const NetworkConfig& c = w.config;
  out.push_back(NamedTensor::f64("meta.config", {7},
                                 {double(c.c3_channels), double(c.c4_channels), double(c.c5_channels),
                                  double(c.fpn_width), double(c.head_width), double(c.num_classes),
                                  double(c.gn_groups)}));
  struct Emit {
    TensorList& out;
    void operator()(const std::string& name, ConvParams& p) const {
      out.push_back(NamedTensor::f64(name + ".weight", {p.out_channels, p.in_per_group(), p.kernel_h, p.kernel_w},
                                     p.weights));
      out.push_back(NamedTensor::f64(name + ".bias", {p.out_channels}, p.bias));
    }
    void operator()(const std::string& name, GroupNormParams& g) const {
      out.push_back(NamedTensor::f64(name + ".gamma", {g.gamma.size()}, g.gamma));
      out.push_back(NamedTensor::f64(name + ".beta", {g.beta.size()}, g.beta));
    }
  };
  w.visit(Emit{out});
  return out;
}

inline NetworkConfig config_from_tensors(const TensorList& tensors) {
  for (const NamedTensor& t : tensors) {
    if (t.name != "meta.config") continue;
    if (t.dims != std::vector<std::uint64_t>{7}) throw DataError("meta.config must hold 7 values");
    const auto v = t.values();
    std::size_t u[7];
    for (int i = 0; i < 7; ++i) {
      if (!(v[i] >= 1.0 && v[i] <= 1e6) || v[i] != std::floor(v[i]))
        throw DataError("meta.config entry " + std::to_string(i) + " is not a positive integer");
      u[i] = static_cast<std::size_t>(v[i]);
    }
    return {u[0], u[1], u[2], u[3], u[4], u[5], u[6]};
  }
  throw DataError("weights lack a meta.config tensor");
}

// Every tensor the network expects must be present with the expected dims;
// unknown tensors are rejected.
inline NetworkWeights network_from_tensors(const TensorList& tensors) {
  NetworkWeights w = NetworkWeights::zeros(config_from_tensors(tensors));
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t;
  std::set<std::string> used{"meta.config"};
  auto fetch = [&](const std::string& name, const std::vector<std::uint64_t>& dims) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("weights lack tensor '" + name + "'");
    if (it->second->dims != dims) throw DataError("tensor '" + name + "' has unexpected dims");
    used.insert(name);
    return it->second->values();
  };
  struct Fill {
    decltype(fetch)& get;
    void operator()(const std::string& name, ConvParams& p) const {
      p.weights = get(name + ".weight", {p.out_channels, p.in_per_group(), p.kernel_h, p.kernel_w});
      p.bias = get(name + ".bias", {p.out_channels});
    }
    void operator()(const std::string& name, GroupNormParams& g) const {
      g.gamma = get(name + ".gamma", {g.gamma.size()});
      g.beta = get(name + ".beta", {g.beta.size()});
    }
  };
  w.visit(Fill{fetch});
  for (const NamedTensor& t : tensors)
    if (!used.contains(t.name)) throw DataError("unexpected tensor '" + t.name + "'");
  return w;
}

inline void save_network(const NetworkWeights& w, const std::filesystem::path& path) {
  save_tensors(network_to_tensors(w), path);
}

inline NetworkWeights load_network(const std::filesystem::path& path) {
  return network_from_tensors(load_tensors(path));
}

// A single CHW feature map stored under the given name as [C, H, W].
inline NamedTensor feature_map_tensor(const std::string& name, const FeatureMap& x) {
  return NamedTensor::f64(name, {x.channels(), x.height(), x.width()},
                          std::vector<double>(x.data().begin(), x.data().end()));
}

inline FeatureMap tensor_feature_map(const NamedTensor& t) {
  if (t.dims.size() != 3) throw DataError("tensor '" + t.name + "' is not rank 3");
  return FeatureMap(static_cast<std::size_t>(t.dims[0]), static_cast<std::size_t>(t.dims[1]),
                    static_cast<std::size_t>(t.dims[2]), t.values());
}

}  // namespace posekit::io

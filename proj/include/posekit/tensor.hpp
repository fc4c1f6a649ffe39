#pragma once

// Dense CHW tensor kernel: exactly the layers the pyramid and the heads need.
// Everything runs in double precision and is a pure function of its inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/random.hpp"

namespace posekit {

struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
};

inline std::string to_string(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

// Row-major CHW activation map (channel-major, then row, then column).
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : shape_{channels, height, width}, data_(shape_.size(), fill) {}

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : shape_{channels, height, width}, data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("FeatureMap: data length " + std::to_string(data_.size()) + " does not match " +
                       to_string(shape_));
    }
  }

  const Shape3& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return shape_.height * shape_.width; }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> channel(std::size_t c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const double> channel(std::size_t c) const { return {data_.data() + c * plane(), plane()}; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  Shape3 shape_;
  std::vector<double> data_;
};

inline FeatureMap random_feature_map(Rng& rng, std::size_t c, std::size_t h, std::size_t w, double lo = -1.0,
                                     double hi = 1.0) {
  FeatureMap out(c, h, w);
  for (double& v : out.data()) v = rng.uniform(lo, hi);
  return out;
}

// Convolution kernel. `in_channels` is the total input channel count; each of
// `groups` groups sees in_channels/groups inputs, so weights are laid out as
// [out][in/groups][kh][kw]. groups == in_channels gives a depthwise conv.
struct ConvParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t in_per_group() const { return groups == 0 ? 0 : in_channels / groups; }
  std::size_t weight_count() const { return out_channels * in_per_group() * kernel_h * kernel_w; }

  double& weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_per_group() + i) * kernel_h + ky) * kernel_w + kx];
  }
  double weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_per_group() + i) * kernel_h + ky) * kernel_w + kx];
  }

  void validate() const {
    if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
      throw ShapeError("ConvParams: channels " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                       " not divisible into " + std::to_string(groups) + " groups");
    }
    if (stride == 0) throw ShapeError("ConvParams: stride must be >= 1");
    if (kernel_h == 0 || kernel_w == 0) throw ShapeError("ConvParams: empty kernel");
    if (weights.size() != weight_count()) {
      throw ShapeError("ConvParams: weights length " + std::to_string(weights.size()) + ", expected " +
                       std::to_string(weight_count()));
    }
    if (bias.size() != out_channels) throw ShapeError("ConvParams: bias length mismatch");
  }

  // Zero kernel with "same" padding (floor(k/2)) unless told otherwise.
  static ConvParams zeros(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw, std::size_t stride = 1,
                          std::size_t groups = 1) {
    ConvParams p;
    p.out_channels = out;
    p.in_channels = in;
    p.kernel_h = kh;
    p.kernel_w = kw;
    p.stride = stride;
    p.padding = kh / 2;
    p.groups = groups;
    p.weights.assign(p.weight_count(), 0.0);
    p.bias.assign(out, 0.0);
    return p;
  }

  // Uniform fan-in scaled init, bias zero.
  static ConvParams random(Rng& rng, std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                           std::size_t stride = 1, std::size_t groups = 1, double gain = 1.0) {
    ConvParams p = zeros(out, in, kh, kw, stride, groups);
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(p.in_per_group() * kh * kw));
    for (double& w : p.weights) w = rng.uniform(-bound, bound);
    return p;
  }
};

struct GroupNormParams {
  std::size_t groups = 1;
  std::vector<double> gamma;
  std::vector<double> beta;
  double epsilon = 1e-5;

  static GroupNormParams identity(std::size_t channels, std::size_t groups) {
    return {groups, std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0), 1e-5};
  }
};

inline FeatureMap conv2d(const FeatureMap& x, const ConvParams& p) {
  p.validate();
  if (p.in_channels != x.channels()) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(p.in_channels) + " channels, input has " +
                     std::to_string(x.channels()));
  }
  const std::size_t H = x.height(), W = x.width();
  const std::size_t padded_h = H + 2 * p.padding, padded_w = W + 2 * p.padding;
  if (p.kernel_h > padded_h || p.kernel_w > padded_w) {
    throw ShapeError("conv2d: kernel larger than padded input " + to_string(x.shape()));
  }
  const std::size_t out_h = (padded_h - p.kernel_h) / p.stride + 1;
  const std::size_t out_w = (padded_w - p.kernel_w) / p.stride + 1;
  const std::size_t in_pg = p.in_per_group();
  const std::size_t out_pg = p.out_channels / p.groups;
  const auto pad = static_cast<std::ptrdiff_t>(p.padding);
  const auto stride = static_cast<std::ptrdiff_t>(p.stride);

  FeatureMap out(p.out_channels, out_h, out_w);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    std::span<double> dst = out.channel(oc);
    std::fill(dst.begin(), dst.end(), p.bias[oc]);
    const std::size_t group = oc / out_pg;
    for (std::size_t il = 0; il < in_pg; ++il) {
      std::span<const double> src = x.channel(group * in_pg + il);
      for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
          const double w = p.weight(oc, il, ky, kx);
          if (w == 0.0) continue;
          // Output columns whose tap lands inside the unpadded input.
          const std::ptrdiff_t off_x = static_cast<std::ptrdiff_t>(kx) - pad;
          std::ptrdiff_t ox_begin = off_x >= 0 ? 0 : (-off_x + stride - 1) / stride;
          std::ptrdiff_t ox_end = (static_cast<std::ptrdiff_t>(W) - 1 - off_x) / stride + 1;
          if (static_cast<std::ptrdiff_t>(W) - 1 - off_x < 0) ox_end = 0;
          ox_end = std::min<std::ptrdiff_t>(ox_end, static_cast<std::ptrdiff_t>(out_w));
          if (ox_begin >= ox_end) continue;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* row = src.data() + static_cast<std::size_t>(iy) * W;
            double* drow = dst.data() + oy * out_w;
            if (stride == 1) {
              for (std::ptrdiff_t ox = ox_begin; ox < ox_end; ++ox) drow[ox] += w * row[ox + off_x];
            } else {
              for (std::ptrdiff_t ox = ox_begin; ox < ox_end; ++ox) drow[ox] += w * row[ox * stride + off_x];
            }
          }
        }
      }
    }
  }
  return out;
}

inline FeatureMap depthwise_separable_conv(const FeatureMap& x, const ConvParams& depthwise,
                                           const ConvParams& pointwise) {
  if (depthwise.groups != depthwise.in_channels || depthwise.out_channels != depthwise.in_channels) {
    throw ShapeError("depthwise_separable_conv: depthwise stage must be per-channel");
  }
  if (pointwise.kernel_h != 1 || pointwise.kernel_w != 1 || pointwise.groups != 1) {
    throw ShapeError("depthwise_separable_conv: pointwise stage must be a dense 1x1 conv");
  }
  return conv2d(conv2d(x, depthwise), pointwise);
}

inline FeatureMap group_norm(const FeatureMap& x, const GroupNormParams& p) {
  const std::size_t C = x.channels();
  if (p.groups == 0 || C % p.groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(C) + " channels not divisible by " + std::to_string(p.groups) +
                     " groups");
  }
  if (p.gamma.size() != C || p.beta.size() != C) throw ShapeError("group_norm: affine length mismatch");
  if (!(p.epsilon > 0.0)) throw DomainError("group_norm: epsilon must be positive");

  const std::size_t per_group = C / p.groups;
  const std::size_t count = per_group * x.plane();
  FeatureMap out(C, x.height(), x.width());
  for (std::size_t g = 0; g < p.groups; ++g) {
    const std::size_t begin = g * per_group * x.plane();
    std::span<const double> src = x.data().subspan(begin, count);
    double mean = 0.0;
    for (double v : src) mean += v;
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (double v : src) var += (v - mean) * (v - mean);
    var /= static_cast<double>(count);
    const double inv_std = 1.0 / std::sqrt(var + p.epsilon);
    for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
      std::span<const double> in_c = x.channel(c);
      std::span<double> out_c = out.channel(c);
      for (std::size_t i = 0; i < in_c.size(); ++i) out_c[i] = p.gamma[c] * ((in_c[i] - mean) * inv_std) + p.beta[c];
    }
  }
  return out;
}

inline double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline double swish(double v) { return v * sigmoid(v); }

inline FeatureMap sigmoid(FeatureMap x) {
  for (double& v : x.data()) v = sigmoid(v);
  return x;
}

inline FeatureMap swish(FeatureMap x) {
  for (double& v : x.data()) v = swish(v);
  return x;
}

namespace detail {
inline void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}
}  // namespace detail

inline FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
  detail::require_same_shape(a, b, "add");
  FeatureMap out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

inline FeatureMap mul(const FeatureMap& a, const FeatureMap& b) {
  detail::require_same_shape(a, b, "mul");
  FeatureMap out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return out;
}

inline FeatureMap scale(FeatureMap x, double s) {
  for (double& v : x.data()) v *= s;
  return x;
}

// Multiplies every channel of `x` by the single-channel map `attention`.
inline FeatureMap mul_broadcast(const FeatureMap& x, const FeatureMap& attention) {
  if (attention.channels() != 1 || attention.height() != x.height() || attention.width() != x.width()) {
    throw ShapeError("mul_broadcast: attention " + to_string(attention.shape()) + " does not match " +
                     to_string(x.shape()));
  }
  FeatureMap out = x;
  auto a = attention.channel(0);
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= a[i];
  }
  return out;
}

// Max and mean over dimension 0: channel 0 is the max, channel 1 the mean.
inline FeatureMap channel_pool(const FeatureMap& x) {
  if (x.channels() == 0 || x.plane() == 0) throw ShapeError("channel_pool: empty input");
  FeatureMap out(2, x.height(), x.width());
  auto mx = out.channel(0);
  auto mean = out.channel(1);
  auto first = x.channel(0);
  std::copy(first.begin(), first.end(), mx.begin());
  std::copy(first.begin(), first.end(), mean.begin());
  for (std::size_t c = 1; c < x.channels(); ++c) {
    auto src = x.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      mx[i] = std::max(mx[i], src[i]);
      mean[i] += src[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(x.channels());
  for (double& v : mean) v *= inv;
  return out;
}

enum class RotationAxis { H, W };
enum class RotationDirection { Ccw, Cw };

// Quarter turn of the (C, W) plane (axis H) or the (C, H) plane (axis W),
// with dimension 0 as the row axis of the plane. Counter-clockwise follows
// numpy.rot90 (from the first plane axis toward the second). Output dims:
// axis H -> W x H x C, axis W -> H x C x W.
inline FeatureMap rotate90(const FeatureMap& x, RotationAxis axis, RotationDirection dir) {
  const std::size_t C = x.channels(), H = x.height(), W = x.width();
  if (axis == RotationAxis::H) {
    FeatureMap out(W, H, C);
    for (std::size_t i = 0; i < W; ++i)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t j = 0; j < C; ++j)
          out(i, h, j) = dir == RotationDirection::Ccw ? x(j, h, W - 1 - i) : x(C - 1 - j, h, i);
    return out;
  }
  FeatureMap out(H, C, W);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < C; ++j)
      for (std::size_t w = 0; w < W; ++w)
        out(i, j, w) = dir == RotationDirection::Ccw ? x(j, H - 1 - i, w) : x(C - 1 - j, i, w);
  return out;
}

inline FeatureMap upsample_nearest2x(const FeatureMap& x) {
  FeatureMap out(x.channels(), 2 * x.height(), 2 * x.width());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t xx = 0; xx < out.width(); ++xx) out(c, y, xx) = x(c, y / 2, xx / 2);
  return out;
}

// Keeps the top-left height x width window.
inline FeatureMap crop(const FeatureMap& x, std::size_t height, std::size_t width) {
  if (height > x.height() || width > x.width()) throw ShapeError("crop: window exceeds input " + to_string(x.shape()));
  FeatureMap out(x.channels(), height, width);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t xx = 0; xx < width; ++xx) out(c, y, xx) = x(c, y, xx);
  return out;
}

inline FeatureMap concat_channels(std::span<const FeatureMap> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const std::size_t H = parts.front().height(), W = parts.front().width();
  std::size_t C = 0;
  for (const FeatureMap& p : parts) {
    if (p.height() != H || p.width() != W) {
      throw ShapeError("concat_channels: spatial mismatch " + to_string(parts.front().shape()) + " vs " +
                       to_string(p.shape()));
    }
    C += p.channels();
  }
  std::vector<double> data;
  data.reserve(C * H * W);
  for (const FeatureMap& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return FeatureMap(C, H, W, std::move(data));
}

inline FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  const FeatureMap parts[] = {a, b};
  return concat_channels(std::span<const FeatureMap>(parts));
}

// Normalized coordinate grid in [-1, 1]: channel 0 varies along columns,
// channel 1 along rows. A length-1 axis maps to 0.
inline FeatureMap coord_channels(std::size_t height, std::size_t width) {
  FeatureMap out(2, height, width);
  auto norm = [](std::size_t i, std::size_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
  };
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      out(0, y, x) = norm(x, width);
      out(1, y, x) = norm(y, height);
    }
  return out;
}

}  // namespace posekit

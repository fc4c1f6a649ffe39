#pragma once

// Texture-shape guided feature pyramid: attention fusion of a high-frequency
// map with an upsampled low-frequency map, and the five-level pyramid built
// from three backbone stages.

#include <array>
#include <cstddef>
#include <string>

#include "posekit/tensor.hpp"

namespace posekit {

// Kernels of one fusion block. The spatial conv maps the 2-channel pooled
// concatenation to one attention map; the cross convs do the same for the
// H-rotated and W-rotated orientation pairs.
struct TsfmWeights {
  ConvParams spatial_conv;
  ConvParams cross_conv_h;
  ConvParams cross_conv_w;

  static constexpr std::size_t kKernel = 7;

  static TsfmWeights zeros() {
    return {ConvParams::zeros(1, 2, kKernel, kKernel), ConvParams::zeros(1, 2, kKernel, kKernel),
            ConvParams::zeros(1, 2, kKernel, kKernel)};
  }

  static TsfmWeights random(Rng& rng) {
    return {ConvParams::random(rng, 1, 2, kKernel, kKernel), ConvParams::random(rng, 1, 2, kKernel, kKernel),
            ConvParams::random(rng, 1, 2, kKernel, kKernel)};
  }

  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".spatial", spatial_conv);
    v(prefix + ".cross_h", cross_conv_h);
    v(prefix + ".cross_w", cross_conv_w);
  }
};

// Learned: attention = sigmoid(conv(pool(...))). Bypass: attention == 1.
enum class AttentionMode { Learned, Bypass };

struct EnhancedPair {
  FeatureMap high;
  FeatureMap low;
};

namespace detail {

inline FeatureMap attention_map(const FeatureMap& a, const FeatureMap& b, const ConvParams& conv,
                                AttentionMode mode) {
  if (mode == AttentionMode::Bypass) return FeatureMap(1, a.height(), a.width(), 1.0);
  return sigmoid(conv2d(channel_pool(concat_channels(a, b)), conv));
}

inline RotationDirection inverse(RotationDirection d) {
  return d == RotationDirection::Ccw ? RotationDirection::Cw : RotationDirection::Ccw;
}

}  // namespace detail

// Stage one: one spatial attention map shared by both enhancement lines.
// high' = high + low * A, low' = low + high * A.
inline EnhancedPair ts_fm_enhance(const FeatureMap& high, const FeatureMap& low, const ConvParams& spatial_conv,
                                  AttentionMode mode = AttentionMode::Learned) {
  if (high.shape() != low.shape()) {
    throw ShapeError("ts_fm_fuse: high/low shape mismatch " + to_string(high.shape()) + " vs " +
                     to_string(low.shape()));
  }
  const FeatureMap attention = detail::attention_map(high, low, spatial_conv, mode);
  return {add(high, mul_broadcast(low, attention)), add(low, mul_broadcast(high, attention))};
}

// Stage two: rotate both enhanced maps a quarter turn about H (and, in the
// parallel branch, about W), reweight each by the attention of its rotated
// pair, rotate back and average the four results.
inline FeatureMap ts_fm_cross(const EnhancedPair& enhanced, const ConvParams& cross_conv_h,
                              const ConvParams& cross_conv_w, AttentionMode mode = AttentionMode::Learned) {
  auto branch = [&](RotationAxis axis, const ConvParams& conv) {
    const FeatureMap high = rotate90(enhanced.high, axis, RotationDirection::Ccw);
    const FeatureMap low = rotate90(enhanced.low, axis, RotationDirection::Ccw);
    const FeatureMap attention = detail::attention_map(high, low, conv, mode);
    const auto back = detail::inverse(RotationDirection::Ccw);
    return std::array<FeatureMap, 2>{rotate90(mul_broadcast(high, attention), axis, back),
                                     rotate90(mul_broadcast(low, attention), axis, back)};
  };
  const auto h = branch(RotationAxis::H, cross_conv_h);
  const auto w = branch(RotationAxis::W, cross_conv_w);
  // (t1 + t2) + (t3 + t4): with unit attention this is exactly mean(high, low).
  return scale(add(add(h[0], h[1]), add(w[0], w[1])), 0.25);
}

inline FeatureMap ts_fm_fuse(const FeatureMap& high, const FeatureMap& low, const TsfmWeights& w,
                             AttentionMode mode = AttentionMode::Learned) {
  return ts_fm_cross(ts_fm_enhance(high, low, w.spatial_conv, mode), w.cross_conv_h, w.cross_conv_w, mode);
}

inline constexpr std::array<std::size_t, 5> kPyramidStrides = {8, 16, 32, 64, 128};

// P3..P7.
struct PyramidFeatures {
  std::array<FeatureMap, 5> levels;

  static constexpr std::size_t stride(std::size_t level) { return kPyramidStrides[level]; }
};

struct FpnWeights {
  ConvParams lateral3, lateral4, lateral5;  // 1x1 projections to `width` channels
  TsfmWeights fuse4, fuse3;                 // P5 -> P4 and P4 -> P3 merges
  ConvParams down6, down7;                  // 3x3 stride-2 output-side downsampling

  std::size_t width() const { return lateral5.out_channels; }

  static FpnWeights zeros(std::size_t c3, std::size_t c4, std::size_t c5, std::size_t width = 256) {
    return {ConvParams::zeros(width, c3, 1, 1),     ConvParams::zeros(width, c4, 1, 1),
            ConvParams::zeros(width, c5, 1, 1),     TsfmWeights::zeros(),
            TsfmWeights::zeros(),                   ConvParams::zeros(width, width, 3, 3, 2),
            ConvParams::zeros(width, width, 3, 3, 2)};
  }

  static FpnWeights random(Rng& rng, std::size_t c3, std::size_t c4, std::size_t c5, std::size_t width = 256) {
    return {ConvParams::random(rng, width, c3, 1, 1),
            ConvParams::random(rng, width, c4, 1, 1),
            ConvParams::random(rng, width, c5, 1, 1),
            TsfmWeights::random(rng),
            TsfmWeights::random(rng),
            ConvParams::random(rng, width, width, 3, 3, 2),
            ConvParams::random(rng, width, width, 3, 3, 2)};
  }

  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".lateral3", lateral3);
    v(prefix + ".lateral4", lateral4);
    v(prefix + ".lateral5", lateral5);
    fuse4.visit(prefix + ".fuse4", v);
    fuse3.visit(prefix + ".fuse3", v);
    v(prefix + ".down6", down6);
    v(prefix + ".down7", down7);
  }
};

inline std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

inline PyramidFeatures ts_fpn_forward(const FeatureMap& c3, const FeatureMap& c4, const FeatureMap& c5,
                                      const FpnWeights& w, AttentionMode mode = AttentionMode::Learned) {
  auto dyadic = [](const FeatureMap& lo, const FeatureMap& hi) {
    return hi.height() == ceil_half(lo.height()) && hi.width() == ceil_half(lo.width());
  };
  if (!dyadic(c3, c4) || !dyadic(c4, c5)) {
    throw ShapeError("ts_fpn_forward: backbone maps are not dyadic: " + to_string(c3.shape()) + ", " +
                     to_string(c4.shape()) + ", " + to_string(c5.shape()));
  }
  const FeatureMap lat3 = conv2d(c3, w.lateral3);
  const FeatureMap lat4 = conv2d(c4, w.lateral4);

  PyramidFeatures out;
  out.levels[2] = conv2d(c5, w.lateral5);
  const FeatureMap up5 = crop(upsample_nearest2x(out.levels[2]), lat4.height(), lat4.width());
  out.levels[1] = ts_fm_fuse(lat4, up5, w.fuse4, mode);
  const FeatureMap up4 = crop(upsample_nearest2x(out.levels[1]), lat3.height(), lat3.width());
  out.levels[0] = ts_fm_fuse(lat3, up4, w.fuse3, mode);
  out.levels[3] = conv2d(out.levels[2], w.down6);
  out.levels[4] = conv2d(out.levels[3], w.down7);
  return out;
}

}  // namespace posekit

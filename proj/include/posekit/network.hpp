#pragma once

#include <array>
#include <cstddef>

#include "posekit/fpn.hpp"
#include "posekit/heads.hpp"

namespace posekit {

// Channel widths of the whole network. The defaults match a ResNet-50
// backbone feeding a 256-channel pyramid.
struct NetworkConfig {
  std::size_t c3_channels = 512;
  std::size_t c4_channels = 1024;
  std::size_t c5_channels = 2048;
  std::size_t fpn_width = 256;
  std::size_t head_width = 256;
  std::size_t num_classes = 1;
  std::size_t gn_groups = 32;

  HeadConfig head() const { return {fpn_width, head_width, num_classes, gn_groups}; }
  bool operator==(const NetworkConfig&) const = default;
};

struct NetworkWeights {
  NetworkConfig config;
  FpnWeights fpn;
  HeadWeights heads;

  static NetworkWeights zeros(const NetworkConfig& c) {
    return {c, FpnWeights::zeros(c.c3_channels, c.c4_channels, c.c5_channels, c.fpn_width), HeadWeights::zeros(c.head())};
  }
  static NetworkWeights random(Rng& rng, const NetworkConfig& c) {
    NetworkWeights w{c, FpnWeights::random(rng, c.c3_channels, c.c4_channels, c.c5_channels, c.fpn_width), {}};
    w.heads = HeadWeights::random(rng, c.head());
    return w;
  }

  template <class Visitor>
  void visit(Visitor&& v) {
    fpn.visit("fpn", v);
    heads.visit("head", v);
  }
};

struct BackboneFeatures {
  FeatureMap c3, c4, c5;
};

// Grid sizes of the three backbone stages for an image (strides 8, 16, 32).
inline std::array<Shape3, 3> backbone_shapes(const NetworkConfig& c, std::size_t image_w, std::size_t image_h) {
  const std::size_t w3 = (image_w + 7) / 8, h3 = (image_h + 7) / 8;
  const std::size_t w4 = ceil_half(w3), h4 = ceil_half(h3);
  return {Shape3{c.c3_channels, h3, w3}, Shape3{c.c4_channels, h4, w4},
          Shape3{c.c5_channels, ceil_half(h4), ceil_half(w4)}};
}

// Deterministic stand-in for backbone activations.
inline BackboneFeatures synthetic_backbone(Rng& rng, const NetworkConfig& c, std::size_t image_w,
                                           std::size_t image_h) {
  const auto s = backbone_shapes(c, image_w, image_h);
  return {random_feature_map(rng, s[0].channels, s[0].height, s[0].width, 0.0, 1.0),
          random_feature_map(rng, s[1].channels, s[1].height, s[1].width, 0.0, 1.0),
          random_feature_map(rng, s[2].channels, s[2].height, s[2].width, 0.0, 1.0)};
}

inline RawGridPredictions network_forward(const BackboneFeatures& in, const NetworkWeights& w,
                                          std::size_t iterations = 1) {
  return heads_forward(ts_fpn_forward(in.c3, in.c4, in.c5, w.fpn), w.heads, iterations);
}

}  // namespace posekit

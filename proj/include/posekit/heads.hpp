#pragma once

// Prediction heads shared across pyramid levels: class and box towers, the
// rotation and translation regressors (initialization module followed by
// residual iteration modules), and decoding of dense grids into poses.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "posekit/camera.hpp"
#include "posekit/fpn.hpp"
#include "posekit/rotation.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

struct DsConvParams {
  ConvParams depthwise;  // k x k, one filter per channel
  ConvParams pointwise;  // 1 x 1 dense

  static DsConvParams zeros(std::size_t in, std::size_t out, std::size_t k = 3) {
    return {ConvParams::zeros(in, in, k, k, 1, in), ConvParams::zeros(out, in, 1, 1)};
  }
  static DsConvParams random(Rng& rng, std::size_t in, std::size_t out, std::size_t k = 3, double gain = 1.0) {
    return {ConvParams::random(rng, in, in, k, k, 1, in, gain), ConvParams::random(rng, out, in, 1, 1, 1, 1, gain)};
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".dw", depthwise);
    v(prefix + ".pw", pointwise);
  }
};

inline FeatureMap apply(const FeatureMap& x, const DsConvParams& p) {
  return depthwise_separable_conv(x, p.depthwise, p.pointwise);
}

// DS-conv followed by group norm and swish.
struct DsBlock {
  DsConvParams conv;
  GroupNormParams norm;

  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    conv.visit(prefix, v);
    v(prefix + ".gn", norm);
  }
};

inline FeatureMap apply(const FeatureMap& x, const DsBlock& b) { return swish(group_norm(apply(x, b.conv), b.norm)); }

// 3x3 conv followed by group norm and swish.
struct ConvBlock {
  ConvParams conv;
  GroupNormParams norm;

  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix, conv);
    v(prefix + ".gn", norm);
  }
};

inline FeatureMap apply(const FeatureMap& x, const ConvBlock& b) {
  return swish(group_norm(conv2d(x, b.conv), b.norm));
}

struct HeadConfig {
  std::size_t in_channels = 256;
  std::size_t width = 256;
  std::size_t num_classes = 1;
  std::size_t gn_groups = 32;
};

// Initialization module: stem conv over (features, coords), three DS blocks
// giving r_pre, then a DS conv down to the branch's output channels (r_init).
struct PinmWeights {
  ConvParams stem;
  std::array<DsBlock, 3> blocks;
  DsConvParams init;

  static PinmWeights zeros(const HeadConfig& c, std::size_t out) {
    PinmWeights w;
    w.stem = ConvParams::zeros(c.width, c.in_channels + 2, 3, 3);
    for (auto& b : w.blocks) b = {DsConvParams::zeros(c.width, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.init = DsConvParams::zeros(c.width, out);
    return w;
  }
  static PinmWeights random(Rng& rng, const HeadConfig& c, std::size_t out) {
    PinmWeights w;
    w.stem = ConvParams::random(rng, c.width, c.in_channels + 2, 3, 3);
    for (auto& b : w.blocks)
      b = {DsConvParams::random(rng, c.width, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.init = DsConvParams::random(rng, c.width, out, 3, 0.1);
    return w;
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".stem", stem);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(prefix + ".block" + std::to_string(i), v);
    init.visit(prefix + ".init", v);
  }
};

// Iteration module: two DS blocks over concat(r_pre, r_cur) and a DS
// compressor producing the residual.
struct PitmWeights {
  std::array<DsBlock, 2> blocks;
  DsConvParams compress;

  static PitmWeights zeros(const HeadConfig& c, std::size_t out) {
    PitmWeights w;
    w.blocks[0] = {DsConvParams::zeros(c.width + out, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.blocks[1] = {DsConvParams::zeros(c.width, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.compress = DsConvParams::zeros(c.width, out);
    return w;
  }
  static PitmWeights random(Rng& rng, const HeadConfig& c, std::size_t out) {
    PitmWeights w;
    w.blocks[0] = {DsConvParams::random(rng, c.width + out, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.blocks[1] = {DsConvParams::random(rng, c.width, c.width), GroupNormParams::identity(c.width, c.gn_groups)};
    w.compress = DsConvParams::random(rng, c.width, out, 3, 0.1);
    return w;
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(prefix + ".block" + std::to_string(i), v);
    compress.visit(prefix + ".compress", v);
  }
};

struct RegressionBranchWeights {
  PinmWeights pinm;
  PitmWeights pitm;

  std::size_t out_channels() const { return pinm.init.pointwise.out_channels; }

  static RegressionBranchWeights zeros(const HeadConfig& c, std::size_t out) {
    return {PinmWeights::zeros(c, out), PitmWeights::zeros(c, out)};
  }
  static RegressionBranchWeights random(Rng& rng, const HeadConfig& c, std::size_t out) {
    return {PinmWeights::random(rng, c, out), PitmWeights::random(rng, c, out)};
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    pinm.visit(prefix + ".pinm", v);
    pitm.visit(prefix + ".pitm", v);
  }
};

struct TowerWeights {
  std::array<ConvBlock, 4> blocks;
  ConvParams output;

  static TowerWeights zeros(const HeadConfig& c, std::size_t out) {
    TowerWeights w;
    std::size_t in = c.in_channels;
    for (auto& b : w.blocks) {
      b = {ConvParams::zeros(c.width, in, 3, 3), GroupNormParams::identity(c.width, c.gn_groups)};
      in = c.width;
    }
    w.output = ConvParams::zeros(out, c.width, 3, 3);
    return w;
  }
  static TowerWeights random(Rng& rng, const HeadConfig& c, std::size_t out) {
    TowerWeights w;
    std::size_t in = c.in_channels;
    for (auto& b : w.blocks) {
      b = {ConvParams::random(rng, c.width, in, 3, 3), GroupNormParams::identity(c.width, c.gn_groups)};
      in = c.width;
    }
    w.output = ConvParams::random(rng, out, c.width, 3, 3);
    return w;
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(prefix + ".block" + std::to_string(i), v);
    v(prefix + ".out", output);
  }
};

// One weight set, applied identically at every pyramid level.
struct HeadWeights {
  TowerWeights class_tower;
  TowerWeights bbox_tower;
  RegressionBranchWeights rotation;        // 6 channels
  RegressionBranchWeights translation_xy;  // (dx, dy)
  RegressionBranchWeights translation_z;   // tz

  static HeadWeights zeros(const HeadConfig& c) {
    return {TowerWeights::zeros(c, c.num_classes), TowerWeights::zeros(c, 4), RegressionBranchWeights::zeros(c, 6),
            RegressionBranchWeights::zeros(c, 2), RegressionBranchWeights::zeros(c, 1)};
  }
  static HeadWeights random(Rng& rng, const HeadConfig& c) {
    HeadWeights w;
    w.class_tower = TowerWeights::random(rng, c, c.num_classes);
    w.bbox_tower = TowerWeights::random(rng, c, 4);
    w.rotation = RegressionBranchWeights::random(rng, c, 6);
    w.translation_xy = RegressionBranchWeights::random(rng, c, 2);
    w.translation_z = RegressionBranchWeights::random(rng, c, 1);
    return w;
  }
  template <class Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    class_tower.visit(prefix + ".cls", v);
    bbox_tower.visit(prefix + ".box", v);
    rotation.visit(prefix + ".rot", v);
    translation_xy.visit(prefix + ".txy", v);
    translation_z.visit(prefix + ".tz", v);
  }
};

struct PinmOutput {
  FeatureMap r_pre;
  FeatureMap r_init;
};

inline PinmOutput pinm_forward(const FeatureMap& f, const PinmWeights& w) {
  if (f.channels() + 2 != w.stem.in_channels) {
    throw ShapeError("pinm_forward: expected " + std::to_string(w.stem.in_channels - 2) + " channels, got " +
                     std::to_string(f.channels()));
  }
  FeatureMap x = conv2d(concat_channels(f, coord_channels(f.height(), f.width())), w.stem);
  for (const DsBlock& b : w.blocks) x = apply(x, b);
  FeatureMap r_init = apply(x, w.init);
  return {std::move(x), std::move(r_init)};
}

// r_out = r_cur + delta(concat(r_pre, r_cur)).
inline FeatureMap pitm_forward(const FeatureMap& r_pre, const FeatureMap& r_cur, const PitmWeights& w) {
  FeatureMap x = concat_channels(r_pre, r_cur);
  for (const DsBlock& b : w.blocks) x = apply(x, b);
  FeatureMap delta = apply(x, w.compress);
  return add(r_cur, delta);
}

inline FeatureMap regression_branch_forward(const FeatureMap& f, const RegressionBranchWeights& w,
                                            std::size_t iterations = 1) {
  PinmOutput init = pinm_forward(f, w.pinm);
  FeatureMap r = std::move(init.r_init);
  for (std::size_t i = 0; i < iterations; ++i) r = pitm_forward(init.r_pre, r, w.pitm);
  return r;
}

inline FeatureMap rotation_head_forward(const FeatureMap& f, const HeadWeights& w, std::size_t iterations = 1) {
  return regression_branch_forward(f, w.rotation, iterations);
}

// (dx, dy, tz) from two independent branches.
inline FeatureMap translation_head_forward(const FeatureMap& f, const HeadWeights& w, std::size_t iterations = 1) {
  return concat_channels(regression_branch_forward(f, w.translation_xy, iterations),
                         regression_branch_forward(f, w.translation_z, iterations));
}

inline FeatureMap tower_forward(const FeatureMap& f, const TowerWeights& w) {
  FeatureMap x = f;
  for (const ConvBlock& b : w.blocks) x = apply(x, b);
  return conv2d(x, w.output);
}

struct ClassBoxOutput {
  FeatureMap class_logits;  // num_classes x H x W
  FeatureMap bbox;          // 4 x H x W: left, top, right, bottom
};

inline ClassBoxOutput class_bbox_towers_forward(const FeatureMap& f, const HeadWeights& w) {
  return {tower_forward(f, w.class_tower), tower_forward(f, w.bbox_tower)};
}

struct LevelPredictions {
  std::size_t stride = 8;
  FeatureMap class_logits;
  FeatureMap bbox;
  FeatureMap r6d;
  FeatureMap trans;

  void validate() const {
    const std::size_t H = class_logits.height(), W = class_logits.width();
    auto ok = [&](const FeatureMap& m, std::size_t c) { return m.channels() == c && m.height() == H && m.width() == W; };
    if (class_logits.channels() == 0 || !ok(bbox, 4) || !ok(r6d, 6) || !ok(trans, 3)) {
      throw ShapeError("level predictions are not shape-consistent");
    }
  }
};

using RawGridPredictions = std::vector<LevelPredictions>;

inline RawGridPredictions heads_forward(const PyramidFeatures& pyramid, const HeadWeights& w,
                                        std::size_t iterations = 1) {
  RawGridPredictions out;
  for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
    const FeatureMap& f = pyramid.levels[l];
    ClassBoxOutput cb = class_bbox_towers_forward(f, w);
    out.push_back({PyramidFeatures::stride(l), std::move(cb.class_logits), std::move(cb.bbox),
                   rotation_head_forward(f, w, iterations), translation_head_forward(f, w, iterations)});
  }
  return out;
}

struct BoxXyxy {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double area() const { return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1); }
};

inline double iou(const BoxXyxy& a, const BoxXyxy& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct PoseEstimate {
  std::size_t class_id = 0;  // class channel index
  double score = 0.0;
  RotationMatrix R;
  TranslationVector t;
  BoxXyxy box;
  std::size_t level = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

enum class DepthEncoding { Direct, Log };

struct DecodeOptions {
  double score_thresh = 0.4;
  double nms_iou = 0.6;
  bool nms = true;
  DepthEncoding depth = DepthEncoding::Direct;
};

struct DecodeResult {
  std::vector<PoseEstimate> estimates;
  std::size_t above_threshold = 0;  // cells passing the score threshold
  std::size_t dropped_degenerate = 0;
};

// Greedy within-class suppression; input must be sorted by descending score.
inline std::vector<PoseEstimate> nms_per_class(std::vector<PoseEstimate> sorted, double iou_thresh) {
  std::vector<PoseEstimate> kept;
  std::vector<bool> suppressed(sorted.size(), false);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(sorted[i]);
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      if (!suppressed[j] && sorted[j].class_id == sorted[i].class_id && iou(sorted[i].box, sorted[j].box) > iou_thresh)
        suppressed[j] = true;
    }
  }
  return kept;
}

// Every cell is decoded (score, rotation, translation, box) before the
// threshold is applied, so the cost is set by the grid size rather than the
// number of objects found. Cells with score <= score_thresh are dropped; cells
// whose 6D vector is degenerate or whose depth is not positive are dropped
// and counted.
inline DecodeResult decode_predictions(const RawGridPredictions& raw, const CameraIntrinsics& k,
                                       const DecodeOptions& opt = {}) {
  k.validate();
  DecodeResult result;
  std::vector<PoseEstimate> candidates;
  for (std::size_t l = 0; l < raw.size(); ++l) {
    const LevelPredictions& lv = raw[l];
    lv.validate();
    const std::size_t H = lv.class_logits.height(), W = lv.class_logits.width();
    const double s = static_cast<double>(lv.stride);
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        std::size_t best = 0;
        double best_logit = lv.class_logits(0, i, j);
        for (std::size_t c = 1; c < lv.class_logits.channels(); ++c) {
          if (lv.class_logits(c, i, j) > best_logit) {
            best_logit = lv.class_logits(c, i, j);
            best = c;
          }
        }
        const double score = sigmoid(best_logit);
        Rot6D r6;
        for (std::size_t c = 0; c < 6; ++c) r6.r[c] = lv.r6d(c, i, j);
        const auto R = try_rot6d_to_matrix(r6);
        const double tz_raw = lv.trans(2, i, j);
        const double tz = opt.depth == DepthEncoding::Log ? std::exp(tz_raw) : tz_raw;
        const AnchorPoint a = cell_anchor(i, j, lv.stride);
        const bool valid = R.has_value() && tz > 0.0 && std::isfinite(tz);
        PoseEstimate e;
        e.class_id = best;
        e.score = score;
        e.level = l;
        e.row = i;
        e.col = j;
        if (valid) {
          e.R = *R;
          e.t = recover_translation({lv.trans(0, i, j), lv.trans(1, i, j), tz}, a, k);
        }
        e.box = {a.ax - std::max(0.0, lv.bbox(0, i, j)) * s, a.ay - std::max(0.0, lv.bbox(1, i, j)) * s,
                 a.ax + std::max(0.0, lv.bbox(2, i, j)) * s, a.ay + std::max(0.0, lv.bbox(3, i, j)) * s};
        if (!(score > opt.score_thresh)) continue;
        ++result.above_threshold;
        if (!valid) {
          ++result.dropped_degenerate;
          continue;
        }
        candidates.push_back(e);
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const PoseEstimate& a, const PoseEstimate& b) { return a.score > b.score; });
  result.estimates = opt.nms ? nms_per_class(std::move(candidates), opt.nms_iou) : std::move(candidates);
  return result;
}

}  // namespace posekit

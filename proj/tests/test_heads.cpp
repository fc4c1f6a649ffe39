#include <gtest/gtest.h>

#include "oracles.hpp"
#include "posekit/heads.hpp"
#include "posekit/network.hpp"
#include "posekit/random.hpp"

using namespace posekit;

namespace {

const HeadConfig kSmall{4, 4, 2, 2};

// Depthwise center tap 1 and pointwise identity: a DS conv that copies its input.
DsConvParams identity_ds(std::size_t c) {
  DsConvParams p = DsConvParams::zeros(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    p.depthwise.weight(i, 0, 1, 1) = 1.0;
    p.pointwise.weight(i, i, 0, 0) = 1.0;
  }
  return p;
}

LevelPredictions constant_level(std::size_t H, std::size_t W, double logit) {
  LevelPredictions lv{8, FeatureMap(1, H, W, logit), FeatureMap(4, H, W, 1.0), FeatureMap(6, H, W), FeatureMap(3, H, W)};
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      lv.r6d(0, i, j) = 1.0;
      lv.r6d(4, i, j) = 1.0;
      lv.trans(2, i, j) = 1.0;
    }
  return lv;
}

}  // namespace

TEST(Pinm, ZeroWeightsGiveZero) {
  Rng rng(1);
  const PinmOutput out = pinm_forward(random_feature_map(rng, 4, 5, 6), PinmWeights::zeros(kSmall, 6));
  EXPECT_EQ(out.r_pre.shape(), (Shape3{4, 5, 6}));
  EXPECT_EQ(out.r_init.shape(), (Shape3{6, 5, 6}));
  for (double v : out.r_pre.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.r_init.data()) EXPECT_EQ(v, 0.0);
}

// Stem picks only the x-coordinate channel, DS convs copy their input, so the
// stem output at column j is 2j/(W-1)-1 and every later map depends on j only.
// The oracle replays group norm + swish on the per-column values.
TEST(Pinm, CoordinateChannelReachesEveryColumn) {
  const std::size_t H = 4, W = 7, C = 2;
  const HeadConfig c{3, C, 1, 1};
  PinmWeights w = PinmWeights::zeros(c, 1);
  for (std::size_t o = 0; o < C; ++o) w.stem.weight(o, 3, 1, 1) = 1.0;
  for (auto& b : w.blocks) b.conv = identity_ds(C);

  Rng rng(2);
  const FeatureMap f = random_feature_map(rng, 3, H, W);
  const FeatureMap stem = conv2d(concat_channels(f, coord_channels(H, W)), w.stem);
  for (std::size_t o = 0; o < C; ++o)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) EXPECT_DOUBLE_EQ(stem(o, i, j), 2.0 * j / (W - 1) - 1.0);

  std::vector<double> col(W);
  for (std::size_t j = 0; j < W; ++j) col[j] = 2.0 * j / (W - 1) - 1.0;
  for (int b = 0; b < 3; ++b) {
    double mean = 0.0, var = 0.0;
    for (double v : col) mean += v / W;
    for (double v : col) var += (v - mean) * (v - mean) / W;
    for (double& v : col) {
      const double z = (v - mean) / std::sqrt(var + 1e-5);
      v = z / (1.0 + std::exp(-z));
    }
  }
  const PinmOutput out = pinm_forward(f, w);
  for (std::size_t o = 0; o < C; ++o)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) EXPECT_NEAR(out.r_pre(o, i, j), col[j], 1e-12);
}

TEST(Pinm, RejectsWrongChannels) {
  EXPECT_THROW(pinm_forward(FeatureMap(3, 4, 4), PinmWeights::zeros(kSmall, 6)), ShapeError);
}

TEST(Pitm, ZeroWeightsAreIdentity) {
  Rng rng(3);
  const FeatureMap r_pre = random_feature_map(rng, 4, 5, 5), r_init = random_feature_map(rng, 6, 5, 5);
  EXPECT_EQ(pitm_forward(r_pre, r_init, PitmWeights::zeros(kSmall, 6)), r_init);
}

TEST(Pitm, ConstantResidualAddsOne) {
  Rng rng(4);
  PitmWeights w = PitmWeights::zeros(kSmall, 6);
  std::fill(w.compress.pointwise.bias.begin(), w.compress.pointwise.bias.end(), 1.0);
  const FeatureMap r_pre = random_feature_map(rng, 4, 5, 5), r_init = random_feature_map(rng, 6, 5, 5);
  EXPECT_LT(oracle::max_abs_diff(pitm_forward(r_pre, r_init, w), add(r_init, FeatureMap(6, 5, 5, 1.0))), 1e-15);
}

TEST(RegressionBranch, ZeroIterationWeightsKeepInit) {
  Rng rng(5);
  RegressionBranchWeights w = RegressionBranchWeights::random(rng, kSmall, 6);
  w.pitm = PitmWeights::zeros(kSmall, 6);
  const FeatureMap f = random_feature_map(rng, 4, 6, 5);
  const FeatureMap init = pinm_forward(f, w.pinm).r_init;
  for (std::size_t it : {1u, 2u, 3u}) EXPECT_EQ(regression_branch_forward(f, w, it), init);
}

TEST(RegressionBranch, RandomIterationWeightsChangeOutput) {
  Rng rng(6);
  const RegressionBranchWeights w = RegressionBranchWeights::random(rng, kSmall, 6);
  const FeatureMap f = random_feature_map(rng, 4, 6, 5);
  EXPECT_GT(oracle::max_abs_diff(regression_branch_forward(f, w, 1), pinm_forward(f, w.pinm).r_init), 0.0);
}

TEST(Heads, ZeroWeightsGiveZeroGrids) {
  Rng rng(7);
  const HeadWeights w = HeadWeights::zeros(kSmall);
  const FeatureMap f = random_feature_map(rng, 4, 3, 4);
  const FeatureMap r = rotation_head_forward(f, w), t = translation_head_forward(f, w);
  EXPECT_EQ(r.shape(), (Shape3{6, 3, 4}));
  EXPECT_EQ(t.shape(), (Shape3{3, 3, 4}));
  for (double v : r.data()) EXPECT_EQ(v, 0.0);
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
  const ClassBoxOutput cb = class_bbox_towers_forward(f, w);
  EXPECT_EQ(cb.class_logits.shape(), (Shape3{2, 3, 4}));
  EXPECT_EQ(cb.bbox.shape(), (Shape3{4, 3, 4}));
  for (double v : cb.class_logits.data()) EXPECT_EQ(sigmoid(v), 0.5);
}

TEST(Heads, TranslationBranchesAreIndependent) {
  Rng rng(8);
  HeadWeights w = HeadWeights::random(rng, kSmall);
  const FeatureMap f = random_feature_map(rng, 4, 3, 4);
  const FeatureMap before = translation_head_forward(f, w);
  w.translation_z = RegressionBranchWeights::zeros(kSmall, 1);
  const FeatureMap after = translation_head_forward(f, w);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(before(c, i, j), after(c, i, j));
  for (double v : after.channel(2)) EXPECT_EQ(v, 0.0);
}

TEST(Heads, SharedAcrossLevels) {
  Rng rng(9);
  const HeadWeights w = HeadWeights::random(rng, kSmall);
  const FeatureMap f = random_feature_map(rng, 4, 4, 4);
  PyramidFeatures p;
  for (auto& level : p.levels) level = f;
  const RawGridPredictions raw = heads_forward(p, w);
  ASSERT_EQ(raw.size(), 5u);
  for (std::size_t l = 1; l < 5; ++l) {
    EXPECT_EQ(raw[l].stride, PyramidFeatures::stride(l));
    EXPECT_EQ(raw[l].class_logits, raw[0].class_logits);
    EXPECT_EQ(raw[l].bbox, raw[0].bbox);
    EXPECT_EQ(raw[l].r6d, raw[0].r6d);
    EXPECT_EQ(raw[l].trans, raw[0].trans);
  }
}

TEST(Heads, TowersAreDeterministic) {
  Rng rng(10);
  const HeadWeights w = HeadWeights::random(rng, kSmall);
  const FeatureMap f = random_feature_map(rng, 4, 5, 5);
  const ClassBoxOutput a = class_bbox_towers_forward(f, w), b = class_bbox_towers_forward(f, w);
  EXPECT_EQ(a.class_logits, b.class_logits);
  EXPECT_EQ(a.bbox, b.bbox);
}

TEST(Iou, Examples) {
  EXPECT_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_EQ(iou({0, 0, 2, 2}, {2, 0, 4, 2}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0);
  EXPECT_EQ(iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(Decode, ZeroLogitsAllSurviveAtDefaultThreshold) {
  DecodeOptions opt;
  opt.nms = false;
  const DecodeResult r = decode_predictions({constant_level(4, 5, 0.0)}, {500, 500, 20, 16}, opt);
  EXPECT_EQ(r.above_threshold, 20u);
  EXPECT_EQ(r.estimates.size(), 20u);
  for (const PoseEstimate& e : r.estimates) EXPECT_EQ(e.score, 0.5);
}

TEST(Decode, ThresholdAboveHalfDropsEverything) {
  DecodeOptions opt;
  opt.score_thresh = 0.51;
  const DecodeResult r = decode_predictions({constant_level(4, 5, 0.0)}, {500, 500, 20, 16}, opt);
  EXPECT_EQ(r.above_threshold, 0u);
  EXPECT_TRUE(r.estimates.empty());
}

TEST(Decode, ThresholdIsStrict) {
  // Logits straddling sigmoid^-1(0.4) in steps of about one score ulp.
  LevelPredictions lv = constant_level(1, 9, 0.0);
  std::size_t expected = 0;
  for (std::size_t j = 0; j < 9; ++j) {
    const double v = std::log(0.4 / 0.6) + (static_cast<double>(j) - 4.0) * 2e-16;
    lv.class_logits(0, 0, j) = v;
    expected += sigmoid(v) > 0.4;
  }
  DecodeOptions opt;
  opt.nms = false;
  const DecodeResult r = decode_predictions({lv}, {500, 500, 20, 16}, opt);
  EXPECT_EQ(r.above_threshold, expected);
  EXPECT_GT(expected, 0u);
  EXPECT_LT(expected, 9u);
  for (const PoseEstimate& e : r.estimates) EXPECT_GT(e.score, 0.4);
}

TEST(Decode, AnchorFeedsTranslation) {
  LevelPredictions lv = constant_level(3, 3, -10.0);
  lv.class_logits(0, 0, 0) = 5.0;
  lv.trans(0, 0, 0) = 10;
  lv.trans(1, 0, 0) = -20;
  const CameraIntrinsics k{500, 500, 320, 240};
  const DecodeResult r = decode_predictions({lv}, k);
  ASSERT_EQ(r.estimates.size(), 1u);
  const TranslationVector expect = recover_translation({10, -20, 1}, {4, 4}, k);
  EXPECT_EQ(r.estimates[0].t.tx, expect.tx);
  EXPECT_EQ(r.estimates[0].t.ty, expect.ty);
  EXPECT_EQ(r.estimates[0].level, 0u);
  EXPECT_EQ(r.estimates[0].R.matrix(), Mat3::Identity());
  EXPECT_EQ(r.estimates[0].box.x1, 4.0 - 8.0);
  EXPECT_EQ(r.estimates[0].box.x2, 4.0 + 8.0);
}

TEST(Decode, DegenerateCellsAreCountedNotFatal) {
  LevelPredictions lv = constant_level(2, 2, 3.0);
  for (std::size_t c = 0; c < 6; ++c) lv.r6d(c, 1, 1) = 0.0;
  lv.trans(2, 0, 1) = -1.0;
  const DecodeResult r = decode_predictions({lv}, {500, 500, 20, 16});
  EXPECT_EQ(r.above_threshold, 4u);
  EXPECT_EQ(r.dropped_degenerate, 2u);
}

TEST(Decode, NmsKeepsBestPerClass) {
  // Overlapping boxes at adjacent cells; classes differ in the second pair.
  LevelPredictions lv{8, FeatureMap(2, 1, 3, -10.0), FeatureMap(4, 1, 3, 4.0), FeatureMap(6, 1, 3), FeatureMap(3, 1, 3)};
  for (std::size_t j = 0; j < 3; ++j) {
    lv.r6d(0, 0, j) = lv.r6d(4, 0, j) = lv.trans(2, 0, j) = 1.0;
  }
  lv.class_logits(0, 0, 0) = 2.0;
  lv.class_logits(0, 0, 1) = 3.0;
  lv.class_logits(1, 0, 2) = 1.0;
  const DecodeResult r = decode_predictions({lv}, {500, 500, 20, 16});
  ASSERT_EQ(r.estimates.size(), 2u);
  EXPECT_EQ(r.estimates[0].col, 1u);
  EXPECT_EQ(r.estimates[1].class_id, 1u);
  DecodeOptions loose;
  loose.nms_iou = 0.99;
  EXPECT_EQ(decode_predictions({lv}, {500, 500, 20, 16}, loose).estimates.size(), 3u);
}

TEST(Decode, SortedByScoreAndMonotoneInThreshold) {
  Rng rng(11);
  LevelPredictions lv{16, random_feature_map(rng, 3, 6, 7, -3, 3), random_feature_map(rng, 4, 6, 7, 0, 2),
                      random_feature_map(rng, 6, 6, 7), random_feature_map(rng, 3, 6, 7, 0.5, 2)};
  std::size_t prev = SIZE_MAX;
  for (double th : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    DecodeOptions opt;
    opt.score_thresh = th;
    const DecodeResult r = decode_predictions({lv}, {500, 500, 20, 16}, opt);
    for (std::size_t i = 1; i < r.estimates.size(); ++i) EXPECT_GE(r.estimates[i - 1].score, r.estimates[i].score);
    EXPECT_LE(r.estimates.size(), prev);
    prev = r.estimates.size();
  }
}

TEST(Decode, LogDepthEncoding) {
  LevelPredictions lv = constant_level(1, 1, 3.0);
  lv.trans(2, 0, 0) = 0.0;
  DecodeOptions opt;
  EXPECT_EQ(decode_predictions({lv}, {500, 500, 20, 16}, opt).dropped_degenerate, 1u);
  opt.depth = DepthEncoding::Log;
  const DecodeResult r = decode_predictions({lv}, {500, 500, 20, 16}, opt);
  ASSERT_EQ(r.estimates.size(), 1u);
  EXPECT_EQ(r.estimates[0].t.tz, 1.0);
}

TEST(Decode, RejectsInconsistentShapes) {
  LevelPredictions lv = constant_level(2, 2, 0.0);
  lv.trans = FeatureMap(3, 2, 3);
  EXPECT_THROW(decode_predictions({lv}, {500, 500, 20, 16}), ShapeError);
}

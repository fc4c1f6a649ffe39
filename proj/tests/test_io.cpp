#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "oracles.hpp"
#include "posekit/config.hpp"
#include "posekit/io/bop.hpp"
#include "posekit/io/eval.hpp"
#include "posekit/io/image_io.hpp"
#include "posekit/io/results.hpp"
#include "posekit/io/synth.hpp"
#include "posekit/io/weights.hpp"
#include "posekit/network.hpp"

using namespace posekit;
using namespace posekit::io;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("posekit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

// Feeds `parse` every prefix of `bytes` and a batch of single-byte
// corruptions; only library errors may escape.
template <class Parse>
void expect_total(const std::string& bytes, Parse parse) {
  auto attempt = [&](const std::string& b) {
    try {
      parse(b);
    } catch (const Error&) {
    }
  };
  for (std::size_t n = 0; n < bytes.size(); ++n) attempt(bytes.substr(0, n));
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    std::string b = bytes;
    b[rng.index(b.size())] = static_cast<char>(rng.index(256));
    attempt(b);
  }
}

const char* kSceneGt = R"({"0": [{"obj_id": 7, "cam_R_m2c": [1, 0, 0, 0, 1, 0, 0, 0, 1], "cam_t_m2c": [100, -50, 1000]}]})";
const char* kSceneCam = R"({"0": {"cam_K": [500, 0, 320, 0, 510, 240, 0, 0, 1], "depth_scale": 1.0}})";

std::string binary_ply(const std::vector<std::array<float, 3>>& pts, bool with_extra) {
  std::string s = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(pts.size()) +
                  "\nproperty float x\nproperty float y\nproperty float z\n";
  if (with_extra) s += "property uchar red\n";
  s += "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
  for (const auto& p : pts) {
    s.append(reinterpret_cast<const char*>(p.data()), 12);
    if (with_extra) s += '\x7f';
  }
  return s;
}

PosePrediction random_prediction(Rng& rng) {
  PosePrediction p;
  p.scene_id = static_cast<int>(rng.index(50));
  p.image_id = static_cast<int>(rng.index(1000));
  p.class_id = 1 + static_cast<int>(rng.index(21));
  p.score = rng.uniform();
  p.pose.R = random_rotation(rng);
  p.pose.t = Vec3(rng.normal(), rng.normal(), rng.uniform(0.1, 3.0));
  p.time = rng.uniform(0, 0.1);
  return p;
}

}  // namespace

TEST(DecimalScaling, Examples) {
  EXPECT_EQ(format_scaled(0.18, 3), "180");
  EXPECT_EQ(format_scaled(-0.0125, 3), "-12.5");
  EXPECT_EQ(format_scaled(1.5e-9, 3), "0.0000015");
  EXPECT_EQ(format_scaled(1.5e-12, 3), "1.5e-9");
  EXPECT_EQ(format_scaled(0.0, 3), "0");
  EXPECT_EQ(*parse_scaled("180", -3), 0.18);
  EXPECT_EQ(*parse_scaled("1.5e2", -3), 0.15);
  EXPECT_EQ(*parse_scaled(" +12.5 ", -3), 0.0125);
  for (const char* bad : {"", "e3", "1e", "1.2.3", "abc", "1e+"}) EXPECT_FALSE(parse_scaled(bad, -3)) << bad;
}

TEST(DecimalScaling, MetersThroughMillimeterTextAreExact) {
  Rng rng(1);
  for (int i = 0; i < 200000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    ASSERT_EQ(*parse_scaled(format_scaled(x, 3), -3), x);
  }
}

TEST(DecimalScaling, MillimeterDecimalsSurviveMeters) {
  Rng rng(2);
  for (int i = 0; i < 200000; ++i) {
    const double mm = static_cast<double>(static_cast<long>(rng.index(20000000)) - 10000000) / 1000.0;
    ASSERT_EQ(m_to_mm(mm_to_m(mm)), mm);
  }
}

TEST(BopScene, HandFixture) {
  TempDir tmp;
  write_file(tmp.path() / "000003" / "scene_gt.json", kSceneGt);
  write_file(tmp.path() / "000003" / "scene_camera.json", kSceneCam);
  const SceneAnnotations s = load_scene(tmp.path() / "000003");
  EXPECT_EQ(s.scene_id, 3);
  ASSERT_EQ(s.instances.size(), 1u);
  const GroundTruthInstance& g = s.instances[0];
  EXPECT_EQ(g.class_id, 7);
  EXPECT_EQ(g.image_id, 0);
  EXPECT_EQ(g.pose.t, Vec3(0.1, -0.05, 1.0));
  EXPECT_EQ(g.pose.R.matrix(), Mat3::Identity());
  ASSERT_TRUE(s.cameras.contains(0));
  EXPECT_EQ(s.cameras.at(0).fx, 500.0);
  EXPECT_EQ(s.cameras.at(0).fy, 510.0);
  EXPECT_EQ(s.cameras.at(0).py, 240.0);
  const auto ds = load_dataset(tmp.path());
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].scene_id, 3);
}

TEST(BopScene, NearRotationsAreSnappedAndFarOnesRejected) {
  TempDir tmp;
  write_file(tmp.path() / "scene_gt.json",
             R"({"0": [{"obj_id": 1, "cam_R_m2c": [1.0002, 0, 0, 0, 1, 0, 0, 0, 1], "cam_t_m2c": [0, 0, 500]}]})");
  const Mat3 R = load_scene(tmp.path()).instances[0].pose.R.matrix();
  EXPECT_LT((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  write_file(tmp.path() / "scene_gt.json",
             R"({"0": [{"obj_id": 1, "cam_R_m2c": [1.01, 0, 0, 0, 1, 0, 0, 0, 1], "cam_t_m2c": [0, 0, 500]}]})");
  EXPECT_THROW(load_scene(tmp.path()), DataError);
  write_file(tmp.path() / "scene_gt.json",
             R"({"0": [{"obj_id": 1, "cam_R_m2c": [1, 0, 0, 0, 1, 0, 0, 0, 1], "cam_t_m2c": [0, 0, -5]}]})");
  EXPECT_THROW(load_scene(tmp.path()), DataError);
}

TEST(BopScene, MalformedJsonReportsPathAndOffset) {
  TempDir tmp;
  write_file(tmp.path() / "scene_gt.json", R"({"0": [{"obj_id": 1,)");
  try {
    load_scene(tmp.path());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(e.path().find("scene_gt.json"), std::string::npos);
    EXPECT_GT(e.offset(), 0u);
  }
  EXPECT_THROW(load_dataset(tmp.path() / "missing"), DataError);
}

TEST(BopScene, SplitDirectoryIsSortedByScene) {
  TempDir tmp;
  for (const char* name : {"000010", "000002"}) {
    write_file(tmp.path() / name / "scene_gt.json", kSceneGt);
  }
  const auto ds = load_dataset(tmp.path());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].scene_id, 2);
  EXPECT_EQ(ds[1].scene_id, 10);
  EXPECT_EQ(ds[1].instances[0].scene_id, 10);
}

TEST(BopScene, LoaderIsTotal) {
  TempDir tmp;
  const fs::path p = tmp.path() / "scene_gt.json";
  expect_total(kSceneGt, [&](const std::string& b) {
    write_file(p, b);
    load_scene(tmp.path());
  });
}

TEST(Ply, AsciiFourVertices) {
  const auto pts = parse_ply(
      "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\nproperty float x\nproperty float y\nproperty float "
      "z\nproperty float nx\nend_header\n0 0 0 9\n1 0 0 9\n0 1 0 9\n0 0 1 9\n");
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[3], Vec3(0, 0, 1));
}

TEST(Ply, BinaryLittleEndianAndTruncation) {
  const std::string bytes = binary_ply({{1.5f, 2.0f, -3.0f}, {0.25f, 0.0f, 8.0f}}, true);
  const auto pts = parse_ply(bytes);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0], Vec3(1.5, 2.0, -3.0));
  EXPECT_EQ(pts[1], Vec3(0.25, 0.0, 8.0));
  EXPECT_THROW(parse_ply(bytes.substr(0, bytes.size() - 3)), ParseError);
  expect_total(bytes, [](const std::string& b) { parse_ply(b); });
}

TEST(Ply, FormatRoundTrip) {
  Rng rng(3);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(rng.normal(), rng.normal(), rng.normal());
  EXPECT_EQ(parse_ply(format_ply(pts)), pts);
  expect_total(format_ply({pts[0], pts[1]}), [](const std::string& b) { parse_ply(b); });
}

TEST(BopModels, InfoAndSymmetry) {
  TempDir tmp;
  const std::vector<Vec3> pts = {{0, 0, 0}, {30, 0, 0}, {0, 40, 0}};
  write_file(tmp.path() / model_filename(1), format_ply(pts));
  write_file(tmp.path() / model_filename(2), format_ply(pts));
  write_file(tmp.path() / "models_info.json",
             R"({"1": {"diameter": 50.0}, "2": {"diameter": 50.0, "symmetries_discrete": [[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]]}})");
  const auto models = load_models(tmp.path());
  ASSERT_EQ(models.size(), 2u);
  EXPECT_FALSE(models.at(1).symmetric);
  EXPECT_TRUE(models.at(2).symmetric);
  EXPECT_EQ(models.at(1).diameter, 0.05);
  EXPECT_EQ(models.at(1).points[1], Vec3(0.03, 0, 0));
  write_file(tmp.path() / "models_info.json", R"({"1": {"diameter": 10.0}})");
  EXPECT_THROW(load_models(tmp.path()), DataError);
  write_file(tmp.path() / "models_info.json", R"({"3": {"diameter": 50.0}})");
  EXPECT_THROW(load_models(tmp.path()), DataError);
}

TEST(Predictions, EmptyBodyAndSingleRow) {
  EXPECT_TRUE(parse_predictions("scene_id,im_id,obj_id,score,R,t,time\n").empty());
  const auto p = parse_predictions(
      "scene_id,im_id,obj_id,score,R,t,time\n48,1,5,0.75,1 0 0 0 1 0 0 0 1,12.5 -40 980,0.031\n");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].scene_id, 48);
  EXPECT_EQ(p[0].image_id, 1);
  EXPECT_EQ(p[0].class_id, 5);
  EXPECT_EQ(p[0].score, 0.75);
  EXPECT_EQ(p[0].pose.t, Vec3(0.0125, -0.04, 0.98));
  EXPECT_EQ(p[0].time, 0.031);
}

TEST(Predictions, Errors) {
  EXPECT_THROW(parse_predictions(""), ParseError);
  EXPECT_THROW(parse_predictions("scene,im,obj\n"), ParseError);
  try {
    parse_predictions("scene_id,im_id,obj_id,score,R,t,time\n1,1,1,0.5,1 0 0 0 1 0 0 0 1,0 0 1\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(parse_predictions("scene_id,im_id,obj_id,score,R,t,time\n1,1,1,1.5,1 0 0 0 1 0 0 0 1,0 0 1,0\n"),
               DataError);
  EXPECT_THROW(parse_predictions("scene_id,im_id,obj_id,score,R,t,time\n1,1,1,0.5,2 0 0 0 1 0 0 0 1,0 0 1,0\n"),
               DataError);
  EXPECT_THROW(parse_predictions("scene_id,im_id,obj_id,score,R,t,time\n1,x,1,0.5,1 0 0 0 1 0 0 0 1,0 0 1,0\n"),
               ParseError);
}

TEST(Predictions, FormatRoundTrip) {
  Rng rng(4);
  std::vector<PosePrediction> preds;
  for (int i = 0; i < 500; ++i) preds.push_back(random_prediction(rng));
  const std::string text = format_predictions(preds);
  const auto back = parse_predictions(text);
  ASSERT_EQ(back.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(back[i].scene_id, preds[i].scene_id);
    EXPECT_EQ(back[i].class_id, preds[i].class_id);
    EXPECT_EQ(back[i].score, preds[i].score);
    EXPECT_EQ(back[i].pose.t, preds[i].pose.t);
    EXPECT_EQ(back[i].time, preds[i].time);
    EXPECT_LT((back[i].pose.R.matrix() - preds[i].pose.R.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
  expect_total(format_predictions({preds[0], preds[1]}), [](const std::string& b) { parse_predictions(b); });
}

TEST(Report, CsvAndJsonRoundTrip) {
  MetricReport r;
  r.classes.push_back({"1", 10, 9, 1, 80.0, 91.25, 88.5, 2.0625, 5.5});
  r.classes.push_back({"5", 3, 3, 0, 100.0 / 3.0, 0.1 + 0.2, 42.0, 1e-3, 179.99});
  r.mean = {"mean", 13, 12, 1, 56.6, 60.1, 65.0, 1.5, 90.0};
  r.warnings = {"class 9 has no ground-truth instances"};
  const MetricReport csv = parse_report_csv(format_report_csv(r));
  EXPECT_EQ(csv.classes, r.classes);
  EXPECT_EQ(csv.mean, r.mean);
  const MetricReport js = parse_report_json(format_report_json(r));
  EXPECT_EQ(js.classes, r.classes);
  EXPECT_EQ(js.mean, r.mean);
  EXPECT_EQ(js.warnings, r.warnings);

  TempDir tmp;
  save_report(r, tmp.path() / "r.csv", ReportFormat::Csv);
  EXPECT_EQ(load_report(tmp.path() / "r.csv", ReportFormat::Csv).classes, r.classes);
  save_report(r, tmp.path() / "r.json", ReportFormat::Json);
  EXPECT_EQ(load_report(tmp.path() / "r.json", ReportFormat::Json).mean, r.mean);
}

TEST(Report, ParsersAreTotal) {
  MetricReport r;
  r.classes.push_back({"1", 1, 1, 0, 100.0, 99.0, 99.0, 0.5, 1.0});
  r.mean = r.classes[0];
  r.mean.label = "mean";
  expect_total(format_report_csv(r), [](const std::string& b) { parse_report_csv(b); });
  expect_total(format_report_json(r), [](const std::string& b) { parse_report_json(b); });
  EXPECT_THROW(parse_report_csv("nope\n"), ParseError);
}

TEST(Semw, ByteLayout) {
  const std::string bytes = serialize_tensors({NamedTensor::f32("a", {2}, {1.0f, -2.0f})});
  const std::string expected = std::string("SEMW") + std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) + std::string("\x01\x00\x00\x00", 4) + "a" +
                               std::string("\x00", 1) + std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x02\x00\x00\x00\x00\x00\x00\x00", 8) +
                               std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8);
  EXPECT_EQ(bytes, expected);
}

TEST(Semw, RoundTripIsBitExact) {
  Rng rng(5);
  TensorList tensors;
  for (int k = 0; k < 20; ++k) {
    std::vector<std::uint64_t> dims(rng.index(4));
    std::size_t n = 1;
    for (auto& d : dims) n *= (d = rng.index(5));
    if (k % 2) {
      std::vector<float> v(n);
      for (float& x : v) x = static_cast<float>(rng.normal());
      tensors.push_back(NamedTensor::f32("t" + std::to_string(k), dims, v));
    } else {
      std::vector<double> v(n);
      for (double& x : v) x = rng.normal();
      tensors.push_back(NamedTensor::f64("t" + std::to_string(k), dims, v));
    }
  }
  tensors.push_back(NamedTensor::f64("nan", {2}, {std::nan(""), -0.0}));
  TempDir tmp;
  save_tensors(tensors, tmp.path() / "w.semw");
  const TensorList back = load_tensors(tmp.path() / "w.semw");
  EXPECT_EQ(back, tensors);
  EXPECT_EQ(serialize_tensors(back), read_file(tmp.path() / "w.semw"));
}

TEST(Semw, StructuredErrors) {
  const std::string good = serialize_tensors({NamedTensor::f64("x", {3}, {1, 2, 3})});
  for (std::size_t n = 0; n < good.size(); ++n) EXPECT_THROW(parse_tensors(good.substr(0, n)), ParseError) << n;
  EXPECT_THROW(parse_tensors("SEMX" + good.substr(4)), ParseError);
  EXPECT_THROW(parse_tensors(good + "z"), ParseError);
  std::string v2 = good;
  v2[4] = 2;
  EXPECT_THROW(parse_tensors(v2), ParseError);
  std::string dup = serialize_tensors({NamedTensor::f64("x", {1}, {1}), NamedTensor::f64("y", {1}, {1})});
  dup[dup.find('y')] = 'x';
  EXPECT_THROW(parse_tensors(dup), ParseError);
  EXPECT_THROW(serialize_tensors({NamedTensor::f64("x", {1}, {1}), NamedTensor::f64("x", {1}, {1})}), DataError);
  std::string huge = good;
  huge[4 + 4 + 4 + 4 + 1 + 1 + 4] = '\xff';  // first dim byte
  huge[4 + 4 + 4 + 4 + 1 + 1 + 4 + 7] = '\x7f';
  EXPECT_THROW(parse_tensors(huge), ParseError);
  expect_total(good, [](const std::string& b) { parse_tensors(b); });
}

TEST(Semw, NetworkRoundTripPreservesForward) {
  const NetworkConfig cfg{8, 12, 16, 8, 8, 2, 4};
  Rng rng(6);
  const NetworkWeights w = NetworkWeights::random(rng, cfg);
  TempDir tmp;
  save_network(w, tmp.path() / "net.semw");
  const NetworkWeights back = load_network(tmp.path() / "net.semw");
  EXPECT_EQ(back.config, cfg);
  const BackboneFeatures feats = synthetic_backbone(rng, cfg, 64, 48);
  const auto a = network_forward(feats, w), b = network_forward(feats, back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_EQ(oracle::max_abs_diff(a[l].class_logits, b[l].class_logits), 0.0);
    EXPECT_EQ(oracle::max_abs_diff(a[l].r6d, b[l].r6d), 0.0);
    EXPECT_EQ(oracle::max_abs_diff(a[l].trans, b[l].trans), 0.0);
  }
}

TEST(Semw, NetworkRejectsMissingAndUnknownTensors) {
  const NetworkConfig cfg{8, 12, 16, 8, 8, 1, 4};
  TensorList t = network_to_tensors(NetworkWeights::zeros(cfg));
  TensorList missing(t.begin(), t.end() - 1);
  EXPECT_THROW(network_from_tensors(missing), DataError);
  TensorList extra = t;
  extra.push_back(NamedTensor::f64("stray", {1}, {0}));
  EXPECT_THROW(network_from_tensors(extra), DataError);
  TensorList no_meta(t.begin() + 1, t.end());
  EXPECT_THROW(network_from_tensors(no_meta), DataError);
  TensorList reshaped = t;
  reshaped[1].dims.push_back(1);
  EXPECT_THROW(network_from_tensors(reshaped), DataError);
}

TEST(Ppm, AsciiBinaryAndScaling) {
  const RgbImage a = parse_ppm("P3\n# comment\n2 1\n255\n255 0 10  1 2 3\n");
  ASSERT_EQ(a.width(), 2u);
  ASSERT_EQ(a.height(), 1u);
  EXPECT_EQ(a.at(0, 0, 2), 10.0);
  EXPECT_EQ(a.at(0, 1, 1), 2.0);
  const RgbImage s = parse_ppm("P3 1 1 1023 1023 0 341\n");
  EXPECT_EQ(s.at(0, 0, 0), 255.0);
  EXPECT_NEAR(s.at(0, 0, 2), 85.0, 1e-12);
  RgbImage img(3, 4);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x) img.set(y, x, {double(y * 40), double(x * 60), 255.0});
  const RgbImage back = parse_ppm(format_ppm(img));
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back.at(y, x, c), img.at(y, x, c));
  EXPECT_THROW(parse_ppm("P5 1 1 255 x"), ParseError);
  EXPECT_THROW(parse_ppm("P3 1 1 255 256 0 0"), ParseError);
  expect_total(format_ppm(img), [](const std::string& b) { parse_ppm(b); });
}

TEST(Config, ParseAndPrecedence) {
  const Config c = Config::parse("# defaults\nalpha = 0.2\n  tau=0.3  # trailing\n\nseed_spacing = 6\nbogus = 1\n");
  EXPECT_EQ(*c.get_double("alpha"), 0.2);
  EXPECT_EQ(*c.get_double("tau"), 0.3);
  EXPECT_EQ(*c.get_long("seed_spacing"), 6);
  EXPECT_FALSE(c.get("max_passes"));
  EXPECT_EQ(c.unknown_keys({"alpha", "tau", "seed_spacing"}), std::set<std::string>{"bogus"});
  EXPECT_EQ(resolve(true, 0.5, c.get_double("alpha"), 0.1), 0.5);
  EXPECT_EQ(resolve(false, 0.5, c.get_double("alpha"), 0.1), 0.2);
  EXPECT_EQ(resolve(false, 0.5, c.get_double("max_passes"), 0.1), 0.1);
  EXPECT_THROW(Config::parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(Config::parse("just words\n"), ParseError);
  EXPECT_THROW(Config::parse("tau = high\n").get_double("tau"), DataError);
}

TEST(Synth, SameSeedGivesIdenticalFiles) {
  TempDir a, b, c;
  synth_fixture(a.path(), {11, 4, 3, 2.0, 0.01});
  synth_fixture(b.path(), {11, 4, 3, 2.0, 0.01});
  synth_fixture(c.path(), {12, 4, 3, 2.0, 0.01});
  const auto sa = snapshot(a.path());
  EXPECT_EQ(sa.size(), 2u + 1u + 3u + 1u);
  EXPECT_EQ(sa, snapshot(b.path()));
  EXPECT_NE(sa, snapshot(c.path()));
  EXPECT_THROW(synth_fixture(a.path(), {1, 1, 1, -1.0, 0.0}), DomainError);
}

TEST(Synth, PerfectPredictionsScorePerfectly) {
  TempDir tmp;
  const SynthPaths p = synth_fixture(tmp.path(), {3, 6, 4, 0.0, 0.0});
  const MetricReport r = evaluate(load_dataset(p.scene_dir), load_models(p.models_dir), load_predictions(p.predictions));
  ASSERT_EQ(r.classes.size(), 4u);
  for (const ReportRow* row : {&r.classes[0], &r.classes[3], &r.mean}) {
    EXPECT_EQ(row->recall_add_s, 100.0);
    EXPECT_NEAR(row->auc_add_s, 100.0, 1e-9);
    EXPECT_NEAR(row->trans_error_cm, 0.0, 1e-12);
    EXPECT_NEAR(row->rot_error_deg, 0.0, 1e-5);
  }
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Synth, InjectedNoiseIsRecovered) {
  TempDir tmp;
  const SynthPaths p = synth_fixture(tmp.path(), {4, 10, 3, 3.0, 0.02});
  const auto scenes = load_dataset(p.scene_dir);
  const auto models = load_models(p.models_dir);
  const auto preds = load_predictions(p.predictions);
  const MetricReport r = evaluate(scenes, models, preds);
  EXPECT_NEAR(r.mean.trans_error_cm, 2.0, 1e-9);
  EXPECT_NEAR(r.mean.rot_error_deg, 3.0, 1e-6);
  EXPECT_EQ(r.mean.matched, 30u);
  // Sharding across workers does not change the report.
  const MetricReport r4 = evaluate(scenes, models, preds, {0.1, 0.1, 4});
  EXPECT_EQ(r4.classes, r.classes);
  EXPECT_EQ(r4.mean, r.mean);
}

TEST(Evaluate, OrphansWarnAndMissingModelsFail) {
  TempDir tmp;
  const SynthPaths p = synth_fixture(tmp.path(), {5, 2, 2, 0.0, 0.0});
  const auto scenes = load_dataset(p.scene_dir);
  auto models = load_models(p.models_dir);
  auto preds = load_predictions(p.predictions);
  preds.push_back(preds[0]);
  preds.back().image_id = 77;
  const MetricReport r = evaluate(scenes, models, preds);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.mean.recall_add_s, 100.0);
  models.erase(2);
  EXPECT_THROW(evaluate(scenes, models, preds), DataError);
}

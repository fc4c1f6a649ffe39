// posekit command-line tool: evaluation, visibility maps, network forward
// passes, fixtures and self-checks.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "posekit/config.hpp"
#include "posekit/heads.hpp"
#include "posekit/io/eval.hpp"
#include "posekit/io/image_io.hpp"
#include "posekit/io/results.hpp"
#include "posekit/io/synth.hpp"
#include "posekit/io/weights.hpp"
#include "posekit/network.hpp"
#include "posekit/selftest.hpp"
#include "posekit/visibility.hpp"

namespace {

using namespace posekit;
namespace fs = std::filesystem;

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, std::size_t n, const char* what) {
  const auto parts = io::split(s, ',');
  std::vector<double> out;
  for (auto p : parts) {
    const auto v = io::parse_double(p);
    if (!v) throw UsageError(std::string(what) + ": '" + s + "' is not a comma-separated number list");
    out.push_back(*v);
  }
  if (out.size() != n) throw UsageError(std::string(what) + " needs " + std::to_string(n) + " values");
  return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  const auto w = x == std::string::npos ? std::nullopt : io::parse_long(std::string_view(s).substr(0, x));
  const auto h = x == std::string::npos ? std::nullopt : io::parse_long(std::string_view(s).substr(x + 1));
  if (!w || !h || *w < 1 || *h < 1) throw UsageError("--image-size must look like 640x480");
  return {static_cast<std::size_t>(*w), static_cast<std::size_t>(*h)};
}

// Keys a config file may set, with the subcommand flag each one backs.
const std::set<std::string> kConfigKeys = {
    "recall_frac", "auc_max", "jobs", "alpha", "tau", "seed_spacing", "max_passes",
    "labels_per_seed", "score_thresh", "iterations", "nms_iou", "depth"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"6D pose toolkit: evaluation, visibility sampling and network inference"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value file supplying defaults for flags")
      ->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against BOP ground truth");
  std::string gt_dir, models_dir, preds_path, out_path, format = "csv";
  double recall_frac = 0.1, auc_max = 0.1;
  unsigned jobs = 1;
  eval->add_option("--gt", gt_dir, "Scene directory or split directory with scene subdirectories")->required();
  eval->add_option("--models", models_dir, "Directory with models_info.json and obj_XXXXXX.ply")->required();
  eval->add_option("--preds", preds_path, "BOP results CSV")->required();
  eval->add_option("--out", out_path, "Report path")->required();
  eval->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  auto* o_recall = eval->add_option("--recall-frac", recall_frac, "Recall threshold as a fraction of the diameter");
  auto* o_auc = eval->add_option("--auc-max", auc_max, "AUC upper threshold in meters");
  auto* o_jobs = eval->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");

  // visibility
  auto* vis = app.add_subcommand("visibility", "Discrepancy map and cell visibility for one box");
  std::string image_path, box_str, vis_out;
  std::size_t stride = 8;
  double alpha = 0.1, tau = 0.25;
  long seed_spacing = 4;
  int max_passes = 8, labels_per_seed = 2;
  vis->add_option("--image", image_path, "PPM image (P3 or P6)")->required()->check(CLI::ExistingFile);
  vis->add_option("--box", box_str, "Box as x,y,w,h in pixels")->required();
  vis->add_option("--stride", stride, "Grid stride in pixels")->required()->check(CLI::PositiveNumber);
  auto* o_alpha = vis->add_option("--alpha", alpha, "Weight of the seed distance term");
  auto* o_tau = vis->add_option("--tau", tau, "Visibility threshold");
  auto* o_spacing = vis->add_option("--seed-spacing", seed_spacing, "Seed spacing along the box perimeter");
  auto* o_passes = vis->add_option("--max-passes", max_passes, "Cap on forward/backward raster pass pairs");
  auto* o_labels = vis->add_option("--labels-per-seed", labels_per_seed, "Path labels kept per pixel for each seed");
  vis->add_option("--out", vis_out, "Output directory")->required();

  // forward
  auto* fwd = app.add_subcommand("forward", "Run the network on backbone features and decode poses");
  std::string weights_path, input = "synthetic", image_size = "640x480", fwd_out, camera_str, depth = "direct";
  double score_thresh = 0.4, nms_iou = 0.6;
  std::size_t iterations = 1;
  std::uint64_t fwd_seed = 0;
  int scene_id = 0, im_id = 0;
  fwd->add_option("--weights", weights_path, "SEMW weight file")->required()->check(CLI::ExistingFile);
  fwd->add_option("--input", input, "'synthetic' or an SEMW file holding c3, c4, c5 tensors");
  fwd->add_option("--image-size", image_size, "Image size WxH");
  auto* o_thresh = fwd->add_option("--score-thresh", score_thresh, "Keep cells with score above this");
  auto* o_iter = fwd->add_option("--iterations", iterations, "Refinement iterations");
  auto* o_nms = fwd->add_option("--nms-iou", nms_iou, "Within-class suppression IoU");
  auto* o_depth = fwd->add_option("--depth", depth, "How the tz channel encodes depth")
                      ->check(CLI::IsMember({"direct", "log"}));
  fwd->add_option("--seed", fwd_seed, "Seed for synthetic input");
  fwd->add_option("--camera", camera_str, "Intrinsics fx,fy,px,py (default: LM-O camera)");
  fwd->add_option("--scene-id", scene_id, "scene_id written to the CSV");
  fwd->add_option("--im-id", im_id, "im_id written to the CSV");
  fwd->add_option("--out", fwd_out, "Results CSV")->required();

  // selftest
  auto* st = app.add_subcommand("selftest", "Run the built-in property checks");
  std::string st_module;
  st->add_option("--module", st_module, "Only this module")->check(CLI::IsMember(selftest_modules()));

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic BOP dataset and perturbed predictions");
  std::string syn_out;
  io::SynthOptions syn_opt;
  syn->add_option("--out", syn_out, "Output directory")->required();
  syn->add_option("--seed", syn_opt.seed, "Random seed");
  syn->add_option("--images", syn_opt.n_images, "Number of images");
  syn->add_option("--objects", syn_opt.n_objects, "Objects (and models) per image")->check(CLI::PositiveNumber);
  syn->add_option("--rot-deg", syn_opt.rot_deg, "Rotation noise in degrees")->check(CLI::NonNegativeNumber);
  syn->add_option("--trans-m", syn_opt.trans_m, "Translation noise in meters")->check(CLI::NonNegativeNumber);

  // make-weights
  auto* mkw = app.add_subcommand("make-weights", "Write random (or zero) network weights");
  std::string mkw_out;
  std::uint64_t mkw_seed = 0;
  bool mkw_zero = false;
  NetworkConfig net;
  mkw->add_option("--out", mkw_out, "SEMW output path")->required();
  mkw->add_option("--seed", mkw_seed, "Random seed");
  mkw->add_flag("--zero", mkw_zero, "All-zero weights");
  mkw->add_option("--c3", net.c3_channels, "Backbone stage 3 channels");
  mkw->add_option("--c4", net.c4_channels, "Backbone stage 4 channels");
  mkw->add_option("--c5", net.c5_channels, "Backbone stage 5 channels");
  mkw->add_option("--fpn-width", net.fpn_width, "Pyramid channels");
  mkw->add_option("--head-width", net.head_width, "Head channels");
  mkw->add_option("--classes", net.num_classes, "Number of object classes");
  mkw->add_option("--gn-groups", net.gn_groups, "Group-norm groups");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Config cfg;
    if (!config_path.empty()) {
      cfg = Config::load(config_path);
      for (const auto& k : cfg.unknown_keys(kConfigKeys)) std::cerr << "warning: unknown config key '" << k << "'\n";
    }
    auto cfg_long = [&](const char* key) -> std::optional<long> { return cfg.get_long(key); };

    if (*eval) {
      io::EvalOptions opt;
      opt.recall_frac = resolve(o_recall->count() > 0, recall_frac, cfg.get_double("recall_frac"), 0.1);
      opt.auc_max = resolve(o_auc->count() > 0, auc_max, cfg.get_double("auc_max"), 0.1);
      long j = resolve<long>(o_jobs->count() > 0, static_cast<long>(jobs), cfg_long("jobs"), 1L);
      if (j < 0) throw UsageError("--jobs must be >= 0");
      opt.jobs = j == 0 ? std::max(1u, std::thread::hardware_concurrency()) : static_cast<unsigned>(j);
      if (!(opt.recall_frac > 0.0) || !(opt.auc_max > 0.0)) throw UsageError("thresholds must be positive");
      const auto scenes = io::load_dataset(gt_dir);
      const auto models = io::load_models(models_dir);
      const auto preds = io::load_predictions(preds_path);
      const MetricReport report = io::evaluate(scenes, models, preds, opt);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      io::save_report(report, out_path, format == "csv" ? io::ReportFormat::Csv : io::ReportFormat::Json);
      std::cout << io::format_report_csv(report);
      return 0;
    }

    if (*vis) {
      const auto b = parse_list(box_str, 4, "--box");
      const PixelBox box{std::lround(b[0]), std::lround(b[1]), std::lround(b[2]), std::lround(b[3])};
      const double a = resolve(o_alpha->count() > 0, alpha, cfg.get_double("alpha"), 0.1);
      const double t = resolve(o_tau->count() > 0, tau, cfg.get_double("tau"), 0.25);
      const long sp = resolve(o_spacing->count() > 0, seed_spacing, cfg_long("seed_spacing"), 4L);
      const long mp = resolve<long>(o_passes->count() > 0, max_passes, cfg_long("max_passes"), 8L);
      if (mp < 1) throw UsageError("--max-passes must be >= 1");
      const long lp = resolve<long>(o_labels->count() > 0, labels_per_seed, cfg_long("labels_per_seed"), 2L);
      if (lp < 1 || lp > 64) throw UsageError("--labels-per-seed must be in [1, 64]");
      const RgbImage img = io::load_ppm(image_path);
      if (!box.inside(img.width(), img.height())) throw DataError("box lies outside the image");
      const DiscrepancyMap v = discrepancy_map(img, box, seed_boundary(box, sp), {a, static_cast<int>(mp), static_cast<int>(lp)});
      const CellVisibility cv = cell_visibility(v, stride, t);
      const fs::path dir = vis_out;
      io::write_file(dir / "discrepancy.pgm",
                     io::format_pgm16(v.value, static_cast<std::size_t>(box.w), static_cast<std::size_t>(box.h)));
      io::write_file(dir / "mask.pbm",
                     io::format_pbm(cv.mask, static_cast<std::size_t>(cv.cols), static_cast<std::size_t>(cv.rows)));
      std::string csv = "row,col,mean_discrepancy,probability,positive\n";
      std::size_t positives = 0;
      for (long r = cv.row0; r < cv.row0 + cv.rows; ++r)
        for (long c = cv.col0; c < cv.col0 + cv.cols; ++c) {
          const std::size_t i = cv.index(r, c);
          positives += cv.mask[i];
          csv += std::to_string(r) + "," + std::to_string(c) + "," + io::format_double(cv.mean[i]) + "," +
                 io::format_double(cv.prob[i]) + "," + (cv.mask[i] ? "1" : "0") + "\n";
        }
      io::write_file(dir / "cells.csv", csv);
      std::cout << positives << " of " << cv.mask.size() << " cells positive\n";
      return 0;
    }

    if (*fwd) {
      const auto [w, h] = parse_size(image_size);
      DecodeOptions dopt;
      dopt.score_thresh = resolve(o_thresh->count() > 0, score_thresh, cfg.get_double("score_thresh"), 0.4);
      dopt.nms_iou = resolve(o_nms->count() > 0, nms_iou, cfg.get_double("nms_iou"), 0.6);
      const long it = resolve<long>(o_iter->count() > 0, static_cast<long>(iterations), cfg_long("iterations"), 1L);
      if (it < 1) throw UsageError("--iterations must be >= 1");
      const std::string d = resolve(o_depth->count() > 0, depth, cfg.get("depth"), std::string("direct"));
      if (d != "direct" && d != "log") throw UsageError("depth must be 'direct' or 'log'");
      dopt.depth = d == "log" ? DepthEncoding::Log : DepthEncoding::Direct;
      CameraIntrinsics k = io::kSynthCamera;
      if (!camera_str.empty()) {
        const auto c = parse_list(camera_str, 4, "--camera");
        k = {c[0], c[1], c[2], c[3]};
      }
      const NetworkWeights weights = io::load_network(weights_path);
      BackboneFeatures feats;
      if (input == "synthetic") {
        Rng rng(fwd_seed);
        feats = synthetic_backbone(rng, weights.config, w, h);
      } else {
        const io::TensorList t = io::load_tensors(input);
        auto find = [&](const char* name) {
          for (const auto& x : t)
            if (x.name == name) return io::tensor_feature_map(x);
          throw DataError(input + ": missing tensor '" + name + "'");
        };
        feats = {find("c3"), find("c4"), find("c5")};
      }
      const auto start = std::chrono::steady_clock::now();
      const RawGridPredictions raw = network_forward(feats, weights, static_cast<std::size_t>(it));
      const DecodeResult res = decode_predictions(raw, k, dopt);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::vector<PosePrediction> out;
      for (const PoseEstimate& e : res.estimates) {
        PosePrediction p;
        p.scene_id = scene_id;
        p.image_id = im_id;
        p.class_id = static_cast<int>(e.class_id) + 1;
        p.score = e.score;
        p.pose = {e.R, e.t.vec()};
        p.time = seconds;
        out.push_back(p);
      }
      io::write_file(fwd_out, io::format_predictions(out));
      std::cout << res.above_threshold << " cells above threshold, " << res.dropped_degenerate << " degenerate, "
                << out.size() << " poses after suppression, " << seconds << " s\n";
      return 0;
    }

    if (*st) {
      const std::size_t failures =
          run_selftest(std::cout, st_module.empty() ? std::nullopt : std::optional<std::string>(st_module));
      return failures == 0 ? 0 : kExitData;
    }

    if (*syn) {
      const auto paths = io::synth_fixture(syn_out, syn_opt);
      std::cout << "ground truth: " << paths.scene_dir.string() << "\nmodels: " << paths.models_dir.string()
                << "\npredictions: " << paths.predictions.string() << "\n";
      return 0;
    }

    if (*mkw) {
      Rng rng(mkw_seed);
      const NetworkWeights weights = mkw_zero ? NetworkWeights::zeros(net) : NetworkWeights::random(rng, net);
      io::save_network(weights, mkw_out);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

#pragma once

// Pose accuracy metrics: ADD, ADD-S, recall, AUC, prediction/ground-truth
// matching and per-class report aggregation. Lengths in meters, angles in
// radians; reports convert to cm and degrees.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/kdtree.hpp"
#include "posekit/rotation.hpp"

namespace posekit {

struct RigidPose {
  RotationMatrix R;
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
};

// Largest pairwise point distance, by brute force.
inline double compute_diameter(const std::vector<Vec3>& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::max(best, squared_distance(points[i], points[j]));
  return std::sqrt(best);
}

struct ObjectModel {
  int model_id = 0;
  std::vector<Vec3> points;
  double diameter = 0.0;
  bool symmetric = false;

  void validate() const {
    if (points.empty()) throw DataError("object model " + std::to_string(model_id) + " has no points");
    if (!(diameter > 0.0)) throw DataError("object model " + std::to_string(model_id) + " has non-positive diameter");
    if (diameter < compute_diameter(points) * (1.0 - 1e-6))
      throw DataError("object model " + std::to_string(model_id) + " diameter is smaller than its point spread");
  }
};

inline void require_points(const ObjectModel& m, const char* op) {
  if (m.points.empty()) throw DataError(std::string(op) + ": empty model");
}

// Mean distance between corresponding model points under the two poses.
inline double add_metric(const ObjectModel& model, const RigidPose& pred, const RigidPose& gt) {
  require_points(model, "add_metric");
  double sum = 0.0;
  for (const Vec3& x : model.points) sum += std::sqrt(squared_distance(gt.apply(x), pred.apply(x)));
  return sum / static_cast<double>(model.points.size());
}

// Mean over predicted points of the distance to the nearest ground-truth point.
inline double adds_metric(const ObjectModel& model, const RigidPose& pred, const RigidPose& gt) {
  require_points(model, "adds_metric");
  std::vector<Vec3> target;
  target.reserve(model.points.size());
  for (const Vec3& x : model.points) target.push_back(gt.apply(x));
  const KdTree3 tree(std::move(target));
  double sum = 0.0;
  for (const Vec3& x : model.points) sum += std::sqrt(tree.nearest(pred.apply(x)).squared_distance);
  return sum / static_cast<double>(model.points.size());
}

// ADD-S for symmetric models, ADD otherwise.
inline double add_or_adds(const ObjectModel& model, const RigidPose& pred, const RigidPose& gt) {
  return model.symmetric ? adds_metric(model, pred, gt) : add_metric(model, pred, gt);
}

// Percent of instances whose error is below frac * diameter. Missed
// instances enter with infinite error.
inline double recall_add_s(const std::vector<double>& errors, const std::vector<double>& diameters, double frac = 0.1) {
  if (errors.size() != diameters.size()) throw ShapeError("recall_add_s: errors and diameters differ in length");
  if (errors.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i] < frac * diameters[i]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

// Area under accuracy(tau) = fraction of errors <= tau for tau in
// [0, max_threshold], normalized by max_threshold, in percent. Accuracy is a
// step function, so the integral is a sum over the sorted errors.
inline double auc_metric(std::vector<double> errors, double max_threshold = 0.1) {
  if (errors.empty()) throw DomainError("auc_metric: no errors");
  if (!(max_threshold > 0.0)) throw DomainError("auc_metric: max_threshold must be positive");
  for (double e : errors)
    if (!(e >= 0.0)) throw DomainError("auc_metric: negative or NaN error");
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  double area = 0.0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const double start = errors[k];
    if (start >= max_threshold) break;
    const double end = k + 1 < errors.size() ? std::min(errors[k + 1], max_threshold) : max_threshold;
    area += (end - start) * static_cast<double>(k + 1) / n;
  }
  return 100.0 * area / max_threshold;
}

struct GroundTruthInstance {
  int scene_id = 0;
  int image_id = 0;
  int class_id = 0;
  RigidPose pose;
};

struct PosePrediction {
  int scene_id = 0;
  int image_id = 0;
  int class_id = 0;
  double score = 0.0;
  RigidPose pose;
  double time = -1.0;
};

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double error = 0.0;
};

struct MatchResult {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_gts;
  std::vector<std::size_t> unmatched_preds;
};

// Greedy assignment for one image: predictions in descending score order
// take the unassigned same-class ground truth with the smallest error.
inline MatchResult match_instances(
    const std::vector<PosePrediction>& preds, const std::vector<GroundTruthInstance>& gts,
    const std::function<double(const PosePrediction&, const GroundTruthInstance&)>& error) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::vector<bool> taken(gts.size(), false);
  MatchResult out;
  for (std::size_t p : order) {
    std::optional<std::size_t> best;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != preds[p].class_id) continue;
      const double e = error(preds[p], gts[g]);
      if (!best || e < best_err) {
        best = g;
        best_err = e;
      }
    }
    if (!best) {
      out.unmatched_preds.push_back(p);
      continue;
    }
    taken[*best] = true;
    out.matches.push_back({p, *best, best_err});
  }
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!taken[g]) out.unmatched_gts.push_back(g);
  return out;
}

// Per ground-truth instance errors; unmatched instances carry +inf.
struct InstanceRecord {
  int scene_id = 0;
  int image_id = 0;
  int class_id = 0;
  bool matched = false;
  double add = std::numeric_limits<double>::infinity();
  double adds = std::numeric_limits<double>::infinity();
  double rot_error = std::numeric_limits<double>::infinity();    // radians
  double trans_error = std::numeric_limits<double>::infinity();  // meters
  double diameter = 0.0;
  bool symmetric = false;

  double add_s() const { return symmetric ? adds : add; }
};

struct ReportRow {
  std::string label;  // class id, or "mean"
  std::size_t instances = 0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
  double recall_add_s = 0.0;  // %
  double auc_adds = 0.0;      // %
  double auc_add_s = 0.0;     // %
  double trans_error_cm = std::numeric_limits<double>::quiet_NaN();
  double rot_error_deg = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const ReportRow&) const = default;
};

struct MetricReport {
  std::vector<ReportRow> classes;
  ReportRow mean;
  std::vector<std::string> warnings;
};

struct ReportOptions {
  double recall_frac = 0.1;
  double auc_max = 0.1;  // meters
};

inline double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Per-class rows plus a mean row averaging the class rows. Records are
// reduced in (class, scene, image) order so the result does not depend on
// how they were produced. Classes listed in `expected_classes` without any
// record are reported as warnings.
inline MetricReport aggregate_report(std::vector<InstanceRecord> records, const ReportOptions& opt = {},
                                     const std::vector<int>& expected_classes = {}) {
  std::stable_sort(records.begin(), records.end(), [](const InstanceRecord& a, const InstanceRecord& b) {
    return std::tie(a.class_id, a.scene_id, a.image_id) < std::tie(b.class_id, b.scene_id, b.image_id);
  });
  std::map<int, std::vector<const InstanceRecord*>> by_class;
  for (const InstanceRecord& r : records) by_class[r.class_id].push_back(&r);

  MetricReport report;
  for (int c : std::set<int>(expected_classes.begin(), expected_classes.end()))
    if (!by_class.contains(c)) report.warnings.push_back("class " + std::to_string(c) + " has no instances; omitted");

  for (const auto& [cls, rs] : by_class) {
    ReportRow row;
    row.label = std::to_string(cls);
    row.instances = rs.size();
    std::vector<double> add_s, adds, diam, trans, rot;
    for (const InstanceRecord* r : rs) {
      add_s.push_back(r->add_s());
      adds.push_back(r->adds);
      diam.push_back(r->diameter);
      if (r->matched) {
        ++row.matched;
        trans.push_back(r->trans_error * 100.0);
        rot.push_back(r->rot_error * 180.0 / std::numbers::pi);
      }
    }
    row.unmatched = row.instances - row.matched;
    row.recall_add_s = recall_add_s(add_s, diam, opt.recall_frac);
    row.auc_adds = auc_metric(adds, opt.auc_max);
    row.auc_add_s = auc_metric(add_s, opt.auc_max);
    row.trans_error_cm = mean_or_nan(trans);
    row.rot_error_deg = mean_or_nan(rot);
    report.classes.push_back(row);
  }

  ReportRow& m = report.mean;
  m.label = "mean";
  std::vector<double> recall, auc_s, auc_as, trans, rot;
  for (const ReportRow& r : report.classes) {
    m.instances += r.instances;
    m.matched += r.matched;
    m.unmatched += r.unmatched;
    recall.push_back(r.recall_add_s);
    auc_s.push_back(r.auc_adds);
    auc_as.push_back(r.auc_add_s);
    if (!std::isnan(r.trans_error_cm)) trans.push_back(r.trans_error_cm);
    if (!std::isnan(r.rot_error_deg)) rot.push_back(r.rot_error_deg);
  }
  if (!report.classes.empty()) {
    m.recall_add_s = mean_or_nan(recall);
    m.auc_adds = mean_or_nan(auc_s);
    m.auc_add_s = mean_or_nan(auc_as);
  }
  m.trans_error_cm = mean_or_nan(trans);
  m.rot_error_deg = mean_or_nan(rot);
  return report;
}

}  // namespace posekit

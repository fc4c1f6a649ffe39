#pragma once

// Dataset-level evaluation: per-image matching and per-instance errors,
// reduced into a MetricReport.

#include <algorithm>
#include <map>
#include <thread>
#include <tuple>
#include <vector>

#include "posekit/io/bop.hpp"
#include "posekit/metrics.hpp"

namespace posekit::io {

struct EvalOptions {
  double recall_frac = 0.1;
  double auc_max = 0.1;
  unsigned jobs = 1;  // worker threads; the report does not depend on it
};

struct ImageKey {
  int scene_id = 0;
  int image_id = 0;
  auto operator<=>(const ImageKey&) const = default;
};

inline std::vector<InstanceRecord> evaluate_image(const std::vector<GroundTruthInstance>& gts,
                                                  const std::vector<PosePrediction>& preds,
                                                  const std::map<int, ObjectModel>& models) {
  auto model = [&](int id) -> const ObjectModel& {
    const auto it = models.find(id);
    if (it == models.end()) throw DataError("no model for obj_id " + std::to_string(id));
    return it->second;
  };
  for (const auto& g : gts) model(g.class_id);
  const MatchResult m = match_instances(preds, gts, [&](const PosePrediction& p, const GroundTruthInstance& g) {
    return add_or_adds(model(g.class_id), p.pose, g.pose);
  });
  std::vector<InstanceRecord> out(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const ObjectModel& om = model(gts[i].class_id);
    out[i].scene_id = gts[i].scene_id;
    out[i].image_id = gts[i].image_id;
    out[i].class_id = gts[i].class_id;
    out[i].diameter = om.diameter;
    out[i].symmetric = om.symmetric;
  }
  for (const Match& mt : m.matches) {
    const GroundTruthInstance& g = gts[mt.gt];
    const PosePrediction& p = preds[mt.pred];
    const ObjectModel& om = model(g.class_id);
    InstanceRecord& r = out[mt.gt];
    r.matched = true;
    r.add = add_metric(om, p.pose, g.pose);
    r.adds = adds_metric(om, p.pose, g.pose);
    r.rot_error = geodesic_loss(g.pose.R, p.pose.R);
    r.trans_error = (p.pose.t - g.pose.t).norm();
  }
  return out;
}

inline MetricReport evaluate(const std::vector<SceneAnnotations>& scenes, const std::map<int, ObjectModel>& models,
                             const std::vector<PosePrediction>& preds, const EvalOptions& opt = {}) {
  std::map<ImageKey, std::vector<GroundTruthInstance>> gt_by_image;
  for (const SceneAnnotations& s : scenes)
    for (const GroundTruthInstance& g : s.instances) gt_by_image[{g.scene_id, g.image_id}].push_back(g);
  std::map<ImageKey, std::vector<PosePrediction>> pred_by_image;
  std::size_t orphan = 0;
  for (const PosePrediction& p : preds) {
    const ImageKey key{p.scene_id, p.image_id};
    if (!gt_by_image.contains(key)) {
      ++orphan;
      continue;
    }
    pred_by_image[key].push_back(p);
  }

  std::vector<const std::vector<GroundTruthInstance>*> image_gts;
  std::vector<const std::vector<PosePrediction>*> image_preds;
  static const std::vector<PosePrediction> kNone;
  for (const auto& [key, g] : gt_by_image) {
    image_gts.push_back(&g);
    const auto it = pred_by_image.find(key);
    image_preds.push_back(it == pred_by_image.end() ? &kNone : &it->second);
  }

  std::vector<std::vector<InstanceRecord>> per_image(image_gts.size());
  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(image_gts.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < image_gts.size(); ++i)
      per_image[i] = evaluate_image(*image_gts[i], *image_preds[i], models);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < image_gts.size(); i += jobs)
            per_image[i] = evaluate_image(*image_gts[i], *image_preds[i], models);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<InstanceRecord> records;
  for (auto& v : per_image) records.insert(records.end(), v.begin(), v.end());
  std::vector<int> expected;
  for (const auto& [id, m] : models) expected.push_back(id);
  MetricReport report = aggregate_report(std::move(records), {opt.recall_frac, opt.auc_max}, expected);
  if (orphan)
    report.warnings.push_back(std::to_string(orphan) + " predictions reference images without annotations; ignored");
  return report;
}

}  // namespace posekit::io

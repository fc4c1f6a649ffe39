#pragma once

// Slow, obviously-correct reference implementations used only by tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "posekit/metrics.hpp"
#include "posekit/tensor.hpp"
#include "posekit/visibility.hpp"

namespace oracle {

using namespace posekit;

// Plain nested-loop convolution, zero padding, explicit bounds checks.
inline FeatureMap conv2d(const FeatureMap& x, const ConvParams& p) {
  const long H = static_cast<long>(x.height()), W = static_cast<long>(x.width());
  const long kh = static_cast<long>(p.kernel_h), kw = static_cast<long>(p.kernel_w);
  const long pad = static_cast<long>(p.padding), s = static_cast<long>(p.stride);
  const long oh = (H + 2 * pad - kh) / s + 1, ow = (W + 2 * pad - kw) / s + 1;
  const std::size_t in_pg = p.in_channels / p.groups, out_pg = p.out_channels / p.groups;
  FeatureMap y(p.out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow));
  for (std::size_t o = 0; o < p.out_channels; ++o) {
    const std::size_t g = o / out_pg;
    for (long i = 0; i < oh; ++i)
      for (long j = 0; j < ow; ++j) {
        double acc = p.bias[o];
        for (std::size_t ci = 0; ci < in_pg; ++ci)
          for (long u = 0; u < kh; ++u)
            for (long v = 0; v < kw; ++v) {
              const long yy = i * s + u - pad, xx = j * s + v - pad;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              acc += p.weight(o, ci, static_cast<std::size_t>(u), static_cast<std::size_t>(v)) *
                     x(g * in_pg + ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
        y(o, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
      }
  }
  return y;
}

inline double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Exact minimum barrier distance from one seed to every box pixel. Labels are
// per-channel (max, min) pairs along a path; a label is kept unless another
// label at the same pixel has every max <= and every min >= it. Extending a
// path is monotone in that order, so the Pareto sets contain an optimal path.
inline std::vector<double> exact_barrier(const RgbImage& img, const PixelBox& box, Pixel seed) {
  struct Label {
    std::array<double, 3> hi, lo;
  };
  auto dominates = [](const Label& a, const Label& b) {
    for (int c = 0; c < 3; ++c)
      if (a.hi[c] > b.hi[c] || a.lo[c] < b.lo[c]) return false;
    return true;
  };
  const long W = box.w, H = box.h;
  auto color = [&](long lx, long ly, int c) {
    return img.at(static_cast<std::size_t>(box.y + ly), static_cast<std::size_t>(box.x + lx), static_cast<std::size_t>(c));
  };
  std::vector<std::vector<Label>> labels(static_cast<std::size_t>(W * H));
  std::deque<std::pair<long, Label>> work;
  const long sx = seed.x - box.x, sy = seed.y - box.y;
  Label start;
  for (int c = 0; c < 3; ++c) start.hi[c] = start.lo[c] = color(sx, sy, c);
  labels[static_cast<std::size_t>(sy * W + sx)].push_back(start);
  work.emplace_back(sy * W + sx, start);
  const long dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  while (!work.empty()) {
    const auto [idx, lab] = work.front();
    work.pop_front();
    // Skip labels that were pruned after being queued.
    const auto& here = labels[static_cast<std::size_t>(idx)];
    bool alive = false;
    for (const Label& l : here)
      if (l.hi == lab.hi && l.lo == lab.lo) alive = true;
    if (!alive) continue;
    const long x = idx % W, y = idx / W;
    for (int k = 0; k < 4; ++k) {
      const long nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;
      Label cand;
      for (int c = 0; c < 3; ++c) {
        const double v = color(nx, ny, c);
        cand.hi[c] = std::max(lab.hi[c], v);
        cand.lo[c] = std::min(lab.lo[c], v);
      }
      auto& set = labels[static_cast<std::size_t>(ny * W + nx)];
      if (std::any_of(set.begin(), set.end(), [&](const Label& l) { return dominates(l, cand); })) continue;
      std::erase_if(set, [&](const Label& l) { return dominates(cand, l); });
      set.push_back(cand);
      work.emplace_back(ny * W + nx, cand);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(W * H), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < out.size(); ++i)
    for (const Label& l : labels[i]) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d = std::max(d, l.hi[c] - l.lo[c]);
      out[i] = std::min(out[i], d);
    }
  return out;
}

// Exact V(p) = min over seeds of (barrier/255)^2 + alpha * |p - b| / diag.
inline std::vector<double> exact_discrepancy(const RgbImage& img, const PixelBox& box, const BoundarySeedSet& seeds,
                                             double alpha) {
  std::vector<double> best(static_cast<std::size_t>(box.w * box.h), std::numeric_limits<double>::infinity());
  for (const Pixel& b : seeds.seeds) {
    const auto barrier = exact_barrier(img, box, b);
    for (long ly = 0; ly < box.h; ++ly)
      for (long lx = 0; lx < box.w; ++lx) {
        const std::size_t i = static_cast<std::size_t>(ly * box.w + lx);
        const double dist =
            std::hypot(static_cast<double>(box.x + lx - b.x), static_cast<double>(box.y + ly - b.y)) / box.diagonal();
        const double s = barrier[i] / 255.0;
        best[i] = std::min(best[i], s * s + alpha * dist);
      }
  }
  return best;
}

// Perimeter walk: positions at arc lengths 0, s, 2s, ... < 2(w + h), measured
// clockwise from the top-left corner along sides of length w and h, mapped to
// the outermost pixel ring.
inline std::vector<Pixel> perimeter_positions(const PixelBox& box, long spacing) {
  std::vector<Pixel> out;
  const long P = 2 * (box.w + box.h);
  for (long a = 0; a < P; a += spacing) {
    long u, v;
    if (a < box.w) {
      u = a, v = 0;
    } else if (a < box.w + box.h) {
      u = box.w, v = a - box.w;
    } else if (a < 2 * box.w + box.h) {
      u = box.w - (a - box.w - box.h), v = box.h;
    } else {
      u = 0, v = box.h - (a - 2 * box.w - box.h);
    }
    const Pixel p{box.x + std::min(u, box.w - 1), box.y + std::min(v, box.h - 1)};
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

// Brute-force nearest neighbour: lowest index among equal distances.
inline Neighbor nearest(const std::vector<Vec3>& pts, const Vec3& q) {
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = squared_distance(pts[i], q);
    if (d < best.squared_distance) best = {i, d};
  }
  return best;
}

inline double adds_brute(const ObjectModel& m, const RigidPose& pred, const RigidPose& gt) {
  std::vector<Vec3> target;
  for (const Vec3& x : m.points) target.push_back(gt.apply(x));
  double sum = 0.0;
  for (const Vec3& x : m.points) sum += std::sqrt(nearest(target, pred.apply(x)).squared_distance);
  return sum / static_cast<double>(m.points.size());
}

inline double add_brute(const ObjectModel& m, const RigidPose& pred, const RigidPose& gt) {
  double sum = 0.0;
  for (const Vec3& x : m.points) {
    const Vec3 a = gt.R.matrix() * x + gt.t, b = pred.R.matrix() * x + pred.t;
    sum += std::sqrt((a - b).squaredNorm());
  }
  return sum / static_cast<double>(m.points.size());
}

}  // namespace oracle

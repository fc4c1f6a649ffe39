#pragma once

// Positive-sample selection from the visible part of an object: seeds on the
// ground-truth box perimeter, a minimum-barrier discrepancy map inside the box,
// and per-cell visibility probabilities on a pyramid level.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/fpn.hpp"

namespace posekit {

// Interleaved RGB, intensities in [0, 255].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t height, std::size_t width, std::array<double, 3> fill = {0, 0, 0})
      : height_(height), width_(width), data_(height * width * 3) {
    for (std::size_t i = 0; i < height * width; ++i)
      for (std::size_t c = 0; c < 3; ++c) data_[i * 3 + c] = fill[c];
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * 3 + c]; }

  void set(std::size_t y, std::size_t x, std::array<double, 3> rgb) {
    for (std::size_t c = 0; c < 3; ++c) at(y, x, c) = rgb[c];
  }

  void fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, std::array<double, 3> rgb) {
    for (std::size_t yy = y; yy < std::min(y + h, height_); ++yy)
      for (std::size_t xx = x; xx < std::min(x + w, width_); ++xx) set(yy, xx, rgb);
  }

  void validate() const {
    for (double v : data_)
      if (!(v >= 0.0 && v <= 255.0)) throw DomainError("RgbImage: intensity outside [0, 255]");
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// Axis-aligned box covering pixel columns [x, x + w) and rows [y, y + h).
struct PixelBox {
  long x = 0;
  long y = 0;
  long w = 0;
  long h = 0;

  long area() const { return w * h; }
  double diagonal() const { return std::hypot(static_cast<double>(w), static_cast<double>(h)); }
  bool contains(long px, long py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool inside(std::size_t image_w, std::size_t image_h) const {
    return x >= 0 && y >= 0 && x + w <= static_cast<long>(image_w) && y + h <= static_cast<long>(image_h);
  }
};

struct Pixel {
  long x = 0;
  long y = 0;
  bool operator==(const Pixel&) const = default;
};

struct BoundarySeedSet {
  std::vector<Pixel> seeds;
};

// Seeds every `spacing` pixels of arc length along each side of the box
// perimeter (sides of length w and h), starting at each corner. Perimeter
// positions map to the outermost pixel row/column of the box.
inline BoundarySeedSet seed_boundary(const PixelBox& box, long spacing = 4) {
  if (box.w < 2 || box.h < 2) throw DegenerateError("seed_boundary: box must be at least 2x2 pixels");
  if (spacing < 1) throw DomainError("seed_boundary: spacing must be >= 1");
  BoundarySeedSet out;
  auto emit = [&](long u, long v) {
    const Pixel p{box.x + std::min(u, box.w - 1), box.y + std::min(v, box.h - 1)};
    if (std::find(out.seeds.begin(), out.seeds.end(), p) == out.seeds.end()) out.seeds.push_back(p);
  };
  for (long s = 0; s < box.w; s += spacing) emit(s, 0);              // top, left to right
  for (long s = 0; s < box.h; s += spacing) emit(box.w, s);          // right, top to bottom
  for (long s = 0; s < box.w; s += spacing) emit(box.w - s, box.h);  // bottom, right to left
  for (long s = 0; s < box.h; s += spacing) emit(0, box.h - s);      // left, bottom to top
  return out;
}

// Per-pixel foreground/background discrepancy over the box, in box-local
// row-major order, with the index of the seed whose path won.
struct DiscrepancyMap {
  PixelBox box;
  std::vector<double> value;
  std::vector<int> seed;

  double at(long local_x, long local_y) const { return value[static_cast<std::size_t>(local_y * box.w + local_x)]; }
};

struct MbdOptions {
  double alpha = 0.1;
  int max_passes = 8;
  int labels_per_seed = 2;
};

// V(p) = min over seeds b and 4-connected paths l (inside the box) from b to p
// of (D(l)/255)^2 + alpha * |p - b| / diag(box), where D(l) is the largest
// per-channel intensity range along l.
//
// Each seed is relaxed on its own by alternating forward and backward raster
// passes (at most `max_passes` pairs, fewer once a pair changes nothing). A
// pixel keeps up to `labels_per_seed` path labels (per-channel max and min);
// labels dominated on every channel are dropped, and when the set is full the
// label with the largest range gives way. V is the minimum over seeds. Every
// label is a real path, so V never undercuts the exact value, and since seeds
// never interact, adding seeds can only lower V.
inline DiscrepancyMap discrepancy_map(const RgbImage& img, const PixelBox& box, const BoundarySeedSet& seeds,
                                      const MbdOptions& opt = {}) {
  if (seeds.seeds.empty()) throw DomainError("discrepancy_map: no seeds");
  if (!(opt.alpha >= 0.0)) throw DomainError("discrepancy_map: alpha must be non-negative");
  if (opt.labels_per_seed < 1 || opt.labels_per_seed > 64)
    throw DomainError("discrepancy_map: labels_per_seed must be in [1, 64]");
  if (box.w < 1 || box.h < 1 || !box.inside(img.width(), img.height()))
    throw DomainError("discrepancy_map: box outside image");
  for (const Pixel& s : seeds.seeds)
    if (!box.contains(s.x, s.y)) throw DomainError("discrepancy_map: seed outside box");

  const long W = box.w, H = box.h;
  const std::size_t n = static_cast<std::size_t>(W * H);
  const std::size_t K = static_cast<std::size_t>(opt.labels_per_seed);
  const double inv_diag = 1.0 / box.diagonal();

  struct Label {
    std::array<double, 3> hi, lo;
    double range;
  };
  std::vector<std::array<double, 3>> color(n);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        color[static_cast<std::size_t>(y * W + x)][c] =
            img.at(static_cast<std::size_t>(box.y + y), static_cast<std::size_t>(box.x + x), c);

  DiscrepancyMap out{box, std::vector<double>(n, std::numeric_limits<double>::infinity()), std::vector<int>(n, -1)};
  std::vector<Label> labels(n * K);
  std::vector<std::size_t> count(n);
  std::vector<double> dist(n);
  std::vector<Pixel> done;

  for (std::size_t s = 0; s < seeds.seeds.size(); ++s) {
    const Pixel b = seeds.seeds[s];
    if (std::find(done.begin(), done.end(), b) != done.end()) continue;
    done.push_back(b);
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x)
        dist[static_cast<std::size_t>(y * W + x)] =
            opt.alpha * std::hypot(static_cast<double>(box.x + x - b.x), static_cast<double>(box.y + y - b.y)) * inv_diag;
    std::fill(count.begin(), count.end(), 0);
    const std::size_t bi = static_cast<std::size_t>((b.y - box.y) * W + (b.x - box.x));
    labels[bi * K] = {color[bi], color[bi], 0.0};
    count[bi] = 1;
    if (out.value[bi] > 0.0) {
      out.value[bi] = 0.0;
      out.seed[bi] = static_cast<int>(s);
    }

    auto relax = [&](std::size_t pi, std::size_t qi) {
      bool changed = false;
      const auto& v = color[pi];
      Label* set = &labels[pi * K];
      for (std::size_t qk = 0; qk < count[qi]; ++qk) {
        const Label& q = labels[qi * K + qk];
        Label cand;
        cand.range = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          cand.hi[c] = std::max(q.hi[c], v[c]);
          cand.lo[c] = std::min(q.lo[c], v[c]);
          cand.range = std::max(cand.range, cand.hi[c] - cand.lo[c]);
        }
        auto covers = [](const Label& a, const Label& c) {
          for (std::size_t k = 0; k < 3; ++k)
            if (a.hi[k] > c.hi[k] || a.lo[k] < c.lo[k]) return false;
          return true;
        };
        std::size_t m = count[pi];
        if (std::any_of(set, set + m, [&](const Label& a) { return covers(a, cand); })) continue;
        m = static_cast<std::size_t>(std::remove_if(set, set + m, [&](const Label& a) { return covers(cand, a); }) - set);
        if (m == K) {
          Label* worst = std::max_element(set, set + m, [](const Label& a, const Label& c) { return a.range < c.range; });
          if (worst->range <= cand.range) {
            count[pi] = m;
            continue;
          }
          *worst = cand;
        } else {
          set[m++] = cand;
        }
        count[pi] = m;
        changed = true;
        const double scaled = cand.range / 255.0;
        const double cost = scaled * scaled + dist[pi];
        if (cost < out.value[pi]) {
          out.value[pi] = cost;
          out.seed[pi] = static_cast<int>(s);
        }
      }
      return changed;
    };

    for (int pass = 0; pass < opt.max_passes; ++pass) {
      bool changed = false;
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y * W + x);
          if (x > 0) changed |= relax(i, i - 1);
          if (y > 0) changed |= relax(i, i - static_cast<std::size_t>(W));
        }
      for (long y = H - 1; y >= 0; --y)
        for (long x = W - 1; x >= 0; --x) {
          const std::size_t i = static_cast<std::size_t>(y * W + x);
          if (x + 1 < W) changed |= relax(i, i + 1);
          if (y + 1 < H) changed |= relax(i, i + static_cast<std::size_t>(W));
        }
      if (!changed) break;
    }
  }
  return out;
}

// Visibility of the stride-sized cells overlapping the box. Cell (r, c) of the
// level grid covers pixels [c*stride, (c+1)*stride) x [r*stride, (r+1)*stride);
// only pixels inside the box contribute to its mean.
struct CellVisibility {
  std::size_t stride = 8;
  long row0 = 0, col0 = 0;  // grid coordinates of the first cell
  long rows = 0, cols = 0;
  std::vector<double> mean;  // mean V per cell
  std::vector<double> prob;  // mean / max mean
  std::vector<bool> mask;    // prob > tau

  std::size_t index(long r, long c) const { return static_cast<std::size_t>((r - row0) * cols + (c - col0)); }
  bool covers(long r, long c) const { return r >= row0 && r < row0 + rows && c >= col0 && c < col0 + cols; }
};

// Normalizes per-cell mean discrepancies and thresholds them (strictly).
inline void normalize_cells(CellVisibility& cv, double tau) {
  const double peak = cv.mean.empty() ? 0.0 : *std::max_element(cv.mean.begin(), cv.mean.end());
  if (!(peak > 0.0)) throw DegenerateError("cell_visibility: every cell has zero mean discrepancy");
  cv.prob.resize(cv.mean.size());
  cv.mask.resize(cv.mean.size());
  for (std::size_t i = 0; i < cv.mean.size(); ++i) {
    cv.prob[i] = cv.mean[i] / peak;
    cv.mask[i] = cv.prob[i] > tau;
  }
}

inline CellVisibility cell_visibility(const DiscrepancyMap& v, std::size_t stride, double tau = 0.25) {
  if (stride == 0) throw DomainError("cell_visibility: stride must be positive");
  const PixelBox& b = v.box;
  if (b.w < 1 || b.h < 1) throw DegenerateError("cell_visibility: empty box");
  const long s = static_cast<long>(stride);
  CellVisibility cv;
  cv.stride = stride;
  cv.row0 = b.y / s;
  cv.col0 = b.x / s;
  cv.rows = (b.y + b.h - 1) / s - cv.row0 + 1;
  cv.cols = (b.x + b.w - 1) / s - cv.col0 + 1;
  const std::size_t cells = static_cast<std::size_t>(cv.rows * cv.cols);
  std::vector<double> sum(cells, 0.0);
  std::vector<std::size_t> count(cells, 0);
  for (long ly = 0; ly < b.h; ++ly)
    for (long lx = 0; lx < b.w; ++lx) {
      const std::size_t i = cv.index((b.y + ly) / s, (b.x + lx) / s);
      sum[i] += v.at(lx, ly);
      ++count[i];
    }
  cv.mean.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) cv.mean[i] = sum[i] / static_cast<double>(count[i]);
  normalize_cells(cv, tau);
  return cv;
}

struct SamplerOptions {
  long seed_spacing = 4;
  double alpha = 0.1;
  double tau = 0.25;
  int max_passes = 8;
  int labels_per_seed = 2;
};

// Pyramid level an instance trains on: FCOS size-of-interest ranges applied
// to half the longer box side (the largest center-to-side distance).
inline std::size_t assign_level(const PixelBox& box) {
  static constexpr std::array<double, 4> kUpper = {64.0, 128.0, 256.0, 512.0};
  const double reach = 0.5 * static_cast<double>(std::max(box.w, box.h));
  for (std::size_t l = 0; l < kUpper.size(); ++l)
    if (reach <= kUpper[l]) return l;
  return kUpper.size();
}

struct LevelAssignment {
  std::size_t stride = 8;
  long rows = 0, cols = 0;
  std::vector<int> owner;  // instance index per cell, -1 when negative

  int at(long r, long c) const { return owner[static_cast<std::size_t>(r * cols + c)]; }
};

struct PositiveSamples {
  std::vector<LevelAssignment> levels;   // P3..P7
  std::vector<std::size_t> instance_level;
  std::vector<CellVisibility> visibility;  // per instance, at its level

  bool positive(std::size_t instance, std::size_t level, long r, long c) const {
    return levels[level].at(r, c) == static_cast<int>(instance);
  }
  std::size_t positive_count(std::size_t instance) const {
    std::size_t n = 0;
    for (const auto& lv : levels)
      n += static_cast<std::size_t>(std::count(lv.owner.begin(), lv.owner.end(), static_cast<int>(instance)));
    return n;
  }
};

// Seeds, discrepancy and cell visibility for every instance; a cell claimed by
// several instances goes to the one with the smallest box (lowest index on ties).
inline PositiveSamples select_positive_samples(const RgbImage& img, const std::vector<PixelBox>& boxes,
                                               const SamplerOptions& opt = {}) {
  PositiveSamples out;
  std::size_t rows = (img.height() + 7) / 8, cols = (img.width() + 7) / 8;
  for (std::size_t l = 0; l < kPyramidStrides.size(); ++l) {
    out.levels.push_back({kPyramidStrides[l], static_cast<long>(rows), static_cast<long>(cols),
                          std::vector<int>(rows * cols, -1)});
    rows = ceil_half(rows);
    cols = ceil_half(cols);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const PixelBox& box = boxes[i];
    if (!box.inside(img.width(), img.height())) throw DomainError("select_positive_samples: box outside image");
    const std::size_t level = assign_level(box);
    const DiscrepancyMap v = discrepancy_map(img, box, seed_boundary(box, opt.seed_spacing),
                                            {opt.alpha, opt.max_passes, opt.labels_per_seed});
    CellVisibility cv = cell_visibility(v, kPyramidStrides[level], opt.tau);
    LevelAssignment& grid = out.levels[level];
    for (long r = cv.row0; r < cv.row0 + cv.rows; ++r)
      for (long c = cv.col0; c < cv.col0 + cv.cols; ++c) {
        if (r >= grid.rows || c >= grid.cols || !cv.mask[cv.index(r, c)]) continue;
        int& owner = grid.owner[static_cast<std::size_t>(r * grid.cols + c)];
        if (owner < 0 || box.area() < boxes[static_cast<std::size_t>(owner)].area()) owner = static_cast<int>(i);
      }
    out.instance_level.push_back(level);
    out.visibility.push_back(std::move(cv));
  }
  return out;
}

}  // namespace posekit

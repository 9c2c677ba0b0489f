#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthpose/tensor.hpp"
#include "depthpose/topology.hpp"

namespace depthpose {

// Ground-truth heatmaps (J channels) and part affinity maps (2L channels) at
// the feature-grid resolution. Coordinates are in grid pixels.
struct GtMaps {
  Tensor c_star;  // [J, H, W]
  Tensor b_star;  // [2L, H, W]
  int clamp_warnings = 0;
};

// Per-pixel max over persons of a unit Gaussian around each present joint.
// Keypoints outside the frame are clamped onto it and counted.
inline Tensor render_heatmaps(const std::vector<Skeleton>& skels,
                              const JointTopology& topo, int height, int width,
                              double sigma, int* clamp_warnings = nullptr) {
  check(sigma > 0.0, "render_heatmaps: sigma must be positive");
  const int j = topo.num_joints();
  Tensor maps({j, height, width});
  int warnings = 0;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  // Beyond this radius the Gaussian is below 1e-8; skip those pixels.
  const int radius = int(std::ceil(sigma * 6.1)) + 1;
  for (const Skeleton& s : skels) {
    for (int jid = 0; jid < j; ++jid) {
      const Keypoint& kp = s.keypoints[size_t(jid)];
      if (!kp.present) continue;
      double cx = kp.x, cy = kp.y;
      if (cx < 0 || cx > width - 1 || cy < 0 || cy > height - 1) {
        cx = std::clamp(cx, 0.0, double(width - 1));
        cy = std::clamp(cy, 0.0, double(height - 1));
        ++warnings;
      }
      const int y0 = std::max(0, int(std::floor(cy)) - radius);
      const int y1 = std::min(height - 1, int(std::ceil(cy)) + radius);
      const int x0 = std::max(0, int(std::floor(cx)) - radius);
      const int x1 = std::min(width - 1, int(std::ceil(cx)) + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          const float v = float(std::exp(-d2 * inv));
          float& cell = maps.at(jid, y, x);
          if (v > cell) cell = v;
        }
      }
    }
  }
  if (clamp_warnings) *clamp_warnings = warnings;
  return maps;
}

// Unit direction vectors within limb_width of each limb segment; overlapping
// contributions are averaged per pixel. Zero-length limbs contribute nothing.
inline Tensor render_pafs(const std::vector<Skeleton>& skels,
                          const JointTopology& topo, int height, int width,
                          double limb_width) {
  check(limb_width > 0.0, "render_pafs: limb_width must be positive");
  const int l = topo.num_limbs();
  Tensor maps({2 * l, height, width});
  std::vector<int> counts(size_t(int64_t(l) * height * width), 0);
  for (const Skeleton& s : skels) {
    for (int lid = 0; lid < l; ++lid) {
      const Keypoint& pa = s.keypoints[size_t(topo.limbs[size_t(lid)].parent)];
      const Keypoint& pb = s.keypoints[size_t(topo.limbs[size_t(lid)].child)];
      if (!pa.present || !pb.present) continue;
      const double dx = pb.x - pa.x, dy = pb.y - pa.y;
      const double len = std::sqrt(dx * dx + dy * dy);
      if (len < 1e-9) continue;
      const double ux = dx / len, uy = dy / len;
      const int x0 = std::max(0, int(std::floor(std::min(pa.x, pb.x) - limb_width)));
      const int x1 = std::min(width - 1, int(std::ceil(std::max(pa.x, pb.x) + limb_width)));
      const int y0 = std::max(0, int(std::floor(std::min(pa.y, pb.y) - limb_width)));
      const int y1 = std::min(height - 1, int(std::ceil(std::max(pa.y, pb.y) + limb_width)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          // Distance from the pixel to the segment.
          const double t = std::clamp(((x - pa.x) * dx + (y - pa.y) * dy) / (len * len), 0.0, 1.0);
          const double px = pa.x + t * dx, py = pa.y + t * dy;
          const double dist = std::hypot(x - px, y - py);
          if (dist > limb_width) continue;
          const size_t ci = size_t((int64_t(lid) * height + y) * width + x);
          const int n = counts[ci];
          float& mx = maps.at(2 * lid, y, x);
          float& my = maps.at(2 * lid + 1, y, x);
          mx = float((mx * n + ux) / (n + 1));
          my = float((my * n + uy) / (n + 1));
          counts[ci] = n + 1;
        }
      }
    }
  }
  return maps;
}

struct RenderParams {
  double sigma = 7.0;       // full-image pixels; divided by scale when rendering
  double limb_width = 1.0;  // feature-grid pixels
};

// Renders both map sets at grid resolution from image-frame skeletons.
inline GtMaps render_gt_maps(const std::vector<Skeleton>& image_skels,
                             const JointTopology& topo, int grid_h, int grid_w,
                             double scale, const RenderParams& params = {}) {
  std::vector<Skeleton> grid_skels;
  grid_skels.reserve(image_skels.size());
  for (const Skeleton& s : image_skels)
    grid_skels.push_back(skeleton_to_grid(s, scale));
  GtMaps gt;
  gt.c_star = render_heatmaps(grid_skels, topo, grid_h, grid_w,
                              params.sigma / scale, &gt.clamp_warnings);
  gt.b_star = render_pafs(grid_skels, topo, grid_h, grid_w, params.limb_width);
  return gt;
}

}  // namespace depthpose

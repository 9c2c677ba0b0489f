#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthpose/tensor.hpp"
#include "depthpose/topology.hpp"

namespace depthpose {

struct Peak {
  double x;
  double y;
  double score;
};

// Strict 3x3 local maxima at or above thresh, scanned row-major, with
// separable quadratic sub-pixel refinement.
inline std::vector<Peak> find_peaks(const Tensor& map, int channel,
                                    double thresh) {
  const int h = map.shape[1], w = map.shape[2];
  std::vector<Peak> peaks;
  auto v = [&](int y, int x) { return double(map.at(channel, y, x)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = v(y, x);
      if (c < thresh) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (v(ny, nx) >= c) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      double px = x, py = y;
      if (x > 0 && x < w - 1) {
        const double denom = v(y, x - 1) - 2.0 * c + v(y, x + 1);
        if (denom < -1e-12)
          px += std::clamp(0.5 * (v(y, x - 1) - v(y, x + 1)) / denom, -0.5, 0.5);
      }
      if (y > 0 && y < h - 1) {
        const double denom = v(y - 1, x) - 2.0 * c + v(y + 1, x);
        if (denom < -1e-12)
          py += std::clamp(0.5 * (v(y - 1, x) - v(y + 1, x)) / denom, -0.5, 0.5);
      }
      peaks.push_back(Peak{px, py, c});
    }
  }
  return peaks;
}

inline double bilinear_sample(const Tensor& maps, int channel, double x,
                              double y) {
  const int h = maps.shape[1], w = maps.shape[2];
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = std::min(int(std::floor(x)), w - 2 >= 0 ? w - 2 : 0);
  const int y0 = std::min(int(std::floor(y)), h - 2 >= 0 ? h - 2 : 0);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * maps.at(channel, y0, x0) +
                     fx * maps.at(channel, y0, x1)) +
         fy * ((1 - fx) * maps.at(channel, y1, x0) +
               fx * maps.at(channel, y1, x1));
}

struct ConnectionScore {
  double score = 0.0;          // mean dot product along the segment
  double success_ratio = 0.0;  // fraction of samples with dot > 0.05
};

// Line integral of the limb field along p1 -> p2, sampled at n equispaced
// points including both endpoints.
inline ConnectionScore connection_score(const Tensor& paf, int limb_id,
                                        double x1, double y1, double x2,
                                        double y2, int n_samples = 10) {
  check(n_samples >= 2, "connection_score: n_samples must be >= 2");
  const double dx = x2 - x1, dy = y2 - y1;
  const double len = std::sqrt(dx * dx + dy * dy);
  if (len < 1e-9) return {};
  const double ux = dx / len, uy = dy / len;
  double sum = 0.0;
  int hits = 0;
  for (int i = 0; i < n_samples; ++i) {
    const double t = double(i) / double(n_samples - 1);
    const double sx = x1 + t * dx, sy = y1 + t * dy;
    const double fx = bilinear_sample(paf, 2 * limb_id, sx, sy);
    const double fy = bilinear_sample(paf, 2 * limb_id + 1, sx, sy);
    const double dot = fx * ux + fy * uy;
    sum += dot;
    if (dot > 0.05) ++hits;
  }
  return {sum / n_samples, double(hits) / n_samples};
}

struct DecodeParams {
  double peak_thresh = 0.1;
  int n_samples = 10;
  double min_success_ratio = 0.8;
  double min_score = 0.05;
  int min_parts = 3;
  double min_person_score = 0.2;
};

struct LimbCandidate {
  int limb_id;
  int peak_a;  // index into peaks of the parent joint
  int peak_b;  // index into peaks of the child joint
  double score;
};

namespace detail {

// Candidate pairs passing both gates, sorted for greedy selection: score
// descending, ties broken by lower (peak_a, peak_b).
inline std::vector<LimbCandidate> gated_candidates(
    const std::vector<std::vector<Peak>>& peaks, const Tensor& paf,
    const JointTopology& topo, int limb_id, const DecodeParams& params) {
  const Limb& limb = topo.limbs[size_t(limb_id)];
  const auto& pa = peaks[size_t(limb.parent)];
  const auto& pb = peaks[size_t(limb.child)];
  std::vector<LimbCandidate> out;
  for (int i = 0; i < int(pa.size()); ++i) {
    for (int j = 0; j < int(pb.size()); ++j) {
      const ConnectionScore cs =
          connection_score(paf, limb_id, pa[size_t(i)].x, pa[size_t(i)].y,
                           pb[size_t(j)].x, pb[size_t(j)].y, params.n_samples);
      if (cs.success_ratio >= params.min_success_ratio &&
          cs.score >= params.min_score)
        out.push_back(LimbCandidate{limb_id, i, j, cs.score});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const LimbCandidate& a, const LimbCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.peak_a != b.peak_a) return a.peak_a < b.peak_a;
              return a.peak_b < b.peak_b;
            });
  return out;
}

// Greedy conflict-free selection within one limb type.
inline std::vector<LimbCandidate> greedy_select(
    const std::vector<LimbCandidate>& sorted, int n_a, int n_b) {
  std::vector<char> used_a(size_t(n_a), 0), used_b(size_t(n_b), 0);
  std::vector<LimbCandidate> picked;
  for (const LimbCandidate& c : sorted) {
    if (used_a[size_t(c.peak_a)] || used_b[size_t(c.peak_b)]) continue;
    used_a[size_t(c.peak_a)] = 1;
    used_b[size_t(c.peak_b)] = 1;
    picked.push_back(c);
  }
  return picked;
}

}  // namespace detail

// Groups per-joint peaks into skeletons: greedy per-limb matching on PAF
// line-integral scores, then merging of connections that share endpoints.
inline std::vector<Skeleton> assemble_skeletons(
    const std::vector<std::vector<Peak>>& peaks, const Tensor& paf,
    const JointTopology& topo, const DecodeParams& params = {}) {
  const int num_joints = topo.num_joints();
  check(int(peaks.size()) == num_joints,
        "assemble_skeletons: one peak list per joint required");

  struct Partial {
    std::vector<int> peak_of_joint;  // -1 where unassigned
    double score_sum = 0.0;
    int score_terms = 0;
  };
  std::vector<Partial> partial;

  auto find_partial = [&](int joint, int peak) {
    for (size_t s = 0; s < partial.size(); ++s)
      if (partial[s].peak_of_joint[size_t(joint)] == peak) return int(s);
    return -1;
  };

  for (int lid = 0; lid < topo.num_limbs(); ++lid) {
    const Limb& limb = topo.limbs[size_t(lid)];
    const auto sorted = detail::gated_candidates(peaks, paf, topo, lid, params);
    const auto picked = detail::greedy_select(
        sorted, int(peaks[size_t(limb.parent)].size()),
        int(peaks[size_t(limb.child)].size()));
    for (const LimbCandidate& c : picked) {
      const int sa = find_partial(limb.parent, c.peak_a);
      const int sb = find_partial(limb.child, c.peak_b);
      const double kp_score = peaks[size_t(limb.parent)][size_t(c.peak_a)].score +
                              peaks[size_t(limb.child)][size_t(c.peak_b)].score;
      if (sa < 0 && sb < 0) {
        Partial p;
        p.peak_of_joint.assign(size_t(num_joints), -1);
        p.peak_of_joint[size_t(limb.parent)] = c.peak_a;
        p.peak_of_joint[size_t(limb.child)] = c.peak_b;
        p.score_sum = kp_score + c.score;
        p.score_terms = 3;
        partial.push_back(p);
      } else if (sa >= 0 && sb < 0) {
        Partial& p = partial[size_t(sa)];
        if (p.peak_of_joint[size_t(limb.child)] != -1) continue;  // conflicting slot
        p.peak_of_joint[size_t(limb.child)] = c.peak_b;
        p.score_sum += peaks[size_t(limb.child)][size_t(c.peak_b)].score + c.score;
        p.score_terms += 2;
      } else if (sa < 0 && sb >= 0) {
        Partial& p = partial[size_t(sb)];
        if (p.peak_of_joint[size_t(limb.parent)] != -1) continue;
        p.peak_of_joint[size_t(limb.parent)] = c.peak_a;
        p.score_sum += peaks[size_t(limb.parent)][size_t(c.peak_a)].score + c.score;
        p.score_terms += 2;
      } else if (sa != sb) {
        // Merge if the two partial skeletons occupy disjoint joints.
        Partial& a = partial[size_t(sa)];
        Partial& b = partial[size_t(sb)];
        bool disjoint = true;
        for (int jj = 0; jj < num_joints; ++jj)
          if (a.peak_of_joint[size_t(jj)] != -1 && b.peak_of_joint[size_t(jj)] != -1)
            disjoint = false;
        if (!disjoint) continue;
        for (int jj = 0; jj < num_joints; ++jj)
          if (b.peak_of_joint[size_t(jj)] != -1)
            a.peak_of_joint[size_t(jj)] = b.peak_of_joint[size_t(jj)];
        a.score_sum += b.score_sum + c.score;
        a.score_terms += b.score_terms + 1;
        partial.erase(partial.begin() + sb);
      } else {
        // Both endpoints already in the same skeleton; count the connection.
        partial[size_t(sa)].score_sum += c.score;
        partial[size_t(sa)].score_terms += 1;
      }
    }
  }

  std::vector<Skeleton> out;
  for (const Partial& p : partial) {
    int parts = 0;
    for (int jj = 0; jj < num_joints; ++jj)
      if (p.peak_of_joint[size_t(jj)] != -1) ++parts;
    const double person_score =
        p.score_terms > 0 ? p.score_sum / p.score_terms : 0.0;
    if (parts < params.min_parts || person_score < params.min_person_score)
      continue;
    Skeleton s(num_joints);
    for (int jj = 0; jj < num_joints; ++jj) {
      const int pi = p.peak_of_joint[size_t(jj)];
      if (pi < 0) continue;
      const Peak& pk = peaks[size_t(jj)][size_t(pi)];
      s.set(jj, pk.x, pk.y, pk.score);
    }
    s.person_score = person_score;
    out.push_back(std::move(s));
  }
  return out;
}

// Convenience: peaks for every joint channel of a heatmap set.
inline std::vector<std::vector<Peak>> find_all_peaks(const Tensor& heat,
                                                     double thresh) {
  std::vector<std::vector<Peak>> out(size_t(heat.shape[0]));
  for (int c = 0; c < heat.shape[0]; ++c) out[size_t(c)] = find_peaks(heat, c, thresh);
  return out;
}

inline std::vector<Skeleton> decode_maps(const Tensor& heat, const Tensor& paf,
                                         const JointTopology& topo,
                                         const DecodeParams& params = {}) {
  return assemble_skeletons(find_all_peaks(heat, params.peak_thresh), paf,
                            topo, params);
}

// Transforms maps predicted on a horizontally flipped image back into the
// original frame: mirror columns, swap left/right channels, negate PAF x.
inline Tensor unflip_heatmaps(const Tensor& heat, const JointTopology& topo) {
  check(heat.shape[0] == topo.num_joints(),
        strf("unflip_heatmaps: %d channels, topology has %d joints",
             heat.shape[0], topo.num_joints()));
  const int h = heat.shape[1], w = heat.shape[2];
  Tensor out(heat.shape);
  for (int j = 0; j < heat.shape[0]; ++j) {
    const int src = topo.lr_swap[size_t(j)];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(j, y, x) = heat.at(src, y, w - 1 - x);
  }
  return out;
}

inline Tensor unflip_pafs(const Tensor& paf, const JointTopology& topo) {
  check(paf.shape[0] == 2 * topo.num_limbs(),
        strf("unflip_pafs: %d channels, topology has %d limbs", paf.shape[0],
             topo.num_limbs()));
  const int h = paf.shape[1], w = paf.shape[2];
  const std::vector<int> lswap = topo.limb_swap();
  Tensor out(paf.shape);
  for (int l = 0; l < topo.num_limbs(); ++l) {
    const int src = lswap[size_t(l)];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(2 * l, y, x) = -paf.at(2 * src, y, w - 1 - x);
        out.at(2 * l + 1, y, x) = paf.at(2 * src + 1, y, w - 1 - x);
      }
    }
  }
  return out;
}

// Averages maps from the original image with un-flipped maps from its mirror.
inline std::pair<Tensor, Tensor> flip_average(const Tensor& heat,
                                              const Tensor& paf,
                                              const Tensor& heat_flipped,
                                              const Tensor& paf_flipped,
                                              const JointTopology& topo) {
  check(heat.same_shape(heat_flipped) && paf.same_shape(paf_flipped),
        "flip_average: map shapes must match");
  Tensor h2 = unflip_heatmaps(heat_flipped, topo);
  Tensor p2 = unflip_pafs(paf_flipped, topo);
  for (size_t i = 0; i < h2.data.size(); ++i)
    h2.data[i] = 0.5f * (h2.data[i] + heat.data[i]);
  for (size_t i = 0; i < p2.data.size(); ++i)
    p2.data[i] = 0.5f * (p2.data[i] + paf.data[i]);
  return {std::move(h2), std::move(p2)};
}

}  // namespace depthpose

#pragma once

#include <array>
#include <string>
#include <vector>

#include "depthpose/common.hpp"

namespace depthpose {

struct Limb {
  int parent;
  int child;
};

// Joint/limb layout of the decoded skeletons. The default is the 10-joint
// upper-body set with a 9-limb tree rooted at the neck.
struct JointTopology {
  std::vector<std::string> joint_names;
  std::vector<Limb> limbs;
  std::vector<int> lr_swap;  // involution pairing left/right joints
  std::vector<std::pair<std::string, std::vector<int>>> report_groups;

  int num_joints() const { return int(joint_names.size()); }
  int num_limbs() const { return int(limbs.size()); }

  // Limb permutation induced by the joint left/right swap.
  std::vector<int> limb_swap() const {
    std::vector<int> out(limbs.size());
    for (size_t l = 0; l < limbs.size(); ++l) {
      const int p = lr_swap[size_t(limbs[l].parent)];
      const int c = lr_swap[size_t(limbs[l].child)];
      int found = -1;
      for (size_t m = 0; m < limbs.size(); ++m)
        if (limbs[m].parent == p && limbs[m].child == c) found = int(m);
      check(found >= 0, strf("topology: limb %zu has no left/right mirror", l));
      out[l] = found;
    }
    return out;
  }

  void validate() const {
    const int j = num_joints();
    check(j > 0, "topology: needs at least one joint");
    check(int(lr_swap.size()) == j, "topology: lr_swap size mismatch");
    for (int i = 0; i < j; ++i) {
      check(lr_swap[size_t(i)] >= 0 && lr_swap[size_t(i)] < j,
            "topology: lr_swap entry out of range");
      check(lr_swap[size_t(lr_swap[size_t(i)])] == i,
            strf("topology: lr_swap is not an involution at joint %d", i));
    }
    for (const Limb& l : limbs)
      check(l.parent >= 0 && l.parent < j && l.child >= 0 && l.child < j,
            "topology: limb endpoint out of range");
    std::vector<int> seen(size_t(j), 0);
    for (const auto& g : report_groups)
      for (int id : g.second) {
        check(id >= 0 && id < j, "topology: report group joint out of range");
        seen[size_t(id)]++;
      }
    for (int i = 0; i < j; ++i)
      check(seen[size_t(i)] == 1,
            strf("topology: joint %d must belong to exactly one report group",
                 i));
    limb_swap();  // throws if limbs are not mirror-closed
  }
};

enum JointId {
  kHead = 0,
  kNeck = 1,
  kLShoulder = 2,
  kRShoulder = 3,
  kLElbow = 4,
  kRElbow = 5,
  kLWrist = 6,
  kRWrist = 7,
  kLHip = 8,
  kRHip = 9,
};

inline JointTopology default_topology() {
  JointTopology t;
  t.joint_names = {"head",    "neck",    "l_shoulder", "r_shoulder",
                   "l_elbow", "r_elbow", "l_wrist",    "r_wrist",
                   "l_hip",   "r_hip"};
  t.limbs = {{kHead, kNeck},          {kNeck, kLShoulder},
             {kNeck, kRShoulder},     {kLShoulder, kLElbow},
             {kRShoulder, kRElbow},   {kLElbow, kLWrist},
             {kRElbow, kRWrist},      {kNeck, kLHip},
             {kNeck, kRHip}};
  t.lr_swap = {kHead,   kNeck,   kRShoulder, kLShoulder, kRElbow,
               kLElbow, kRWrist, kLWrist,    kRHip,      kLHip};
  t.report_groups = {{"Head", {kHead, kNeck}},
                     {"Shoulder", {kLShoulder, kRShoulder}},
                     {"Hip", {kLHip, kRHip}},
                     {"Elbow", {kLElbow, kRElbow}},
                     {"Wrist", {kLWrist, kRWrist}}};
  t.validate();
  return t;
}

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  bool present = false;
};

// Per-person keypoint list indexed by joint id, in pixel coordinates of the
// frame it was produced in.
struct Skeleton {
  std::vector<Keypoint> keypoints;
  double person_score = 0.0;

  explicit Skeleton(int num_joints = 0) : keypoints(size_t(num_joints)) {}

  int num_present() const {
    int n = 0;
    for (const Keypoint& k : keypoints) n += k.present ? 1 : 0;
    return n;
  }

  void set(int joint, double x, double y, double score = 1.0) {
    keypoints.at(size_t(joint)) = Keypoint{x, y, score, true};
  }

  // Returns true and the bounding box of present joints, or false if empty.
  bool bbox(double* x0, double* y0, double* x1, double* y1) const {
    bool any = false;
    for (const Keypoint& k : keypoints) {
      if (!k.present) continue;
      if (!any) {
        *x0 = *x1 = k.x;
        *y0 = *y1 = k.y;
        any = true;
      } else {
        *x0 = std::min(*x0, k.x);
        *x1 = std::max(*x1, k.x);
        *y0 = std::min(*y0, k.y);
        *y1 = std::max(*y1, k.y);
      }
    }
    return any;
  }
};

// Maps between coordinates of the full-resolution frame and the feature grid
// (half-pixel-center convention, matching the bicubic resampler).
inline double grid_from_image(double v, double scale) {
  return (v + 0.5) / scale - 0.5;
}
inline double image_from_grid(double v, double scale) {
  return (v + 0.5) * scale - 0.5;
}

inline Skeleton rescale_skeleton(const Skeleton& s, double scale_to_image) {
  Skeleton out = s;
  for (Keypoint& k : out.keypoints) {
    if (!k.present) continue;
    k.x = image_from_grid(k.x, scale_to_image);
    k.y = image_from_grid(k.y, scale_to_image);
  }
  return out;
}

inline Skeleton skeleton_to_grid(const Skeleton& s, double scale) {
  Skeleton out = s;
  for (Keypoint& k : out.keypoints) {
    if (!k.present) continue;
    k.x = grid_from_image(k.x, scale);
    k.y = grid_from_image(k.y, scale);
  }
  return out;
}

}  // namespace depthpose

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "depthpose/autodiff.hpp"
#include "depthpose/init.hpp"
#include "depthpose/resample.hpp"
#include "depthpose/topology.hpp"

namespace depthpose {

// One convolution in a channel plan. Padding is tied to the kernel so every
// layer preserves spatial size: 1->0, 3->1, 7->3.
struct ConvSpec {
  int k = 3;
  int out_ch = 0;
};

inline int padding_for_kernel(int k) {
  check(k == 1 || k == 3 || k == 7,
        strf("channel plan: kernel size %d not in {1,3,7}", k));
  return (k - 1) / 2;
}

// Explicit channel plan of the network. The figure-level structure is fixed
// (SR stages with pixel shuffles, feature extraction with pooling, two-branch
// refinement stages); the widths are configuration.
struct ModelConfig {
  int sr_stages = 3;  // total upscale 2^sr_stages
  std::vector<std::vector<ConvSpec>> sr_convs;    // per stage, ReLU after each
  ConvSpec sr_head{3, 1};                         // linear image head
  std::vector<std::vector<ConvSpec>> feat_convs;  // maxpool2 between groups
  int pose_stages = 3;
  std::vector<ConvSpec> branch_stage1;  // hidden convs; 1x1 output added
  std::vector<ConvSpec> branch_refine;
  bool use_sr = true;  // false: bicubic-upsampled input replaces the SR block

  int upscale() const { return 1 << sr_stages; }

  void validate() const {
    check(sr_stages >= 1, "model config: sr_stages must be >= 1");
    check(pose_stages >= 1, "model config: pose_stages must be >= 1");
    if (use_sr) {
      check(int(sr_convs.size()) == sr_stages,
            strf("model config: %zu SR conv groups for %d stages",
                 sr_convs.size(), sr_stages));
      for (const auto& stage : sr_convs) {
        check(!stage.empty(), "model config: empty SR conv group");
        for (const ConvSpec& c : stage) {
          padding_for_kernel(c.k);
          check(c.out_ch >= 1, "model config: non-positive channel width");
        }
        check(stage.back().out_ch % 4 == 0,
              strf("model config: pre-shuffle width %d not divisible by 4",
                   stage.back().out_ch));
      }
      padding_for_kernel(sr_head.k);
      check(sr_head.out_ch == 1, "model config: SR head must output 1 channel");
    }
    check(int(feat_convs.size()) == sr_stages + 1,
          strf("model config: feature block needs %d conv groups, got %zu",
               sr_stages + 1, feat_convs.size()));
    for (const auto& group : feat_convs) {
      check(!group.empty(), "model config: empty feature conv group");
      for (const ConvSpec& c : group) {
        padding_for_kernel(c.k);
        check(c.out_ch >= 1, "model config: non-positive channel width");
      }
    }
    check(!branch_stage1.empty() && !branch_refine.empty(),
          "model config: empty branch plan");
    for (const ConvSpec& c : branch_stage1) padding_for_kernel(c.k);
    for (const ConvSpec& c : branch_refine) padding_for_kernel(c.k);
  }
};

// Small widths for fast CPU runs; the profile used throughout the tests.
inline ModelConfig desk_config(bool use_sr = true) {
  ModelConfig cfg;
  cfg.sr_convs = {{{3, 32}, {3, 32}}, {{3, 16}, {3, 16}}, {{3, 8}, {3, 8}}};
  cfg.sr_head = {3, 1};
  cfg.feat_convs = {{{3, 8}}, {{3, 16}}, {{3, 32}}, {{3, 32}}};
  cfg.branch_stage1 = {{3, 32}, {3, 32}};
  cfg.branch_refine = {{3, 32}, {3, 32}};
  cfg.use_sr = use_sr;
  return cfg;
}

// Wider plan closer to the reference network, with 7x7 refinement kernels.
inline ModelConfig paper_like_config(bool use_sr = true) {
  ModelConfig cfg;
  cfg.sr_convs = {{{3, 64}, {3, 64}}, {{3, 32}, {3, 32}}, {{3, 16}, {3, 16}}};
  cfg.sr_head = {3, 1};
  cfg.feat_convs = {{{3, 16}, {3, 16}}, {{3, 32}, {3, 32}},
                    {{3, 64}, {3, 64}}, {{3, 64}, {1, 64}}};
  cfg.branch_stage1 = {{3, 64}, {3, 64}, {1, 64}};
  cfg.branch_refine = {{7, 64}, {7, 64}, {1, 64}};
  cfg.use_sr = use_sr;
  return cfg;
}

inline ModelConfig profile_config(const std::string& name, bool use_sr = true) {
  if (name == "desk") return desk_config(use_sr);
  if (name == "paper_like") return paper_like_config(use_sr);
  fail(strf("unknown model profile '%s' (expected desk or paper_like)",
            name.c_str()));
}

template <typename T>
struct ForwardResultT {
  Value<T> sr_img;  // empty when use_sr is false
  Value<T> f, s1, s2;
  std::vector<Value<T>> b_stages;  // PAF predictions, one per stage
  std::vector<Value<T>> c_stages;  // heatmap predictions, one per stage
};

struct LossBreakdown {
  double l_hr = 0.0;
  std::vector<double> l_b;
  std::vector<double> l_c;
  double l_p = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double hr = 1.0;
  double pose = 1.0;
};

template <typename T>
struct LossResultT {
  Value<T> total;
  LossBreakdown breakdown;
};

// The DepthPose network: SR block with intermediate taps, feature extraction,
// and iterative two-branch pose refinement, all on the recorded graph.
template <typename T>
class ModelT {
 public:
  ModelT() = default;
  ModelT(const ModelConfig& cfg, const JointTopology& topo, uint64_t seed)
      : cfg_(cfg), topo_(topo), seed_(seed) {
    cfg_.validate();
    topo_.validate();
    build();
  }

  const ModelConfig& config() const { return cfg_; }
  const JointTopology& topology() const { return topo_; }
  uint64_t seed() const { return seed_; }

  std::vector<ParameterT<T>>& params() { return params_; }
  const std::vector<ParameterT<T>>& params() const { return params_; }

  int64_t num_params() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value().numel();
    return n;
  }

  // Inputs are depth images normalized to [0,255]; they are scaled down
  // internally so activations sit near unit range at the paper's lr.
  static constexpr double kInputScale = 1.0 / 255.0;

  ForwardResultT<T> forward(const TensorT<T>& lr_img) const {
    check(lr_img.rank() == 3 && lr_img.shape[0] == 1,
          strf("forward: expected a [1,H,W] depth image, got %s",
               shape_str(lr_img).c_str()));
    ForwardResultT<T> out;
    Value<T> x = scale(constant(lr_img), T(kInputScale));

    Value<T> feat_in;
    if (cfg_.use_sr) {
      Value<T> h = x;
      std::vector<Value<T>> stage_out;
      for (int s = 0; s < cfg_.sr_stages; ++s) {
        for (size_t i = 0; i < sr_layers_[size_t(s)].size(); ++i)
          h = relu(apply_conv(sr_layers_[size_t(s)][i], h));
        h = pixel_shuffle(h, 2);
        stage_out.push_back(h);
      }
      out.sr_img = apply_conv(sr_head_, h);
      // Taps from all but the last stage, averaged back to the feature grid.
      std::vector<Value<T>> taps;
      for (int s = 0; s + 1 < cfg_.sr_stages; ++s)
        taps.push_back(avgpool(stage_out[size_t(s)], 1 << (s + 1)));
      if (taps.size() > 0) out.s1 = taps[0];
      if (taps.size() > 1) out.s2 = taps[1];
      feat_in = h;
    } else {
      const int up = cfg_.upscale();
      TensorT<T> hr = bicubic_resize(lr_img, lr_img.shape[1] * up,
                                     lr_img.shape[2] * up);
      feat_in = scale(constant(std::move(hr)), T(kInputScale));
    }

    Value<T> f = feat_in;
    for (size_t g = 0; g < feat_layers_.size(); ++g) {
      for (const ConvRef& layer : feat_layers_[g]) f = relu(apply_conv(layer, f));
      if (int(g) < cfg_.sr_stages) f = maxpool2(f);
    }
    out.f = f;

    std::vector<Value<T>> feats = {f};
    if (out.s1) feats.push_back(out.s1);
    if (out.s2) feats.push_back(out.s2);

    Value<T> prev_b, prev_c;
    for (int t = 0; t < cfg_.pose_stages; ++t) {
      std::vector<Value<T>> ins = feats;
      if (t > 0) {
        ins.push_back(prev_b);
        ins.push_back(prev_c);
      }
      Value<T> stage_in = ins.size() == 1 ? ins[0] : concat_channels(ins);
      prev_b = run_branch(pose_layers_[size_t(t)][0], stage_in);
      prev_c = run_branch(pose_layers_[size_t(t)][1], stage_in);
      out.b_stages.push_back(prev_b);
      out.c_stages.push_back(prev_c);
    }
    return out;
  }

  // l_hr = mse(sr, hr); l_p = sum over stages of mse(B_t,B*) + mse(C_t,C*);
  // total = w_hr * l_hr + w_pose * l_p (unit weights by default).
  LossResultT<T> compute_loss(const ForwardResultT<T>& fwd,
                              const TensorT<T>& b_star,
                              const TensorT<T>& c_star,
                              const TensorT<T>& hr_target,
                              const LossWeights& w = {}) const {
    LossResultT<T> res;
    Value<T> bs = constant(b_star);
    Value<T> cs = constant(c_star);
    Value<T> l_pose;
    for (int t = 0; t < cfg_.pose_stages; ++t) {
      Value<T> lb = mse_loss(fwd.b_stages[size_t(t)], bs);
      Value<T> lc = mse_loss(fwd.c_stages[size_t(t)], cs);
      res.breakdown.l_b.push_back(double(lb->value.data[0]));
      res.breakdown.l_c.push_back(double(lc->value.data[0]));
      Value<T> stage_sum = add(lb, lc);
      l_pose = l_pose ? add(l_pose, stage_sum) : stage_sum;
    }
    res.breakdown.l_p = double(l_pose->value.data[0]);

    if (fwd.sr_img) {
      Value<T> l_hr = mse_loss(fwd.sr_img, constant(hr_target));
      res.breakdown.l_hr = double(l_hr->value.data[0]);
      res.total = add(scale(l_hr, T(w.hr)), scale(l_pose, T(w.pose)));
    } else {
      res.total = scale(l_pose, T(w.pose));
    }
    res.breakdown.total = double(res.total->value.data[0]);
    return res;
  }

 private:
  struct ConvRef {
    int w_idx = -1;
    int b_idx = -1;
    int k = 0;
    int pad = 0;
    bool linear = false;  // no ReLU (SR image head, branch outputs)
  };

  ModelConfig cfg_;
  JointTopology topo_;
  uint64_t seed_ = 0;
  std::vector<ParameterT<T>> params_;
  std::vector<std::vector<ConvRef>> sr_layers_;
  ConvRef sr_head_;
  std::vector<std::vector<ConvRef>> feat_layers_;
  // [stage][0=paf branch, 1=heatmap branch][layer]
  std::vector<std::array<std::vector<ConvRef>, 2>> pose_layers_;
  int layer_ordinal_ = 0;

  ConvRef add_conv(const std::string& name, int in_ch, const ConvSpec& spec,
                   bool linear = false) {
    ConvRef ref;
    ref.k = spec.k;
    ref.pad = padding_for_kernel(spec.k);
    ref.linear = linear;
    const uint64_t s = derive_seed(seed_, uint64_t(layer_ordinal_++));
    params_.emplace_back(name + ".w",
                         orthogonal_conv_init<T>(spec.out_ch, in_ch, spec.k, s));
    ref.w_idx = int(params_.size()) - 1;
    params_.emplace_back(name + ".b", TensorT<T>({spec.out_ch}, T(0)));
    ref.b_idx = int(params_.size()) - 1;
    return ref;
  }

  Value<T> apply_conv(const ConvRef& ref, const Value<T>& x) const {
    return conv2d(x, params_[size_t(ref.w_idx)].node,
                  params_[size_t(ref.b_idx)].node, ref.pad);
  }

  Value<T> run_branch(const std::vector<ConvRef>& layers,
                      const Value<T>& in) const {
    Value<T> h = in;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = apply_conv(layers[i], h);
      if (!layers[i].linear) h = relu(h);
    }
    return h;
  }

  void build() {
    int ch = 1;
    if (cfg_.use_sr) {
      sr_layers_.resize(size_t(cfg_.sr_stages));
      for (int s = 0; s < cfg_.sr_stages; ++s) {
        for (size_t i = 0; i < cfg_.sr_convs[size_t(s)].size(); ++i) {
          const ConvSpec& spec = cfg_.sr_convs[size_t(s)][i];
          sr_layers_[size_t(s)].push_back(add_conv(
              strf("sr.stage%d.conv%zu", s, i), ch, spec));
          ch = spec.out_ch;
        }
        ch /= 4;  // pixel shuffle r=2
      }
      sr_head_ = add_conv("sr.head", ch, cfg_.sr_head, /*linear=*/true);
    } else {
      ch = 1;  // bicubic-upsampled depth image
    }

    int feat_ch = ch;
    feat_layers_.resize(cfg_.feat_convs.size());
    for (size_t g = 0; g < cfg_.feat_convs.size(); ++g) {
      for (size_t i = 0; i < cfg_.feat_convs[g].size(); ++i) {
        const ConvSpec& spec = cfg_.feat_convs[g][i];
        feat_layers_[g].push_back(
            add_conv(strf("feat.g%zu.conv%zu", g, i), feat_ch, spec));
        feat_ch = spec.out_ch;
      }
    }

    int tap_ch = 0;
    if (cfg_.use_sr) {
      for (int s = 0; s + 1 < cfg_.sr_stages; ++s)
        tap_ch += cfg_.sr_convs[size_t(s)].back().out_ch / 4;
    }
    const int paf_ch = 2 * topo_.num_limbs();
    const int heat_ch = topo_.num_joints();
    const int base_in = feat_ch + tap_ch;

    pose_layers_.resize(size_t(cfg_.pose_stages));
    for (int t = 0; t < cfg_.pose_stages; ++t) {
      const auto& plan = t == 0 ? cfg_.branch_stage1 : cfg_.branch_refine;
      const int in_ch = t == 0 ? base_in : base_in + paf_ch + heat_ch;
      const char* branch_name[2] = {"paf", "heat"};
      const int out_ch[2] = {paf_ch, heat_ch};
      for (int br = 0; br < 2; ++br) {
        int c = in_ch;
        for (size_t i = 0; i < plan.size(); ++i) {
          pose_layers_[size_t(t)][size_t(br)].push_back(add_conv(
              strf("pose.s%d.%s.conv%zu", t, branch_name[br], i), c, plan[i]));
          c = plan[i].out_ch;
        }
        pose_layers_[size_t(t)][size_t(br)].push_back(
            add_conv(strf("pose.s%d.%s.out", t, branch_name[br]), c,
                     ConvSpec{1, out_ch[br]}, /*linear=*/true));
      }
    }
  }
};

using Model = ModelT<float>;

}  // namespace depthpose

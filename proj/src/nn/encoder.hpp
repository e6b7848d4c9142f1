#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nn/layers.hpp"

namespace dynacl {

// Residual backbone configuration. The reference setup is the 18-layer net
// (base_width 64); desk-scale runs shrink base_width only.
struct EncoderConfig {
  int in_channels = 3;
  int base_width = 64;
  int blocks_per_stage = 2;  // 4 stages
  int embed_dim = 128;       // projection output d

  int feature_dim() const { return base_width * 8; }

  void validate() const {
    if (in_channels < 1 || base_width < 1 || blocks_per_stage < 1 || embed_dim < 1)
      throw ConfigError("encoder: config fields must be positive");
  }
};

// conv-bn-relu-conv-bn + identity/projection shortcut.
struct BasicBlock {
  BasicBlock(int in_c, int out_c, int stride);

  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);
  void collect_params(const std::string& p, std::vector<ParamRef>& out);
  void collect_state(const std::string& p, std::vector<StateRef>& out);
  void init(Rng& rng);

  Conv2d conv1, conv2;
  DualBatchNorm bn1, bn2;
  ReLU relu1, relu2;
  bool has_downsample;
  std::optional<Conv2d> down_conv;
  std::optional<DualBatchNorm> down_bn;
};

// Shared-weight residual encoder with per-branch normalization statistics and
// a 3-layer projection MLP. Copyable by value, which is how the momentum
// target is made.
class DualBranchEncoder {
 public:
  explicit DualBranchEncoder(const EncoderConfig& cfg, uint64_t seed);

  // Full forward to the projection output (N, d).
  Tensor forward(const Tensor& images, const FwdCtx& ctx);
  // Input gradient of a loss on the embeddings; accumulates parameter
  // gradients when ctx.want_param_grads.
  Tensor backward(const Tensor& grad_embed, const FwdCtx& ctx);

  // Pre-projection representation (N, f).
  Tensor features(const Tensor& images, const FwdCtx& ctx);
  Tensor backward_features(const Tensor& grad_feat, const FwdCtx& ctx);

  std::vector<ParamRef> params();
  std::vector<StateRef> state();
  size_t parameter_count();
  void zero_grads();

  const EncoderConfig& config() const { return cfg_; }

 private:
  Tensor forward_backbone(const Tensor& images, const FwdCtx& ctx);
  Tensor backward_backbone(const Tensor& grad_feat, const FwdCtx& ctx);

  EncoderConfig cfg_;
  Conv2d stem_conv_;
  DualBatchNorm stem_bn_;
  ReLU stem_relu_;
  std::vector<BasicBlock> blocks_;
  GlobalAvgPool pool_;
  Linear proj1_, proj2_, proj3_;
  DualBatchNorm proj_bn1_, proj_bn2_;
  ReLU proj_relu1_, proj_relu2_;
};

// Exponential-moving-average copy of the online encoder. The target never
// receives gradients; all state tensors, including both normalization sets,
// follow theta_t <- m * theta_t + (1-m) * theta_online.
struct MomentumState {
  DualBranchEncoder target;
  double momentum = 0.99;

  MomentumState(const DualBranchEncoder& online, double m)
      : target(online), momentum(m) {
    if (m < 0.0 || m >= 1.0 + 1e-12)
      throw ConfigError("momentum: coefficient must lie in [0,1]");
  }

  void update(DualBranchEncoder& online);
};

}  // namespace dynacl

#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace dynacl {

enum class Branch { clean = 0, adversarial = 1 };

// Per-forward context. Layers cache activations for the following backward
// unless cache==false (target/eval-only forwards).
struct FwdCtx {
  bool train = true;                 // batch stats vs running stats
  bool update_running_stats = true;  // honored only when train
  Branch branch = Branch::clean;
  bool want_param_grads = true;      // false during input-only attacks
  bool cache = true;
};

// Named handle on a parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
  bool norm_or_bias;  // excluded from weight decay and LARS adaptation
};

// Named handle on any state tensor (parameters plus running statistics);
// drives checkpoints, momentum targets, and bitwise state comparison.
struct StateRef {
  std::string name;
  Tensor* value;
};

// ---------------------------------------------------------------------------
// Conv2d: square kernel, no bias (normalization follows every conv here).
// im2col + GEMM over fixed-size image chunks; chunk partial weight gradients
// are reduced in chunk order so results do not depend on thread count.
// ---------------------------------------------------------------------------
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int ksize, int stride, int pad);

  void init(Rng& rng);  // He initialization, fan-out
  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_state(const std::string& prefix, std::vector<StateRef>& out);

  int out_size(int in_size) const { return (in_size + 2 * pad_ - ksize_) / stride_ + 1; }
  size_t weight_count() const { return weight_.size(); }

 private:
  int in_c_, out_c_, ksize_, stride_, pad_;
  Tensor weight_;  // (out_c, in_c * k * k)
  Tensor grad_;
  Tensor cached_input_;
};

// ---------------------------------------------------------------------------
// Dual batch normalization over (N,C,H,W) or (N,C). Two full sets of affine
// parameters and running statistics; ctx.branch selects the active set. All
// other layers are shared between branches.
// ---------------------------------------------------------------------------
class DualBatchNorm {
 public:
  explicit DualBatchNorm(int channels, double eps = 1e-5, double momentum = 0.1);

  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_state(const std::string& prefix, std::vector<StateRef>& out);

  const Tensor& running_mean(Branch b) const { return run_mean_[int(b)]; }
  const Tensor& running_var(Branch b) const { return run_var_[int(b)]; }

 private:
  int channels_;
  double eps_, momentum_;
  Tensor gamma_[2], beta_[2];
  Tensor gamma_grad_[2], beta_grad_[2];
  Tensor run_mean_[2], run_var_[2];

  // backward cache
  bool cached_train_ = false;
  Branch cached_branch_ = Branch::clean;
  Tensor cached_xhat_;
  Tensor cached_invstd_;  // per channel
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);

 private:
  Tensor cached_out_;
};

// Global average pool: (N,C,H,W) -> (N,C).
class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);

 private:
  int h_ = 0, w_ = 0;
};

class Linear {
 public:
  Linear(int in_features, int out_features, bool bias = true);

  void init(Rng& rng);
  Tensor forward(const Tensor& x, const FwdCtx& ctx);
  Tensor backward(const Tensor& grad_out, const FwdCtx& ctx);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_state(const std::string& prefix, std::vector<StateRef>& out);

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  int in_f_, out_f_;
  bool has_bias_;
  Tensor weight_;  // (out, in)
  Tensor bias_;    // (out)
  Tensor weight_grad_, bias_grad_;
  Tensor cached_input_;
};

}  // namespace dynacl

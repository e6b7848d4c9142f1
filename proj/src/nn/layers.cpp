#include "nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "core/blas.hpp"

namespace dynacl {

static constexpr int kConvChunk = 32;  // images per im2col GEMM

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int ksize, int stride, int pad)
    : in_c_(in_channels),
      out_c_(out_channels),
      ksize_(ksize),
      stride_(stride),
      pad_(pad),
      weight_(std::vector<int>{out_channels, in_channels * ksize * ksize}),
      grad_(std::vector<int>{out_channels, in_channels * ksize * ksize}) {}

void Conv2d::init(Rng& rng) {
  const double fan_out = double(out_c_) * ksize_ * ksize_;
  const double std = std::sqrt(2.0 / fan_out);
  for (size_t i = 0; i < weight_.size(); ++i) weight_[i] = rng.normal(0.0, std);
}

// col layout: (in_c*k*k) rows x (chunk*oh*ow) cols, image-major columns.
static void im2col_chunk(const double* x, int n0, int chunk, int in_c, int h,
                         int w, int ksize, int stride, int pad, int oh, int ow,
                         double* col) {
  const int cols = chunk * oh * ow;
  for (int c = 0; c < in_c; ++c) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        double* row = col + (size_t(c) * ksize * ksize + ky * ksize + kx) * cols;
        for (int i = 0; i < chunk; ++i) {
          const double* plane = x + (size_t(n0 + i) * in_c + c) * h * w;
          double* dst = row + size_t(i) * oh * ow;
          for (int y = 0; y < oh; ++y) {
            int sy = y * stride - pad + ky;
            if (sy < 0 || sy >= h) {
              std::fill(dst + size_t(y) * ow, dst + size_t(y + 1) * ow, 0.0);
              continue;
            }
            const double* srow = plane + size_t(sy) * w;
            for (int xI = 0; xI < ow; ++xI) {
              int sx = xI * stride - pad + kx;
              dst[size_t(y) * ow + xI] = (sx >= 0 && sx < w) ? srow[sx] : 0.0;
            }
          }
        }
      }
    }
  }
}

static void col2im_chunk(const double* col, int n0, int chunk, int in_c, int h,
                         int w, int ksize, int stride, int pad, int oh, int ow,
                         double* dx) {
  const int cols = chunk * oh * ow;
  for (int c = 0; c < in_c; ++c) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const double* row = col + (size_t(c) * ksize * ksize + ky * ksize + kx) * cols;
        for (int i = 0; i < chunk; ++i) {
          double* plane = dx + (size_t(n0 + i) * in_c + c) * h * w;
          const double* src = row + size_t(i) * oh * ow;
          for (int y = 0; y < oh; ++y) {
            int sy = y * stride - pad + ky;
            if (sy < 0 || sy >= h) continue;
            double* drow = plane + size_t(sy) * w;
            for (int xI = 0; xI < ow; ++xI) {
              int sx = xI * stride - pad + kx;
              if (sx >= 0 && sx < w) drow[sx] += src[size_t(y) * ow + xI];
            }
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, const FwdCtx& ctx) {
  contract(x.ndim() == 4 && x.dim(1) == in_c_,
           "conv: input shape " + x.shape_str() + " does not match in_channels " +
               std::to_string(in_c_));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_size(h), ow = out_size(w);
  contract(oh >= 1 && ow >= 1, "conv: input spatially smaller than kernel");

  Tensor y(std::vector<int>{n, out_c_, oh, ow});
  const int k2 = in_c_ * ksize_ * ksize_;
  const int n_chunks = (n + kConvChunk - 1) / kConvChunk;

#pragma omp parallel
  {
    std::vector<double> col(size_t(k2) * kConvChunk * oh * ow);
    std::vector<double> ybuf(size_t(out_c_) * kConvChunk * oh * ow);
#pragma omp for schedule(static)
    for (int ci = 0; ci < n_chunks; ++ci) {
      const int n0 = ci * kConvChunk;
      const int chunk = std::min(kConvChunk, n - n0);
      const int cols = chunk * oh * ow;
      im2col_chunk(x.data(), n0, chunk, in_c_, h, w, ksize_, stride_, pad_, oh,
                   ow, col.data());
      gemm(false, false, out_c_, cols, k2, 1.0, weight_.data(), k2, col.data(),
           cols, 0.0, ybuf.data(), cols);
      // scatter (out_c, chunk*oh*ow) -> NCHW
      for (int oc = 0; oc < out_c_; ++oc)
        for (int i = 0; i < chunk; ++i)
          std::copy_n(ybuf.data() + size_t(oc) * cols + size_t(i) * oh * ow,
                      size_t(oh) * ow,
                      y.data() + ((size_t(n0 + i) * out_c_ + oc) * oh * ow));
    }
  }

  if (ctx.cache) cached_input_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const FwdCtx& ctx) {
  contract(!cached_input_.empty(), "conv: backward without cached forward");
  const Tensor& x = cached_input_;
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_size(h), ow = out_size(w);
  contract(grad_out.ndim() == 4 && grad_out.dim(0) == n &&
               grad_out.dim(1) == out_c_ && grad_out.dim(2) == oh &&
               grad_out.dim(3) == ow,
           "conv: grad shape mismatch");

  Tensor dx(x.shape());
  const int k2 = in_c_ * ksize_ * ksize_;
  const int n_chunks = (n + kConvChunk - 1) / kConvChunk;

  // Per-chunk weight-gradient partials, reduced sequentially afterwards so the
  // accumulation order is independent of the thread count.
  std::vector<std::vector<double>> dw_partials;
  if (ctx.want_param_grads)
    dw_partials.assign(size_t(n_chunks), std::vector<double>());

#pragma omp parallel
  {
    std::vector<double> col(size_t(k2) * kConvChunk * oh * ow);
    std::vector<double> gbuf(size_t(out_c_) * kConvChunk * oh * ow);
    std::vector<double> dcol(size_t(k2) * kConvChunk * oh * ow);
#pragma omp for schedule(static)
    for (int ci = 0; ci < n_chunks; ++ci) {
      const int n0 = ci * kConvChunk;
      const int chunk = std::min(kConvChunk, n - n0);
      const int cols = chunk * oh * ow;
      // gather grad into (out_c, chunk*oh*ow)
      for (int oc = 0; oc < out_c_; ++oc)
        for (int i = 0; i < chunk; ++i)
          std::copy_n(grad_out.data() + ((size_t(n0 + i) * out_c_ + oc) * oh * ow),
                      size_t(oh) * ow,
                      gbuf.data() + size_t(oc) * cols + size_t(i) * oh * ow);
      if (ctx.want_param_grads) {
        im2col_chunk(x.data(), n0, chunk, in_c_, h, w, ksize_, stride_, pad_,
                     oh, ow, col.data());
        auto& part = dw_partials[size_t(ci)];
        part.assign(size_t(out_c_) * k2, 0.0);
        gemm(false, true, out_c_, k2, cols, 1.0, gbuf.data(), cols, col.data(),
             cols, 0.0, part.data(), k2);
      }
      gemm(true, false, k2, cols, out_c_, 1.0, weight_.data(), k2, gbuf.data(),
           cols, 0.0, dcol.data(), cols);
      col2im_chunk(dcol.data(), n0, chunk, in_c_, h, w, ksize_, stride_, pad_,
                   oh, ow, dx.data());
    }
  }

  if (ctx.want_param_grads)
    for (const auto& part : dw_partials)
      for (size_t i = 0; i < grad_.size(); ++i) grad_[i] += part[i];

  return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &grad_, false});
}

void Conv2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".weight", &weight_});
}

// ---------------------------------------------------------------------------
// DualBatchNorm
// ---------------------------------------------------------------------------

DualBatchNorm::DualBatchNorm(int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  for (int b = 0; b < 2; ++b) {
    gamma_[b] = Tensor(std::vector<int>{channels});
    beta_[b] = Tensor(std::vector<int>{channels});
    gamma_grad_[b] = Tensor(std::vector<int>{channels});
    beta_grad_[b] = Tensor(std::vector<int>{channels});
    run_mean_[b] = Tensor(std::vector<int>{channels});
    run_var_[b] = Tensor(std::vector<int>{channels});
    gamma_[b].fill(1.0);
    run_var_[b].fill(1.0);
  }
}

Tensor DualBatchNorm::forward(const Tensor& x, const FwdCtx& ctx) {
  contract((x.ndim() == 4 || x.ndim() == 2) && x.dim(1) == channels_,
           "batchnorm: bad input shape " + x.shape_str());
  const int n = x.dim(0);
  const int plane = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
  const size_t m = size_t(n) * plane;
  const int b = int(ctx.branch);

  Tensor y(x.shape());
  Tensor invstd(std::vector<int>{channels_});
  Tensor xhat;
  if (ctx.cache && ctx.train) xhat = Tensor(x.shape());

#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (ctx.train) {
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* p = x.data() + (size_t(i) * channels_ + c) * plane;
        for (int j = 0; j < plane; ++j) {
          sum += p[j];
          sq += p[j] * p[j];
        }
      }
      mean = sum / double(m);
      var = std::max(0.0, sq / double(m) - mean * mean);
      if (ctx.update_running_stats) {
        const double unbiased = m > 1 ? var * double(m) / double(m - 1) : var;
        run_mean_[b][size_t(c)] =
            (1.0 - momentum_) * run_mean_[b][size_t(c)] + momentum_ * mean;
        run_var_[b][size_t(c)] =
            (1.0 - momentum_) * run_var_[b][size_t(c)] + momentum_ * unbiased;
      }
    } else {
      mean = run_mean_[b][size_t(c)];
      var = run_var_[b][size_t(c)];
    }
    const double istd = 1.0 / std::sqrt(var + eps_);
    invstd[size_t(c)] = istd;
    const double g = gamma_[b][size_t(c)], bt = beta_[b][size_t(c)];
    for (int i = 0; i < n; ++i) {
      const double* p = x.data() + (size_t(i) * channels_ + c) * plane;
      double* q = y.data() + (size_t(i) * channels_ + c) * plane;
      double* xh = (ctx.cache && ctx.train)
                       ? xhat.data() + (size_t(i) * channels_ + c) * plane
                       : nullptr;
      for (int j = 0; j < plane; ++j) {
        double h = (p[j] - mean) * istd;
        if (xh) xh[j] = h;
        q[j] = g * h + bt;
      }
    }
  }

  if (ctx.cache) {
    cached_train_ = ctx.train;
    cached_branch_ = ctx.branch;
    cached_invstd_ = std::move(invstd);
    cached_xhat_ = std::move(xhat);
  }
  return y;
}

Tensor DualBatchNorm::backward(const Tensor& grad_out, const FwdCtx& ctx) {
  contract(!cached_invstd_.empty(), "batchnorm: backward without cached forward");
  contract(ctx.branch == cached_branch_, "batchnorm: branch changed between passes");
  const int n = grad_out.dim(0);
  const int plane = grad_out.ndim() == 4 ? grad_out.dim(2) * grad_out.dim(3) : 1;
  const size_t m = size_t(n) * plane;
  const int b = int(ctx.branch);

  Tensor dx(grad_out.shape());

  if (!cached_train_) {
    // Running-stat normalization is a per-channel affine map.
    contract(!ctx.want_param_grads,
             "batchnorm: eval-mode backward supports input gradients only");
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels_; ++c) {
      const double k = gamma_[b][size_t(c)] * cached_invstd_[size_t(c)];
      for (int i = 0; i < n; ++i) {
        const double* gp = grad_out.data() + (size_t(i) * channels_ + c) * plane;
        double* dp = dx.data() + (size_t(i) * channels_ + c) * plane;
        for (int j = 0; j < plane; ++j) dp[j] = gp[j] * k;
      }
    }
    return dx;
  }

  contract(!cached_xhat_.empty(), "batchnorm: train backward needs cached xhat");

#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* gp = grad_out.data() + (size_t(i) * channels_ + c) * plane;
      const double* xh = cached_xhat_.data() + (size_t(i) * channels_ + c) * plane;
      for (int j = 0; j < plane; ++j) {
        sum_dy += gp[j];
        sum_dy_xhat += gp[j] * xh[j];
      }
    }
    if (ctx.want_param_grads) {
      gamma_grad_[b][size_t(c)] += sum_dy_xhat;
      beta_grad_[b][size_t(c)] += sum_dy;
    }
    const double g = gamma_[b][size_t(c)];
    const double istd = cached_invstd_[size_t(c)];
    const double inv_m = 1.0 / double(m);
    for (int i = 0; i < n; ++i) {
      const double* gp = grad_out.data() + (size_t(i) * channels_ + c) * plane;
      const double* xh = cached_xhat_.data() + (size_t(i) * channels_ + c) * plane;
      double* dp = dx.data() + (size_t(i) * channels_ + c) * plane;
      for (int j = 0; j < plane; ++j)
        dp[j] = g * istd *
                (gp[j] - inv_m * sum_dy - xh[j] * inv_m * sum_dy_xhat);
    }
  }
  return dx;
}

void DualBatchNorm::collect_params(const std::string& prefix,
                                   std::vector<ParamRef>& out) {
  static const char* names[2] = {"clean", "adv"};
  for (int b = 0; b < 2; ++b) {
    out.push_back({prefix + "." + names[b] + ".gamma", &gamma_[b], &gamma_grad_[b], true});
    out.push_back({prefix + "." + names[b] + ".beta", &beta_[b], &beta_grad_[b], true});
  }
}

void DualBatchNorm::collect_state(const std::string& prefix,
                                  std::vector<StateRef>& out) {
  static const char* names[2] = {"clean", "adv"};
  for (int b = 0; b < 2; ++b) {
    out.push_back({prefix + "." + names[b] + ".gamma", &gamma_[b]});
    out.push_back({prefix + "." + names[b] + ".beta", &beta_[b]});
    out.push_back({prefix + "." + names[b] + ".running_mean", &run_mean_[b]});
    out.push_back({prefix + "." + names[b] + ".running_var", &run_var_[b]});
  }
}

// ---------------------------------------------------------------------------
// ReLU / pool / linear
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, const FwdCtx& ctx) {
  Tensor y(x.shape());
  const double* px = x.data();
  double* py = y.data();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)x.size(); ++i)
    py[i] = px[i] > 0.0 ? px[i] : 0.0;
  if (ctx.cache) cached_out_ = y;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out, const FwdCtx&) {
  contract(!cached_out_.empty(), "relu: backward without cached forward");
  check_same_shape(grad_out, cached_out_, "relu backward");
  Tensor dx(grad_out.shape());
  const double* g = grad_out.data();
  const double* o = cached_out_.data();
  double* d = dx.data();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)grad_out.size(); ++i)
    d[i] = o[i] > 0.0 ? g[i] : 0.0;
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, const FwdCtx&) {
  contract(x.ndim() == 4, "avgpool: expects NCHW");
  const int n = x.dim(0), c = x.dim(1);
  h_ = x.dim(2);
  w_ = x.dim(3);
  const int plane = h_ * w_;
  Tensor y(std::vector<int>{n, c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const double* p = x.data() + (size_t(i) * c + j) * plane;
      double s = 0.0;
      for (int k = 0; k < plane; ++k) s += p[k];
      y[size_t(i) * c + j] = s / double(plane);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, const FwdCtx&) {
  const int n = grad_out.dim(0), c = grad_out.dim(1);
  const int plane = h_ * w_;
  Tensor dx(std::vector<int>{n, c, h_, w_});
  const double inv = 1.0 / double(plane);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      double g = grad_out[size_t(i) * c + j] * inv;
      double* p = dx.data() + (size_t(i) * c + j) * plane;
      for (int k = 0; k < plane; ++k) p[k] = g;
    }
  return dx;
}

Linear::Linear(int in_features, int out_features, bool bias)
    : in_f_(in_features),
      out_f_(out_features),
      has_bias_(bias),
      weight_(std::vector<int>{out_features, in_features}),
      bias_(std::vector<int>{bias ? out_features : 0}),
      weight_grad_(std::vector<int>{out_features, in_features}),
      bias_grad_(std::vector<int>{bias ? out_features : 0}) {}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(in_f_));
  for (size_t i = 0; i < weight_.size(); ++i) weight_[i] = rng.uniform(-bound, bound);
  for (size_t i = 0; i < bias_.size(); ++i) bias_[i] = rng.uniform(-bound, bound);
}

Tensor Linear::forward(const Tensor& x, const FwdCtx& ctx) {
  contract(x.ndim() == 2 && x.dim(1) == in_f_, "linear: bad input " + x.shape_str());
  const int n = x.dim(0);
  Tensor y(std::vector<int>{n, out_f_});
  gemm(false, true, n, out_f_, in_f_, 1.0, x.data(), in_f_, weight_.data(),
       in_f_, 0.0, y.data(), out_f_);
  if (has_bias_)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_f_; ++j) y[size_t(i) * out_f_ + j] += bias_[size_t(j)];
  if (ctx.cache) cached_input_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& grad_out, const FwdCtx& ctx) {
  contract(!cached_input_.empty(), "linear: backward without cached forward");
  const int n = grad_out.dim(0);
  contract(grad_out.ndim() == 2 && grad_out.dim(1) == out_f_,
           "linear: grad shape mismatch");
  if (ctx.want_param_grads) {
    gemm(true, false, out_f_, in_f_, n, 1.0, grad_out.data(), out_f_,
         cached_input_.data(), in_f_, 1.0, weight_grad_.data(), in_f_);
    if (has_bias_)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_f_; ++j)
          bias_grad_[size_t(j)] += grad_out[size_t(i) * out_f_ + j];
  }
  Tensor dx(std::vector<int>{n, in_f_});
  gemm(false, false, n, in_f_, out_f_, 1.0, grad_out.data(), out_f_,
       weight_.data(), in_f_, 0.0, dx.data(), in_f_);
  return dx;
}

void Linear::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &weight_grad_, false});
  if (has_bias_) out.push_back({prefix + ".bias", &bias_, &bias_grad_, true});
}

void Linear::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".weight", &weight_});
  if (has_bias_) out.push_back({prefix + ".bias", &bias_});
}

}  // namespace dynacl

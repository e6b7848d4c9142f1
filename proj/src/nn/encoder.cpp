#include "nn/encoder.hpp"

namespace dynacl {

// ---------------------------------------------------------------------------
// BasicBlock
// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(int in_c, int out_c, int stride)
    : conv1(in_c, out_c, 3, stride, 1),
      conv2(out_c, out_c, 3, 1, 1),
      bn1(out_c),
      bn2(out_c),
      has_downsample(stride != 1 || in_c != out_c) {
  if (has_downsample) {
    down_conv = std::make_unique<Conv2d>(in_c, out_c, 1, stride, 0);
    down_bn = std::make_unique<DualBatchNorm>(out_c);
  }
}

void BasicBlock::init(Rng& rng) {
  conv1.init(rng);
  conv2.init(rng);
  if (has_downsample) down_conv->init(rng);
}

Tensor BasicBlock::forward(const Tensor& x, const FwdCtx& ctx) {
  Tensor h = relu1.forward(bn1.forward(conv1.forward(x, ctx), ctx), ctx);
  Tensor main = bn2.forward(conv2.forward(h, ctx), ctx);
  Tensor shortcut =
      has_downsample ? down_bn->forward(down_conv->forward(x, ctx), ctx) : x;
  check_same_shape(main, shortcut, "basic block residual add");
  for (size_t i = 0; i < main.size(); ++i) main[i] += shortcut[i];
  if (ctx.cache && !has_downsample) cached_shortcut_ = x;
  return relu2.forward(main, ctx);
}

Tensor BasicBlock::backward(const Tensor& grad_out, const FwdCtx& ctx) {
  Tensor d = relu2.backward(grad_out, ctx);
  // residual add: gradient flows to both paths
  Tensor dmain = bn2.backward(d, ctx);
  dmain = conv2.backward(dmain, ctx);
  dmain = relu1.backward(dmain, ctx);
  dmain = bn1.backward(dmain, ctx);
  Tensor dx = conv1.backward(dmain, ctx);
  if (has_downsample) {
    Tensor dshort = down_bn->backward(d, ctx);
    dshort = down_conv->backward(dshort, ctx);
    for (size_t i = 0; i < dx.size(); ++i) dx[i] += dshort[i];
  } else {
    for (size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
  }
  return dx;
}

void BasicBlock::collect_params(const std::string& p, std::vector<ParamRef>& out) {
  conv1.collect_params(p + ".conv1", out);
  bn1.collect_params(p + ".bn1", out);
  conv2.collect_params(p + ".conv2", out);
  bn2.collect_params(p + ".bn2", out);
  if (has_downsample) {
    down_conv->collect_params(p + ".down.conv", out);
    down_bn->collect_params(p + ".down.bn", out);
  }
}

void BasicBlock::collect_state(const std::string& p, std::vector<StateRef>& out) {
  conv1.collect_state(p + ".conv1", out);
  bn1.collect_state(p + ".bn1", out);
  conv2.collect_state(p + ".conv2", out);
  bn2.collect_state(p + ".bn2", out);
  if (has_downsample) {
    down_conv->collect_state(p + ".down.conv", out);
    down_bn->collect_state(p + ".down.bn", out);
  }
}

// ---------------------------------------------------------------------------
// DualBranchEncoder
// ---------------------------------------------------------------------------

DualBranchEncoder::DualBranchEncoder(const EncoderConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      stem_conv_(cfg.in_channels, cfg.base_width, 3, 1, 1),
      stem_bn_(cfg.base_width),
      proj1_(cfg.feature_dim(), cfg.feature_dim()),
      proj2_(cfg.feature_dim(), cfg.feature_dim()),
      proj3_(cfg.feature_dim(), cfg.embed_dim),
      proj_bn1_(cfg.feature_dim()),
      proj_bn2_(cfg.feature_dim()) {
  cfg.validate();
  const int widths[4] = {cfg.base_width, cfg.base_width * 2, cfg.base_width * 4,
                         cfg.base_width * 8};
  int in_c = cfg.base_width;
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      blocks_.emplace_back(in_c, widths[stage], stride);
      in_c = widths[stage];
    }
  }

  Rng rng(Rng::derive({seed, 0x656e636f646572ULL}));
  stem_conv_.init(rng);
  for (auto& blk : blocks_) blk.init(rng);
  proj1_.init(rng);
  proj2_.init(rng);
  proj3_.init(rng);
}

Tensor DualBranchEncoder::forward_backbone(const Tensor& images, const FwdCtx& ctx) {
  contract(images.ndim() == 4 && images.dim(1) == cfg_.in_channels,
           "encoder: input shape " + images.shape_str() +
               " does not match configured channels");
  Tensor h = stem_relu_.forward(
      stem_bn_.forward(stem_conv_.forward(images, ctx), ctx), ctx);
  for (auto& blk : blocks_) h = blk.forward(h, ctx);
  return pool_.forward(h, ctx);
}

Tensor DualBranchEncoder::backward_backbone(const Tensor& grad_feat, const FwdCtx& ctx) {
  Tensor d = pool_.backward(grad_feat, ctx);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    d = it->backward(d, ctx);
  d = stem_relu_.backward(d, ctx);
  d = stem_bn_.backward(d, ctx);
  return stem_conv_.backward(d, ctx);
}

Tensor DualBranchEncoder::forward(const Tensor& images, const FwdCtx& ctx) {
  Tensor f = forward_backbone(images, ctx);
  Tensor h = proj_relu1_.forward(proj_bn1_.forward(proj1_.forward(f, ctx), ctx), ctx);
  h = proj_relu2_.forward(proj_bn2_.forward(proj2_.forward(h, ctx), ctx), ctx);
  return proj3_.forward(h, ctx);
}

Tensor DualBranchEncoder::backward(const Tensor& grad_embed, const FwdCtx& ctx) {
  Tensor d = proj3_.backward(grad_embed, ctx);
  d = proj_relu2_.backward(d, ctx);
  d = proj_bn2_.backward(d, ctx);
  d = proj2_.backward(d, ctx);
  d = proj_relu1_.backward(d, ctx);
  d = proj_bn1_.backward(d, ctx);
  d = proj1_.backward(d, ctx);
  return backward_backbone(d, ctx);
}

Tensor DualBranchEncoder::features(const Tensor& images, const FwdCtx& ctx) {
  return forward_backbone(images, ctx);
}

Tensor DualBranchEncoder::backward_features(const Tensor& grad_feat, const FwdCtx& ctx) {
  return backward_backbone(grad_feat, ctx);
}

std::vector<ParamRef> DualBranchEncoder::params() {
  std::vector<ParamRef> out;
  stem_conv_.collect_params("stem.conv", out);
  stem_bn_.collect_params("stem.bn", out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_params("block" + std::to_string(i), out);
  proj1_.collect_params("proj.fc1", out);
  proj_bn1_.collect_params("proj.bn1", out);
  proj2_.collect_params("proj.fc2", out);
  proj_bn2_.collect_params("proj.bn2", out);
  proj3_.collect_params("proj.fc3", out);
  return out;
}

std::vector<StateRef> DualBranchEncoder::state() {
  std::vector<StateRef> out;
  stem_conv_.collect_state("stem.conv", out);
  stem_bn_.collect_state("stem.bn", out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_state("block" + std::to_string(i), out);
  proj1_.collect_state("proj.fc1", out);
  proj_bn1_.collect_state("proj.bn1", out);
  proj2_.collect_state("proj.fc2", out);
  proj_bn2_.collect_state("proj.bn2", out);
  proj3_.collect_state("proj.fc3", out);
  return out;
}

size_t DualBranchEncoder::parameter_count() {
  size_t n = 0;
  for (const auto& p : params()) n += p.value->size();
  return n;
}

void DualBranchEncoder::zero_grads() {
  for (auto& p : params()) p.grad->zero();
}

void MomentumState::update(DualBranchEncoder& online) {
  auto ts = target.state();
  auto os = online.state();
  contract(ts.size() == os.size(), "momentum: state layout mismatch");
  for (size_t i = 0; i < ts.size(); ++i) {
    contract(ts[i].name == os[i].name && ts[i].value->size() == os[i].value->size(),
             "momentum: state tensor mismatch at " + ts[i].name);
    double* t = ts[i].value->data();
    const double* o = os[i].value->data();
    const size_t n = ts[i].value->size();
    for (size_t j = 0; j < n; ++j)
      t[j] = momentum * t[j] + (1.0 - momentum) * o[j];
  }
}

}  // namespace dynacl

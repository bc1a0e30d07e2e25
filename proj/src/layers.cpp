#include "stylemix/layers.hpp"

#include <cmath>

#include "stylemix/kernels.hpp"
#include "stylemix/networks.hpp"

namespace stylemix {

namespace {
constexpr float kInvSqrt2 = 0.70710678f;
}

void init_fan_in(Tensor& w, int fan_in, Rng& rng) {
  rng.fill_normal(w, std::sqrt(2.0f / static_cast<float>(fan_in)));
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin, int co, int k, int s, int p, Rng& rng, std::string name, bool bias)
    : stride(s), pad(p), has_bias(bias) {
  weight.name = name + ".w";
  weight.value = Tensor({co, cin, k, k});
  weight.grad = Tensor({co, cin, k, k});
  init_fan_in(weight.value, cin * k * k, rng);
  if (has_bias) {
    bias_p.name = name + ".b";
    bias_p.value = Tensor({co});
    bias_p.grad = Tensor({co});
  }
}

Tensor Conv2d::forward(const Tensor& x, Tape& tape) {
  tape.push(x);
  return kern::conv2d_forward(x, weight.value, has_bias ? &bias_p.value : nullptr, stride, pad);
}

Tensor Conv2d::backward(const Tensor& gy, Tape& tape) {
  Tensor x = tape.pop();
  if (ParamGradScope::params_enabled())
    kern::conv2d_backward_params(x, gy, weight.grad, has_bias ? &bias_p.grad : nullptr, stride,
                                 pad);
  return kern::conv2d_backward_input(gy, weight.value, x.dim(2), x.dim(3), stride, pad);
}

void Conv2d::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias_p);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in, int out, Rng& rng, std::string name) {
  weight.name = name + ".w";
  weight.value = Tensor({out, in});
  weight.grad = Tensor({out, in});
  init_fan_in(weight.value, in, rng);
  bias_p.name = name + ".b";
  bias_p.value = Tensor({out});
  bias_p.grad = Tensor({out});
}

Tensor Linear::forward(const Tensor& x, Tape& tape) {
  const int b = x.dim(0), in = x.dim(1), out = weight.value.dim(0);
  tape.push(x);
  Tensor y({b, out});
  kern::matmul(x.data(), weight.value.data(), y.data(), b, out, in, false, true, 0.0f);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < out; ++j) y.at2(i, j) += bias_p.value[j];
  return y;
}

Tensor Linear::backward(const Tensor& gy, Tape& tape) {
  Tensor x = tape.pop();
  const int b = x.dim(0), in = x.dim(1), out = weight.value.dim(0);
  if (ParamGradScope::params_enabled()) {
    kern::matmul(gy.data(), x.data(), weight.grad.data(), out, in, b, true, false, 1.0f);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < out; ++j) bias_p.grad[j] += gy.at2(i, j);
  }
  Tensor gx({b, in});
  kern::matmul(gy.data(), weight.value.data(), gx.data(), b, in, out, false, false, 0.0f);
  return gx;
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias_p);
}

// ---------------------------------------------------------------- pointwise

Tensor LeakyReLU::forward(const Tensor& x, Tape& tape) {
  tape.push(x);
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i)
    if (y[i] < 0.0f) y[i] *= slope_;
  return y;
}

Tensor LeakyReLU::backward(const Tensor& gy, Tape& tape) {
  Tensor x = tape.pop();
  Tensor gx = gy;
  for (int64_t i = 0; i < gx.size(); ++i)
    if (x[i] < 0.0f) gx[i] *= slope_;
  return gx;
}

Tensor Tanh::forward(const Tensor& x, Tape& tape) {
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  tape.push(y);
  return y;
}

Tensor Tanh::backward(const Tensor& gy, Tape& tape) {
  Tensor y = tape.pop();
  Tensor gx = gy;
  for (int64_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0f - y[i] * y[i];
  return gx;
}

Tensor AvgPool2::forward(const Tensor& x, Tape&) { return kern::avgpool2_forward(x); }
Tensor AvgPool2::backward(const Tensor& gy, Tape&) { return kern::avgpool2_backward(gy); }

Tensor Upsample2::forward(const Tensor& x, Tape&) { return kern::upsample2_forward(x); }
Tensor Upsample2::backward(const Tensor& gy, Tape&) { return kern::upsample2_backward(gy); }

// ---------------------------------------------------------------- InstanceNorm

InstanceNorm::InstanceNorm(int channels, std::string name) {
  gamma.name = name + ".g";
  gamma.value = Tensor({channels});
  gamma.grad = Tensor({channels});
  gamma.value.fill(1.0f);
  beta.name = name + ".b";
  beta.value = Tensor({channels});
  beta.grad = Tensor({channels});
}

Tensor InstanceNorm::forward(const Tensor& x, Tape& tape) {
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor xhat = x;
  Tensor invstd({n, c});
  for (int i = 0; i < n * c; ++i) {
    float* p = xhat.data() + static_cast<size_t>(i) * hw;
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < hw; ++j) mean += p[j];
    mean /= hw;
    for (int j = 0; j < hw; ++j) var += (p[j] - mean) * (p[j] - mean);
    var /= hw;
    const float is = 1.0f / std::sqrt(static_cast<float>(var) + kEps);
    invstd[i] = is;
    for (int j = 0; j < hw; ++j) p[j] = (p[j] - static_cast<float>(mean)) * is;
  }
  Tensor y = xhat;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      float* p = y.data() + (static_cast<size_t>(i) * c + ch) * hw;
      const float g = gamma.value[ch], b = beta.value[ch];
      for (int j = 0; j < hw; ++j) p[j] = p[j] * g + b;
    }
  tape.push(std::move(xhat));
  tape.push(std::move(invstd));
  return y;
}

Tensor InstanceNorm::backward(const Tensor& gy, Tape& tape) {
  Tensor invstd = tape.pop();
  Tensor xhat = tape.pop();
  const int n = gy.dim(0), c = gy.dim(1), hw = gy.dim(2) * gy.dim(3);
  Tensor gx = gy;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const size_t off = (static_cast<size_t>(i) * c + ch) * hw;
      const float* gp = gy.data() + off;
      const float* xh = xhat.data() + off;
      double sg = 0.0, sgx = 0.0;
      for (int j = 0; j < hw; ++j) {
        sg += gp[j];
        sgx += static_cast<double>(gp[j]) * xh[j];
      }
      if (ParamGradScope::params_enabled()) {
        gamma.grad[ch] += static_cast<float>(sgx);
        beta.grad[ch] += static_cast<float>(sg);
      }
      const float g = gamma.value[ch];
      const float mean_g = static_cast<float>(sg / hw) * g;
      const float mean_gx = static_cast<float>(sgx / hw) * g;
      const float is = invstd[static_cast<size_t>(i) * c + ch];
      float* out = gx.data() + off;
      for (int j = 0; j < hw; ++j)
        out[j] = is * (gp[j] * g - mean_g - xh[j] * mean_gx);
    }
  return gx;
}

void InstanceNorm::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, Tape& tape) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, tape);
  return h;
}

Tensor Sequential::backward(const Tensor& gy, Tape& tape) {
  Tensor g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, tape);
  return g;
}

void Sequential::collect(std::vector<Param*>& out) {
  for (auto& l : layers_) l->collect(out);
}

// ---------------------------------------------------------------- ResBlkDown

ResBlkDown::ResBlkDown(int cin, int co, bool down, Rng& rng, const std::string& name)
    : conv1_(cin, cin, 3, 1, 1, rng, name + ".c1"),
      conv2_(cin, co, 3, 1, 1, rng, name + ".c2"),
      down_(down),
      learned_skip_(cin != co) {
  if (learned_skip_)
    skip_ = std::make_unique<Conv2d>(cin, co, 1, 1, 0, rng, name + ".sk", false);
}

Tensor ResBlkDown::forward(const Tensor& x, Tape& tape) {
  Tensor h = act_.forward(x, tape);
  h = conv1_.forward(h, tape);
  h = act_.forward(h, tape);
  h = conv2_.forward(h, tape);
  if (down_) h = kern::avgpool2_forward(h);
  Tensor sk = learned_skip_ ? skip_->forward(x, tape) : x;
  if (down_) sk = kern::avgpool2_forward(sk);
  Tensor y = std::move(h);
  y += sk;
  y *= kInvSqrt2;
  return y;
}

Tensor ResBlkDown::backward(const Tensor& gy, Tape& tape) {
  Tensor g = gy;
  g *= kInvSqrt2;
  Tensor gsk = down_ ? kern::avgpool2_backward(g) : g;
  Tensor gx_skip = learned_skip_ ? skip_->backward(gsk, tape) : gsk;
  Tensor gh = down_ ? kern::avgpool2_backward(g) : g;
  gh = conv2_.backward(gh, tape);
  gh = act_.backward(gh, tape);
  gh = conv1_.backward(gh, tape);
  gh = act_.backward(gh, tape);
  gh += gx_skip;
  return gh;
}

void ResBlkDown::collect(std::vector<Param*>& out) {
  conv1_.collect(out);
  conv2_.collect(out);
  if (skip_) skip_->collect(out);
}

// ---------------------------------------------------------------- AdaIN

AdaIN::AdaIN(int channels, int style_dim, Rng& rng, const std::string& name)
    : affine_(style_dim, 2 * channels, rng, name + ".aff"), channels_(channels) {}

Tensor AdaIN::forward(const Tensor& x, const Tensor& style, Tape& tape) {
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor a = affine_.forward(style, tape);  // (n, 2c): scale offset then shift
  Tensor xhat = x;
  Tensor invstd({n, c});
  for (int i = 0; i < n * c; ++i) {
    float* p = xhat.data() + static_cast<size_t>(i) * hw;
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < hw; ++j) mean += p[j];
    mean /= hw;
    for (int j = 0; j < hw; ++j) var += (p[j] - mean) * (p[j] - mean);
    var /= hw;
    const float is = 1.0f / std::sqrt(static_cast<float>(var) + kEps);
    invstd[i] = is;
    for (int j = 0; j < hw; ++j) p[j] = (p[j] - static_cast<float>(mean)) * is;
  }
  Tensor y = xhat;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float g = 1.0f + a.at2(i, ch);
      const float b = a.at2(i, c + ch);
      float* p = y.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) p[j] = p[j] * g + b;
    }
  tape.push(std::move(xhat));
  tape.push(std::move(invstd));
  tape.push(std::move(a));
  return y;
}

Tensor AdaIN::backward(const Tensor& gy, Tape& tape, Tensor& gs) {
  Tensor a = tape.pop();
  Tensor invstd = tape.pop();
  Tensor xhat = tape.pop();
  const int n = gy.dim(0), c = gy.dim(1), hw = gy.dim(2) * gy.dim(3);
  Tensor ga({n, 2 * c});
  Tensor gx = gy;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const size_t off = (static_cast<size_t>(i) * c + ch) * hw;
      const float* gp = gy.data() + off;
      const float* xh = xhat.data() + off;
      double sg = 0.0, sgx = 0.0;
      for (int j = 0; j < hw; ++j) {
        sg += gp[j];
        sgx += static_cast<double>(gp[j]) * xh[j];
      }
      ga.at2(i, ch) = static_cast<float>(sgx);
      ga.at2(i, c + ch) = static_cast<float>(sg);
      const float g = 1.0f + a.at2(i, ch);
      const float mean_g = static_cast<float>(sg / hw) * g;
      const float mean_gx = static_cast<float>(sgx / hw) * g;
      const float is = invstd[static_cast<size_t>(i) * c + ch];
      float* out = gx.data() + off;
      for (int j = 0; j < hw; ++j)
        out[j] = is * (gp[j] * g - mean_g - xh[j] * mean_gx);
    }
  Tensor gsl = affine_.backward(ga, tape);
  gs += gsl;
  return gx;
}

void AdaIN::collect(std::vector<Param*>& out) { affine_.collect(out); }

// ---------------------------------------------------------------- AdaINResBlk

AdaINResBlk::AdaINResBlk(int cin, int co, int style_dim, bool up, Rng& rng,
                         const std::string& name)
    : norm1_(cin, style_dim, rng, name + ".n1"),
      norm2_(co, style_dim, rng, name + ".n2"),
      conv1_(cin, co, 3, 1, 1, rng, name + ".c1"),
      conv2_(co, co, 3, 1, 1, rng, name + ".c2"),
      up_(up),
      learned_skip_(cin != co) {
  if (learned_skip_)
    skip_ = std::make_unique<Conv2d>(cin, co, 1, 1, 0, rng, name + ".sk", false);
}

Tensor AdaINResBlk::forward(const Tensor& x, const Tensor& style, Tape& tape) {
  Tensor h = norm1_.forward(x, style, tape);
  h = act_.forward(h, tape);
  if (up_) h = up_op_.forward(h, tape);
  h = conv1_.forward(h, tape);
  h = norm2_.forward(h, style, tape);
  h = act_.forward(h, tape);
  h = conv2_.forward(h, tape);
  Tensor sk = up_ ? up_op_.forward(x, tape) : x;
  if (learned_skip_) sk = skip_->forward(sk, tape);
  Tensor y = std::move(h);
  y += sk;
  y *= kInvSqrt2;
  return y;
}

Tensor AdaINResBlk::backward(const Tensor& gy, Tape& tape, Tensor& gs) {
  Tensor g = gy;
  g *= kInvSqrt2;
  Tensor gsk = learned_skip_ ? skip_->backward(g, tape) : g;
  if (up_) gsk = up_op_.backward(gsk, tape);
  Tensor gh = conv2_.backward(g, tape);
  gh = act_.backward(gh, tape);
  gh = norm2_.backward(gh, tape, gs);
  gh = conv1_.backward(gh, tape);
  if (up_) gh = up_op_.backward(gh, tape);
  gh = act_.backward(gh, tape);
  gh = norm1_.backward(gh, tape, gs);
  gh += gsk;
  return gh;
}

void AdaINResBlk::collect(std::vector<Param*>& out) {
  norm1_.collect(out);
  norm2_.collect(out);
  conv1_.collect(out);
  conv2_.collect(out);
  if (skip_) skip_->collect(out);
}

// ---------------------------------------------------------------- ResBlkIN

ResBlkIN::ResBlkIN(int cin, int co, bool down, Rng& rng, const std::string& name)
    : norm1_(cin, name + ".n1"),
      norm2_(co, name + ".n2"),
      conv1_(cin, co, 3, 1, 1, rng, name + ".c1"),
      conv2_(co, co, 3, 1, 1, rng, name + ".c2"),
      down_(down),
      learned_skip_(cin != co) {
  if (learned_skip_)
    skip_ = std::make_unique<Conv2d>(cin, co, 1, 1, 0, rng, name + ".sk", false);
}

Tensor ResBlkIN::forward(const Tensor& x, Tape& tape) {
  Tensor h = norm1_.forward(x, tape);
  h = act_.forward(h, tape);
  h = conv1_.forward(h, tape);
  if (down_) h = kern::avgpool2_forward(h);
  h = norm2_.forward(h, tape);
  h = act_.forward(h, tape);
  h = conv2_.forward(h, tape);
  Tensor sk = learned_skip_ ? skip_->forward(x, tape) : x;
  if (down_) sk = kern::avgpool2_forward(sk);
  Tensor y = std::move(h);
  y += sk;
  y *= kInvSqrt2;
  return y;
}

Tensor ResBlkIN::backward(const Tensor& gy, Tape& tape) {
  Tensor g = gy;
  g *= kInvSqrt2;
  Tensor gsk = down_ ? kern::avgpool2_backward(g) : g;
  Tensor gx_skip = learned_skip_ ? skip_->backward(gsk, tape) : gsk;
  Tensor gh = conv2_.backward(g, tape);
  gh = act_.backward(gh, tape);
  gh = norm2_.backward(gh, tape);
  if (down_) gh = kern::avgpool2_backward(gh);
  gh = conv1_.backward(gh, tape);
  gh = act_.backward(gh, tape);
  gh = norm1_.backward(gh, tape);
  gh += gx_skip;
  return gh;
}

void ResBlkIN::collect(std::vector<Param*>& out) {
  norm1_.collect(out);
  norm2_.collect(out);
  conv1_.collect(out);
  conv2_.collect(out);
  if (skip_) skip_->collect(out);
}

}  // namespace stylemix

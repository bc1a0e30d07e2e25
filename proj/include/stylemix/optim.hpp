#pragma once

#include <cmath>
#include <vector>

#include "stylemix/layers.hpp"

namespace stylemix {

// Adam with the StarGAN v2 moment defaults (beta1 = 0, beta2 = 0.99).
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, float lr, float beta1 = 0.0f, float beta2 = 0.99f,
                float eps = 1e-8f)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (Param* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->grad.fill(0.0f);
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    for (size_t k = 0; k < params_.size(); ++k) {
      Tensor& w = params_[k]->value;
      const Tensor& g = params_[k]->grad;
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (int64_t i = 0; i < w.size(); ++i) {
        m[i] = b1_ * m[i] + (1.0f - b1_) * g[i];
        v[i] = b2_ * v[i] + (1.0f - b2_) * g[i] * g[i];
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        w[i] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  float lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
};

// Exponential moving average of a parameter set (evaluation-time generator).
class EmaCopy {
 public:
  EmaCopy(const std::vector<Param*>& source, double decay) : decay_(decay) {
    for (const Param* p : source) {
      src_.push_back(p);
      shadow_.push_back(p->value);
    }
  }
  void update() {
    for (size_t k = 0; k < src_.size(); ++k) {
      Tensor& s = shadow_[k];
      const Tensor& w = src_[k]->value;
      for (int64_t i = 0; i < s.size(); ++i)
        s[i] = static_cast<float>(decay_ * s[i] + (1.0 - decay_) * w[i]);
    }
  }
  // Copies the averaged weights into the given (same-structure) parameter set.
  void write_to(const std::vector<Param*>& dst) const {
    for (size_t k = 0; k < dst.size(); ++k) dst[k]->value = shadow_[k];
  }
  std::vector<Tensor>& shadow() { return shadow_; }

 private:
  std::vector<const Param*> src_;
  std::vector<Tensor> shadow_;
  double decay_;
};

}  // namespace stylemix

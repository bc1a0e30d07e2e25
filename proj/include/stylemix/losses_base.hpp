#pragma once

#include <span>

#include "stylemix/tensor.hpp"

namespace stylemix {

enum class Direction { Minimize, Maximize };

struct LossValue {
  double value = 0.0;
  Direction direction = Direction::Minimize;
};

// Numerically stable log(1 + exp(x)).
double softplus(double x);
double log_sigmoid(double x);        // log sigma(x)  = -softplus(-x)
double log_one_minus_sigmoid(double x);  // log(1-sigma(x)) = -softplus(x)

// Mean absolute difference, the shared L1 convention of the pixel/style
// reconstruction losses. Optional gradients are with respect to `value`.
double l1_mean(const Tensor& a, const Tensor& b, Tensor* ga = nullptr, Tensor* gb = nullptr);

// ||s_target - s_rec||_1 (mean per dimension), minimize.
LossValue style_reconstruction_loss(const Tensor& s_target, const Tensor& s_rec,
                                    Tensor* g_target = nullptr, Tensor* g_rec = nullptr);

// ||G(x,s1) - G(x,s2)||_1, maximize.
LossValue diversity_sensitive_loss(const Tensor& img_a, const Tensor& img_b,
                                   Tensor* g_a = nullptr, Tensor* g_b = nullptr);

// ||x - G(G(x,s), E(x))||_1, minimize.
LossValue cycle_consistency_loss(const Tensor& x, const Tensor& x_cyc, Tensor* g_x = nullptr,
                                 Tensor* g_cyc = nullptr);

// mean[log sigma(rf_real) + log(1 - sigma(rf_fake))], maximize (for D).
LossValue adversarial_loss_d(const Tensor& rf_real, const Tensor& rf_fake,
                             Tensor* g_real = nullptr, Tensor* g_fake = nullptr);

// mean[-log sigma(rf_fake)], minimize (non-saturating G side).
LossValue adversarial_loss_g(const Tensor& rf_fake, Tensor* g_fake = nullptr);

// mean[-log p_y] over the true-domain sigmoid head, minimize.
LossValue domain_cls_loss_d(const Tensor& domain_probs, std::span<const int> labels,
                            Tensor* g_probs = nullptr);

// Same form against the target domain of the translation, minimize.
LossValue domain_cls_loss_g(const Tensor& domain_probs, std::span<const int> target_labels,
                            Tensor* g_probs = nullptr);

}  // namespace stylemix

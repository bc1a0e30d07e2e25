#pragma once

#include <span>
#include <vector>

#include "stylemix/core.hpp"
#include "stylemix/losses_base.hpp"

namespace stylemix {

struct RegularizerWeights {
  double lambda_shr = 1e-2;
  double lambda_adv_mix = 1.0;
  double lambda_cls_mix = 1.0;
  bool adv_mix_on_d = true;  // treat mixed-style generations as fakes in D's game
  bool cls_mix_on_d = true;  // domain-mixup term also trains D_cls on detached mixes
};

// Mean over row pairs of ||s1 - s2||_2^2; codes given as matched (P, D)
// batches. Gradients are with respect to the loss value.
LossValue shrinkage_loss(const Tensor& s1, const Tensor& s2, Tensor* g1 = nullptr,
                         Tensor* g2 = nullptr);

// Convenience overload over explicit pair lists (used by the pairing oracle).
LossValue shrinkage_loss(const std::vector<std::pair<StyleCode, StyleCode>>& pairs);

// Generator side of the mixup adversarial game: mean[-log sigma(rf_mix)].
LossValue adversarial_mixup_loss_g(const Tensor& rf_mix, Tensor* g = nullptr);

// Discriminator side: mean[log(1 - sigma(rf_mix))], maximize.
LossValue adversarial_mixup_loss_d(const Tensor& rf_mix, Tensor* g = nullptr);

// mean[-((1-a) log p_i + a log p_j)] over the sigmoid domain head; requires
// i != j per sample.
LossValue domain_mixup_cls_loss(const Tensor& domain_probs, std::span<const int> labels_i,
                                std::span<const int> labels_j, std::span<const double> alphas,
                                Tensor* g_probs = nullptr);

// Builds G(x_i, Mix(E(x_i), s_j, alpha)) without gradient tracking; returns
// the generated batch and the per-sample mix records. j_styles holds the
// already-materialized s_j codes (encoder or mapper derived).
std::pair<Tensor, std::vector<MixDraw>> build_mixed_translation(
    const Tensor& x_i, const Tensor& j_styles, std::span<const double> alphas,
    const StyleEncoder& enc, const Generator& gen);

}  // namespace stylemix

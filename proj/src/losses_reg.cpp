#include "stylemix/losses_reg.hpp"

#include <cmath>
#include <stdexcept>

namespace stylemix {

namespace {

double sigma(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kProbFloor = 1e-12;

}  // namespace

LossValue shrinkage_loss(const Tensor& s1, const Tensor& s2, Tensor* g1, Tensor* g2) {
  check_same_shape(s1, s2, "shrinkage_loss");
  if (s1.ndim() != 2 || s1.dim(0) == 0)
    throw std::invalid_argument("shrinkage_loss: empty pair list");
  const int p = s1.dim(0), d = s1.dim(1);
  if (g1) *g1 = Tensor(s1.shape());
  if (g2) *g2 = Tensor(s2.shape());
  double acc = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < d; ++j) {
      const double diff = static_cast<double>(s1.at2(i, j)) - s2.at2(i, j);
      acc += diff * diff;
      if (g1) g1->at2(i, j) = static_cast<float>(2.0 * diff / p);
      if (g2) g2->at2(i, j) = static_cast<float>(-2.0 * diff / p);
    }
  return {acc / p, Direction::Minimize};
}

LossValue shrinkage_loss(const std::vector<std::pair<StyleCode, StyleCode>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("shrinkage_loss: empty pair list");
  const int d = static_cast<int>(pairs.front().first.size());
  Tensor s1({static_cast<int>(pairs.size()), d}), s2({static_cast<int>(pairs.size()), d});
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (static_cast<int>(pairs[i].first.size()) != d ||
        static_cast<int>(pairs[i].second.size()) != d)
      throw std::invalid_argument("shrinkage_loss: dimension mismatch in pair list");
    for (int j = 0; j < d; ++j) {
      s1.at2(static_cast<int>(i), j) = pairs[i].first[j];
      s2.at2(static_cast<int>(i), j) = pairs[i].second[j];
    }
  }
  return shrinkage_loss(s1, s2);
}

LossValue adversarial_mixup_loss_g(const Tensor& rf_mix, Tensor* g) {
  const int b = static_cast<int>(rf_mix.size());
  if (b == 0) throw std::invalid_argument("adversarial_mixup_loss_g: empty logits");
  double acc = 0.0;
  if (g) *g = Tensor(rf_mix.shape());
  for (int i = 0; i < b; ++i) {
    acc += softplus(-rf_mix[i]) / b;
    if (g) (*g)[i] = static_cast<float>((sigma(rf_mix[i]) - 1.0) / b);
  }
  return {acc, Direction::Minimize};
}

LossValue adversarial_mixup_loss_d(const Tensor& rf_mix, Tensor* g) {
  const int b = static_cast<int>(rf_mix.size());
  if (b == 0) throw std::invalid_argument("adversarial_mixup_loss_d: empty logits");
  double acc = 0.0;
  if (g) *g = Tensor(rf_mix.shape());
  for (int i = 0; i < b; ++i) {
    acc += log_one_minus_sigmoid(rf_mix[i]) / b;
    if (g) (*g)[i] = static_cast<float>(-sigma(rf_mix[i]) / b);
  }
  return {acc, Direction::Maximize};
}

LossValue domain_mixup_cls_loss(const Tensor& domain_probs, std::span<const int> labels_i,
                                std::span<const int> labels_j, std::span<const double> alphas,
                                Tensor* g_probs) {
  if (domain_probs.ndim() != 2)
    throw std::invalid_argument("domain_mixup_cls_loss: probs must be (B,m)");
  const int b = domain_probs.dim(0), m = domain_probs.dim(1);
  if (static_cast<int>(labels_i.size()) != b || static_cast<int>(labels_j.size()) != b ||
      static_cast<int>(alphas.size()) != b)
    throw std::invalid_argument("domain_mixup_cls_loss: per-sample labels and alphas required");
  if (g_probs) *g_probs = Tensor(domain_probs.shape());
  double acc = 0.0;
  for (int k = 0; k < b; ++k) {
    const int i = labels_i[k], j = labels_j[k];
    if (i == j)
      throw std::invalid_argument(
          "domain_mixup_cls_loss: i == j (route same-domain samples to the plain "
          "classification loss)");
    if (i < 0 || i >= m || j < 0 || j >= m)
      throw std::invalid_argument("domain_mixup_cls_loss: label out of range");
    const double a = alphas[k];
    if (a < 0.0 || a > 1.0)
      throw std::invalid_argument("domain_mixup_cls_loss: alpha outside [0,1]");
    const double pi = std::max(static_cast<double>(domain_probs.at2(k, i)), kProbFloor);
    const double pj = std::max(static_cast<double>(domain_probs.at2(k, j)), kProbFloor);
    acc += -((1.0 - a) * std::log(pi) + a * std::log(pj)) / b;
    if (g_probs) {
      g_probs->at2(k, i) = static_cast<float>(-(1.0 - a) / (pi * b));
      g_probs->at2(k, j) = static_cast<float>(-a / (pj * b));
    }
  }
  return {acc, Direction::Minimize};
}

std::pair<Tensor, std::vector<MixDraw>> build_mixed_translation(
    const Tensor& x_i, const Tensor& j_styles, std::span<const double> alphas,
    const StyleEncoder& enc, const Generator& gen) {
  const int b = x_i.dim(0);
  if (j_styles.dim(0) != b || static_cast<int>(alphas.size()) != b)
    throw std::invalid_argument("build_mixed_translation: batch size mismatch");
  Tape te;
  Tensor s_i = enc.forward(x_i, te);
  std::vector<double> av(alphas.begin(), alphas.end());
  Tensor s_mix = mix_rows(s_i, j_styles, av);
  Tape tg;
  Tensor out = gen.forward(x_i, s_mix, tg);
  std::vector<MixDraw> draws(static_cast<size_t>(b));
  const int d = s_i.dim(1);
  for (int k = 0; k < b; ++k) {
    draws[k].alpha = alphas[k];
    draws[k].s1.assign(s_i.data() + static_cast<size_t>(k) * d,
                       s_i.data() + static_cast<size_t>(k + 1) * d);
    draws[k].s2.assign(j_styles.data() + static_cast<size_t>(k) * d,
                       j_styles.data() + static_cast<size_t>(k + 1) * d);
  }
  return {std::move(out), std::move(draws)};
}

}  // namespace stylemix

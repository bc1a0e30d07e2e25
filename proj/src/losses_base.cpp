#include "stylemix/losses_base.hpp"

#include <cmath>
#include <stdexcept>

namespace stylemix {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double log_sigmoid(double x) { return -softplus(-x); }
double log_one_minus_sigmoid(double x) { return -softplus(x); }

namespace {

double sigma(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kProbFloor = 1e-12;

void check_labels(const Tensor& probs, std::span<const int> labels, const char* who) {
  if (probs.ndim() != 2) throw std::invalid_argument(std::string(who) + ": probs must be (B,m)");
  if (static_cast<int>(labels.size()) != probs.dim(0))
    throw std::invalid_argument(std::string(who) + ": one label per row required");
  for (int y : labels)
    if (y < 0 || y >= probs.dim(1))
      throw std::invalid_argument(std::string(who) + ": label out of range");
}

}  // namespace

double l1_mean(const Tensor& a, const Tensor& b, Tensor* ga, Tensor* gb) {
  check_same_shape(a, b, "l1_mean");
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  if (ga) *ga = Tensor(a.shape());
  if (gb) *gb = Tensor(b.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += std::abs(d);
    const float s = d > 0.0 ? static_cast<float>(inv) : (d < 0.0 ? -static_cast<float>(inv) : 0.0f);
    if (ga) (*ga)[i] = s;
    if (gb) (*gb)[i] = -s;
  }
  return acc * inv;
}

LossValue style_reconstruction_loss(const Tensor& s_target, const Tensor& s_rec,
                                    Tensor* g_target, Tensor* g_rec) {
  return {l1_mean(s_target, s_rec, g_target, g_rec), Direction::Minimize};
}

LossValue diversity_sensitive_loss(const Tensor& img_a, const Tensor& img_b, Tensor* g_a,
                                   Tensor* g_b) {
  return {l1_mean(img_a, img_b, g_a, g_b), Direction::Maximize};
}

LossValue cycle_consistency_loss(const Tensor& x, const Tensor& x_cyc, Tensor* g_x,
                                 Tensor* g_cyc) {
  return {l1_mean(x, x_cyc, g_x, g_cyc), Direction::Minimize};
}

LossValue adversarial_loss_d(const Tensor& rf_real, const Tensor& rf_fake, Tensor* g_real,
                             Tensor* g_fake) {
  const int br = static_cast<int>(rf_real.size());
  const int bf = static_cast<int>(rf_fake.size());
  if (br == 0 || bf == 0) throw std::invalid_argument("adversarial_loss_d: empty logits");
  double acc = 0.0;
  if (g_real) *g_real = Tensor(rf_real.shape());
  if (g_fake) *g_fake = Tensor(rf_fake.shape());
  for (int i = 0; i < br; ++i) {
    acc += log_sigmoid(rf_real[i]) / br;
    if (g_real) (*g_real)[i] = static_cast<float>((1.0 - sigma(rf_real[i])) / br);
  }
  for (int i = 0; i < bf; ++i) {
    acc += log_one_minus_sigmoid(rf_fake[i]) / bf;
    if (g_fake) (*g_fake)[i] = static_cast<float>(-sigma(rf_fake[i]) / bf);
  }
  return {acc, Direction::Maximize};
}

LossValue adversarial_loss_g(const Tensor& rf_fake, Tensor* g_fake) {
  const int b = static_cast<int>(rf_fake.size());
  if (b == 0) throw std::invalid_argument("adversarial_loss_g: empty logits");
  double acc = 0.0;
  if (g_fake) *g_fake = Tensor(rf_fake.shape());
  for (int i = 0; i < b; ++i) {
    acc += softplus(-rf_fake[i]) / b;
    if (g_fake) (*g_fake)[i] = static_cast<float>((sigma(rf_fake[i]) - 1.0) / b);
  }
  return {acc, Direction::Minimize};
}

LossValue domain_cls_loss_d(const Tensor& domain_probs, std::span<const int> labels,
                            Tensor* g_probs) {
  check_labels(domain_probs, labels, "domain_cls_loss_d");
  const int b = domain_probs.dim(0);
  double acc = 0.0;
  if (g_probs) *g_probs = Tensor(domain_probs.shape());
  for (int i = 0; i < b; ++i) {
    const double p = std::max(static_cast<double>(domain_probs.at2(i, labels[i])), kProbFloor);
    acc += -std::log(p) / b;
    if (g_probs) g_probs->at2(i, labels[i]) = static_cast<float>(-1.0 / (p * b));
  }
  return {acc, Direction::Minimize};
}

LossValue domain_cls_loss_g(const Tensor& domain_probs, std::span<const int> target_labels,
                            Tensor* g_probs) {
  LossValue v = domain_cls_loss_d(domain_probs, target_labels, g_probs);
  return v;
}

}  // namespace stylemix

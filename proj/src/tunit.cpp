#include "stylemix/tunit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stylemix {

namespace {
constexpr double kTiny = 1e-30;

// Shared InfoNCE core: -log( exp(l_pos) / (exp(l_pos) + sum_k exp(l_k)) ).
LossValue infonce(const std::vector<float>& anchor, const std::vector<float>& positive,
                  const NegativeQueue& queue, std::vector<float>* g_anchor,
                  std::vector<float>* g_positive) {
  if (queue.size() == 0) throw std::invalid_argument("infonce: empty negative queue");
  if (anchor.size() != positive.size())
    throw std::invalid_argument("infonce: anchor/positive dimension mismatch");
  const size_t d = anchor.size();
  const double inv_tau = 1.0 / queue.tau();
  const int n = queue.size();
  std::vector<double> logits(static_cast<size_t>(n) + 1);
  double dot = 0.0;
  for (size_t k = 0; k < d; ++k) dot += static_cast<double>(anchor[k]) * positive[k];
  logits[0] = dot * inv_tau;
  for (int i = 0; i < n; ++i) {
    const auto& neg = queue.entry(i);
    double dn = 0.0;
    for (size_t k = 0; k < d; ++k) dn += static_cast<double>(anchor[k]) * neg[k];
    logits[static_cast<size_t>(i) + 1] = dn * inv_tau;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  const double loss = lse - logits[0];
  if (g_anchor || g_positive) {
    if (g_anchor) g_anchor->assign(d, 0.0f);
    if (g_positive) g_positive->assign(d, 0.0f);
    // softmax weights over the denominator terms
    const double w0 = std::exp(logits[0] - lse);
    if (g_anchor) {
      for (size_t k = 0; k < d; ++k)
        (*g_anchor)[k] += static_cast<float>((w0 - 1.0) * inv_tau * positive[k]);
      for (int i = 0; i < n; ++i) {
        const double wi = std::exp(logits[static_cast<size_t>(i) + 1] - lse);
        const auto& neg = queue.entry(i);
        for (size_t k = 0; k < d; ++k)
          (*g_anchor)[k] += static_cast<float>(wi * inv_tau * neg[k]);
      }
    }
    if (g_positive)
      for (size_t k = 0; k < d; ++k)
        (*g_positive)[k] = static_cast<float>((w0 - 1.0) * inv_tau * anchor[k]);
  }
  return {loss, Direction::Minimize};
}

}  // namespace

void NegativeQueue::push(const Tensor& codes) {
  if (codes.ndim() != 2) throw std::invalid_argument("NegativeQueue: codes must be (B, D)");
  const int b = codes.dim(0), d = codes.dim(1);
  for (int i = 0; i < b; ++i) {
    double nrm = 0.0;
    for (int j = 0; j < d; ++j) nrm += static_cast<double>(codes.at2(i, j)) * codes.at2(i, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) throw std::invalid_argument("NegativeQueue: zero-norm code");
    std::vector<float> row(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) row[static_cast<size_t>(j)] = static_cast<float>(codes.at2(i, j) / nrm);
    entries_.push_back(std::move(row));
    if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
  }
}

Tensor joint_probability_matrix(const Tensor& probs_a, const Tensor& probs_b) {
  check_same_shape(probs_a, probs_b, "joint_probability_matrix");
  if (probs_a.ndim() != 2) throw std::invalid_argument("joint_probability_matrix: (B,m) expected");
  const int b = probs_a.dim(0), m = probs_a.dim(1);
  Tensor p({m, m});
  for (int k = 0; k < b; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        p.at2(i, j) += probs_a.at2(k, i) * probs_b.at2(k, j) / b;
  // symmetrize, then renormalize to sum 1
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      const float v = 0.5f * (p.at2(i, j) + p.at2(j, i));
      p.at2(i, j) = v;
      p.at2(j, i) = v;
    }
  for (int64_t i = 0; i < p.size(); ++i) total += p[i];
  if (total > 0.0)
    for (int64_t i = 0; i < p.size(); ++i) p[i] = static_cast<float>(p[i] / total);
  return p;
}

LossValue mi_loss(const Tensor& joint, Tensor* g_joint) {
  if (joint.ndim() != 2 || joint.dim(0) != joint.dim(1))
    throw std::invalid_argument("mi_loss: square joint matrix expected");
  const int m = joint.dim(0);
  std::vector<double> row(static_cast<size_t>(m), 0.0), col(static_cast<size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      row[static_cast<size_t>(i)] += joint.at2(i, j);
      col[static_cast<size_t>(j)] += joint.at2(i, j);
    }
  double mi = 0.0;
  if (g_joint) *g_joint = Tensor(joint.shape());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double pij = std::max(static_cast<double>(joint.at2(i, j)), 0.0);
      const double ri = std::max(row[static_cast<size_t>(i)], kTiny);
      const double cj = std::max(col[static_cast<size_t>(j)], kTiny);
      if (pij > kTiny) mi += pij * std::log(pij / (ri * cj));
      if (g_joint) {
        const double pc = std::max(pij, kTiny);
        g_joint->at2(i, j) = static_cast<float>(std::log(pc) - std::log(ri) - std::log(cj) - 1.0);
      }
    }
  return {mi, Direction::Maximize};
}

LossValue contrastive_style_loss_e(const std::vector<float>& anchor,
                                   const std::vector<float>& positive,
                                   const NegativeQueue& queue, std::vector<float>* g_anchor,
                                   std::vector<float>* g_positive) {
  return infonce(anchor, positive, queue, g_anchor, g_positive);
}

LossValue style_contrastive_loss_g(const std::vector<float>& gen_style,
                                   const std::vector<float>& target_style,
                                   const NegativeQueue& queue, std::vector<float>* g_gen,
                                   std::vector<float>* g_target) {
  return infonce(gen_style, target_style, queue, g_gen, g_target);
}

LossValue image_reconstruction_loss(const Tensor& x, const Tensor& x_rec, Tensor* g_x,
                                    Tensor* g_rec) {
  return {l1_mean(x, x_rec, g_x, g_rec), Direction::Minimize};
}

std::vector<int> assign_pseudo_labels(const Tensor& probs) {
  if (probs.ndim() != 2) throw std::invalid_argument("assign_pseudo_labels: (B,m) expected");
  const int b = probs.dim(0), m = probs.dim(1);
  std::vector<int> labels(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    int best = 0;
    for (int j = 1; j < m; ++j)
      if (probs.at2(i, j) > probs.at2(i, best)) best = j;
    labels[static_cast<size_t>(i)] = best;
  }
  return labels;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("softmax_rows: (B,m) expected");
  const int b = logits.dim(0), m = logits.dim(1);
  Tensor p = logits;
  for (int i = 0; i < b; ++i) {
    float mx = p.at2(i, 0);
    for (int j = 1; j < m; ++j) mx = std::max(mx, p.at2(i, j));
    double z = 0.0;
    for (int j = 0; j < m; ++j) z += std::exp(static_cast<double>(p.at2(i, j)) - mx);
    for (int j = 0; j < m; ++j)
      p.at2(i, j) = static_cast<float>(std::exp(static_cast<double>(p.at2(i, j)) - mx) / z);
  }
  return p;
}

}  // namespace stylemix

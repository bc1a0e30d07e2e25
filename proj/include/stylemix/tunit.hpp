#pragma once

#include <deque>
#include <vector>

#include "stylemix/losses_base.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

// FIFO buffer of length-normalized negative style codes for the contrastive
// losses (single writer: the training loop).
class NegativeQueue {
 public:
  NegativeQueue(int capacity, double tau) : capacity_(capacity), tau_(tau) {
    if (capacity < 1) throw std::invalid_argument("NegativeQueue: capacity must be positive");
    if (tau <= 0.0) throw std::invalid_argument("NegativeQueue: tau must be positive");
  }

  void push(const Tensor& codes);  // (B, D), each row normalized before enqueue
  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  double tau() const { return tau_; }
  const std::vector<float>& entry(int i) const { return entries_[static_cast<size_t>(i)]; }

 private:
  int capacity_;
  double tau_;
  std::deque<std::vector<float>> entries_;
};

// Symmetrized, renormalized batch-mean outer product of the two soft cluster
// assignments (rows of each input sum to 1).
Tensor joint_probability_matrix(const Tensor& probs_a, const Tensor& probs_b);

// Mutual information of the joint matrix; maximize. Optional gradient wrt P.
LossValue mi_loss(const Tensor& joint, Tensor* g_joint = nullptr);

// InfoNCE with the positive included in the denominator; minimize. Gradients
// wrt anchor and positive (queue entries are treated as constants).
LossValue contrastive_style_loss_e(const std::vector<float>& anchor,
                                   const std::vector<float>& positive,
                                   const NegativeQueue& queue,
                                   std::vector<float>* g_anchor = nullptr,
                                   std::vector<float>* g_positive = nullptr);

LossValue style_contrastive_loss_g(const std::vector<float>& gen_style,
                                   const std::vector<float>& target_style,
                                   const NegativeQueue& queue,
                                   std::vector<float>* g_gen = nullptr,
                                   std::vector<float>* g_target = nullptr);

// ||x - G(x, E_S(x))||_1, minimize.
LossValue image_reconstruction_loss(const Tensor& x, const Tensor& x_rec,
                                    Tensor* g_x = nullptr, Tensor* g_rec = nullptr);

// Argmax cluster index per row, ties toward the lowest index.
std::vector<int> assign_pseudo_labels(const Tensor& probs);

// Row-wise softmax (classifier head output), with gradient helper.
Tensor softmax_rows(const Tensor& logits);

}  // namespace stylemix

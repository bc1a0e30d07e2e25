#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stylemix/layers.hpp"
#include "stylemix/rng.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

// Feature extractor contract for the perceptual distances: L tapped feature
// maps per image, plus per-layer weights w_l.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<Tensor> embed(const Tensor& x) const = 0;
  virtual std::vector<double> layer_weights() const = 0;
  virtual std::string fingerprint() const = 0;
};

// Raw pixels as a single feature layer with weight 1 (calibration tool: makes
// the perceptual distance the plain image distance).
class IdentityEmbedder : public Embedder {
 public:
  std::vector<Tensor> embed(const Tensor& x) const override { return {x}; }
  std::vector<double> layer_weights() const override { return {1.0}; }
  std::string fingerprint() const override { return "identity"; }
};

// Small convolutional domain classifier; the post-activation stages are the
// tapped layers. Channel vectors are unit-normalized per spatial position in
// embed(). An externally trained extractor can be swapped in through the
// Embedder interface.
class PerceptualEmbedder : public Embedder {
 public:
  PerceptualEmbedder(int in_channels, int img_size, int num_classes, Rng& rng);

  std::vector<Tensor> embed(const Tensor& x) const override;
  std::vector<double> layer_weights() const override { return weights_; }
  std::string fingerprint() const override;

  void set_layer_weights(std::vector<double> w);
  int num_layers() const { return static_cast<int>(stage_channels_.size()); }

  // Classifier logits (taped, for training).
  Tensor forward_logits(const Tensor& x, Tape& tape);
  Tensor backward(const Tensor& g_logits, Tape& tape);
  void collect(std::vector<Param*>& out);

  // Penultimate global-average-pooled features (FID feature source).
  Tensor pooled_features(const Tensor& x) const;

 private:
  std::vector<std::unique_ptr<Conv2d>> convs_;
  std::unique_ptr<Linear> head_;
  mutable LeakyReLU act_{0.1f};
  std::vector<int> stage_channels_;
  std::vector<double> weights_;
  int in_channels_, img_size_, num_classes_;
};

// Trains the embedder's classifier head on (image, domain label) data with
// softmax cross-entropy; returns the final-epoch mean loss.
double train_domain_classifier(PerceptualEmbedder& phi, const Tensor& images,
                               std::span<const int> labels, int steps, int batch_size, float lr,
                               Rng& rng);

// Weighted mean of squared per-position feature differences (no triangle
// inequality).
double distance_squared_form(const Tensor& x1, const Tensor& x2, const Embedder& phi);
// Weighted mean of per-position feature difference norms (a pseudometric);
// the only form admissible inside the proportionality metric.
double distance_metric_form(const Tensor& x1, const Tensor& x2, const Embedder& phi);

// Row-paired batch variants.
std::vector<double> distance_squared_form_batch(const Tensor& x1, const Tensor& x2,
                                                const Embedder& phi);
std::vector<double> distance_metric_form_batch(const Tensor& x1, const Tensor& x2,
                                               const Embedder& phi);

// Plain-text layer weight file: one nonnegative decimal per line.
std::vector<double> load_layer_weights(const std::string& path, int expected_count);

}  // namespace stylemix

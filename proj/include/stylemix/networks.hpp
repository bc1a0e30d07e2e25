#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stylemix/layers.hpp"

namespace stylemix {

// Scoped switch that suspends parameter-gradient accumulation; used when a
// backward pass is needed only for its input gradient (e.g. the gradient
// penalty direction, or probing passes).
struct ParamGradScope {
  ParamGradScope() : prev(enabled) { enabled = false; }
  ~ParamGradScope() { enabled = prev; }
  static bool params_enabled() { return enabled; }
  bool prev;
  static thread_local bool enabled;
};

struct NetworkConfig {
  int channels = 3;
  int img_size = 64;
  int style_dim = 16;   // D_s
  int latent_dim = 16;  // D_z
  int num_domains = 2;  // m
  int base_channels = 32;
  int max_channels = 128;
  int mlp_hidden = 64;

  int num_stages() const;  // downsampling stages to reach 4x4
  int stage_channels(int stage) const;
  void validate() const;
};

// Style encoder E: image -> style code of dimension style_dim.
class StyleEncoder {
 public:
  StyleEncoder(const NetworkConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x, Tape& tape) const;
  Tensor backward(const Tensor& gs, Tape& tape) const;
  void collect(std::vector<Param*>& out) const;

 private:
  NetworkConfig cfg_;
  std::unique_ptr<Sequential> trunk_;
  std::unique_ptr<Linear> head_;
  int trunk_out_ = 0;
};

// Mapping network F: latent noise -> style code (an MLP).
class MappingNetwork {
 public:
  MappingNetwork(const NetworkConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& z, Tape& tape) const;
  Tensor backward(const Tensor& gs, Tape& tape) const;
  void collect(std::vector<Param*>& out) const;
  int latent_dim() const { return cfg_.latent_dim; }

 private:
  NetworkConfig cfg_;
  std::unique_ptr<Sequential> mlp_;
};

// Generator G: (image, style) -> image in [-1, 1]; style enters through
// AdaIN modulation in the decoder blocks.
class Generator {
 public:
  Generator(const NetworkConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& style, Tape& tape) const;
  // Returns the image-input gradient and writes the style gradient.
  Tensor backward(const Tensor& gy, Tape& tape, Tensor& gstyle) const;
  void collect(std::vector<Param*>& out) const;
  const NetworkConfig& config() const { return cfg_; }

 private:
  NetworkConfig cfg_;
  std::unique_ptr<Conv2d> from_rgb_;
  std::vector<std::unique_ptr<ResBlkIN>> encode_;
  std::vector<std::unique_ptr<AdaINResBlk>> decode_;
  std::unique_ptr<InstanceNorm> out_norm_;
  std::unique_ptr<Conv2d> to_rgb_;
  mutable LeakyReLU act_;
  mutable Tanh tanh_;
};

struct DiscOutput {
  Tensor rf;          // (B) real/fake logits
  Tensor cls_logits;  // (B, m) per-domain logits (sigmoid applied by losses)
};

// Two-branch discriminator: shared residual trunk to 4x4, then a real/fake
// head (width 1) and a domain head (width m).
class Discriminator {
 public:
  Discriminator(const NetworkConfig& cfg, Rng& rng);
  DiscOutput forward(const Tensor& x, Tape& tape) const;
  Tensor backward(const Tensor& grf, const Tensor& gcls, Tape& tape) const;
  void collect(std::vector<Param*>& out) const;

  // R1 gradient penalty on real images: value gamma/2 * mean_i ||d rf_i / d
  // x_i||^2, with the parameter gradient estimated by a central difference of
  // the exact input-gradient field. Accumulates into parameter grads.
  double r1_penalty(const Tensor& x, float gamma) const;

 private:
  NetworkConfig cfg_;
  std::unique_ptr<Sequential> trunk_;
  std::unique_ptr<Sequential> head_rf_, head_cls_;
  int trunk_out_ = 0;
};

// Domain probabilities from the classifier head (elementwise sigmoid).
Tensor sigmoid(const Tensor& logits);

// Named-parameter checkpoint archive (raw float payload, bit-exact).
void save_params(std::ostream& os, const std::string& group,
                 const std::vector<Param*>& params);
void load_params(std::istream& is, const std::string& group,
                 const std::vector<Param*>& params);

}  // namespace stylemix

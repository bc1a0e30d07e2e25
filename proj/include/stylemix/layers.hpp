#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stylemix/rng.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Per-invocation activation store. Forward pushes, backward pops in reverse;
// one Tape per network call, so several forward passes can be kept alive and
// backpropagated independently.
class Tape {
 public:
  void push(Tensor t) { stack_.push_back(std::move(t)); }
  Tensor pop() {
    Tensor t = std::move(stack_.back());
    stack_.pop_back();
    return t;
  }
  bool empty() const { return stack_.empty(); }
  size_t size() const { return stack_.size(); }

 private:
  std::vector<Tensor> stack_;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Tape& tape) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& gy, Tape& tape) = 0;
  virtual void collect(std::vector<Param*>& out) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int cin, int co, int k, int stride, int pad, Rng& rng, std::string name,
         bool bias = true);
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;

  Param weight, bias_p;
  int stride, pad;
  bool has_bias;
};

class Linear : public Layer {
 public:
  Linear(int in, int out, Rng& rng, std::string name);
  Tensor forward(const Tensor& x, Tape& tape) override;  // x: (B, in)
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;

  Param weight, bias_p;  // weight (out, in)
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;

 private:
  float slope_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
};

class AvgPool2 : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
};

class Upsample2 : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
};

// Per-instance, per-channel normalization with learned affine parameters.
class InstanceNorm : public Layer {
 public:
  InstanceNorm(int channels, std::string name);
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;

  Param gamma, beta;

 private:
  static constexpr float kEps = 1e-5f;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;
  Layer& at(size_t i) { return *layers_[i]; }
  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Pre-activation residual block with optional downsampling, as used in the
// discriminator trunk and the style encoder.
class ResBlkDown : public Layer {
 public:
  ResBlkDown(int cin, int co, bool down, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;

 private:
  Conv2d conv1_, conv2_;
  std::unique_ptr<Conv2d> skip_;
  LeakyReLU act_;
  bool down_;
  bool learned_skip_;
};

// Adaptive instance normalization: channel statistics are normalized away and
// replaced by a scale/shift computed from the style code by a linear map.
class AdaIN {
 public:
  AdaIN(int channels, int style_dim, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, const Tensor& style, Tape& tape);
  // Returns input gradient; adds the style gradient into gs.
  Tensor backward(const Tensor& gy, Tape& tape, Tensor& gs);
  void collect(std::vector<Param*>& out);

 private:
  Linear affine_;
  int channels_;
  static constexpr float kEps = 1e-5f;
};

// Residual block with AdaIN style injection and optional upsampling (the
// generator decoder building block).
class AdaINResBlk {
 public:
  AdaINResBlk(int cin, int co, int style_dim, bool up, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, const Tensor& style, Tape& tape);
  Tensor backward(const Tensor& gy, Tape& tape, Tensor& gs);
  void collect(std::vector<Param*>& out);

 private:
  AdaIN norm1_, norm2_;
  Conv2d conv1_, conv2_;
  std::unique_ptr<Conv2d> skip_;
  LeakyReLU act_;
  Upsample2 up_op_;
  bool up_;
  bool learned_skip_;
};

// Residual block with plain instance norm (generator encoder side).
class ResBlkIN : public Layer {
 public:
  ResBlkIN(int cin, int co, bool down, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, Tape& tape) override;
  Tensor backward(const Tensor& gy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;

 private:
  InstanceNorm norm1_, norm2_;
  Conv2d conv1_, conv2_;
  std::unique_ptr<Conv2d> skip_;
  LeakyReLU act_;
  bool down_;
  bool learned_skip_;
};

void init_fan_in(Tensor& w, int fan_in, Rng& rng);

}  // namespace stylemix

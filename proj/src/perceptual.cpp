#include "stylemix/perceptual.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "stylemix/kernels.hpp"
#include "stylemix/optim.hpp"
#include "stylemix/tunit.hpp"

namespace stylemix {

namespace {
constexpr float kNormEps = 1e-10f;

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void normalize_positions(Tensor& feat) {
  const int n = feat.dim(0), c = feat.dim(1), h = feat.dim(2), w = feat.dim(3);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double nrm = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          const float v = feat.at4(i, ch, y, x);
          nrm += static_cast<double>(v) * v;
        }
        const float inv = 1.0f / (std::sqrt(static_cast<float>(nrm)) + kNormEps);
        for (int ch = 0; ch < c; ++ch) feat.at4(i, ch, y, x) *= inv;
      }
}

}  // namespace

PerceptualEmbedder::PerceptualEmbedder(int in_channels, int img_size, int num_classes, Rng& rng)
    : in_channels_(in_channels), img_size_(img_size), num_classes_(num_classes) {
  stage_channels_ = {16, 32, 64, 64};
  int cin = in_channels;
  for (size_t i = 0; i < stage_channels_.size(); ++i) {
    convs_.push_back(std::make_unique<Conv2d>(cin, stage_channels_[i], 3, 1, 1, rng,
                                              "phi.c" + std::to_string(i)));
    cin = stage_channels_[i];
  }
  head_ = std::make_unique<Linear>(stage_channels_.back(), num_classes, rng, "phi.head");
  weights_.assign(stage_channels_.size(), 1.0 / static_cast<double>(stage_channels_.size()));
}

void PerceptualEmbedder::set_layer_weights(std::vector<double> w) {
  if (static_cast<int>(w.size()) != num_layers())
    throw std::invalid_argument("set_layer_weights: expected " + std::to_string(num_layers()) +
                                " weights");
  bool any = false;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument("set_layer_weights: negative weight");
    any = any || v > 0.0;
  }
  if (!any) throw std::invalid_argument("set_layer_weights: all weights zero");
  weights_ = std::move(w);
}

std::vector<Tensor> PerceptualEmbedder::embed(const Tensor& x) const {
  std::vector<Tensor> taps;
  Tape scratch;
  Tensor h = x;
  for (const auto& conv : convs_) {
    h = kern::conv2d_forward(h, conv->weight.value, &conv->bias_p.value, conv->stride,
                             conv->pad);
    h = act_.forward(h, scratch);
    scratch.pop();  // embed() needs no gradients
    Tensor tap = h;
    normalize_positions(tap);
    taps.push_back(std::move(tap));
    h = kern::avgpool2_forward(h);
  }
  return taps;
}

Tensor PerceptualEmbedder::pooled_features(const Tensor& x) const {
  Tape scratch;
  Tensor h = x;
  for (const auto& conv : convs_) {
    h = kern::conv2d_forward(h, conv->weight.value, &conv->bias_p.value, conv->stride,
                             conv->pad);
    h = act_.forward(h, scratch);
    scratch.pop();
    h = kern::avgpool2_forward(h);
  }
  const int n = h.dim(0), c = h.dim(1), hw = h.dim(2) * h.dim(3);
  Tensor out({n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      const float* p = h.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) acc += p[j];
      out.at2(i, ch) = static_cast<float>(acc / hw);
    }
  return out;
}

Tensor PerceptualEmbedder::forward_logits(const Tensor& x, Tape& tape) {
  Tensor h = x;
  for (auto& conv : convs_) {
    h = conv->forward(h, tape);
    h = act_.forward(h, tape);
    h = kern::avgpool2_forward(h);
  }
  // global average pool over the remaining spatial extent
  const int n = h.dim(0), c = h.dim(1), hw = h.dim(2) * h.dim(3);
  tape.push(Tensor({n, c, h.dim(2), h.dim(3)}));  // shape witness for backward
  Tensor pooled({n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      const float* p = h.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) acc += p[j];
      pooled.at2(i, ch) = static_cast<float>(acc / hw);
    }
  return head_->forward(pooled, tape);
}

Tensor PerceptualEmbedder::backward(const Tensor& g_logits, Tape& tape) {
  Tensor g = head_->backward(g_logits, tape);
  Tensor witness = tape.pop();
  const int n = witness.dim(0), c = witness.dim(1), hh = witness.dim(2), ww = witness.dim(3);
  Tensor gh({n, c, hh, ww});
  const float inv = 1.0f / (hh * ww);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float v = g.at2(i, ch) * inv;
      float* p = gh.data() + (static_cast<size_t>(i) * c + ch) * static_cast<size_t>(hh) * ww;
      for (int j = 0; j < hh * ww; ++j) p[j] = v;
    }
  Tensor cur = std::move(gh);
  for (auto it = convs_.rbegin(); it != convs_.rend(); ++it) {
    cur = kern::avgpool2_backward(cur);
    cur = act_.backward(cur, tape);
    cur = (*it)->backward(cur, tape);
  }
  return cur;
}

void PerceptualEmbedder::collect(std::vector<Param*>& out) {
  for (auto& c : convs_) c->collect(out);
  head_->collect(out);
}

std::string PerceptualEmbedder::fingerprint() const {
  uint64_t h = 1469598103934665603ULL;
  std::vector<Param*> params;
  const_cast<PerceptualEmbedder*>(this)->collect(params);
  for (const Param* p : params)
    h = fnv1a(h, p->value.data(), static_cast<size_t>(p->value.size()) * sizeof(float));
  for (double w : weights_) h = fnv1a(h, &w, sizeof(w));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "convcls-L%d-%016llx", num_layers(),
                static_cast<unsigned long long>(h));
  return buf;
}

double train_domain_classifier(PerceptualEmbedder& phi, const Tensor& images,
                               std::span<const int> labels, int steps, int batch_size, float lr,
                               Rng& rng) {
  const int n = images.dim(0);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("train_domain_classifier: one label per image required");
  std::vector<Param*> params;
  phi.collect(params);
  Adam opt(params, lr, 0.9f, 0.999f);
  const int c = images.dim(1), hh = images.dim(2), ww = images.dim(3);
  const int64_t img_sz = static_cast<int64_t>(c) * hh * ww;
  double last = 0.0;
  for (int step = 0; step < steps; ++step) {
    Tensor batch({batch_size, c, hh, ww});
    std::vector<int> ybatch(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      const int idx = rng.uniform_int(0, n - 1);
      std::copy(images.data() + idx * img_sz, images.data() + (idx + 1) * img_sz,
                batch.data() + i * img_sz);
      ybatch[static_cast<size_t>(i)] = labels[static_cast<size_t>(idx)];
    }
    opt.zero_grad();
    Tape tape;
    Tensor logits = phi.forward_logits(batch, tape);
    Tensor probs = softmax_rows(logits);
    double loss = 0.0;
    Tensor glog = probs;
    for (int i = 0; i < batch_size; ++i) {
      loss -= std::log(std::max(static_cast<double>(probs.at2(i, ybatch[static_cast<size_t>(i)])),
                                1e-12)) /
              batch_size;
      glog.at2(i, ybatch[static_cast<size_t>(i)]) -= 1.0f;
    }
    glog *= 1.0f / batch_size;
    phi.backward(glog, tape);
    opt.step();
    last = loss;
  }
  return last;
}

namespace {

std::vector<double> feature_distances(const Tensor& x1, const Tensor& x2, const Embedder& phi,
                                      bool squared) {
  check_same_shape(x1, x2, "perceptual distance");
  const std::vector<Tensor> f1 = phi.embed(x1);
  const std::vector<Tensor> f2 = phi.embed(x2);
  const std::vector<double> wl = phi.layer_weights();
  const int b = x1.dim(0);
  std::vector<double> out(static_cast<size_t>(b), 0.0);
  for (size_t l = 0; l < f1.size(); ++l) {
    const Tensor& a = f1[l];
    const Tensor& bb = f2[l];
    const int c = a.dim(1), h = a.dim(2), w = a.dim(3);
    const double scale = wl[l] / (static_cast<double>(h) * w);
    for (int i = 0; i < b; ++i) {
      double layer_acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double sq = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const double d = static_cast<double>(a.at4(i, ch, y, x)) - bb.at4(i, ch, y, x);
            sq += d * d;
          }
          layer_acc += squared ? sq : std::sqrt(sq);
        }
      out[static_cast<size_t>(i)] += scale * layer_acc;
    }
  }
  return out;
}

}  // namespace

std::vector<double> distance_squared_form_batch(const Tensor& x1, const Tensor& x2,
                                                const Embedder& phi) {
  return feature_distances(x1, x2, phi, true);
}

std::vector<double> distance_metric_form_batch(const Tensor& x1, const Tensor& x2,
                                               const Embedder& phi) {
  return feature_distances(x1, x2, phi, false);
}

double distance_squared_form(const Tensor& x1, const Tensor& x2, const Embedder& phi) {
  return feature_distances(x1, x2, phi, true).front();
}

double distance_metric_form(const Tensor& x1, const Tensor& x2, const Embedder& phi) {
  return feature_distances(x1, x2, phi, false).front();
}

std::vector<double> load_layer_weights(const std::string& path, int expected_count) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_layer_weights: cannot open " + path);
  std::vector<double> w;
  double v = 0.0;
  while (in >> v) {
    if (v < 0.0) throw std::runtime_error("load_layer_weights: negative weight in " + path);
    w.push_back(v);
  }
  if (static_cast<int>(w.size()) != expected_count)
    throw std::runtime_error("load_layer_weights: expected " + std::to_string(expected_count) +
                             " weights, got " + std::to_string(w.size()));
  return w;
}

}  // namespace stylemix

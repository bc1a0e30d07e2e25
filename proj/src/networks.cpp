#include "stylemix/networks.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace stylemix {

thread_local bool ParamGradScope::enabled = true;

int NetworkConfig::num_stages() const {
  int s = 0, e = img_size;
  while (e > 4) {
    e /= 2;
    ++s;
  }
  return s;
}

int NetworkConfig::stage_channels(int stage) const {
  const long long c = static_cast<long long>(base_channels) << stage;
  return static_cast<int>(std::min<long long>(c, max_channels));
}

void NetworkConfig::validate() const {
  if (num_domains < 2) throw std::invalid_argument("NetworkConfig: num_domains must be >= 2");
  if (style_dim < 1 || latent_dim < 1)
    throw std::invalid_argument("NetworkConfig: style/latent dims must be positive");
  int e = img_size;
  while (e > 4 && e % 2 == 0) e /= 2;
  if (e != 4) throw std::invalid_argument("NetworkConfig: img_size must be 4 * 2^k");
}

namespace {

Tensor reshape(const Tensor& t, std::vector<int> shape) {
  return Tensor(std::move(shape), std::vector<float>(t.data(), t.data() + t.size()));
}

}  // namespace

// ---------------------------------------------------------------- StyleEncoder

StyleEncoder::StyleEncoder(const NetworkConfig& cfg, Rng& rng) : cfg_(cfg) {
  trunk_ = std::make_unique<Sequential>();
  trunk_->add(std::make_unique<Conv2d>(cfg.channels, cfg.base_channels, 3, 1, 1, rng, "E.rgb"));
  for (int i = 0; i < cfg.num_stages(); ++i)
    trunk_->add(std::make_unique<ResBlkDown>(cfg.stage_channels(i), cfg.stage_channels(i + 1),
                                             true, rng, "E.blk" + std::to_string(i)));
  trunk_out_ = cfg.stage_channels(cfg.num_stages());
  trunk_->add(std::make_unique<LeakyReLU>());
  trunk_->add(std::make_unique<Conv2d>(trunk_out_, trunk_out_, 4, 1, 0, rng, "E.c4"));
  trunk_->add(std::make_unique<LeakyReLU>());
  head_ = std::make_unique<Linear>(trunk_out_, cfg.style_dim, rng, "E.head");
}

Tensor StyleEncoder::forward(const Tensor& x, Tape& tape) const {
  if (x.ndim() != 4 || x.dim(1) != cfg_.channels || x.dim(2) != cfg_.img_size ||
      x.dim(3) != cfg_.img_size)
    throw std::invalid_argument("StyleEncoder: unexpected input shape " + x.shape_str());
  Tensor h = trunk_->forward(x, tape);
  h = reshape(h, {h.dim(0), trunk_out_});
  return head_->forward(h, tape);
}

Tensor StyleEncoder::backward(const Tensor& gs, Tape& tape) const {
  Tensor g = head_->backward(gs, tape);
  g = reshape(g, {g.dim(0), trunk_out_, 1, 1});
  return trunk_->backward(g, tape);
}

void StyleEncoder::collect(std::vector<Param*>& out) const {
  trunk_->collect(out);
  head_->collect(out);
}

// ---------------------------------------------------------------- MappingNetwork

MappingNetwork::MappingNetwork(const NetworkConfig& cfg, Rng& rng) : cfg_(cfg) {
  mlp_ = std::make_unique<Sequential>();
  mlp_->add(std::make_unique<Linear>(cfg.latent_dim, cfg.mlp_hidden, rng, "F.l0"));
  mlp_->add(std::make_unique<LeakyReLU>());
  mlp_->add(std::make_unique<Linear>(cfg.mlp_hidden, cfg.mlp_hidden, rng, "F.l1"));
  mlp_->add(std::make_unique<LeakyReLU>());
  mlp_->add(std::make_unique<Linear>(cfg.mlp_hidden, cfg.style_dim, rng, "F.l2"));
}

Tensor MappingNetwork::forward(const Tensor& z, Tape& tape) const {
  if (z.ndim() != 2 || z.dim(1) != cfg_.latent_dim)
    throw std::invalid_argument("MappingNetwork: unexpected input shape " + z.shape_str());
  return mlp_->forward(z, tape);
}

Tensor MappingNetwork::backward(const Tensor& gs, Tape& tape) const {
  return mlp_->backward(gs, tape);
}

void MappingNetwork::collect(std::vector<Param*>& out) const { mlp_->collect(out); }

// ---------------------------------------------------------------- Generator

Generator::Generator(const NetworkConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int depth = std::max(1, cfg.num_stages() - 2);  // stop at 16x16 for 64px inputs
  from_rgb_ = std::make_unique<Conv2d>(cfg.channels, cfg.base_channels, 3, 1, 1, rng, "G.rgb");
  for (int i = 0; i < depth; ++i)
    encode_.push_back(std::make_unique<ResBlkIN>(cfg.stage_channels(i), cfg.stage_channels(i + 1),
                                                 true, rng, "G.enc" + std::to_string(i)));
  const int mid = cfg.stage_channels(depth);
  for (int i = 0; i < 2; ++i)
    encode_.push_back(
        std::make_unique<ResBlkIN>(mid, mid, false, rng, "G.mid" + std::to_string(i)));
  for (int i = 0; i < 2; ++i)
    decode_.push_back(std::make_unique<AdaINResBlk>(mid, mid, cfg.style_dim, false, rng,
                                                    "G.adamid" + std::to_string(i)));
  for (int i = depth; i > 0; --i)
    decode_.push_back(std::make_unique<AdaINResBlk>(cfg.stage_channels(i),
                                                    cfg.stage_channels(i - 1), cfg.style_dim,
                                                    true, rng, "G.dec" + std::to_string(i)));
  out_norm_ = std::make_unique<InstanceNorm>(cfg.base_channels, "G.on");
  to_rgb_ = std::make_unique<Conv2d>(cfg.base_channels, cfg.channels, 1, 1, 0, rng, "G.out");
}

Tensor Generator::forward(const Tensor& x, const Tensor& style, Tape& tape) const {
  if (x.dim(0) != style.dim(0))
    throw std::invalid_argument("Generator: image/style batch size mismatch");
  if (style.dim(1) != cfg_.style_dim)
    throw std::invalid_argument("Generator: style dimension mismatch");
  Tensor h = from_rgb_->forward(x, tape);
  for (auto& blk : encode_) h = blk->forward(h, tape);
  for (auto& blk : decode_) h = blk->forward(h, style, tape);
  h = out_norm_->forward(h, tape);
  h = act_.forward(h, tape);
  h = to_rgb_->forward(h, tape);
  return tanh_.forward(h, tape);
}

Tensor Generator::backward(const Tensor& gy, Tape& tape, Tensor& gstyle) const {
  Tensor g = tanh_.backward(gy, tape);
  g = to_rgb_->backward(g, tape);
  g = act_.backward(g, tape);
  g = out_norm_->backward(g, tape);
  for (auto it = decode_.rbegin(); it != decode_.rend(); ++it)
    g = (*it)->backward(g, tape, gstyle);
  for (auto it = encode_.rbegin(); it != encode_.rend(); ++it) g = (*it)->backward(g, tape);
  return from_rgb_->backward(g, tape);
}

void Generator::collect(std::vector<Param*>& out) const {
  from_rgb_->collect(out);
  for (auto& b : encode_) b->collect(out);
  for (auto& b : decode_) b->collect(out);
  out_norm_->collect(out);
  to_rgb_->collect(out);
}

// ---------------------------------------------------------------- Discriminator

namespace {

std::unique_ptr<Sequential> make_head(int cin, int width, Rng& rng, const std::string& name) {
  auto head = std::make_unique<Sequential>();
  head->add(std::make_unique<LeakyReLU>());
  head->add(std::make_unique<Conv2d>(cin, cin, 4, 1, 0, rng, name + ".c4"));
  head->add(std::make_unique<LeakyReLU>());
  head->add(std::make_unique<Conv2d>(cin, width, 1, 1, 0, rng, name + ".c1"));
  return head;
}

}  // namespace

Discriminator::Discriminator(const NetworkConfig& cfg, Rng& rng) : cfg_(cfg) {
  trunk_ = std::make_unique<Sequential>();
  trunk_->add(std::make_unique<Conv2d>(cfg.channels, cfg.base_channels, 3, 1, 1, rng, "D.rgb"));
  for (int i = 0; i < cfg.num_stages(); ++i)
    trunk_->add(std::make_unique<ResBlkDown>(cfg.stage_channels(i), cfg.stage_channels(i + 1),
                                             true, rng, "D.blk" + std::to_string(i)));
  trunk_out_ = cfg.stage_channels(cfg.num_stages());
  head_rf_ = make_head(trunk_out_, 1, rng, "D.rf");
  head_cls_ = make_head(trunk_out_, cfg.num_domains, rng, "D.cls");
}

DiscOutput Discriminator::forward(const Tensor& x, Tape& tape) const {
  if (x.ndim() != 4 || x.dim(1) != cfg_.channels || x.dim(2) != cfg_.img_size ||
      x.dim(3) != cfg_.img_size)
    throw std::invalid_argument("Discriminator: unexpected input shape " + x.shape_str());
  Tensor t = trunk_->forward(x, tape);
  Tensor rf = head_rf_->forward(t, tape);
  Tensor cls = head_cls_->forward(t, tape);
  DiscOutput out;
  out.rf = reshape(rf, {rf.dim(0)});
  out.cls_logits = reshape(cls, {cls.dim(0), cfg_.num_domains});
  return out;
}

Tensor Discriminator::backward(const Tensor& grf, const Tensor& gcls, Tape& tape) const {
  const int b = grf.dim(0);
  Tensor gc = reshape(gcls, {b, cfg_.num_domains, 1, 1});
  Tensor gr = reshape(grf, {b, 1, 1, 1});
  Tensor gt = head_cls_->backward(gc, tape);
  gt += head_rf_->backward(gr, tape);
  return trunk_->backward(gt, tape);
}

void Discriminator::collect(std::vector<Param*>& out) const {
  trunk_->collect(out);
  head_rf_->collect(out);
  head_cls_->collect(out);
}

double Discriminator::r1_penalty(const Tensor& x, float gamma) const {
  const int b = x.dim(0);
  Tensor ones({b});
  ones.fill(1.0f);
  Tensor zero_cls({b, cfg_.num_domains});
  Tensor g;
  {
    ParamGradScope off;
    Tape tape;
    forward(x, tape);
    g = backward(ones, zero_cls, tape);  // per-sample d rf_i / d x_i
  }
  double sq = 0.0, xsq = 0.0;
  for (int64_t i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * g[i];
  for (int64_t i = 0; i < x.size(); ++i) xsq += static_cast<double>(x[i]) * x[i];
  const double value = 0.5 * gamma * sq / b;
  if (!(ParamGradScope::params_enabled()) || gamma == 0.0f) return value;

  // Parameter gradient of the penalty via a central difference of the exact
  // input-gradient field: d/dtheta (gamma/B) sum_i v_i . grad_x rf_i with
  // v = g held fixed.
  const double gnorm = std::sqrt(sq / g.size()) + 1e-12;
  const double xnorm = std::sqrt(xsq / x.size()) + 1e-3;
  const float eps = static_cast<float>(1e-2 * xnorm / gnorm);
  Tensor xp = x, xm = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    xp[i] += eps * g[i];
    xm[i] -= eps * g[i];
  }
  const float scale = gamma / (b * 2.0f * eps);
  Tensor grf_p({b}), grf_m({b});
  grf_p.fill(scale);
  grf_m.fill(-scale);
  {
    Tape tp;
    forward(xp, tp);
    backward(grf_p, zero_cls, tp);
  }
  {
    Tape tm;
    forward(xm, tm);
    backward(grf_m, zero_cls, tm);
  }
  return value;
}

// ---------------------------------------------------------------- helpers

Tensor sigmoid(const Tensor& logits) {
  Tensor p = logits;
  for (int64_t i = 0; i < p.size(); ++i) {
    const float v = p[i];
    p[i] = v >= 0.0f ? 1.0f / (1.0f + std::exp(-v)) : std::exp(v) / (1.0f + std::exp(v));
  }
  return p;
}

// ---------------------------------------------------------------- checkpoints

namespace {

void write_str(std::ostream& os, const std::string& s) {
  const uint32_t n = static_cast<uint32_t>(s.size());
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(s.data(), n);
}

std::string read_str(std::istream& is) {
  uint32_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

}  // namespace

void save_params(std::ostream& os, const std::string& group,
                 const std::vector<Param*>& params) {
  write_str(os, group);
  const uint32_t count = static_cast<uint32_t>(params.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Param* p : params) {
    write_str(os, p->name);
    const uint32_t nd = static_cast<uint32_t>(p->value.ndim());
    os.write(reinterpret_cast<const char*>(&nd), sizeof(nd));
    for (int d : p->value.shape()) {
      const int32_t dd = d;
      os.write(reinterpret_cast<const char*>(&dd), sizeof(dd));
    }
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
}

void load_params(std::istream& is, const std::string& group,
                 const std::vector<Param*>& params) {
  const std::string g = read_str(is);
  if (g != group) throw std::runtime_error("checkpoint: expected group " + group + ", got " + g);
  uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (Param* p : params) {
    const std::string name = read_str(is);
    if (name != p->name)
      throw std::runtime_error("checkpoint: parameter name mismatch: " + name + " vs " + p->name);
    uint32_t nd = 0;
    is.read(reinterpret_cast<char*>(&nd), sizeof(nd));
    std::vector<int> shape(nd);
    for (uint32_t i = 0; i < nd; ++i) {
      int32_t dd = 0;
      is.read(reinterpret_cast<char*>(&dd), sizeof(dd));
      shape[i] = dd;
    }
    if (shape != p->value.shape()) throw std::runtime_error("checkpoint: shape mismatch " + name);
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!is) throw std::runtime_error("checkpoint: truncated stream in group " + group);
}

}  // namespace stylemix

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stylemix/kernels.hpp"
#include "stylemix/layers.hpp"
#include "stylemix/networks.hpp"
#include "test_util.hpp"

using namespace stylemix;
using testutil::random_tensor;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double mx = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(static_cast<double>(a[i]) - b[i]));
  return mx;
}

double weighted_sum(const Tensor& y, const Tensor& c) {
  double acc = 0.0;
  for (int64_t i = 0; i < y.size(); ++i) acc += static_cast<double>(y[i]) * c[i];
  return acc;
}

// FD check of a layer's input gradient under the scalar probe sum(c * y).
void check_layer_input_grad(const char* what, Layer& layer, Tensor x, double tol = 2e-2,
                            double step = 1e-3) {
  Rng rng(123);
  Tape t;
  Tensor y = layer.forward(x, t);
  Tensor c = random_tensor(y.shape(), rng);
  Tensor gin = layer.backward(c, t);
  auto eval = [&] {
    Tape tt;
    return weighted_sum(layer.forward(x, tt), c);
  };
  const double err = testutil::fd_gradient_max_err(x, gin, eval, step);
  CHECK_MESSAGE(err < tol, std::string(what), " input grad err ", err);
}

// Directional FD check, used for composite blocks where an entrywise step can
// cross an internal activation kink. Compares g . v against the symmetric
// difference of the probe along several random directions v.
void check_layer_input_grad_dir(const char* what, Layer& layer, Tensor x, double tol = 0.1) {
  Rng rng(123);
  Tape t;
  Tensor y = layer.forward(x, t);
  Tensor c = random_tensor(y.shape(), rng);
  Tensor gin = layer.backward(c, t);
  auto eval = [&](const Tensor& in) {
    Tape tt;
    return weighted_sum(layer.forward(in, tt), c);
  };
  const double h = 1e-2;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor v = random_tensor(x.shape(), rng);
    double vn = 0.0;
    for (int64_t i = 0; i < v.size(); ++i) vn += static_cast<double>(v[i]) * v[i];
    vn = std::sqrt(vn);
    Tensor xp = x, xm = x;
    double dot = 0.0;
    for (int64_t i = 0; i < v.size(); ++i) {
      const float d = static_cast<float>(h * v[i] / vn);
      xp[i] += d;
      xm[i] -= d;
      dot += static_cast<double>(gin[i]) * v[i] / vn;
    }
    const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
    const double denom = std::max({1e-2, std::abs(fd), std::abs(dot)});
    CHECK_MESSAGE(std::abs(fd - dot) / denom < tol, std::string(what),
                  " directional grad err fd=", fd, " analytic=", dot);
  }
}

// FD check of the accumulated parameter gradients (a sample of entries).
void check_layer_param_grads(Layer& layer, Tensor x, double tol = 2e-2) {
  Rng rng(321);
  Tape t;
  Tensor y = layer.forward(x, t);
  Tensor c = random_tensor(y.shape(), rng);
  std::vector<Param*> params;
  layer.collect(params);
  for (Param* p : params) p->grad = Tensor(p->value.shape());
  layer.backward(c, t);
  auto eval = [&] {
    Tape tt;
    return weighted_sum(layer.forward(x, tt), c);
  };
  for (Param* p : params) {
    const int64_t n = p->value.size();
    for (int64_t k = 0; k < std::min<int64_t>(n, 6); ++k) {
      const int64_t i = (k * 2654435761LL) % n;
      const float keep = p->value[i];
      const double step = 1e-3;
      p->value[i] = keep + static_cast<float>(step);
      const double up = eval();
      p->value[i] = keep - static_cast<float>(step);
      const double dn = eval();
      p->value[i] = keep;
      const double fd = (up - dn) / (2.0 * step);
      const double denom = std::max({1e-4, std::abs(fd), std::abs(static_cast<double>(p->grad[i]))});
      CHECK_MESSAGE(std::abs(fd - p->grad[i]) / denom < tol, p->name, " entry ", i);
    }
  }
}

NetworkConfig tiny_cfg() {
  NetworkConfig cfg;
  cfg.channels = 2;
  cfg.img_size = 8;
  cfg.style_dim = 6;
  cfg.latent_dim = 5;
  cfg.num_domains = 2;
  cfg.base_channels = 8;
  cfg.max_channels = 16;
  cfg.mlp_hidden = 12;
  return cfg;
}

}  // namespace

// ------------------------------------------------------------------- kernels

TEST_CASE("parallel conv kernels agree with the serial references") {
  Rng rng(5);
  struct Case {
    int n, cin, co, hw, k, stride, pad;
  } cases[] = {{2, 3, 4, 8, 3, 1, 1}, {3, 4, 6, 9, 3, 2, 1}, {1, 2, 5, 7, 4, 1, 0},
               {2, 1, 1, 6, 1, 1, 0}, {2, 5, 3, 8, 5, 2, 2}};
  for (const auto& cs : cases) {
    Tensor x = random_tensor({cs.n, cs.cin, cs.hw, cs.hw}, rng);
    Tensor w = random_tensor({cs.co, cs.cin, cs.k, cs.k}, rng, 0.2f);
    Tensor b = random_tensor({cs.co}, rng, 0.1f);
    Tensor yp = kern::conv2d_forward(x, w, &b, cs.stride, cs.pad);
    Tensor ys = kern::conv2d_forward_serial(x, w, &b, cs.stride, cs.pad);
    CHECK(max_abs_diff(yp, ys) < 1e-4);

    Tensor gy = random_tensor(yp.shape(), rng);
    CHECK(max_abs_diff(kern::conv2d_backward_input(gy, w, cs.hw, cs.hw, cs.stride, cs.pad),
                       kern::conv2d_backward_input_serial(gy, w, cs.hw, cs.hw, cs.stride,
                                                          cs.pad)) < 1e-4);
    Tensor gwp(w.shape()), gws(w.shape()), gbp(b.shape()), gbs(b.shape());
    kern::conv2d_backward_params(x, gy, gwp, &gbp, cs.stride, cs.pad);
    kern::conv2d_backward_params_serial(x, gy, gws, &gbs, cs.stride, cs.pad);
    CHECK(max_abs_diff(gwp, gws) < 1e-3);
    CHECK(max_abs_diff(gbp, gbs) < 1e-3);
  }
}

TEST_CASE("pooling and upsampling backward ops are the forward adjoints") {
  Rng rng(9);
  Tensor x = random_tensor({2, 3, 6, 6}, rng);
  Tensor y = kern::avgpool2_forward(x);
  Tensor u = random_tensor(y.shape(), rng);
  Tensor xt = kern::avgpool2_backward(u);
  // <Ax, u> == <x, A^T u>
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < y.size(); ++i) lhs += static_cast<double>(y[i]) * u[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * xt[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));

  Tensor y2 = kern::upsample2_forward(x);
  Tensor u2 = random_tensor(y2.shape(), rng);
  Tensor xt2 = kern::upsample2_backward(u2);
  lhs = rhs = 0.0;
  for (int64_t i = 0; i < y2.size(); ++i) lhs += static_cast<double>(y2[i]) * u2[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * xt2[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("matmul wrapper against a naive triple loop") {
  Rng rng(15);
  const int m = 4, n = 5, k = 3;
  Tensor a = random_tensor({m, k}, rng);
  Tensor b = random_tensor({k, n}, rng);
  Tensor out({m, n});
  kern::matmul(a.data(), b.data(), out.data(), m, n, k, false, false, 0.0f);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += static_cast<double>(a.at2(i, kk)) * b.at2(kk, j);
      CHECK(out.at2(i, j) == doctest::Approx(acc).epsilon(1e-5));
    }
}

// -------------------------------------------------------------------- layers

TEST_CASE("layer gradients match central differences") {
  Rng rng(21);
  {
    Conv2d conv(3, 4, 3, 1, 1, rng, "t.conv");
    Tensor x = random_tensor({2, 3, 5, 5}, rng);
    check_layer_input_grad("conv", conv, x);
    check_layer_param_grads(conv, x);
  }
  {
    Linear lin(6, 4, rng, "t.lin");
    Tensor x = random_tensor({3, 6}, rng);
    check_layer_input_grad("lin", lin, x);
    check_layer_param_grads(lin, x);
  }
  {
    LeakyReLU act(0.2f);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    for (int64_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) < 0.05f) x[i] += 0.1f;  // stay off the kink
    check_layer_input_grad("act", act, x);
  }
  {
    Tanh act;
    Tensor x = random_tensor({2, 4}, rng);
    check_layer_input_grad("act", act, x);
  }
  {
    InstanceNorm norm(3, "t.in");
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    check_layer_input_grad("instnorm", norm, x, 5e-2);
    check_layer_param_grads(norm, x, 5e-2);
  }
  {
    ResBlkDown blk(3, 6, true, rng, "t.down");
    Tensor x = random_tensor({2, 3, 6, 6}, rng);
    check_layer_input_grad_dir("resdown", blk, x);
    check_layer_param_grads(blk, x);
  }
  {
    ResBlkIN blk(4, 4, false, rng, "t.rin");
    Tensor x = random_tensor({2, 4, 6, 6}, rng);
    check_layer_input_grad_dir("resin", blk, x);
  }
}

TEST_CASE("AdaIN style and input gradients match central differences") {
  Rng rng(27);
  AdaIN ada(4, 6, rng, "t.ada");
  Tensor x = random_tensor({2, 4, 4, 4}, rng);
  Tensor s = random_tensor({2, 6}, rng);
  Tensor c = random_tensor({2, 4, 4, 4}, rng);
  Tape t;
  Tensor y = ada.forward(x, s, t);
  Tensor gs({2, 6});
  Tensor gx = ada.backward(c, t, gs);
  auto eval = [&] {
    Tape tt;
    return weighted_sum(ada.forward(x, s, tt), c);
  };
  CHECK(testutil::fd_gradient_max_err(x, gx, eval, 1e-3) < 5e-2);
  CHECK(testutil::fd_gradient_max_err(s, gs, eval, 1e-3) < 5e-2);
}

TEST_CASE("tape is strictly last-in first-out") {
  Tape t;
  Tensor a({1}, {1.0f});
  Tensor b({1}, {2.0f});
  t.push(a);
  t.push(b);
  CHECK(t.pop()[0] == 2.0f);
  CHECK(t.pop()[0] == 1.0f);
  CHECK(t.empty());
}

// ------------------------------------------------------------------ networks

TEST_CASE("network shape contracts and determinism") {
  NetworkConfig cfg = tiny_cfg();
  cfg.validate();
  Rng rng(33);
  StyleEncoder enc(cfg, rng);
  MappingNetwork map(cfg, rng);
  Generator gen(cfg, rng);
  Discriminator disc(cfg, rng);
  Rng data_rng(1);
  Tensor x = random_tensor({3, cfg.channels, cfg.img_size, cfg.img_size}, data_rng, 0.5f);

  Tape t1, t2;
  Tensor s = enc.forward(x, t1);
  CHECK(s.shape() == std::vector<int>{3, cfg.style_dim});
  CHECK(max_abs_diff(s, enc.forward(x, t2)) == 0.0);  // bit-identical across calls

  Tensor z = random_tensor({3, cfg.latent_dim}, data_rng);
  Tape t3;
  Tensor sz = map.forward(z, t3);
  CHECK(sz.shape() == std::vector<int>{3, cfg.style_dim});

  Tape t4, t5;
  Tensor y = gen.forward(x, s, t4);
  CHECK(y.shape() == x.shape());
  float mn = 1e9f, mx = -1e9f;
  for (int64_t i = 0; i < y.size(); ++i) {
    mn = std::min(mn, y[i]);
    mx = std::max(mx, y[i]);
  }
  CHECK(mn >= -1.0f);
  CHECK(mx <= 1.0f);
  CHECK(max_abs_diff(y, gen.forward(x, s, t5)) == 0.0);

  Tape t6;
  DiscOutput o = disc.forward(x, t6);
  CHECK(o.rf.shape() == std::vector<int>{3});
  CHECK(o.cls_logits.shape() == std::vector<int>{3, cfg.num_domains});
  Tensor probs = sigmoid(o.cls_logits);
  for (int64_t i = 0; i < probs.size(); ++i) {
    CHECK(probs[i] > 0.0f);
    CHECK(probs[i] < 1.0f);
  }

  // duplicated images give identical codes
  Tensor xx({2, cfg.channels, cfg.img_size, cfg.img_size});
  const int64_t sz1 = static_cast<int64_t>(cfg.channels) * cfg.img_size * cfg.img_size;
  std::copy(x.data(), x.data() + sz1, xx.data());
  std::copy(x.data(), x.data() + sz1, xx.data() + sz1);
  Tape t7;
  Tensor ss = enc.forward(xx, t7);
  for (int j = 0; j < cfg.style_dim; ++j) CHECK(ss.at2(0, j) == ss.at2(1, j));

  CHECK_THROWS_AS(
      [&] {
        Tape t;
        Tensor bad({1, cfg.channels, cfg.img_size * 2, cfg.img_size * 2});
        enc.forward(bad, t);
      }(),
      std::invalid_argument);
  CHECK_THROWS_AS(
      [&] {
        Tape t;
        Tensor bad({1, cfg.latent_dim + 1});
        map.forward(bad, t);
      }(),
      std::invalid_argument);
}

TEST_CASE("domain head width follows m") {
  NetworkConfig cfg = tiny_cfg();
  cfg.num_domains = 3;
  Rng rng(35);
  Discriminator disc(cfg, rng);
  Tape t;
  Tensor x = random_tensor({2, cfg.channels, cfg.img_size, cfg.img_size}, rng, 0.3f);
  CHECK(disc.forward(x, t).cls_logits.dim(1) == 3);
}

TEST_CASE("distinct latent vectors map to distinct codes") {
  NetworkConfig cfg = tiny_cfg();
  Rng rng(39);
  MappingNetwork map(cfg, rng);
  Rng zr(77);
  int distinct = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor z = random_tensor({2, cfg.latent_dim}, zr);
    Tape t;
    Tensor s = map.forward(z, t);
    bool diff = false;
    for (int j = 0; j < cfg.style_dim; ++j) diff = diff || s.at2(0, j) != s.at2(1, j);
    distinct += diff;
  }
  CHECK(distinct == 100);
}

TEST_CASE("losses on G's output propagate nonzero gradients into E and F") {
  NetworkConfig cfg = tiny_cfg();
  Rng rng(45);
  StyleEncoder enc(cfg, rng);
  MappingNetwork map(cfg, rng);
  Generator gen(cfg, rng);
  std::vector<Param*> pe, pf;
  enc.collect(pe);
  map.collect(pf);
  for (Param* p : pe) p->grad = Tensor(p->value.shape());
  for (Param* p : pf) p->grad = Tensor(p->value.shape());

  Rng dr(2);
  Tensor x = random_tensor({2, cfg.channels, cfg.img_size, cfg.img_size}, dr, 0.5f);
  auto grad_norm = [](const std::vector<Param*>& ps) {
    double acc = 0.0;
    for (const Param* p : ps)
      for (int64_t i = 0; i < p->grad.size(); ++i)
        acc += static_cast<double>(p->grad[i]) * p->grad[i];
    return std::sqrt(acc);
  };

  {  // encoder-sourced style
    Tape te, tg;
    Tensor s = enc.forward(x, te);
    Tensor y = gen.forward(x, s, tg);
    Tensor gy(y.shape());
    gy.fill(1.0f / y.size());
    Tensor gs({2, cfg.style_dim});
    gen.backward(gy, tg, gs);
    enc.backward(gs, te);
    CHECK(grad_norm(pe) > 0.0);
  }
  {  // mapper-sourced style
    Tensor z = random_tensor({2, cfg.latent_dim}, dr);
    Tape tf, tg;
    Tensor s = map.forward(z, tf);
    Tensor y = gen.forward(x, s, tg);
    Tensor gy(y.shape());
    gy.fill(1.0f / y.size());
    Tensor gs({2, cfg.style_dim});
    gen.backward(gy, tg, gs);
    map.backward(gs, tf);
    CHECK(grad_norm(pf) > 0.0);
  }
}

TEST_CASE("R1 penalty value matches a finite-difference input-gradient oracle") {
  NetworkConfig cfg = tiny_cfg();
  Rng rng(49);
  Discriminator disc(cfg, rng);
  Rng dr(3);
  Tensor x = random_tensor({2, cfg.channels, cfg.img_size, cfg.img_size}, dr, 0.3f);
  const float gamma = 1.0f;
  double value;
  {
    ParamGradScope off;  // value only
    value = disc.r1_penalty(x, gamma);
  }
  // oracle: gamma/(2B) sum_i ||d rf_i / d x_i||^2 by central differences
  auto rf_sum = [&](const Tensor& in) {
    Tape t;
    DiscOutput o = disc.forward(in, t);
    double acc = 0.0;
    for (int64_t i = 0; i < o.rf.size(); ++i) acc += o.rf[i];
    return acc;
  };
  double sq = 0.0;
  Tensor xp = x;
  const double h = 1e-2;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float keep = xp[i];
    xp[i] = keep + static_cast<float>(h);
    const double up = rf_sum(xp);
    xp[i] = keep - static_cast<float>(h);
    const double dn = rf_sum(xp);
    xp[i] = keep;
    const double g = (up - dn) / (2.0 * h);
    sq += g * g;
  }
  const double oracle = 0.5 * gamma * sq / x.dim(0);
  CHECK(value == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("parameter archive round-trips to bit-identical forward outputs") {
  NetworkConfig cfg = tiny_cfg();
  Rng rng(51);
  StyleEncoder enc(cfg, rng);
  Rng rng2(52);
  StyleEncoder enc2(cfg, rng2);
  std::vector<Param*> p1, p2;
  enc.collect(p1);
  enc2.collect(p2);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_params(buf, "E", p1);
  load_params(buf, "E", p2);
  Rng dr(4);
  Tensor x = random_tensor({2, cfg.channels, cfg.img_size, cfg.img_size}, dr, 0.5f);
  Tape t1, t2;
  CHECK(max_abs_diff(enc.forward(x, t1), enc2.forward(x, t2)) == 0.0);

  std::stringstream bad(std::ios::in | std::ios::out | std::ios::binary);
  save_params(bad, "E", p1);
  CHECK_THROWS(load_params(bad, "F", p2));
}

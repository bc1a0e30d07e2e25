#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "stylemix/metrics.hpp"
#include "stylemix/perceptual.hpp"
#include "test_util.hpp"

using namespace stylemix;
using testutil::random_tensor;

namespace {

// Echoes each style row into a (K, D, 1, 1) image batch; turns the perceptual
// distances into plain style-space norms under the identity embedder.
Tensor echo_styles(const Tensor& /*src*/, const Tensor& styles) {
  const int k = styles.dim(0), d = styles.dim(1);
  Tensor out({k, d, 1, 1});
  std::copy(styles.data(), styles.data() + styles.size(), out.data());
  return out;
}

Tensor one_pixel(float v) { return Tensor({1, 1, 1, 1}, {v}); }

}  // namespace

// ----------------------------------------------------------------- distances

TEST_CASE("identity-embedder distances against direct pixel formulas") {
  IdentityEmbedder id;
  Rng rng(3);
  Tensor a = random_tensor({1, 3, 4, 5}, rng);
  Tensor b = random_tensor({1, 3, 4, 5}, rng);
  const int h = 4, w = 5, c = 3;
  double sq = 0.0, mt = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double pos = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(a.at4(0, ch, y, x)) - b.at4(0, ch, y, x);
        pos += d * d;
      }
      sq += pos;
      mt += std::sqrt(pos);
    }
  sq /= h * w;
  mt /= h * w;
  CHECK(distance_squared_form(a, b, id) == doctest::Approx(sq).epsilon(1e-6));
  CHECK(distance_metric_form(a, b, id) == doctest::Approx(mt).epsilon(1e-6));

  auto batch_sq = distance_squared_form_batch(a, b, id);
  REQUIRE(batch_sq.size() == 1);
  CHECK(batch_sq[0] == doctest::Approx(sq).epsilon(1e-6));
}

TEST_CASE("squared form violates the triangle inequality on collinear pixels") {
  IdentityEmbedder id;
  Tensor x = one_pixel(0.0f), y = one_pixel(2.0f), z = one_pixel(4.0f);
  const double dxz = distance_squared_form(x, z, id);
  const double dxy = distance_squared_form(x, y, id);
  const double dyz = distance_squared_form(y, z, id);
  CHECK(dxz == doctest::Approx(16.0));
  CHECK(dxy + dyz == doctest::Approx(8.0));
  CHECK(dxz > dxy + dyz);  // the squared form is not a metric

  // the metric form keeps the inequality on the same points
  CHECK(distance_metric_form(x, z, id) <=
        distance_metric_form(x, y, id) + distance_metric_form(y, z, id) + 1e-12);
}

TEST_CASE("metric-form distance satisfies the pseudometric axioms") {
  Rng rng(7);
  PerceptualEmbedder phi(3, 16, 2, rng);
  Rng dr(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor({1, 3, 16, 16}, dr, 0.5f);
    Tensor y = random_tensor({1, 3, 16, 16}, dr, 0.5f);
    Tensor z = random_tensor({1, 3, 16, 16}, dr, 0.5f);
    const double dxy = distance_metric_form(x, y, phi);
    const double dyx = distance_metric_form(y, x, phi);
    const double dxz = distance_metric_form(x, z, phi);
    const double dyz = distance_metric_form(y, z, phi);
    CHECK(dxy >= 0.0);
    CHECK(dxy == doctest::Approx(dyx).epsilon(1e-9));
    CHECK(dxz <= dxy + dyz + 1e-6);  // triangle inequality
  }
  Tensor x = random_tensor({1, 3, 16, 16}, dr, 0.5f);
  CHECK(distance_metric_form(x, x, phi) == 0.0);
}

TEST_CASE("layer weight plumbing and validation") {
  Rng rng(13);
  PerceptualEmbedder phi(3, 16, 2, rng);
  REQUIRE(phi.num_layers() == 4);
  CHECK_THROWS_AS(phi.set_layer_weights({1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(phi.set_layer_weights({1.0, 1.0, -0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(phi.set_layer_weights({0.0, 0.0, 0.0, 0.0}), std::invalid_argument);
  phi.set_layer_weights({2.0, 0.0, 0.0, 0.0});
  CHECK(phi.layer_weights()[0] == 2.0);

  const std::string path = "test_layer_weights.txt";
  {
    std::ofstream out(path);
    out << "0.5\n0.25\n0.25\n1.0\n";
  }
  auto w = load_layer_weights(path, 4);
  REQUIRE(w.size() == 4);
  CHECK(w[1] == 0.25);
  CHECK_THROWS(load_layer_weights(path, 3));
  {
    std::ofstream out(path);
    out << "0.5\n-1.0\n";
  }
  CHECK_THROWS(load_layer_weights(path, 2));
  CHECK_THROWS(load_layer_weights("does_not_exist.txt", 4));
  std::remove(path.c_str());
}

TEST_CASE("fingerprint tracks parameters and layer weights") {
  Rng r1(17), r2(17), r3(99);
  PerceptualEmbedder a(3, 16, 2, r1), b(3, 16, 2, r2), c(3, 16, 2, r3);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  b.set_layer_weights({1.0, 0.0, 0.0, 0.0});
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("domain classifier training reduces loss on separable data") {
  Rng rng(19);
  PerceptualEmbedder phi(1, 16, 2, rng);
  const int n = 32;
  Tensor images({n, 1, 16, 16});
  std::vector<int> labels(n);
  Rng dr(23);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = i % 2;
    const float base = (i % 2 == 0) ? -0.6f : 0.6f;
    for (int j = 0; j < 256; ++j)
      images[i * 256 + j] = base + 0.1f * static_cast<float>(dr.normal());
  }
  Rng tr(29);
  const double first = train_domain_classifier(phi, images, labels, 1, 8, 1e-3f, tr);
  Rng tr2(29);
  const double last = train_domain_classifier(phi, images, labels, 120, 8, 1e-3f, tr2);
  CHECK(last < first);
  CHECK(last < 0.2);

  Tensor feats = phi.pooled_features(images);
  CHECK(feats.shape() == std::vector<int>{n, 64});
}

// ------------------------------------------------------------------- metrics

TEST_CASE("gaussian_stats against direct mean and covariance sums") {
  Tensor f({4, 2}, {1.0f, 2.0f, 3.0f, 5.0f, -1.0f, 0.0f, 2.0f, 4.0f});
  GaussianStats s = gaussian_stats(f);
  const double m0 = (1.0 + 3.0 - 1.0 + 2.0) / 4.0;
  const double m1 = (2.0 + 5.0 + 0.0 + 4.0) / 4.0;
  CHECK(s.mean(0) == doctest::Approx(m0).epsilon(1e-12));
  CHECK(s.mean(1) == doctest::Approx(m1).epsilon(1e-12));
  double c00 = 0.0, c01 = 0.0, c11 = 0.0;
  const double xs[4] = {1.0, 3.0, -1.0, 2.0};
  const double ys[4] = {2.0, 5.0, 0.0, 4.0};
  for (int i = 0; i < 4; ++i) {
    c00 += (xs[i] - m0) * (xs[i] - m0);
    c01 += (xs[i] - m0) * (ys[i] - m1);
    c11 += (ys[i] - m1) * (ys[i] - m1);
  }
  CHECK(s.cov(0, 0) == doctest::Approx(c00 / 3.0).epsilon(1e-12));
  CHECK(s.cov(0, 1) == doctest::Approx(c01 / 3.0).epsilon(1e-12));
  CHECK(s.cov(1, 1) == doctest::Approx(c11 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_stats(Tensor({1, 3})), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_stats(Tensor({6})), std::invalid_argument);
}

TEST_CASE("frechet_distance closed forms") {
  GaussianStats a, b;
  a.mean = Eigen::VectorXd::Zero(2);
  a.cov = Eigen::MatrixXd::Identity(2, 2);
  b = a;
  CHECK(frechet_distance(a, b) == doctest::Approx(0.0).epsilon(1e-9));

  // pure mean shift (3, 4) with shared covariance: distance 25
  b.mean << 3.0, 4.0;
  CHECK(frechet_distance(a, b) == doctest::Approx(25.0).epsilon(1e-3));

  // 1-d zero-mean case: (sigma1 - sigma2)^2
  GaussianStats u, v;
  u.mean = Eigen::VectorXd::Zero(1);
  v.mean = Eigen::VectorXd::Zero(1);
  u.cov = Eigen::MatrixXd::Constant(1, 1, 4.0);   // sigma 2
  v.cov = Eigen::MatrixXd::Constant(1, 1, 9.0);   // sigma 3
  CHECK(frechet_distance(u, v) == doctest::Approx(1.0).epsilon(1e-6));

  GaussianStats bad = a;
  bad.cov(0, 0) = -1.0;
  CHECK_THROWS_AS(frechet_distance(a, bad), std::runtime_error);
  GaussianStats wrong = a;
  wrong.mean = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(frechet_distance(a, wrong), std::invalid_argument);
}

TEST_CASE("frechet_distance agrees with sampled identical distributions") {
  Rng rng(31);
  Tensor f1({256, 3}), f2({256, 3});
  rng.fill_normal(f1);
  rng.fill_normal(f2);
  const double d = frechet_distance(gaussian_stats(f1), gaussian_stats(f2));
  CHECK(d >= 0.0);
  CHECK(d < 0.2);  // same distribution, finite-sample gap only
}

TEST_CASE("p2_score is zero when image distances mirror style distances") {
  IdentityEmbedder id;
  std::vector<Tensor> sources = {Tensor({1, 4, 1, 1})};
  auto triplets = [](Rng& r) {
    Tensor t({3, 4});
    r.fill_normal(t);
    return t;
  };
  P2Config cfg;
  cfg.num_triplets = 300;
  cfg.seed = 5;
  const double score = p2_score(echo_styles, triplets, sources, id, cfg);
  CHECK(score == doctest::Approx(0.0).epsilon(1e-5));

  // scaling the image response by a constant leaves the ratios intact
  auto scaled = [](const Tensor& src, const Tensor& styles) {
    Tensor out = echo_styles(src, styles);
    out *= 2.5f;
    return out;
  };
  CHECK(p2_score(scaled, triplets, sources, id, cfg) == doctest::Approx(0.0).epsilon(1e-5));

  // a quadratic response distorts proportionality and scores strictly worse
  auto quad = [](const Tensor& src, const Tensor& styles) {
    Tensor out = echo_styles(src, styles);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] * std::abs(out[i]);
    return out;
  };
  CHECK(p2_score(quad, triplets, sources, id, cfg) > 0.05);

  CHECK_THROWS_AS(p2_score(echo_styles, triplets, {}, id, cfg), std::invalid_argument);
  P2Config bad = cfg;
  bad.num_triplets = 0;
  CHECK_THROWS_AS(p2_score(echo_styles, triplets, sources, id, bad), std::invalid_argument);
}

TEST_CASE("p2_equal_step on linear and nonlinear frame sequences") {
  IdentityEmbedder id;
  // frames linear in the index: every adjacent gap has the same length
  std::vector<std::vector<Tensor>> linear(2);
  Rng rng(37);
  for (auto& seq : linear) {
    Tensor a = random_tensor({1, 2, 3, 3}, rng);
    Tensor dir = random_tensor({1, 2, 3, 3}, rng, 0.3f);
    for (int t = 0; t < 7; ++t) {
      Tensor f = a;
      for (int64_t i = 0; i < f.size(); ++i) f[i] += t * dir[i];
      seq.push_back(std::move(f));
    }
  }
  Rng r1(41);
  CHECK(p2_equal_step(linear, id, 1e-8, 400, r1) == doctest::Approx(0.0).epsilon(1e-4));

  // quadratically accelerating frames break the unit ratio
  std::vector<std::vector<Tensor>> accel(1);
  Tensor base = random_tensor({1, 2, 3, 3}, rng);
  Tensor dir = random_tensor({1, 2, 3, 3}, rng, 0.3f);
  for (int t = 0; t < 7; ++t) {
    Tensor f = base;
    for (int64_t i = 0; i < f.size(); ++i) f[i] += static_cast<float>(t) * t * dir[i];
    accel[0].push_back(std::move(f));
  }
  Rng r2(43);
  CHECK(p2_equal_step(accel, id, 1e-8, 400, r2) > 0.1);

  Rng r3(47);
  CHECK_THROWS_AS(p2_equal_step({}, id, 1e-8, 10, r3), std::invalid_argument);
  std::vector<std::vector<Tensor>> tiny(1);
  tiny[0] = {base, base};
  CHECK_THROWS_AS(p2_equal_step(tiny, id, 1e-8, 10, r3), std::invalid_argument);
}

TEST_CASE("ppl_score closed forms under the identity embedder") {
  IdentityEmbedder id;
  std::vector<Tensor> sources = {Tensor({1, 3, 1, 1})};

  // a style-independent generator has zero path length
  auto constant = [](const Tensor&, const Tensor& styles) {
    Tensor out({styles.dim(0), 3, 1, 1});
    out.fill(0.25f);
    return out;
  };
  auto pairs = [](Rng& r) {
    Tensor p({2, 3});
    r.fill_normal(p);
    return p;
  };
  Rng r1(53);
  CHECK(ppl_score(constant, pairs, sources, id, 1e-2, 50, r1) == 0.0);

  // echoing a fixed pair: each step moves eps*(b-a), so ppl = ||b-a||^2
  Tensor fixed({2, 3}, {0.0f, 0.0f, 0.0f, 1.0f, -2.0f, 0.5f});
  auto fixed_pairs = [&](Rng&) { return fixed; };
  Rng r2(59);
  const double want = 1.0 + 4.0 + 0.25;
  CHECK(ppl_score(echo_styles, fixed_pairs, sources, id, 1e-2, 40, r2) ==
        doctest::Approx(want).epsilon(1e-3));

  Rng r3(61);
  CHECK_THROWS_AS(ppl_score(echo_styles, fixed_pairs, sources, id, 0.0, 10, r3),
                  std::invalid_argument);
  CHECK_THROWS_AS(ppl_score(echo_styles, fixed_pairs, sources, id, 1.5, 10, r3),
                  std::invalid_argument);
  CHECK_THROWS_AS(ppl_score(echo_styles, fixed_pairs, {}, id, 1e-2, 10, r3),
                  std::invalid_argument);
}

TEST_CASE("lpips_diversity against a hand-computed pairwise mean") {
  IdentityEmbedder id;
  std::vector<Tensor> sources = {Tensor({1, 2, 1, 1}), Tensor({1, 2, 1, 1})};
  // deterministic codes per domain, independent of the rng draw
  auto styles = [](int domain, int count, Rng&) {
    Tensor out({count, 2});
    for (int i = 0; i < count; ++i) {
      out.at2(i, 0) = static_cast<float>(i + domain);
      out.at2(i, 1) = static_cast<float>(2 * i - domain);
    }
    return out;
  };
  const int num_domains = 2, k = 3;
  double want = 0.0;
  int64_t pairs = 0;
  Rng dummy(0);
  for (int s = 0; s < 2; ++s)
    for (int dom = 0; dom < num_domains; ++dom) {
      Tensor codes = styles(dom, k, dummy);
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
          double d = 0.0;
          for (int ch = 0; ch < 2; ++ch) {
            const double dv = static_cast<double>(codes.at2(i, ch)) - codes.at2(j, ch);
            d += dv * dv;
          }
          want += d;
          ++pairs;
        }
    }
  want /= static_cast<double>(pairs);
  Rng rng(67);
  CHECK(lpips_diversity(echo_styles, sources, num_domains, k, styles, id, rng) ==
        doctest::Approx(want).epsilon(1e-6));

  Rng r2(71);
  CHECK_THROWS_AS(lpips_diversity(echo_styles, {}, 2, 3, styles, id, r2), std::invalid_argument);
  CHECK_THROWS_AS(lpips_diversity(echo_styles, sources, 2, 1, styles, id, r2),
                  std::invalid_argument);
}

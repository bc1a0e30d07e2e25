#include "stylemix/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace stylemix {

namespace {

Tensor image_slice(const Tensor& batch, int i) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const int64_t sz = static_cast<int64_t>(c) * h * w;
  Tensor out({1, c, h, w});
  std::copy(batch.data() + i * sz, batch.data() + (i + 1) * sz, out.data());
  return out;
}

double style_l2(const Tensor& styles, int i, int j) {
  const int d = styles.dim(1);
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double dv = static_cast<double>(styles.at2(i, k)) - styles.at2(j, k);
    acc += dv * dv;
  }
  return std::sqrt(acc);
}

}  // namespace

double p2_score(const GenerateFn& gen, const TripletSampler& triplets,
                const std::vector<Tensor>& sources, const Embedder& phi, const P2Config& cfg) {
  if (cfg.num_triplets < 1) throw std::invalid_argument("p2_score: num_triplets must be positive");
  if (sources.empty()) throw std::invalid_argument("p2_score: no source images");
  Rng rng(cfg.seed);
  double acc = 0.0;
  int skipped = 0;
  for (int t = 0; t < cfg.num_triplets; ++t) {
    const Tensor& src = sources[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(sources.size()) - 1))];
    Tensor styles = triplets(rng);
    if (styles.ndim() != 2 || styles.dim(0) != 3)
      throw std::invalid_argument("p2_score: sampler must return a (3, D) triplet");
    Tensor imgs = gen(src, styles);
    const double ds1 = style_l2(styles, 0, 1);
    const double ds2 = style_l2(styles, 1, 2);
    const double dp1 = distance_metric_form(image_slice(imgs, 0), image_slice(imgs, 1), phi);
    const double dp2 = distance_metric_form(image_slice(imgs, 1), image_slice(imgs, 2), phi);
    const double term =
        std::abs(dp1 / (dp2 + cfg.eps) - ds1 / (ds2 + cfg.eps));
    if (!std::isfinite(term)) {
      ++skipped;
      continue;
    }
    acc += term;
  }
  if (skipped > cfg.num_triplets / 100)
    throw std::runtime_error("p2_score: more than 1% of triplets were non-finite");
  return acc / (cfg.num_triplets - skipped);
}

double p2_equal_step(const std::vector<std::vector<Tensor>>& image_sequences,
                     const Embedder& phi, double eps, int num_draws, Rng& rng) {
  if (image_sequences.empty()) throw std::invalid_argument("p2_equal_step: no sequences");
  for (const auto& seq : image_sequences)
    if (seq.size() < 3)
      throw std::invalid_argument("p2_equal_step: sequences need at least 3 frames");
  if (num_draws < 1) throw std::invalid_argument("p2_equal_step: num_draws must be positive");
  double acc = 0.0;
  int skipped = 0;
  for (int n = 0; n < num_draws; ++n) {
    const auto& seq = image_sequences[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(image_sequences.size()) - 1))];
    const int t = static_cast<int>(seq.size());
    const int kmax = (t - 1) / 2;
    const int k = rng.uniform_int(1, kmax);
    const int i = rng.uniform_int(0, t - 1 - 2 * k);
    const double dp1 = distance_metric_form(seq[static_cast<size_t>(i)],
                                            seq[static_cast<size_t>(i + k)], phi);
    const double dp2 = distance_metric_form(seq[static_cast<size_t>(i + k)],
                                            seq[static_cast<size_t>(i + 2 * k)], phi);
    const double term = std::abs(dp1 / (dp2 + eps) - 1.0);
    if (!std::isfinite(term)) {
      ++skipped;
      continue;
    }
    acc += term;
  }
  if (skipped > num_draws / 100)
    throw std::runtime_error("p2_equal_step: more than 1% of draws were non-finite");
  return acc / (num_draws - skipped);
}

double ppl_score(const GenerateFn& gen, const StylePairSampler& pairs,
                 const std::vector<Tensor>& sources, const Embedder& phi, double epsilon_step,
                 int num_samples, Rng& rng) {
  if (epsilon_step <= 0.0 || epsilon_step >= 1.0)
    throw std::invalid_argument("ppl_score: epsilon_step must lie in (0, 1)");
  if (sources.empty()) throw std::invalid_argument("ppl_score: no source images");
  if (num_samples < 1) throw std::invalid_argument("ppl_score: num_samples must be positive");
  double acc = 0.0;
  for (int n = 0; n < num_samples; ++n) {
    const Tensor& src = sources[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(sources.size()) - 1))];
    Tensor pair = pairs(rng);
    if (pair.ndim() != 2 || pair.dim(0) != 2)
      throw std::invalid_argument("ppl_score: sampler must return a (2, D) pair");
    const int d = pair.dim(1);
    const double t = rng.uniform(0.0, 1.0 - epsilon_step);
    Tensor endpoints({2, d});
    for (int j = 0; j < d; ++j) {
      const float a = pair.at2(0, j), b = pair.at2(1, j);
      endpoints.at2(0, j) = static_cast<float>((1.0 - t) * a + t * b);
      endpoints.at2(1, j) =
          static_cast<float>((1.0 - (t + epsilon_step)) * a + (t + epsilon_step) * b);
    }
    Tensor imgs = gen(src, endpoints);
    acc += distance_squared_form(image_slice(imgs, 0), image_slice(imgs, 1), phi);
  }
  return acc / (num_samples * epsilon_step * epsilon_step);
}

GaussianStats gaussian_stats(const Tensor& features) {
  if (features.ndim() != 2) throw std::invalid_argument("gaussian_stats: (N, D) features expected");
  const int n = features.dim(0), d = features.dim(1);
  if (n < 2) throw std::invalid_argument("gaussian_stats: need at least 2 samples");
  GaussianStats out;
  out.mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = features.at2(i, j);
  out.mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  out.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return out;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size())
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  // tr sqrt(S1 S2) = tr sqrt( sqrt(S1) S2 sqrt(S1) ), a symmetric PSD matrix
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(0.5 * (a.cov + a.cov.transpose()));
  if (es1.info() != Eigen::Success)
    throw std::runtime_error("frechet_distance: eigendecomposition failed");
  Eigen::VectorXd ev1 = es1.eigenvalues();
  for (int i = 0; i < ev1.size(); ++i) {
    if (ev1(i) < -1e-6) throw std::runtime_error("frechet_distance: covariance not PSD");
    ev1(i) = std::sqrt(std::max(ev1(i), 0.0));
  }
  const Eigen::MatrixXd sqrt1 =
      es1.eigenvectors() * ev1.asDiagonal() * es1.eigenvectors().transpose();
  Eigen::MatrixXd prod = sqrt1 * b.cov * sqrt1;
  prod = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(prod);
  if (es2.info() != Eigen::Success)
    throw std::runtime_error("frechet_distance: eigendecomposition failed");
  double trace_sqrt = 0.0;
  for (int i = 0; i < es2.eigenvalues().size(); ++i) {
    const double ev = es2.eigenvalues()(i);
    if (ev < -1e-6) throw std::runtime_error("frechet_distance: product matrix not PSD");
    trace_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  return mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
}

double lpips_diversity(const GenerateFn& gen, const std::vector<Tensor>& sources,
                       int num_domains, int styles_per_domain,
                       const DomainStyleSampler& styles, const Embedder& phi, Rng& rng) {
  if (sources.empty()) throw std::invalid_argument("lpips_diversity: no source images");
  if (num_domains < 1 || styles_per_domain < 2)
    throw std::invalid_argument("lpips_diversity: need >=1 domain and >=2 styles per domain");
  double acc = 0.0;
  int64_t pairs = 0;
  for (const Tensor& src : sources)
    for (int dom = 0; dom < num_domains; ++dom) {
      Tensor codes = styles(dom, styles_per_domain, rng);
      if (codes.ndim() != 2 || codes.dim(0) != styles_per_domain)
        throw std::invalid_argument("lpips_diversity: sampler must return (K, D) codes");
      Tensor imgs = gen(src, codes);
      for (int i = 0; i < styles_per_domain; ++i)
        for (int j = i + 1; j < styles_per_domain; ++j) {
          acc += distance_squared_form(image_slice(imgs, i), image_slice(imgs, j), phi);
          ++pairs;
        }
    }
  return acc / static_cast<double>(pairs);
}

}  // namespace stylemix

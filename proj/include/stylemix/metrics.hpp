#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "stylemix/perceptual.hpp"
#include "stylemix/rng.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

// (source image (1,C,H,W), style batch (K,D)) -> generated batch (K,C,H,W).
using GenerateFn = std::function<Tensor(const Tensor&, const Tensor&)>;
// Returns a (3, D) style triplet per draw.
using TripletSampler = std::function<Tensor(Rng&)>;
// Returns a (K, D) batch of style codes for one target domain.
using DomainStyleSampler = std::function<Tensor(int domain, int count, Rng&)>;
// Returns a (2, D) style pair per draw.
using StylePairSampler = std::function<Tensor(Rng&)>;

struct P2Config {
  int num_triplets = 1000;
  double eps = 1e-8;
  uint64_t seed = 0;
};

// Perceptual proportionality: mean |dp1/(dp2+eps) - ds1/(ds2+eps)| over style
// triplets, with metric-form perceptual distances. Lower is smoother.
double p2_score(const GenerateFn& gen, const TripletSampler& triplets,
                const std::vector<Tensor>& sources, const Embedder& phi, const P2Config& cfg);

// Equal-step variant for models without an explicit style space: frames come
// from equally spaced interpolations, so the style ratio is identically 1.
double p2_equal_step(const std::vector<std::vector<Tensor>>& image_sequences,
                     const Embedder& phi, double eps, int num_draws, Rng& rng);

// Perceptual path length with the squared-form distance; divided by eps^2 and
// reported together with the eps used.
double ppl_score(const GenerateFn& gen, const StylePairSampler& pairs,
                 const std::vector<Tensor>& sources, const Embedder& phi, double epsilon_step,
                 int num_samples, Rng& rng);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Sample mean and unbiased covariance of row-vector features (N, D), N >= 2.
GaussianStats gaussian_stats(const Tensor& features);

// ||mu1-mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Mean pairwise squared-form distance over styles_per_domain translations of
// each source into each target domain.
double lpips_diversity(const GenerateFn& gen, const std::vector<Tensor>& sources,
                       int num_domains, int styles_per_domain,
                       const DomainStyleSampler& styles, const Embedder& phi, Rng& rng);

}  // namespace stylemix

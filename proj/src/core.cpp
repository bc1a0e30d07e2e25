#include "stylemix/core.hpp"

#include <stdexcept>

namespace stylemix {

StyleCode mix(const StyleCode& s1, const StyleCode& s2, double alpha) {
  if (s1.size() != s2.size()) throw std::invalid_argument("mix: dimension mismatch");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("mix: alpha outside [0,1]");
  StyleCode out(s1.size());
  for (size_t i = 0; i < s1.size(); ++i)
    out[i] = static_cast<float>((1.0 - alpha) * s1[i] + alpha * s2[i]);
  return out;
}

Tensor mix(const Tensor& s1, const Tensor& s2, double alpha) {
  check_same_shape(s1, s2, "mix");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("mix: alpha outside [0,1]");
  Tensor out = s1;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>((1.0 - alpha) * s1[i] + alpha * s2[i]);
  return out;
}

Tensor mix_rows(const Tensor& s1, const Tensor& s2, const std::vector<double>& alphas) {
  check_same_shape(s1, s2, "mix_rows");
  if (static_cast<int>(alphas.size()) != s1.dim(0))
    throw std::invalid_argument("mix_rows: one alpha per row required");
  Tensor out = s1;
  const int d = s1.dim(1);
  for (int i = 0; i < s1.dim(0); ++i) {
    const double a = alphas[i];
    if (a < 0.0 || a > 1.0) throw std::invalid_argument("mix_rows: alpha outside [0,1]");
    for (int j = 0; j < d; ++j)
      out.at2(i, j) = static_cast<float>((1.0 - a) * s1.at2(i, j) + a * s2.at2(i, j));
  }
  return out;
}

double sample_alpha(double b, Rng& rng) { return rng.beta_symmetric(b); }

std::vector<StyleCode> interpolate_path(const StyleCode& s_start, const StyleCode& s_end,
                                        int t) {
  if (t < 2) throw std::invalid_argument("interpolate_path: need at least 2 points");
  std::vector<StyleCode> path;
  path.reserve(static_cast<size_t>(t));
  for (int i = 0; i < t; ++i)
    path.push_back(mix(s_start, s_end, static_cast<double>(i) / (t - 1)));
  return path;
}

std::pair<Tensor, Tensor> sample_style_pair(int64_t step, const Tensor& x1, const Tensor& x2,
                                            const StyleEncoder& enc, const MappingNetwork& map,
                                            Rng& rng) {
  if (style_source_for_step(step) == StyleSource::FromRealImages) {
    Tape t1, t2;
    return {enc.forward(x1, t1), enc.forward(x2, t2)};
  }
  const int b = x1.dim(0);
  Tensor z1({b, map.latent_dim()});
  Tensor z2({b, map.latent_dim()});
  rng.fill_normal(z1);
  rng.fill_normal(z2);
  Tape t1, t2;
  return {map.forward(z1, t1), map.forward(z2, t2)};
}

}  // namespace stylemix

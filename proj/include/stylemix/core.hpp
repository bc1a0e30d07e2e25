#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stylemix/networks.hpp"
#include "stylemix/rng.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix {

// A single style code (row vectors batched as (B, D_s) tensors elsewhere).
using StyleCode = std::vector<float>;

struct MixDraw {
  StyleCode s1;
  StyleCode s2;
  double alpha = 0.0;
  double beta_shape = 2.0;
};

enum class StyleSource { FromRealImages, FromNoise };

// Deterministic step-parity alternation between encoder-derived and
// mapper-derived style codes.
inline StyleSource style_source_for_step(int64_t step) {
  return (step % 2 == 0) ? StyleSource::FromRealImages : StyleSource::FromNoise;
}

// (1 - alpha) * s1 + alpha * s2, elementwise.
StyleCode mix(const StyleCode& s1, const StyleCode& s2, double alpha);
Tensor mix(const Tensor& s1, const Tensor& s2, double alpha);        // (B, D) batches
Tensor mix_rows(const Tensor& s1, const Tensor& s2, const std::vector<double>& alphas);

// alpha ~ Beta(b, b).
double sample_alpha(double b, Rng& rng);

// T equally spaced codes from s_start to s_end, endpoints included.
std::vector<StyleCode> interpolate_path(const StyleCode& s_start, const StyleCode& s_end, int t);

// Even steps: codes encoded from the two image batches. Odd steps: codes
// mapped from fresh standard-normal noise. Forward passes are untaped (no
// gradients); the training loop runs its own taped passes.
std::pair<Tensor, Tensor> sample_style_pair(int64_t step, const Tensor& x1, const Tensor& x2,
                                            const StyleEncoder& enc, const MappingNetwork& map,
                                            Rng& rng);

}  // namespace stylemix

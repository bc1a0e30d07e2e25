// Compares the GEMM-backed parallel convolution kernels against the serial
// loop-nest references: wall time plus max elementwise deviation.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "stylemix/kernels.hpp"
#include "stylemix/rng.hpp"

using namespace stylemix;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double mx = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(static_cast<double>(a[i]) - b[i]));
  return mx;
}

void bench_case(int n, int cin, int co, int hw, int k, int stride, int pad, int reps) {
  Rng rng(42);
  Tensor x({n, cin, hw, hw});
  Tensor w({co, cin, k, k});
  Tensor b({co});
  rng.fill_normal(x);
  rng.fill_normal(w, 0.1f);
  rng.fill_normal(b, 0.1f);

  Tensor y_par = kern::conv2d_forward(x, w, &b, stride, pad);
  Tensor y_ser = kern::conv2d_forward_serial(x, w, &b, stride, pad);
  const double fwd_err = max_abs_diff(y_par, y_ser);

  Tensor gy = y_par;
  Tensor gx_par = kern::conv2d_backward_input(gy, w, hw, hw, stride, pad);
  Tensor gx_ser = kern::conv2d_backward_input_serial(gy, w, hw, hw, stride, pad);
  const double bwd_err = max_abs_diff(gx_par, gx_ser);

  Tensor gw_par(w.shape()), gw_ser(w.shape()), gb_par(b.shape()), gb_ser(b.shape());
  kern::conv2d_backward_params(x, gy, gw_par, &gb_par, stride, pad);
  kern::conv2d_backward_params_serial(x, gy, gw_ser, &gb_ser, stride, pad);
  const double prm_err = max_abs_diff(gw_par, gw_ser);

  const double t_fwd_par =
      time_ms([&] { kern::conv2d_forward(x, w, &b, stride, pad); }, reps);
  const double t_fwd_ser =
      time_ms([&] { kern::conv2d_forward_serial(x, w, &b, stride, pad); }, reps);
  const double t_bwd_par =
      time_ms([&] { kern::conv2d_backward_input(gy, w, hw, hw, stride, pad); }, reps);
  const double t_bwd_ser =
      time_ms([&] { kern::conv2d_backward_input_serial(gy, w, hw, hw, stride, pad); }, reps);

  std::printf("conv N=%d %dx%dx%d -> %d k=%d s=%d p=%d\n", n, cin, hw, hw, co, k, stride, pad);
  std::printf("  forward   %8.2f ms parallel  %8.2f ms serial  (x%.1f)  max|diff|=%.2e\n",
              t_fwd_par, t_fwd_ser, t_fwd_ser / t_fwd_par, fwd_err);
  std::printf("  bwd input %8.2f ms parallel  %8.2f ms serial  (x%.1f)  max|diff|=%.2e\n",
              t_bwd_par, t_bwd_ser, t_bwd_ser / t_bwd_par, bwd_err);
  std::printf("  bwd params max|diff|=%.2e\n", prm_err);
}

}  // namespace

int main() {
  bench_case(8, 32, 32, 32, 3, 1, 1, 3);
  bench_case(16, 64, 64, 16, 3, 1, 1, 3);
  bench_case(16, 64, 128, 8, 3, 2, 1, 5);
  return 0;
}

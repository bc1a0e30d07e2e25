#pragma once

#include "stylemix/tensor.hpp"

// Low-level data-parallel kernels. The primary entry points use OpenMP over
// the batch dimension plus BLAS GEMM inner products; the *_serial variants
// are straight loop-nest references kept for testing and benchmarking.
namespace stylemix::kern {

// x: (N,Cin,H,W), w: (Co,Cin,kh,kw), b: (Co) or null. Zero padding.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad);
Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w, int in_h, int in_w, int stride,
                             int pad);
// Accumulates into gw (and gb when non-null).
void conv2d_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor* gb,
                            int stride, int pad);

Tensor conv2d_forward_serial(const Tensor& x, const Tensor& w, const Tensor* b, int stride,
                             int pad);
Tensor conv2d_backward_input_serial(const Tensor& gy, const Tensor& w, int in_h, int in_w,
                                    int stride, int pad);
void conv2d_backward_params_serial(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor* gb,
                                   int stride, int pad);

// 2x2 average pooling, stride 2 (even spatial dims required).
Tensor avgpool2_forward(const Tensor& x);
Tensor avgpool2_backward(const Tensor& gy);

// Nearest-neighbour 2x upsampling.
Tensor upsample2_forward(const Tensor& x);
Tensor upsample2_backward(const Tensor& gy);

// out(M,N) = a(M,K) * b(K,N), optionally transposing either input.
void matmul(const float* a, const float* b, float* out, int m, int n, int k, bool trans_a,
            bool trans_b, float beta);

}  // namespace stylemix::kern

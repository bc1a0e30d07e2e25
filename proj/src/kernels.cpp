#include "stylemix/kernels.hpp"

#include <cblas.h>

#include <stdexcept>
#include <vector>

namespace stylemix::kern {

namespace {

int out_extent(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void check_conv_args(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw std::invalid_argument("conv2d: expects 4-d input and weight");
  if (x.dim(1) != w.dim(1)) throw std::invalid_argument("conv2d: channel mismatch");
}

// cols has layout (Cin*kh*kw, Ho*Wo) for one batch item.
void im2col(const float* x, int cin, int h, int w, int kh, int kw, int stride, int pad,
            float* cols) {
  const int ho = out_extent(h, kh, stride, pad);
  const int wo = out_extent(w, kw, stride, pad);
  for (int c = 0; c < cin; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* row = cols + ((static_cast<size_t>(c) * kh + ki) * kw + kj) *
                                static_cast<size_t>(ho) * wo;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) {
            for (int oj = 0; oj < wo; ++oj) row[oi * wo + oj] = 0.0f;
            continue;
          }
          const float* src = x + (static_cast<size_t>(c) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            row[oi * wo + oj] = (jj >= 0 && jj < w) ? src[jj] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* cols, int cin, int h, int w, int kh, int kw, int stride, int pad,
            float* x) {
  const int ho = out_extent(h, kh, stride, pad);
  const int wo = out_extent(w, kw, stride, pad);
  for (int c = 0; c < cin; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* row = cols + ((static_cast<size_t>(c) * kh + ki) * kw + kj) *
                                      static_cast<size_t>(ho) * wo;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          float* dst = x + (static_cast<size_t>(c) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < w) dst[jj] += row[oi * wo + oj];
          }
        }
      }
    }
  }
}

}  // namespace

void matmul(const float* a, const float* b, float* out, int m, int n, int k, bool trans_a,
            bool trans_b, float beta) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a,
              trans_a ? m : k, b, trans_b ? k : n, beta, out, n);
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
  check_conv_args(x, w);
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ho = out_extent(h, kh, stride, pad), wo = out_extent(wd, kw, stride, pad);
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");
  Tensor y({n, co, ho, wo});
  const int kdim = cin * kh * kw, p = ho * wo;
#pragma omp parallel
  {
    std::vector<float> cols(static_cast<size_t>(kdim) * p);
#pragma omp for
    for (int i = 0; i < n; ++i) {
      im2col(x.data() + static_cast<size_t>(i) * cin * h * wd, cin, h, wd, kh, kw, stride, pad,
             cols.data());
      float* yi = y.data() + static_cast<size_t>(i) * co * p;
      matmul(w.data(), cols.data(), yi, co, p, kdim, false, false, 0.0f);
      if (b) {
        for (int c = 0; c < co; ++c) {
          const float bc = (*b)[c];
          for (int j = 0; j < p; ++j) yi[static_cast<size_t>(c) * p + j] += bc;
        }
      }
    }
  }
  return y;
}

Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w, int in_h, int in_w, int stride,
                             int pad) {
  const int n = gy.dim(0), co = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  const int cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor gx({n, cin, in_h, in_w});
  const int kdim = cin * kh * kw, p = ho * wo;
#pragma omp parallel
  {
    std::vector<float> cols(static_cast<size_t>(kdim) * p);
#pragma omp for
    for (int i = 0; i < n; ++i) {
      matmul(w.data(), gy.data() + static_cast<size_t>(i) * co * p, cols.data(), kdim, p, co,
             true, false, 0.0f);
      col2im(cols.data(), cin, in_h, in_w, kh, kw, stride, pad,
             gx.data() + static_cast<size_t>(i) * cin * in_h * in_w);
    }
  }
  return gx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor* gb,
                            int stride, int pad) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  const int kh = gw.dim(2), kw = gw.dim(3);
  const int kdim = cin * kh * kw, p = ho * wo;
  std::vector<float> cols(static_cast<size_t>(kdim) * p);
  // Batch loop stays serial so the accumulation order (and hence the result)
  // does not depend on the thread count.
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<size_t>(i) * cin * h * wd, cin, h, wd, kh, kw, stride, pad,
           cols.data());
    matmul(gy.data() + static_cast<size_t>(i) * co * p, cols.data(), gw.data(), co, kdim, p,
           false, true, 1.0f);
  }
  if (gb) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < co; ++c) {
        double s = 0.0;
        const float* g = gy.data() + (static_cast<size_t>(i) * co + c) * p;
        for (int j = 0; j < p; ++j) s += g[j];
        (*gb)[c] += static_cast<float>(s);
      }
  }
}

Tensor conv2d_forward_serial(const Tensor& x, const Tensor& w, const Tensor* b, int stride,
                             int pad) {
  check_conv_args(x, w);
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ho = out_extent(h, kh, stride, pad), wo = out_extent(wd, kw, stride, pad);
  Tensor y({n, co, ho, wo});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < co; ++c)
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj) {
          double acc = b ? (*b)[c] : 0.0;
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int ii = oi * stride - pad + ki;
                const int jj = oj * stride - pad + kj;
                if (ii >= 0 && ii < h && jj >= 0 && jj < wd)
                  acc += static_cast<double>(x.at4(i, ci, ii, jj)) * w.at4(c, ci, ki, kj);
              }
          y.at4(i, c, oi, oj) = static_cast<float>(acc);
        }
  return y;
}

Tensor conv2d_backward_input_serial(const Tensor& gy, const Tensor& w, int in_h, int in_w,
                                    int stride, int pad) {
  const int n = gy.dim(0), co = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  const int cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor gx({n, cin, in_h, in_w});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < co; ++c)
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj) {
          const float g = gy.at4(i, c, oi, oj);
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int ii = oi * stride - pad + ki;
                const int jj = oj * stride - pad + kj;
                if (ii >= 0 && ii < in_h && jj >= 0 && jj < in_w)
                  gx.at4(i, ci, ii, jj) += g * w.at4(c, ci, ki, kj);
              }
        }
  return gx;
}

void conv2d_backward_params_serial(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor* gb,
                                   int stride, int pad) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  const int kh = gw.dim(2), kw = gw.dim(3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < co; ++c)
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj) {
          const float g = gy.at4(i, c, oi, oj);
          if (gb) (*gb)[c] += g;
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int ii = oi * stride - pad + ki;
                const int jj = oj * stride - pad + kj;
                if (ii >= 0 && ii < h && jj >= 0 && jj < wd)
                  gw.at4(c, ci, ki, kj) += g * x.at4(i, ci, ii, jj);
              }
        }
}

Tensor avgpool2_forward(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw std::invalid_argument("avgpool2: odd spatial extent");
  Tensor y({n, c, h / 2, w / 2});
#pragma omp parallel for
  for (int i = 0; i < n * c; ++i) {
    const float* src = x.data() + static_cast<size_t>(i) * h * w;
    float* dst = y.data() + static_cast<size_t>(i) * (h / 2) * (w / 2);
    for (int oi = 0; oi < h / 2; ++oi)
      for (int oj = 0; oj < w / 2; ++oj)
        dst[oi * (w / 2) + oj] =
            0.25f * (src[(2 * oi) * w + 2 * oj] + src[(2 * oi) * w + 2 * oj + 1] +
                     src[(2 * oi + 1) * w + 2 * oj] + src[(2 * oi + 1) * w + 2 * oj + 1]);
  }
  return y;
}

Tensor avgpool2_backward(const Tensor& gy) {
  const int n = gy.dim(0), c = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  Tensor gx({n, c, ho * 2, wo * 2});
#pragma omp parallel for
  for (int i = 0; i < n * c; ++i) {
    const float* src = gy.data() + static_cast<size_t>(i) * ho * wo;
    float* dst = gx.data() + static_cast<size_t>(i) * ho * wo * 4;
    for (int oi = 0; oi < ho; ++oi)
      for (int oj = 0; oj < wo; ++oj) {
        const float g = 0.25f * src[oi * wo + oj];
        dst[(2 * oi) * (2 * wo) + 2 * oj] = g;
        dst[(2 * oi) * (2 * wo) + 2 * oj + 1] = g;
        dst[(2 * oi + 1) * (2 * wo) + 2 * oj] = g;
        dst[(2 * oi + 1) * (2 * wo) + 2 * oj + 1] = g;
      }
  }
  return gx;
}

Tensor upsample2_forward(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, h * 2, w * 2});
#pragma omp parallel for
  for (int i = 0; i < n * c; ++i) {
    const float* src = x.data() + static_cast<size_t>(i) * h * w;
    float* dst = y.data() + static_cast<size_t>(i) * h * w * 4;
    for (int oi = 0; oi < h; ++oi)
      for (int oj = 0; oj < w; ++oj) {
        const float v = src[oi * w + oj];
        dst[(2 * oi) * (2 * w) + 2 * oj] = v;
        dst[(2 * oi) * (2 * w) + 2 * oj + 1] = v;
        dst[(2 * oi + 1) * (2 * w) + 2 * oj] = v;
        dst[(2 * oi + 1) * (2 * w) + 2 * oj + 1] = v;
      }
  }
  return y;
}

Tensor upsample2_backward(const Tensor& gy) {
  const int n = gy.dim(0), c = gy.dim(1), ho = gy.dim(2), wo = gy.dim(3);
  const int h = ho / 2, w = wo / 2;
  Tensor gx({n, c, h, w});
#pragma omp parallel for
  for (int i = 0; i < n * c; ++i) {
    const float* src = gy.data() + static_cast<size_t>(i) * ho * wo;
    float* dst = gx.data() + static_cast<size_t>(i) * h * w;
    for (int oi = 0; oi < h; ++oi)
      for (int oj = 0; oj < w; ++oj)
        dst[oi * w + oj] = src[(2 * oi) * wo + 2 * oj] + src[(2 * oi) * wo + 2 * oj + 1] +
                           src[(2 * oi + 1) * wo + 2 * oj] +
                           src[(2 * oi + 1) * wo + 2 * oj + 1];
  }
  return gx;
}

}  // namespace stylemix::kern

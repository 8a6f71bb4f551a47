#include "conv_kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "spckd/threads.hpp"

namespace spckd::detail {
namespace {

// Reductions are accumulated into a fixed number of buckets so results do not
// depend on the worker count.
constexpr std::size_t kReduceBuckets = 16;

// One output row (b, h) of the zero-padded 3x3 convolution. The w in [1, W-1)
// interior sees all nine taps and runs branch-free; the two border columns
// check tap validity. Accumulate=true adds on top of the existing output.
template <typename T, bool Accumulate>
void conv_row(const T* in, const T* kernel, const T* bias, T* out,
              std::size_t b, std::size_t h, std::size_t H, std::size_t W,
              std::size_t Ci, std::size_t Co, T* acc) {
  const std::size_t u0 = (h == 0) ? 1 : 0;
  const std::size_t u1 = (h + 1 == H) ? 2 : 3;
  T* orow = out + ((b * H + h) * W) * Co;

  auto emit = [&](std::size_t w) {
    if constexpr (Accumulate) {
      T* dst = orow + w * Co;
      for (std::size_t co = 0; co < Co; ++co) dst[co] += acc[co];
    } else {
      std::memcpy(orow + w * Co, acc, Co * sizeof(T));
    }
  };

  auto borders = [&](std::size_t w) {
    std::memcpy(acc, bias, Co * sizeof(T));
    const std::size_t v0 = (w == 0) ? 1 : 0;
    const std::size_t v1 = (w + 1 == W) ? 2 : 3;
    for (std::size_t u = u0; u < u1; ++u) {
      const T* srow = in + ((b * H + h + u - 1) * W) * Ci;
      for (std::size_t v = v0; v < v1; ++v) {
        const T* src = srow + (w + v - 1) * Ci;
        const T* kk = kernel + (u * 3 + v) * Ci * Co;
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const T s = src[ci];
          const T* krow = kk + ci * Co;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp simd
#endif
          for (std::size_t co = 0; co < Co; ++co) acc[co] += s * krow[co];
        }
      }
    }
    emit(w);
  };

  borders(0);
  constexpr int kBlk = 16;
  if (Co % kBlk == 0) {
    // Interior columns see all three horizontal taps; keep a register block
    // of kBlk output channels live across the whole 3x(3*Ci) reduction.
    for (std::size_t w = 1; w + 1 < W; ++w) {
      T* dst = orow + w * Co;
      for (std::size_t cb = 0; cb < Co; cb += kBlk) {
        T blk[kBlk];
        std::memcpy(blk, bias + cb, kBlk * sizeof(T));
        for (std::size_t u = u0; u < u1; ++u) {
          const T* src = in + (((b * H + h + u - 1) * W) + (w - 1)) * Ci;
          const T* kk = kernel + u * 3 * Ci * Co + cb;
          for (std::size_t c = 0; c < 3 * Ci; ++c) {
            const T s = src[c];
            const T* krow = kk + c * Co;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp simd
#endif
            for (int x = 0; x < kBlk; ++x) blk[x] += s * krow[x];
          }
        }
        if constexpr (Accumulate) {
          for (int x = 0; x < kBlk; ++x) dst[cb + x] += blk[x];
        } else {
          std::memcpy(dst + cb, blk, kBlk * sizeof(T));
        }
      }
    }
  } else {
    for (std::size_t w = 1; w + 1 < W; ++w) {
      std::memcpy(acc, bias, Co * sizeof(T));
      for (std::size_t u = u0; u < u1; ++u) {
        const T* src = in + (((b * H + h + u - 1) * W) + (w - 1)) * Ci;
        const T* kk = kernel + u * 3 * Ci * Co;
        for (std::size_t ci = 0; ci < 3 * Ci; ++ci) {
          const T s = src[ci];
          const T* krow = kk + ci * Co;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp simd
#endif
          for (std::size_t co = 0; co < Co; ++co) acc[co] += s * krow[co];
        }
      }
      emit(w);
    }
  }
  if (W > 1) borders(W - 1);
}

template <typename T, bool Accumulate>
void conv_all(const T* in, const T* kernel, const T* bias, T* out,
              std::size_t B, std::size_t H, std::size_t W, std::size_t Ci,
              std::size_t Co) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(B * H);
  const int nthreads = thread_count();
  (void)nthreads;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp parallel num_threads(nthreads)
#endif
  {
    std::vector<T> acc(Co);
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < rows; ++r)
      conv_row<T, Accumulate>(in, kernel, bias, out, r / H, r % H, H, W, Ci,
                              Co, acc.data());
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const T* in, const T* kernel, const T* bias, T* out,
                    std::size_t B, std::size_t H, std::size_t W,
                    std::size_t Ci, std::size_t Co) {
  conv_all<T, false>(in, kernel, bias, out, B, H, W, Ci, Co);
}

template <typename T>
void conv2d_grad_input(const T* gout, const T* kernel, T* gin, std::size_t B,
                       std::size_t H, std::size_t W, std::size_t Ci,
                       std::size_t Co) {
  // gin[b,hh,ww,ci] = sum_{u,v,co} gout[b,hh+1-u,ww+1-v,co] k[u,v,ci,co]
  // is itself a "same" 3x3 convolution of gout with the spatially flipped,
  // channel-transposed kernel.
  std::vector<T> kt(9 * Ci * Co);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t ci = 0; ci < Ci; ++ci)
        for (std::size_t co = 0; co < Co; ++co)
          kt[(((2 - u) * 3 + (2 - v)) * Co + co) * Ci + ci] =
              kernel[((u * 3 + v) * Ci + ci) * Co + co];
  const std::vector<T> zero_bias(Ci, T(0));
  conv_all<T, true>(gout, kt.data(), zero_bias.data(), gin, B, H, W, Co, Ci);
}

template <typename T>
void conv2d_grad_kernel_bias(const T* in, const T* gout, T* gkernel, T* gbias,
                             std::size_t B, std::size_t H, std::size_t W,
                             std::size_t Ci, std::size_t Co) {
  const std::size_t rows = B * H;
  const std::size_t kn = 9 * Ci * Co;
  const std::size_t buckets = std::min<std::size_t>(kReduceBuckets, rows);
  std::vector<std::vector<T>> gk(buckets), gb(buckets);
  for (std::size_t t = 0; t < buckets; ++t) {
    gk[t].assign(kn, T(0));
    gb[t].assign(Co, T(0));
  }
  const int nthreads = thread_count();
  (void)nthreads;

#if defined(SPCKD_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(buckets); ++t) {
    const std::size_t r0 = rows * static_cast<std::size_t>(t) / buckets;
    const std::size_t r1 = rows * static_cast<std::size_t>(t + 1) / buckets;
    T* gkt = gk[static_cast<std::size_t>(t)].data();
    T* gbt = gb[static_cast<std::size_t>(t)].data();
    for (std::size_t r = r0; r < r1; ++r) {
      const std::size_t b = r / H;
      const std::size_t h = r % H;
      for (std::size_t w = 0; w < W; ++w) {
        const T* grow = gout + (r * W + w) * Co;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp simd
#endif
        for (std::size_t co = 0; co < Co; ++co) gbt[co] += grow[co];
        for (std::size_t u = 0; u < 3; ++u) {
          const std::size_t hh = h + u;
          if (hh < 1 || hh > H) continue;
          for (std::size_t v = 0; v < 3; ++v) {
            const std::size_t ww = w + v;
            if (ww < 1 || ww > W) continue;
            const T* src = in + (((b * H + hh - 1) * W) + (ww - 1)) * Ci;
            T* gkblock = gkt + (u * 3 + v) * Ci * Co;
            for (std::size_t ci = 0; ci < Ci; ++ci) {
              const T s = src[ci];
              T* gg = gkblock + ci * Co;
#if defined(SPCKD_HAVE_OPENMP)
#pragma omp simd
#endif
              for (std::size_t co = 0; co < Co; ++co) gg[co] += s * grow[co];
            }
          }
        }
      }
    }
  }

  for (std::size_t t = 0; t < buckets; ++t) {
    for (std::size_t i = 0; i < kn; ++i) gkernel[i] += gk[t][i];
    for (std::size_t co = 0; co < Co; ++co) gbias[co] += gb[t][co];
  }
}

template void conv2d_forward<float>(const float*, const float*, const float*,
                                    float*, std::size_t, std::size_t,
                                    std::size_t, std::size_t, std::size_t);
template void conv2d_forward<double>(const double*, const double*,
                                     const double*, double*, std::size_t,
                                     std::size_t, std::size_t, std::size_t,
                                     std::size_t);
template void conv2d_grad_input<float>(const float*, const float*, float*,
                                       std::size_t, std::size_t, std::size_t,
                                       std::size_t, std::size_t);
template void conv2d_grad_input<double>(const double*, const double*, double*,
                                        std::size_t, std::size_t, std::size_t,
                                        std::size_t, std::size_t);
template void conv2d_grad_kernel_bias<float>(const float*, const float*,
                                             float*, float*, std::size_t,
                                             std::size_t, std::size_t,
                                             std::size_t, std::size_t);
template void conv2d_grad_kernel_bias<double>(const double*, const double*,
                                              double*, double*, std::size_t,
                                              std::size_t, std::size_t,
                                              std::size_t, std::size_t);

}  // namespace spckd::detail

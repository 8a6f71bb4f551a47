// Independent reference implementations used as test oracles. Plain loops
// only; these must not share code with the library paths they check.
#ifndef SPCKD_TESTS_ORACLES_HPP
#define SPCKD_TESTS_ORACLES_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "spckd/recovery.hpp"

namespace oracles {

// Direct triple-loop zero-padded 3x3 "same" convolution, channels-last.
template <typename T>
void conv2d_same(const std::vector<T>& in, const std::vector<T>& kernel,
                 const std::vector<T>& bias, std::vector<T>& out,
                 std::size_t B, std::size_t H, std::size_t W, std::size_t Ci,
                 std::size_t Co) {
  out.assign(B * H * W * Co, T(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        for (std::size_t co = 0; co < Co; ++co) {
          T acc = bias[co];
          for (std::size_t u = 0; u < 3; ++u)
            for (std::size_t v = 0; v < 3; ++v) {
              const long hh = static_cast<long>(h) + static_cast<long>(u) - 1;
              const long ww = static_cast<long>(w) + static_cast<long>(v) - 1;
              if (hh < 0 || hh >= static_cast<long>(H) || ww < 0 ||
                  ww >= static_cast<long>(W))
                continue;
              for (std::size_t ci = 0; ci < Ci; ++ci)
                acc += in[((b * H + hh) * W + ww) * Ci + ci] *
                       kernel[((u * 3 + v) * Ci + ci) * Co + co];
            }
          out[((b * H + h) * W + w) * Co + co] = acc;
        }
}

template <typename T>
T soft(T x, T tau) {
  const T a = std::abs(x) - tau;
  if (a <= T(0)) return T(0);
  return x > T(0) ? a : -a;
}

// Straight-line re-implementation of the unrolled recursion for one sample:
//   x0 = (1/K) H^T y per band, u0 = 0, and for each stage
//     z = restore(dec(soft(enc(x + u), |beta|)))
//     x' = x - alpha ((1/K) H^T (H x - y) + rho (x - z + u))
//     u' = u + x' - z
// Reads the same weights as the network under test but computes everything
// with plain loops (no tape).
template <typename T>
std::vector<T> unrolled_reference(spckd::RecoveryNet<T>& net,
                                  const spckd::Tensor<T>& h,
                                  const std::vector<T>& y) {
  const auto& sh = net.shape;
  const std::size_t K = sh.snapshots;
  const std::size_t N = sh.pixels();
  const std::size_t J = sh.bands;
  const std::size_t M = sh.image_rows;
  const std::size_t W = sh.image_cols;
  const std::size_t C = net.prox.channels;

  auto matvec = [&](const std::vector<T>& x) {  // per band H x_j
    std::vector<T> out(J * K, T(0));
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        T acc = 0;
        for (std::size_t n = 0; n < N; ++n) acc += h[k * N + n] * x[j * N + n];
        out[j * K + k] = acc;
      }
    return out;
  };
  auto adjoint = [&](const std::vector<T>& v) {  // per band H^T v_j
    std::vector<T> out(J * N, T(0));
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t n = 0; n < N; ++n) {
        T acc = 0;
        for (std::size_t k = 0; k < K; ++k) acc += h[k * N + n] * v[j * K + k];
        out[j * N + n] = acc;
      }
    return out;
  };
  auto raw = [](const spckd::Parameter<T>& p) {
    return std::vector<T>(p.value.data(), p.value.data() + p.value.size());
  };

  std::vector<T> x = adjoint(y);
  for (T& v : x) v /= static_cast<T>(K);
  std::vector<T> u(J * N, T(0));

  for (std::size_t stage = 0; stage < net.stage_count; ++stage) {
    auto& sp = net.stages[stage];
    std::vector<T> a(J * N);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = x[i] + u[i];
    std::size_t cin = 1;
    std::vector<T> next;
    for (auto& layer : sp.encoder) {
      conv2d_same(a, raw(layer.kernel), raw(layer.bias), next, J, M, W, cin,
                  C);
      for (T& v : next) v = v > T(0) ? v : T(0);
      a = next;
      cin = C;
    }
    const T tau = std::abs(sp.beta.value[0]);
    for (T& v : a) v = soft(v, tau);
    for (auto& layer : sp.decoder) {
      conv2d_same(a, raw(layer.kernel), raw(layer.bias), next, J, M, W, C, C);
      for (T& v : next) v = v > T(0) ? v : T(0);
      a = next;
    }
    std::vector<T> z;
    conv2d_same(a, raw(sp.restore.kernel), raw(sp.restore.bias), z, J, M, W,
                C, 1);

    const T alpha = sp.alpha.value[0];
    const T rho = sp.rho.value[0];
    std::vector<T> hx = matvec(x);
    for (std::size_t i = 0; i < hx.size(); ++i) hx[i] -= y[i];
    std::vector<T> fidelity = adjoint(hx);
    for (T& v : fidelity) v /= static_cast<T>(K);
    std::vector<T> xn(J * N);
    for (std::size_t i = 0; i < xn.size(); ++i)
      xn[i] = x[i] - alpha * (fidelity[i] + rho * (x[i] - z[i] + u[i]));
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += xn[i] - z[i];
    x = xn;
  }
  return x;
}

// Direct per-window SSIM: explicit 11x11 Gaussian weights, one double loop
// per valid window center, averaged per band.
template <typename T>
double ssim_reference(const spckd::Tensor<T>& a, const spckd::Tensor<T>& b) {
  const auto& s = a.shape();
  const std::size_t bands = s[0], rows = s[1], cols = s[2];
  double w[11][11];
  double wsum = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      wsum += w[i][j];
    }
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) w[i][j] /= wsum;

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t band = 0; band < bands; ++band) {
    const T* pa = a.data() + band * rows * cols;
    const T* pb = b.data() + band * rows * cols;
    double band_sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t r = 0; r + 11 <= rows; ++r)
      for (std::size_t c = 0; c + 11 <= cols; ++c) {
        double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double va = pa[(r + i) * cols + (c + j)];
            const double vb = pb[(r + i) * cols + (c + j)];
            ma += w[i][j] * va;
            mb += w[i][j] * vb;
            maa += w[i][j] * va * va;
            mbb += w[i][j] * vb * vb;
            mab += w[i][j] * va * vb;
          }
        const double var_a = maa - ma * ma;
        const double var_b = mbb - mb * mb;
        const double cov = mab - ma * mb;
        band_sum += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                    ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++windows;
      }
    total += band_sum / windows;
  }
  return total / bands;
}

}  // namespace oracles

#endif  // SPCKD_TESTS_ORACLES_HPP

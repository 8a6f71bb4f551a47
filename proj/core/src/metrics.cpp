#include "spckd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spckd {

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
  if (!a.same_shape(b))
    throw ShapeError("psnr: shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * data_range)^2
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_taps() {
  std::vector<double> w(kWindow);
  double sum = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-region Gaussian filter of a rows x cols plane.
void filter_valid(const std::vector<double>& plane, std::size_t rows,
                  std::size_t cols, const std::vector<double>& taps,
                  std::vector<double>& out) {
  const std::size_t vcols = cols - kWindow + 1;
  const std::size_t vrows = rows - kWindow + 1;
  std::vector<double> tmp(rows * vcols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < vcols; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k)
        acc += taps[k] * plane[r * cols + c + k];
      tmp[r * vcols + c] = acc;
    }
  out.assign(vrows * vcols, 0.0);
  for (std::size_t r = 0; r < vrows; ++r)
    for (std::size_t c = 0; c < vcols; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k)
        acc += taps[k] * tmp[(r + k) * vcols + c];
      out[r * vcols + c] = acc;
    }
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw ShapeError("ssim: shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  const Shape& s = a.shape();
  if (s.size() != 3)
    throw ShapeError("ssim: expected [J, M, N], got " + shape_to_string(s));
  const std::size_t bands = s[0], rows = s[1], cols = s[2];
  if (rows < kWindow || cols < kWindow)
    throw ConfigError("ssim: image smaller than the 11x11 window");

  static const std::vector<double> taps = gaussian_taps();
  const std::size_t plane = rows * cols;
  std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
  std::vector<double> ma, mb, maa, mbb, mab;

  double total = 0.0;
  for (std::size_t j = 0; j < bands; ++j) {
    const T* xa = a.data() + j * plane;
    const T* xb = b.data() + j * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = xa[i];
      pb[i] = xb[i];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    filter_valid(pa, rows, cols, taps, ma);
    filter_valid(pb, rows, cols, taps, mb);
    filter_valid(paa, rows, cols, taps, maa);
    filter_valid(pbb, rows, cols, taps, mbb);
    filter_valid(pab, rows, cols, taps, mab);

    double band_sum = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double mu_a = ma[i], mu_b = mb[i];
      const double var_a = maa[i] - mu_a * mu_a;
      const double var_b = mbb[i] - mu_b * mu_b;
      const double cov = mab[i] - mu_a * mu_b;
      band_sum += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                  ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
    total += band_sum / static_cast<double>(ma.size());
  }
  return total / static_cast<double>(bands);
}

template double psnr<float>(const Tensor<float>&, const Tensor<float>&,
                            double);
template double psnr<double>(const Tensor<double>&, const Tensor<double>&,
                             double);
template double ssim<float>(const Tensor<float>&, const Tensor<float>&);
template double ssim<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace spckd

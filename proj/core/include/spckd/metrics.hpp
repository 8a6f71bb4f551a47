#ifndef SPCKD_METRICS_HPP
#define SPCKD_METRICS_HPP

#include "spckd/tensor.hpp"

namespace spckd {

// 10 log10(peak^2 / MSE), capped at 100 dB (identical inputs hit the cap).
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

// Mean SSIM over an 11x11 Gaussian window (sigma 1.5, K1=0.01, K2=0.03,
// data range 1.0), computed per band on [J, M, N] images over fully valid
// window positions and averaged across bands. M, N must be at least 11.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

extern template double psnr<float>(const Tensor<float>&, const Tensor<float>&,
                                   double);
extern template double psnr<double>(const Tensor<double>&,
                                    const Tensor<double>&, double);
extern template double ssim<float>(const Tensor<float>&, const Tensor<float>&);
extern template double ssim<double>(const Tensor<double>&,
                                    const Tensor<double>&);

}  // namespace spckd

#endif  // SPCKD_METRICS_HPP

// Direct channels-last 3x3 "same" convolution kernels (zero padding of 1).
// Internal to the tape; shapes are validated by the caller.
#ifndef SPCKD_CONV_KERNELS_HPP
#define SPCKD_CONV_KERNELS_HPP

#include <cstddef>

namespace spckd::detail {

// in [B,H,W,Ci], kernel [3,3,Ci,Co], bias [Co] -> out [B,H,W,Co] (overwrites).
template <typename T>
void conv2d_forward(const T* in, const T* kernel, const T* bias, T* out,
                    std::size_t B, std::size_t H, std::size_t W,
                    std::size_t Ci, std::size_t Co);

// gin [B,H,W,Ci] += correlation of gout [B,H,W,Co] with the kernel.
template <typename T>
void conv2d_grad_input(const T* gout, const T* kernel, T* gin, std::size_t B,
                       std::size_t H, std::size_t W, std::size_t Ci,
                       std::size_t Co);

// gkernel [3,3,Ci,Co] and gbias [Co] += gradients for the recorded forward.
template <typename T>
void conv2d_grad_kernel_bias(const T* in, const T* gout, T* gkernel, T* gbias,
                             std::size_t B, std::size_t H, std::size_t W,
                             std::size_t Ci, std::size_t Co);

}  // namespace spckd::detail

#endif  // SPCKD_CONV_KERNELS_HPP

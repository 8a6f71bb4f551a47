#include <benchmark/benchmark.h>

#include <vector>

#include "conv_kernels.hpp"
#include "spckd/random.hpp"
#include "spckd/tape.hpp"

using namespace spckd;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Shapes mirror one proximal-network layer on a batch of 32 samples.
void BM_conv_forward(benchmark::State& state) {
  const std::size_t B = 32, H = 32, W = 32;
  const std::size_t C = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto in = random_vec(B * H * W * C, rng);
  auto k = random_vec(9 * C * C, rng);
  auto bias = random_vec(C, rng);
  std::vector<float> out(B * H * W * C);
  for (auto _ : state) {
    detail::conv2d_forward(in.data(), k.data(), bias.data(), out.data(), B, H,
                           W, C, C);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * B * H * W * 9 * C * C);
}
BENCHMARK(BM_conv_forward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_conv_backward(benchmark::State& state) {
  const std::size_t B = 32, H = 32, W = 32;
  const std::size_t C = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto in = random_vec(B * H * W * C, rng);
  auto k = random_vec(9 * C * C, rng);
  auto gout = random_vec(B * H * W * C, rng);
  std::vector<float> gin(B * H * W * C), gk(9 * C * C), gb(C);
  for (auto _ : state) {
    detail::conv2d_grad_input(gout.data(), k.data(), gin.data(), B, H, W, C,
                              C);
    detail::conv2d_grad_kernel_bias(in.data(), gout.data(), gk.data(),
                                    gb.data(), B, H, W, C, C);
    benchmark::DoNotOptimize(gin.data());
  }
  state.SetItemsProcessed(state.iterations() * 4ll * B * H * W * 9 * C * C);
}
BENCHMARK(BM_conv_backward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_sensing_matmul(benchmark::State& state) {
  // y = x H^T at gamma = 0.8, 32x32 image, batch 32.
  const std::size_t B = 32, N = 1024, K = 819;
  Rng rng(2);
  Tensor<float> x({B, N});
  Tensor<float> h({K, N});
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < h.size(); ++i)
    h[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Tape<float> t;
    Var y = t.matmul_nt(t.leaf(x), t.leaf(h));
    benchmark::DoNotOptimize(t.value(y).data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * B * N * K);
}
BENCHMARK(BM_sensing_matmul)->Unit(benchmark::kMillisecond);

}  // namespace

#ifndef SPCKD_RECOVERY_HPP
#define SPCKD_RECOVERY_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spckd/sensing.hpp"
#include "spckd/tape.hpp"

namespace spckd {

// Learned proximal autoencoder layout: four 3x3 encoder convolutions and
// three decoder convolutions with `channels` outputs each (ReLU after every
// one), a soft-threshold bottleneck, and a final 3x3 restore convolution
// back to the image. Bands are stacked into the convolution batch, so each
// band runs through single-channel-input convolutions.
struct ProxConfig {
  std::size_t channels = 32;
  static constexpr std::size_t encoder_layers = 4;
  static constexpr std::size_t decoder_layers = 3;
};

template <typename T>
struct ConvLayer {
  Parameter<T> kernel;  // [3,3,Cin,Cout]
  Parameter<T> bias;    // [Cout]
};

// Per-stage learnables: gradient-step size alpha, penalty rho, threshold
// beta, and the encoder/decoder/restore convolution weights. Stages never
// share weights.
template <typename T>
struct StageParams {
  Parameter<T> alpha;
  Parameter<T> rho;
  Parameter<T> beta;
  std::vector<ConvLayer<T>> encoder;
  std::vector<ConvLayer<T>> decoder;
  ConvLayer<T> restore;
};

template <typename T>
struct RecoveryNet {
  std::size_t stage_count = 0;
  ProxConfig prox;
  SensingShape shape;
  std::vector<StageParams<T>> stages;

  // Canonical parameter order: per stage alpha, rho, beta, then encoder,
  // decoder and restore kernels/biases. Checkpoints, optimizers and gradient
  // checks all rely on this ordering.
  std::vector<std::pair<std::string, Parameter<T>*>> named_parameters();
};

// Convolution weights are fan-in-scaled uniform; biases start at zero and
// alpha/rho/beta start at 0.1/0.1/0.01.
template <typename T>
RecoveryNet<T> make_recovery_net(std::size_t stages, ProxConfig prox,
                                 const SensingShape& shape,
                                 std::uint64_t seed);

// On-tape forward trace; exactly stage_count entries per list. sparse_codes
// holds the soft-threshold outputs f^k flattened to [B, M*N*C*J].
template <typename T>
struct ReconstructionTrace {
  Var x0;
  std::vector<Var> x_stages;
  std::vector<Var> u_stages;
  std::vector<Var> z_stages;
  std::vector<Var> sparse_codes;

  Var reconstruction() const { return x_stages.back(); }
};

// Detached copy of a trace for evaluation and distillation targets.
template <typename T>
struct TraceValues {
  Tensor<T> x0;
  std::vector<Tensor<T>> x_stages;
  std::vector<Tensor<T>> u_stages;
  std::vector<Tensor<T>> z_stages;
  std::vector<Tensor<T>> sparse_codes;
};

template <typename T>
TraceValues<T> detach(const Tape<T>& tape, const ReconstructionTrace<T>& tr);

// z = restore(decoder(f)), f = soft(encoder(v), |beta|) for v = [B, M*N*J].
template <typename T>
std::pair<Var, Var> prox_apply(Tape<T>& tape, StageParams<T>& stage,
                               const ProxConfig& prox,
                               const SensingShape& shape, Var v);

// One ADMM iterate given the proximal output z:
//   x' = x - alpha (H^T (H x - y) + rho (x - z + u)),  u' = u + x' - z.
template <typename T>
std::pair<Var, Var> admm_updates(Tape<T>& tape, Var alpha, Var rho,
                                 Var realized, Var y, Var x, Var u, Var z,
                                 const SensingShape& shape);

template <typename T>
struct AdmmStep {
  Var x;
  Var u;
  Var z;
  Var sparse_code;
};

template <typename T>
AdmmStep<T> admm_stage(Tape<T>& tape, StageParams<T>& stage,
                       const ProxConfig& prox, const SensingShape& shape,
                       Var realized, Var y, Var x, Var u);

// Runs the L unrolled stages from x0 = reproject(y), u0 = 0.
template <typename T>
ReconstructionTrace<T> unrolled_forward(Tape<T>& tape, RecoveryNet<T>& net,
                                        Var realized, Var y);

// A complete imaging system: coded apertures plus recovery network.
template <typename T>
struct SpcSystem {
  CodedApertureBank<T> bank;
  RecoveryNet<T> net;

  // "ca.latent" followed by the network's canonical parameter order.
  std::vector<std::pair<std::string, Parameter<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Parameter<T>*>> out;
    out.emplace_back("ca.latent", &bank.latent);
    for (auto& [name, p] : net.named_parameters()) out.emplace_back(name, p);
    return out;
  }

  // Detached full forward on one batch of scenes [B, M*N*J].
  TraceValues<T> run(const Tensor<T>& scenes,
                     const NoiseSpec& noise = NoiseSpec{}) {
    Tape<T> tape;
    Var h = bank.realize_on(tape);
    Var y = spc_forward(tape, h, tape.leaf(scenes), bank.shape);
    if (noise.kind != NoiseKind::None) {
      const Tensor<T>& clean = tape.value(y);
      Tensor<T> noisy = apply_noise(clean, bank.shape.snapshots, noise);
      for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] -= clean[i];
      y = tape.add(y, tape.leaf(noisy));
    }
    return detach(tape, unrolled_forward(tape, net, h, y));
  }
};

template <typename T>
SpcSystem<T> make_system(double gamma, std::size_t rows, std::size_t cols,
                         std::size_t bands, ApertureMode mode,
                         std::size_t stages, std::size_t channels,
                         std::uint64_t seed) {
  SpcSystem<T> sys;
  sys.bank = build_sensing<T>(gamma, rows, cols, bands, mode, seed);
  sys.net = make_recovery_net<T>(stages, ProxConfig{channels}, sys.bank.shape,
                                 seed + 1);
  return sys;
}

}  // namespace spckd

#endif  // SPCKD_RECOVERY_HPP

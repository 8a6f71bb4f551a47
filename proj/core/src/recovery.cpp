#include "spckd/recovery.hpp"

#include <cmath>

#include "spckd/random.hpp"

namespace spckd {
namespace {

template <typename T>
ConvLayer<T> make_conv_layer(std::size_t cin, std::size_t cout, Rng& rng) {
  Tensor<T> kernel({3, 3, cin, cout});
  const double bound = 1.0 / std::sqrt(9.0 * static_cast<double>(cin));
  for (std::size_t i = 0; i < kernel.size(); ++i)
    kernel[i] = static_cast<T>(rng.uniform(-bound, bound));
  // Nonzero bias keeps pre-activations off the exact ReLU kink that
  // all-zero sparse-code patches would otherwise sit on.
  Tensor<T> bias({cout});
  for (std::size_t i = 0; i < bias.size(); ++i)
    bias[i] = static_cast<T>(rng.uniform(-bound, bound));
  ConvLayer<T> layer;
  layer.kernel = Parameter<T>(std::move(kernel));
  layer.bias = Parameter<T>(std::move(bias));
  return layer;
}

}  // namespace

template <typename T>
RecoveryNet<T> make_recovery_net(std::size_t stages, ProxConfig prox,
                                 const SensingShape& shape,
                                 std::uint64_t seed) {
  if (stages < 1)
    throw ConfigError("recovery network needs at least one stage");
  if (prox.channels < 1)
    throw ConfigError("proximal channel count must be >= 1");
  RecoveryNet<T> net;
  net.stage_count = stages;
  net.prox = prox;
  net.shape = shape;
  Rng rng(seed);
  const std::size_t C = prox.channels;
  for (std::size_t k = 0; k < stages; ++k) {
    StageParams<T> s;
    s.alpha = Parameter<T>(Tensor<T>::scalar(T(0.1)));
    s.rho = Parameter<T>(Tensor<T>::scalar(T(0.1)));
    s.beta = Parameter<T>(Tensor<T>::scalar(T(0.01)));
    s.encoder.push_back(make_conv_layer<T>(1, C, rng));
    for (std::size_t i = 1; i < ProxConfig::encoder_layers; ++i)
      s.encoder.push_back(make_conv_layer<T>(C, C, rng));
    for (std::size_t i = 0; i < ProxConfig::decoder_layers; ++i)
      s.decoder.push_back(make_conv_layer<T>(C, C, rng));
    s.restore = make_conv_layer<T>(C, 1, rng);
    net.stages.push_back(std::move(s));
  }
  return net;
}

template <typename T>
std::vector<std::pair<std::string, Parameter<T>*>>
RecoveryNet<T>::named_parameters() {
  std::vector<std::pair<std::string, Parameter<T>*>> out;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const std::string p = "stage" + std::to_string(k) + ".";
    StageParams<T>& s = stages[k];
    out.emplace_back(p + "alpha", &s.alpha);
    out.emplace_back(p + "rho", &s.rho);
    out.emplace_back(p + "beta", &s.beta);
    for (std::size_t i = 0; i < s.encoder.size(); ++i) {
      out.emplace_back(p + "enc" + std::to_string(i) + ".kernel",
                       &s.encoder[i].kernel);
      out.emplace_back(p + "enc" + std::to_string(i) + ".bias",
                       &s.encoder[i].bias);
    }
    for (std::size_t i = 0; i < s.decoder.size(); ++i) {
      out.emplace_back(p + "dec" + std::to_string(i) + ".kernel",
                       &s.decoder[i].kernel);
      out.emplace_back(p + "dec" + std::to_string(i) + ".bias",
                       &s.decoder[i].bias);
    }
    out.emplace_back(p + "restore.kernel", &s.restore.kernel);
    out.emplace_back(p + "restore.bias", &s.restore.bias);
  }
  return out;
}

template <typename T>
TraceValues<T> detach(const Tape<T>& tape, const ReconstructionTrace<T>& tr) {
  TraceValues<T> out;
  out.x0 = tape.value(tr.x0);
  for (Var v : tr.x_stages) out.x_stages.push_back(tape.value(v));
  for (Var v : tr.u_stages) out.u_stages.push_back(tape.value(v));
  for (Var v : tr.z_stages) out.z_stages.push_back(tape.value(v));
  for (Var v : tr.sparse_codes) out.sparse_codes.push_back(tape.value(v));
  return out;
}

template <typename T>
std::pair<Var, Var> prox_apply(Tape<T>& tape, StageParams<T>& stage,
                               const ProxConfig& prox,
                               const SensingShape& shape, Var v) {
  const Shape& sv = tape.value(v).shape();
  if (sv.size() != 2 || sv[1] != shape.scene_size())
    throw ShapeError("prox_apply: expected [B, " +
                     std::to_string(shape.scene_size()) + "], got " +
                     shape_to_string(sv));
  const std::size_t batch = sv[0];
  const std::size_t rows = shape.image_rows;
  const std::size_t cols = shape.image_cols;

  // Bands go through the convolutions as independent single-channel images.
  Var a = tape.reshape(v, {batch * shape.bands, rows, cols, 1});
  for (ConvLayer<T>& layer : stage.encoder)
    a = tape.relu(tape.conv2d_same(a, tape.param(layer.kernel),
                                   tape.param(layer.bias)));
  Var f = tape.soft_threshold(a, tape.param(stage.beta));
  Var d = f;
  for (ConvLayer<T>& layer : stage.decoder)
    d = tape.relu(tape.conv2d_same(d, tape.param(layer.kernel),
                                   tape.param(layer.bias)));
  Var restored = tape.conv2d_same(d, tape.param(stage.restore.kernel),
                                  tape.param(stage.restore.bias));
  Var z = tape.reshape(restored, {batch, shape.scene_size()});
  Var f_flat = tape.reshape(
      f, {batch, shape.scene_size() * prox.channels});
  return {z, f_flat};
}

template <typename T>
std::pair<Var, Var> admm_updates(Tape<T>& tape, Var alpha, Var rho,
                                 Var realized, Var y, Var x, Var u, Var z,
                                 const SensingShape& shape) {
  // The fidelity gradient is re-projected with the same 1/K scale as the
  // initialization. The unscaled H^T H has largest eigenvalue around
  // (sqrt(MN) + sqrt(K))^2, which makes the 0.1 step size diverge at
  // realistic sizes; since alpha and rho are learned per stage, the scale
  // is a pure reparameterization of the same model family.
  Var residual = tape.sub(spc_forward(tape, realized, x, shape), y);
  Var fidelity = reproject(tape, realized, residual, shape);
  Var penalty = tape.add(tape.sub(x, z), u);
  Var step = tape.add(fidelity, tape.scale(penalty, rho));
  Var x_next = tape.sub(x, tape.scale(step, alpha));
  Var u_next = tape.add(u, tape.sub(x_next, z));
  return {x_next, u_next};
}

template <typename T>
AdmmStep<T> admm_stage(Tape<T>& tape, StageParams<T>& stage,
                       const ProxConfig& prox, const SensingShape& shape,
                       Var realized, Var y, Var x, Var u) {
  auto [z, f] = prox_apply(tape, stage, prox, shape, tape.add(x, u));
  auto [x_next, u_next] =
      admm_updates(tape, tape.param(stage.alpha), tape.param(stage.rho),
                   realized, y, x, u, z, shape);
  return AdmmStep<T>{x_next, u_next, z, f};
}

template <typename T>
ReconstructionTrace<T> unrolled_forward(Tape<T>& tape, RecoveryNet<T>& net,
                                        Var realized, Var y) {
  if (tape.value(y).rank() == 1)
    y = tape.reshape(y, {1, tape.value(y).size()});
  ReconstructionTrace<T> trace;
  trace.x0 = reproject(tape, realized, y, net.shape);
  const std::size_t batch = tape.value(trace.x0).shape()[0];
  Var x = trace.x0;
  Var u = tape.leaf(Tensor<T>({batch, net.shape.scene_size()}));
  for (std::size_t k = 0; k < net.stage_count; ++k) {
    AdmmStep<T> step = admm_stage(tape, net.stages[k], net.prox, net.shape,
                                  realized, y, x, u);
    trace.x_stages.push_back(step.x);
    trace.u_stages.push_back(step.u);
    trace.z_stages.push_back(step.z);
    trace.sparse_codes.push_back(step.sparse_code);
    x = step.x;
    u = step.u;
  }
  return trace;
}

template struct RecoveryNet<float>;
template struct RecoveryNet<double>;

template RecoveryNet<float> make_recovery_net<float>(std::size_t, ProxConfig,
                                                     const SensingShape&,
                                                     std::uint64_t);
template RecoveryNet<double> make_recovery_net<double>(std::size_t, ProxConfig,
                                                       const SensingShape&,
                                                       std::uint64_t);
template TraceValues<float> detach<float>(const Tape<float>&,
                                          const ReconstructionTrace<float>&);
template TraceValues<double> detach<double>(const Tape<double>&,
                                            const ReconstructionTrace<double>&);
template std::pair<Var, Var> prox_apply<float>(Tape<float>&,
                                               StageParams<float>&,
                                               const ProxConfig&,
                                               const SensingShape&, Var);
template std::pair<Var, Var> prox_apply<double>(Tape<double>&,
                                                StageParams<double>&,
                                                const ProxConfig&,
                                                const SensingShape&, Var);
template std::pair<Var, Var> admm_updates<float>(Tape<float>&, Var, Var, Var,
                                                 Var, Var, Var, Var,
                                                 const SensingShape&);
template std::pair<Var, Var> admm_updates<double>(Tape<double>&, Var, Var,
                                                  Var, Var, Var, Var, Var,
                                                  const SensingShape&);
template AdmmStep<float> admm_stage<float>(Tape<float>&, StageParams<float>&,
                                           const ProxConfig&,
                                           const SensingShape&, Var, Var, Var,
                                           Var);
template AdmmStep<double> admm_stage<double>(Tape<double>&,
                                             StageParams<double>&,
                                             const ProxConfig&,
                                             const SensingShape&, Var, Var,
                                             Var, Var);
template ReconstructionTrace<float> unrolled_forward<float>(
    Tape<float>&, RecoveryNet<float>&, Var, Var);
template ReconstructionTrace<double> unrolled_forward<double>(
    Tape<double>&, RecoveryNet<double>&, Var, Var);

}  // namespace spckd

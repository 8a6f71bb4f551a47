#include "spckd/sensing.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"

namespace spckd {

SensingShape make_sensing_shape(double gamma, std::size_t rows,
                                std::size_t cols, std::size_t bands) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw ConfigError("compression ratio must be in (0, 1], got " +
                      std::to_string(gamma));
  if (rows < 1 || cols < 1 || bands < 1)
    throw ConfigError("image dimensions and band count must be >= 1");
  SensingShape s;
  s.image_rows = rows;
  s.image_cols = cols;
  s.bands = bands;
  s.gamma = gamma;
  const auto k = static_cast<std::size_t>(
      std::llround(gamma * static_cast<double>(rows * cols)));
  s.snapshots = k < 1 ? 1 : k;
  return s;
}

template <typename T>
Tensor<T> CodedApertureBank<T>::realized() const {
  if (mode == ApertureMode::RealValued) return latent.value;
  Tensor<T> out(latent.value.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = latent.value[i] >= T(0) ? T(1) : T(-1);
  return out;
}

template <typename T>
Var CodedApertureBank<T>::realize_on(Tape<T>& tape) {
  Var v = tape.param(latent);
  if (mode == ApertureMode::Binary) return tape.binarize_ste(v);
  return v;
}

template <typename T>
CodedApertureBank<T> build_sensing(double gamma, std::size_t rows,
                                   std::size_t cols, std::size_t bands,
                                   ApertureMode mode, std::uint64_t seed) {
  CodedApertureBank<T> bank;
  bank.shape = make_sensing_shape(gamma, rows, cols, bands);
  bank.mode = mode;
  bank.seed = seed;
  Tensor<T> init({bank.shape.snapshots, bank.shape.pixels()});
  Rng rng(seed);
  for (std::size_t i = 0; i < init.size(); ++i)
    init[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
  bank.latent = Parameter<T>(std::move(init));
  return bank;
}

namespace {

template <typename T>
Var as_batch(Tape<T>& tape, Var v, std::size_t row, const char* what) {
  const Shape& s = tape.value(v).shape();
  if (s.size() == 1 && s[0] == row) return tape.reshape(v, {1, row});
  if (s.size() == 2 && s[1] == row) return v;
  throw ShapeError(std::string(what) + ": expected [B, " +
                   std::to_string(row) + "], got " + shape_to_string(s));
}

}  // namespace

template <typename T>
Var spc_forward(Tape<T>& tape, Var realized, Var scene,
                const SensingShape& shape) {
  Var x = as_batch(tape, scene, shape.scene_size(), "spc_forward");
  const std::size_t batch = tape.value(x).shape()[0];
  Var bands = tape.reshape(x, {batch * shape.bands, shape.pixels()});
  Var y = tape.matmul_nt(bands, realized);  // [B*J, K]
  return tape.reshape(y, {batch, shape.measurement_size()});
}

template <typename T>
Var spc_adjoint(Tape<T>& tape, Var realized, Var measurements,
                const SensingShape& shape) {
  Var y = as_batch(tape, measurements, shape.measurement_size(), "spc_adjoint");
  const std::size_t batch = tape.value(y).shape()[0];
  Var rows = tape.reshape(y, {batch * shape.bands, shape.snapshots});
  Var x = tape.matmul_nn(rows, realized);  // [B*J, M*N]
  return tape.reshape(x, {batch, shape.scene_size()});
}

template <typename T>
Var reproject(Tape<T>& tape, Var realized, Var measurements,
              const SensingShape& shape) {
  Var x = spc_adjoint(tape, realized, measurements, shape);
  return tape.scale_const(x, T(1) / static_cast<T>(shape.snapshots));
}

template <typename T>
Tensor<T> spc_forward(const CodedApertureBank<T>& bank,
                      const Tensor<T>& scene, const NoiseSpec& noise) {
  Tape<T> tape;
  Var h = tape.leaf(bank.realized());
  Var y = spc_forward(tape, h, tape.leaf(scene), bank.shape);
  Tensor<T> out = tape.value(y);
  if (scene.rank() == 1) out = Tensor<T>(Shape{out.size()},
                                         std::vector<T>(out.data(),
                                                        out.data() + out.size()));
  if (noise.kind == NoiseKind::None) return out;
  return apply_noise(out, bank.shape.snapshots, noise);
}

template <typename T>
Tensor<T> reproject(const CodedApertureBank<T>& bank, const Tensor<T>& y) {
  Tape<T> tape;
  Var h = tape.leaf(bank.realized());
  Var x = reproject(tape, h, tape.leaf(y), bank.shape);
  Tensor<T> out = tape.value(x);
  if (y.rank() == 1)
    out = Tensor<T>(Shape{out.size()},
                    std::vector<T>(out.data(), out.data() + out.size()));
  return out;
}

template <typename T>
Tensor<T> apply_noise(const Tensor<T>& clean, std::size_t row_length,
                      const NoiseSpec& spec) {
  if (spec.kind == NoiseKind::None) return clean;
  if (row_length == 0 || clean.size() % row_length != 0)
    throw ShapeError("apply_noise: row length " + std::to_string(row_length) +
                     " does not divide " + std::to_string(clean.size()));
  Tensor<T> out = clean;
  Rng rng(spec.seed);
  const double snr_linear = std::pow(10.0, spec.snr_db / 10.0);
  const std::size_t rows = clean.size() / row_length;
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * row_length;
    double power = 0.0;
    for (std::size_t i = 0; i < row_length; ++i)
      power += static_cast<double>(row[i]) * static_cast<double>(row[i]);
    const double sigma =
        std::sqrt(power / (static_cast<double>(row_length) * snr_linear));
    for (std::size_t i = 0; i < row_length; ++i)
      row[i] += static_cast<T>(sigma * rng.normal());
  }
  return out;
}

void export_aperture(const CodedApertureBank<float>& bank,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os.write("SPCA", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(bank.shape.snapshots));
  detail::write_u32(os, static_cast<std::uint32_t>(bank.shape.image_rows));
  detail::write_u32(os, static_cast<std::uint32_t>(bank.shape.image_cols));
  detail::write_u8(os, bank.mode == ApertureMode::Binary ? 0 : 1);
  const Tensor<float> h = bank.realized();
  detail::write_f32_array(os, h.data(), h.size());
  if (!os) throw FormatError("short write to '" + path + "'");
}

template struct CodedApertureBank<float>;
template struct CodedApertureBank<double>;

template CodedApertureBank<float> build_sensing<float>(double, std::size_t,
                                                       std::size_t,
                                                       std::size_t,
                                                       ApertureMode,
                                                       std::uint64_t);
template CodedApertureBank<double> build_sensing<double>(double, std::size_t,
                                                         std::size_t,
                                                         std::size_t,
                                                         ApertureMode,
                                                         std::uint64_t);
template Var spc_forward<float>(Tape<float>&, Var, Var, const SensingShape&);
template Var spc_forward<double>(Tape<double>&, Var, Var, const SensingShape&);
template Var spc_adjoint<float>(Tape<float>&, Var, Var, const SensingShape&);
template Var spc_adjoint<double>(Tape<double>&, Var, Var, const SensingShape&);
template Var reproject<float>(Tape<float>&, Var, Var, const SensingShape&);
template Var reproject<double>(Tape<double>&, Var, Var, const SensingShape&);
template Tensor<float> spc_forward<float>(const CodedApertureBank<float>&,
                                          const Tensor<float>&,
                                          const NoiseSpec&);
template Tensor<double> spc_forward<double>(const CodedApertureBank<double>&,
                                            const Tensor<double>&,
                                            const NoiseSpec&);
template Tensor<float> reproject<float>(const CodedApertureBank<float>&,
                                        const Tensor<float>&);
template Tensor<double> reproject<double>(const CodedApertureBank<double>&,
                                          const Tensor<double>&);
template Tensor<float> apply_noise<float>(const Tensor<float>&, std::size_t,
                                          const NoiseSpec&);
template Tensor<double> apply_noise<double>(const Tensor<double>&, std::size_t,
                                            const NoiseSpec&);

}  // namespace spckd

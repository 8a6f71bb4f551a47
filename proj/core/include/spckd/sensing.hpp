#ifndef SPCKD_SENSING_HPP
#define SPCKD_SENSING_HPP

#include <cstdint>
#include <string>

#include "spckd/random.hpp"
#include "spckd/tape.hpp"
#include "spckd/tensor.hpp"

namespace spckd {

// Geometry of the single-pixel acquisition. K snapshots of an M x N scene
// with J spectral bands; gamma = K / (M*N) is the compression ratio.
struct SensingShape {
  std::size_t image_rows = 0;  // M
  std::size_t image_cols = 0;  // N
  std::size_t bands = 1;       // J
  std::size_t snapshots = 0;   // K
  double gamma = 0.0;

  std::size_t pixels() const { return image_rows * image_cols; }
  std::size_t scene_size() const { return pixels() * bands; }
  std::size_t measurement_size() const { return snapshots * bands; }
};

// K = round(gamma * M * N), clamped to at least one snapshot.
// Throws ConfigError unless gamma is in (0, 1] and M, N, J >= 1.
SensingShape make_sensing_shape(double gamma, std::size_t rows,
                                std::size_t cols, std::size_t bands);

enum class ApertureMode : std::uint8_t { Binary = 0, RealValued = 1 };

enum class NoiseKind : std::uint8_t { None = 0, AdditiveWhiteGaussian = 1 };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double snr_db = 30.0;  // target SNR, AWGN only
  std::uint64_t seed = 0;
};

// The learnable coded-aperture stack. `latent` holds the real-valued
// parameters; Binary mode realizes sign(latent) in {-1,+1} through the
// straight-through estimator, RealValued uses the latent verbatim. One
// realized matrix is shared by all spectral bands (block-diagonal sensing).
template <typename T>
struct CodedApertureBank {
  SensingShape shape;
  ApertureMode mode = ApertureMode::Binary;
  std::uint64_t seed = 0;
  Parameter<T> latent;  // [K, M*N]

  // Realized sensing matrix, detached from any tape.
  Tensor<T> realized() const;

  // Put the realized matrix on a tape; gradients reach the latent
  // (identity-passthrough in Binary mode).
  Var realize_on(Tape<T>& tape);
};

// Latent initialized i.i.d. uniform on [-1, 1] from the seed.
template <typename T>
CodedApertureBank<T> build_sensing(double gamma, std::size_t rows,
                                   std::size_t cols, std::size_t bands,
                                   ApertureMode mode, std::uint64_t seed);

// y_j = H x_j per band with the shared realized H. `scene` is [B, M*N*J]
// (or [M*N*J]) flattened band-major; the result is [B, K*J] band-major.
template <typename T>
Var spc_forward(Tape<T>& tape, Var realized, Var scene,
                const SensingShape& shape);

// Plain adjoint H^T y_j per band, no scaling; [B, K*J] -> [B, M*N*J].
template <typename T>
Var spc_adjoint(Tape<T>& tape, Var realized, Var measurements,
                const SensingShape& shape);

// x0_j = (1/K) H^T y_j per band; [B, K*J] -> [B, M*N*J]. The 1/K scale keeps
// the re-projection unbiased for Rademacher-like rows.
template <typename T>
Var reproject(Tape<T>& tape, Var realized, Var measurements,
              const SensingShape& shape);

// Detached conveniences (no tape, optional measurement noise).
template <typename T>
Tensor<T> spc_forward(const CodedApertureBank<T>& bank,
                      const Tensor<T>& scene,
                      const NoiseSpec& noise = NoiseSpec{});
template <typename T>
Tensor<T> reproject(const CodedApertureBank<T>& bank, const Tensor<T>& y);

// Additive white Gaussian noise scaled per measurement row so that
// 10*log10(||y||^2 / ||w||^2) targets spec.snr_db. Deterministic in the seed.
template <typename T>
Tensor<T> apply_noise(const Tensor<T>& clean, std::size_t row_length,
                      const NoiseSpec& spec);

// Plain binary export of the realized CA stack:
// magic "SPCA", u32 version=1, u32 K, u32 M, u32 N, u8 mode, K*M*N f32
// row-major, little-endian.
void export_aperture(const CodedApertureBank<float>& bank,
                     const std::string& path);

extern template struct CodedApertureBank<float>;
extern template struct CodedApertureBank<double>;

}  // namespace spckd

#endif  // SPCKD_SENSING_HPP

#ifndef SPCKD_DATA_HPP
#define SPCKD_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spckd/tensor.hpp"

namespace spckd {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

// Samples are [J, M, N] tensors flattened band-major with values in [0, 1].
struct Dataset {
  std::vector<Tensor<float>> samples;
  Split split = Split::Train;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Rows `first..first+count` stacked into one [count, M*N*J] batch tensor.
  Tensor<float> batch(const std::vector<std::size_t>& indices,
                      std::size_t first, std::size_t count) const;
};

// IDX container (MNIST family): 0x00 0x00, type byte 0x08, dimension count,
// big-endian u32 dims, raw unsigned bytes. Values are scaled to [0,1] by
// /255. Malformed input raises FormatError naming the byte offset.
Tensor<float> read_idx(const std::string& path);

// MSTN container for multispectral stacks, little-endian:
// magic "MSTN", u32 version=1, u32 count, u32 H, u32 W, u32 J,
// u32 dtype code (0 = f32), then count*H*W*J f32 values.
std::vector<Tensor<float>> read_mstn(const std::string& path);
void write_mstn(const std::vector<Tensor<float>>& samples,
                const std::string& path);

// Corner-aligned per-band bilinear resize of a [J, H, W] image.
Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t out_rows,
                              std::size_t out_cols);

// Non-overlapping [J, P, P] tiles, row-major from the top-left corner;
// partial edge tiles are discarded. P larger than the image is a ConfigError.
std::vector<Tensor<float>> extract_patches(const Tensor<float>& img,
                                           std::size_t patch);

// Deterministic smooth random fields (a few low-frequency sinusoids per
// band), min-max normalized to [0, 1] per sample.
Dataset synth_dataset(std::uint64_t seed, std::size_t count, std::size_t rows,
                      std::size_t cols, std::size_t bands);

// Manifest: one entry per line, `<split> <kind> <path>` with split in
// {train, val, test} and kind in {idx, mstn}. Blank lines and lines starting
// with '#' are skipped. Samples are resized to rows x cols, band counts are
// reduced by nearest-index subsampling, and patches are cut when patch > 0.
Dataset load_split(const std::string& manifest_path, Split split,
                   std::size_t rows, std::size_t cols, std::size_t bands,
                   std::size_t patch = 0);

}  // namespace spckd

#endif  // SPCKD_DATA_HPP

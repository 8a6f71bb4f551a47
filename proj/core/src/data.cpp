#include "spckd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "spckd/random.hpp"

namespace spckd {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint32_t read_be_u32(std::istream& is, std::size_t offset,
                          const std::string& path) {
  char b[4];
  if (!is.read(b, 4))
    throw FormatError("IDX '" + path + "': truncated at byte " +
                      std::to_string(offset));
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

}  // namespace

Tensor<float> Dataset::batch(const std::vector<std::size_t>& indices,
                             std::size_t first, std::size_t count) const {
  const std::size_t len = samples.at(0).size();
  Tensor<float> out({count, len});
  for (std::size_t r = 0; r < count; ++r) {
    const Tensor<float>& s = samples.at(indices.at(first + r));
    if (s.size() != len) throw ShapeError("dataset samples differ in shape");
    std::copy(s.data(), s.data() + len, out.data() + r * len);
  }
  return out;
}

Tensor<float> read_idx(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open IDX file '" + path + "'");
  const int b0 = is.get();
  const int b1 = is.get();
  if (b0 != 0x00 || b1 != 0x00)
    throw FormatError("IDX '" + path + "': bad magic at byte 0");
  const int type = is.get();
  if (type == EOF)
    throw FormatError("IDX '" + path + "': truncated at byte 2");
  if (type != 0x08)
    throw FormatError("IDX '" + path + "': unsupported type byte at byte 2 " +
                      "(only 0x08 unsigned byte is supported)");
  const int ndim = is.get();
  if (ndim == EOF)
    throw FormatError("IDX '" + path + "': truncated at byte 3");

  Shape shape;
  std::size_t offset = 4;
  std::size_t total = 1;
  for (int d = 0; d < ndim; ++d) {
    const std::uint32_t dim = read_be_u32(is, offset, path);
    offset += 4;
    shape.push_back(dim);
    total *= dim;
  }
  std::vector<unsigned char> raw(total);
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(is.gcount()) != total)
    throw FormatError("IDX '" + path + "': payload truncated at byte " +
                      std::to_string(offset + static_cast<std::size_t>(
                                                  std::max<std::streamsize>(
                                                      is.gcount(), 0))));
  Tensor<float> out(shape);
  for (std::size_t i = 0; i < total; ++i)
    out[i] = static_cast<float>(raw[i]) / 255.0f;
  return out;
}

std::vector<Tensor<float>> read_mstn(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open MSTN file '" + path + "'");
  detail::expect_magic(is, "MSTN", path.c_str());
  const std::uint32_t version = detail::read_u32(is, "MSTN version");
  if (version != 1)
    throw FormatError("MSTN '" + path + "': unsupported version " +
                      std::to_string(version));
  const std::uint32_t count = detail::read_u32(is, "MSTN count");
  const std::uint32_t rows = detail::read_u32(is, "MSTN H");
  const std::uint32_t cols = detail::read_u32(is, "MSTN W");
  const std::uint32_t bands = detail::read_u32(is, "MSTN J");
  const std::uint32_t dtype = detail::read_u32(is, "MSTN dtype");
  if (dtype != 0)
    throw FormatError("MSTN '" + path + "': unsupported dtype code " +
                      std::to_string(dtype));
  std::vector<Tensor<float>> out;
  const std::size_t per = static_cast<std::size_t>(rows) * cols * bands;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor<float> t({bands, rows, cols});
    detail::read_f32_array(is, t.data(), per, "MSTN payload");
    out.push_back(std::move(t));
  }
  // [0,1] contract: reject negatives, rescale by the dataset maximum if it
  // exceeds one.
  float lo = 0.0f, hi = 0.0f;
  for (const auto& t : out)
    for (std::size_t i = 0; i < t.size(); ++i) {
      lo = std::min(lo, t[i]);
      hi = std::max(hi, t[i]);
    }
  if (lo < 0.0f)
    throw FormatError("MSTN '" + path + "': negative sample values");
  if (hi > 1.0f)
    for (auto& t : out)
      for (std::size_t i = 0; i < t.size(); ++i) t[i] /= hi;
  return out;
}

void write_mstn(const std::vector<Tensor<float>>& samples,
                const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  std::uint32_t rows = 0, cols = 0, bands = 0;
  if (!samples.empty()) {
    const Shape& s = samples[0].shape();
    if (s.size() != 3)
      throw ShapeError("write_mstn: samples must be [J, H, W]");
    bands = static_cast<std::uint32_t>(s[0]);
    rows = static_cast<std::uint32_t>(s[1]);
    cols = static_cast<std::uint32_t>(s[2]);
  }
  os.write("MSTN", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(samples.size()));
  detail::write_u32(os, rows);
  detail::write_u32(os, cols);
  detail::write_u32(os, bands);
  detail::write_u32(os, 0);  // f32
  for (const auto& t : samples) {
    if (t.shape() != Shape{bands, rows, cols})
      throw ShapeError("write_mstn: samples differ in shape");
    detail::write_f32_array(os, t.data(), t.size());
  }
  if (!os) throw FormatError("short write to '" + path + "'");
}

Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t out_rows,
                              std::size_t out_cols) {
  const Shape& s = img.shape();
  if (s.size() != 3)
    throw ShapeError("resize_bilinear: expected [J, H, W], got " +
                     shape_to_string(s));
  if (out_rows < 1 || out_cols < 1)
    throw ConfigError("resize_bilinear: target size must be >= 1");
  const std::size_t bands = s[0], rows = s[1], cols = s[2];
  Tensor<float> out({bands, out_rows, out_cols});
  const double row_scale =
      out_rows > 1 ? static_cast<double>(rows - 1) / (out_rows - 1) : 0.0;
  const double col_scale =
      out_cols > 1 ? static_cast<double>(cols - 1) / (out_cols - 1) : 0.0;
  for (std::size_t j = 0; j < bands; ++j) {
    const float* src = img.data() + j * rows * cols;
    float* dst = out.data() + j * out_rows * out_cols;
    for (std::size_t r = 0; r < out_rows; ++r) {
      const double sy = r * row_scale;
      const std::size_t y0 = static_cast<std::size_t>(sy);
      const std::size_t y1 = std::min(y0 + 1, rows - 1);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < out_cols; ++c) {
        const double sx = c * col_scale;
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t x1 = std::min(x0 + 1, cols - 1);
        const double fx = sx - static_cast<double>(x0);
        const double top = src[y0 * cols + x0] * (1.0 - fx) +
                           src[y0 * cols + x1] * fx;
        const double bottom = src[y1 * cols + x0] * (1.0 - fx) +
                              src[y1 * cols + x1] * fx;
        dst[r * out_cols + c] =
            static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

std::vector<Tensor<float>> extract_patches(const Tensor<float>& img,
                                           std::size_t patch) {
  const Shape& s = img.shape();
  if (s.size() != 3)
    throw ShapeError("extract_patches: expected [J, H, W], got " +
                     shape_to_string(s));
  const std::size_t bands = s[0], rows = s[1], cols = s[2];
  if (patch < 1 || patch > rows || patch > cols)
    throw ConfigError("extract_patches: patch size " + std::to_string(patch) +
                      " does not fit a " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " image");
  std::vector<Tensor<float>> out;
  for (std::size_t pr = 0; pr + patch <= rows; pr += patch)
    for (std::size_t pc = 0; pc + patch <= cols; pc += patch) {
      Tensor<float> tile({bands, patch, patch});
      for (std::size_t j = 0; j < bands; ++j)
        for (std::size_t r = 0; r < patch; ++r)
          for (std::size_t c = 0; c < patch; ++c)
            tile[(j * patch + r) * patch + c] =
                img[(j * rows + pr + r) * cols + pc + c];
      out.push_back(std::move(tile));
    }
  return out;
}

Dataset synth_dataset(std::uint64_t seed, std::size_t count, std::size_t rows,
                      std::size_t cols, std::size_t bands) {
  if (count < 1) throw ConfigError("synth_dataset: count must be >= 1");
  Dataset ds;
  ds.provenance = "synth(seed=" + std::to_string(seed) + ")";
  Rng rng(seed);
  for (std::size_t n = 0; n < count; ++n) {
    Tensor<float> sample({bands, rows, cols});
    for (std::size_t j = 0; j < bands; ++j) {
      struct Wave {
        double amp, fr, fc, phase;
      };
      Wave waves[4];
      for (Wave& w : waves)
        w = {rng.uniform(0.5, 1.0), rng.uniform(0.3, 2.5),
             rng.uniform(0.3, 2.5), rng.uniform(0.0, kTwoPi)};
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          double v = 0.0;
          for (const Wave& w : waves)
            v += w.amp * std::sin(kTwoPi * (w.fr * r / rows + w.fc * c / cols) +
                                  w.phase);
          sample[(j * rows + r) * cols + c] = static_cast<float>(v);
        }
    }
    float lo = sample[0], hi = sample[0];
    for (std::size_t i = 0; i < sample.size(); ++i) {
      lo = std::min(lo, sample[i]);
      hi = std::max(hi, sample[i]);
    }
    if (hi > lo) {
      for (std::size_t i = 0; i < sample.size(); ++i)
        sample[i] = (sample[i] - lo) / (hi - lo);
    } else {
      sample.fill(0.5f);
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

namespace {

void append_sample(Dataset& ds, Tensor<float> sample, std::size_t rows,
                   std::size_t cols, std::size_t bands, std::size_t patch) {
  const Shape& s = sample.shape();
  // Nearest-index band subsampling when the source is richer.
  if (s[0] != bands) {
    if (s[0] < bands)
      throw FormatError("sample has " + std::to_string(s[0]) +
                        " bands, config wants " + std::to_string(bands));
    Tensor<float> reduced({bands, s[1], s[2]});
    for (std::size_t j = 0; j < bands; ++j) {
      const std::size_t src = bands == 1 ? 0 : j * (s[0] - 1) / (bands - 1);
      std::copy(sample.data() + src * s[1] * s[2],
                sample.data() + (src + 1) * s[1] * s[2],
                reduced.data() + j * s[1] * s[2]);
    }
    sample = std::move(reduced);
  }
  if (patch > 0) {
    for (Tensor<float>& tile : extract_patches(sample, patch)) {
      if (tile.dim(1) != rows || tile.dim(2) != cols)
        tile = resize_bilinear(tile, rows, cols);
      ds.samples.push_back(std::move(tile));
    }
    return;
  }
  if (sample.dim(1) != rows || sample.dim(2) != cols)
    sample = resize_bilinear(sample, rows, cols);
  ds.samples.push_back(std::move(sample));
}

}  // namespace

Dataset load_split(const std::string& manifest_path, Split split,
                   std::size_t rows, std::size_t cols, std::size_t bands,
                   std::size_t patch) {
  std::ifstream is(manifest_path);
  if (!is) throw FormatError("cannot open manifest '" + manifest_path + "'");
  const std::string want = split == Split::Train   ? "train"
                           : split == Split::Val   ? "val"
                                                   : "test";
  Dataset ds;
  ds.split = split;
  ds.provenance = manifest_path + ":" + want;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag, kind, path;
    if (!(ls >> tag >> kind >> path))
      throw FormatError("manifest '" + manifest_path + "': bad line '" +
                        line + "'");
    if (tag != want) continue;
    if (kind == "idx") {
      Tensor<float> stack = read_idx(path);
      if (stack.rank() != 3)
        throw FormatError("IDX '" + path + "': expected [count, H, W]");
      const std::size_t n = stack.dim(0), h = stack.dim(1), w = stack.dim(2);
      for (std::size_t i = 0; i < n; ++i) {
        Tensor<float> img({1, h, w},
                          std::vector<float>(stack.data() + i * h * w,
                                             stack.data() + (i + 1) * h * w));
        append_sample(ds, std::move(img), rows, cols, bands, patch);
      }
    } else if (kind == "mstn") {
      for (Tensor<float>& img : read_mstn(path))
        append_sample(ds, std::move(img), rows, cols, bands, patch);
    } else {
      throw FormatError("manifest '" + manifest_path + "': unknown kind '" +
                        kind + "'");
    }
  }
  for (const auto& s : ds.samples)
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] < 0.0f || s[i] > 1.0f)
        throw FormatError("dataset sample leaves [0,1] after ingestion");
  return ds;
}

}  // namespace spckd

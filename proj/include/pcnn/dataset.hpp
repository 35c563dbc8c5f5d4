#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

/// Labelled image set.  Pixels are stored as amplitudes in [0, 1], one image
/// per column.
struct Dataset {
  RMat images;  // pixels x samples
  std::vector<int> labels;
  int image_rows = 0;
  int image_cols = 0;

  long size() const { return static_cast<long>(labels.size()); }

  /// Complex field batch for the given sample indices (amplitude encoding,
  /// zero phase).
  CMat batch(std::span<const long> idx) const {
    CMat out(images.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t c = 0; c < idx.size(); ++c) {
      if (idx[c] < 0 || idx[c] >= size())
        throw ShapeError("sample index out of range");
      out.col(static_cast<Eigen::Index>(c)) =
          images.col(idx[c]).cast<Complex>();
    }
    return out;
  }

  std::vector<int> label_batch(std::span<const long> idx) const {
    std::vector<int> out(idx.size());
    for (size_t c = 0; c < idx.size(); ++c)
      out[c] = labels[static_cast<size_t>(idx[c])];
    return out;
  }
};

namespace detail {

/// Read a whole file through zlib (handles both gzip and raw content).
inline std::vector<unsigned char> read_maybe_gz(
    const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int got = 0;
  while ((got = gzread(f, buf, sizeof buf)) > 0)
    out.insert(out.end(), buf, buf + got);
  const bool bad = got < 0;
  gzclose(f);
  if (bad) throw DataError("decompression failed for " + path.string());
  return out;
}

inline uint32_t be32(const std::vector<unsigned char>& b, size_t at) {
  if (at + 4 > b.size()) throw DataError("truncated IDX header");
  return (static_cast<uint32_t>(b[at]) << 24) |
         (static_cast<uint32_t>(b[at + 1]) << 16) |
         (static_cast<uint32_t>(b[at + 2]) << 8) | static_cast<uint32_t>(b[at + 3]);
}

}  // namespace detail

/// IDX image file (magic 0x00000803), optionally gzip-compressed.
inline Dataset load_idx_images(const std::filesystem::path& path) {
  const auto bytes = detail::read_maybe_gz(path);
  const uint32_t magic = detail::be32(bytes, 0);
  if (magic != 0x803)
    throw DataError(path.string() + ": bad image magic " +
                    std::to_string(magic));
  const uint32_t count = detail::be32(bytes, 4);
  const uint32_t rows = detail::be32(bytes, 8);
  const uint32_t cols = detail::be32(bytes, 12);
  const size_t expect = 16 + static_cast<size_t>(count) * rows * cols;
  if (bytes.size() != expect)
    throw DataError(path.string() + ": image payload size mismatch");
  Dataset d;
  d.image_rows = static_cast<int>(rows);
  d.image_cols = static_cast<int>(cols);
  d.images.resize(static_cast<Eigen::Index>(rows) * cols, count);
  const unsigned char* p = bytes.data() + 16;
  for (uint32_t s = 0; s < count; ++s)
    for (uint32_t i = 0; i < rows * cols; ++i)
      d.images(i, s) = static_cast<double>(*p++) / 255.0;
  return d;
}

/// IDX label file (magic 0x00000801), optionally gzip-compressed.
inline std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_maybe_gz(path);
  const uint32_t magic = detail::be32(bytes, 0);
  if (magic != 0x801)
    throw DataError(path.string() + ": bad label magic " +
                    std::to_string(magic));
  const uint32_t count = detail::be32(bytes, 4);
  if (bytes.size() != 8 + static_cast<size_t>(count))
    throw DataError(path.string() + ": label payload size mismatch");
  std::vector<int> labels(count);
  for (uint32_t i = 0; i < count; ++i) {
    const int v = bytes[8 + i];
    if (v > 9) throw DataError(path.string() + ": label out of range");
    labels[i] = v;
  }
  return labels;
}

inline Dataset load_idx_pair(const std::filesystem::path& images,
                             const std::filesystem::path& labels) {
  Dataset d = load_idx_images(images);
  d.labels = load_idx_labels(labels);
  if (static_cast<Eigen::Index>(d.labels.size()) != d.images.cols())
    throw DataError("image/label count mismatch");
  return d;
}

/// Pick the first existing of `<stem>` and `<stem>.gz` under root.
inline std::filesystem::path find_idx_file(const std::filesystem::path& root,
                                           const std::string& stem) {
  const std::filesystem::path plain = root / stem;
  if (std::filesystem::exists(plain)) return plain;
  const std::filesystem::path gz = root / (stem + ".gz");
  if (std::filesystem::exists(gz)) return gz;
  throw DataError("missing dataset file " + plain.string() + "[.gz]");
}

struct MnistData {
  Dataset train;
  Dataset test;
};

inline MnistData load_mnist(const std::filesystem::path& root) {
  MnistData d;
  d.train = load_idx_pair(find_idx_file(root, "train-images-idx3-ubyte"),
                          find_idx_file(root, "train-labels-idx1-ubyte"));
  d.test = load_idx_pair(find_idx_file(root, "t10k-images-idx3-ubyte"),
                         find_idx_file(root, "t10k-labels-idx1-ubyte"));
  return d;
}

}  // namespace pcnn

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "pcnn/autograd.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/linalg.hpp"

namespace pcnn {

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated binary file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw DataError("truncated binary file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_u64(in));
}

inline void check_magic(std::istream& in, const char* magic,
                        const std::string& what) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0)
    throw DataError("not a " + what + " file (bad magic)");
}

}  // namespace detail

/// Parameter snapshot.  Little-endian layout:
///   "PCNNCKPT" | u32 version | u64 count |
///   per parameter: u32 name length | name | u8 trainable | u8 counted
///                  | u64 rows | u64 cols | rows*cols f64 (column-major)
inline void save_checkpoint(const ParameterStore& store,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write("PCNNCKPT", 8);
  detail::put_u32(out, 1);
  detail::put_u64(out, store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    const Parameter& p = store.at(i);
    detail::put_u32(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    out.put(p.trainable ? 1 : 0);
    out.put(p.counted ? 1 : 0);
    detail::put_u64(out, static_cast<uint64_t>(p.value.rows()));
    detail::put_u64(out, static_cast<uint64_t>(p.value.cols()));
    for (Eigen::Index k = 0; k < p.value.size(); ++k)
      detail::put_f64(out, p.value(k));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

/// Restore values into an existing store.  Every stored parameter must exist
/// with the same shape; trainable/counted flags in the file are informational
/// and left untouched on the target.
inline void load_checkpoint(ParameterStore& store,
                            const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  detail::check_magic(in, "PCNNCKPT", "checkpoint");
  const uint32_t version = detail::get_u32(in);
  if (version != 1)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  const uint64_t count = detail::get_u64(in);
  if (count != store.size())
    throw DataError("checkpoint holds " + std::to_string(count) +
                    " parameters, network has " + std::to_string(store.size()));
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t len = detail::get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("truncated checkpoint");
    in.get();  // trainable flag (ignored)
    in.get();  // counted flag (ignored)
    const uint64_t rows = detail::get_u64(in);
    const uint64_t cols = detail::get_u64(in);
    if (!store.has(name))
      throw DataError("checkpoint parameter " + name + " unknown to network");
    Parameter& p = store.at(store.id_of(name));
    if (static_cast<uint64_t>(p.value.rows()) != rows ||
        static_cast<uint64_t>(p.value.cols()) != cols)
      throw DataError("checkpoint parameter " + name + " shape mismatch");
    for (Eigen::Index k = 0; k < p.value.size(); ++k)
      p.value(k) = detail::get_f64(in);
  }
}

/// Complex matrix file.  Little-endian layout:
///   "PCNNCMAT" | u32 version | u64 rows | u64 cols
///   | rows*cols (re, im) f64 pairs, column-major.
inline void save_matrix(const CMat& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write("PCNNCMAT", 8);
  detail::put_u32(out, 1);
  detail::put_u64(out, static_cast<uint64_t>(m.rows()));
  detail::put_u64(out, static_cast<uint64_t>(m.cols()));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    detail::put_f64(out, m(k).real());
    detail::put_f64(out, m(k).imag());
  }
  if (!out) throw DataError("write failed for " + path.string());
}

inline CMat load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  detail::check_magic(in, "PCNNCMAT", "matrix");
  const uint32_t version = detail::get_u32(in);
  if (version != 1)
    throw DataError("unsupported matrix file version " +
                    std::to_string(version));
  const uint64_t rows = detail::get_u64(in);
  const uint64_t cols = detail::get_u64(in);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw DataError("implausible matrix dimensions");
  CMat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const double re = detail::get_f64(in);
    const double im = detail::get_f64(in);
    m(k) = Complex(re, im);
  }
  return m;
}

}  // namespace pcnn

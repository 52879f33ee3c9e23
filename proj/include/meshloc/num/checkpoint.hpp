#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "meshloc/common/errors.hpp"
#include "meshloc/num/tape.hpp"

namespace meshloc::num {

// Checkpoint layout (all integers and floats little-endian):
//   8-byte magic "MLCKPT01" (version in the magic)
//   u64 tensor count
//   per tensor: u32 name length, name bytes, u8 trainable flag,
//               u32 rank, i64 dims[rank], f64 values[numel]

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'M', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  std::reverse(buf, buf + sizeof(T));
#endif
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw DataError(path + ": truncated checkpoint");
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  std::reverse(buf, buf + sizeof(T));
#endif
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ParamSetT<S>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(detail::kCheckpointMagic, 8);
  detail::write_le<std::uint64_t>(os, params.entries().size());
  for (const auto& [name, entry] : params.entries()) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le<std::uint8_t>(os, entry.trainable ? 1 : 0);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(entry.value.rank()));
    for (int d : entry.value.shape()) detail::write_le<std::int64_t>(os, d);
    for (Eigen::Index i = 0; i < entry.value.size(); ++i)
      detail::write_le<double>(os, static_cast<double>(entry.value[i]));
  }
  if (!os) throw DataError(path + ": write failed");
}

template <typename S>
ParamSetT<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw DataError(path + ": not a checkpoint file (bad magic)");
  const auto count = detail::read_le<std::uint64_t>(is, path);
  ParamSetT<S> params;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = detail::read_le<std::uint32_t>(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError(path + ": truncated checkpoint");
    const bool trainable = detail::read_le<std::uint8_t>(is, path) != 0;
    const auto rank = detail::read_le<std::uint32_t>(is, path);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      const auto dim = detail::read_le<std::int64_t>(is, path);
      if (dim < 0 || dim > (1ll << 32)) throw DataError(path + ": corrupt tensor dimension");
      d = static_cast<int>(dim);
    }
    TensorT<S> t(shape);
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t[i] = static_cast<S>(detail::read_le<double>(is, path));
    params.add(name, std::move(t), trainable);
  }
  return params;
}

/// FNV-1a over a file's bytes; used to key descriptor caches.
inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open for hashing");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!is) break;
  }
  return h;
}

/// FNV-1a over the in-memory parameter set (names, shapes, raw values).
template <typename S>
std::uint64_t hash_params(const ParamSetT<S>& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, entry] : params.entries()) {
    mix_bytes(name.data(), name.size());
    for (int d : entry.value.shape()) mix_bytes(&d, sizeof(d));
    for (Eigen::Index i = 0; i < entry.value.size(); ++i) {
      const double v = static_cast<double>(entry.value[i]);
      mix_bytes(&v, sizeof(v));
    }
  }
  return h;
}

}  // namespace meshloc::num

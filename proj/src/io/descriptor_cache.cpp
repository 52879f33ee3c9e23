#include "meshloc/io/descriptor_cache.hpp"

#include <cstring>
#include <fstream>

#include "meshloc/common/errors.hpp"
#include "meshloc/num/checkpoint.hpp"

namespace meshloc::io {

namespace {
constexpr char kMagic[8] = {'M', 'L', 'D', 'C', '0', '0', '0', '1'};
}

void write_descriptor_cache(const std::string& path, std::uint64_t mesh_hash,
                            std::uint64_t checkpoint_hash, const Eigen::MatrixXd& descriptors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(kMagic, 8);
  num::detail::write_le<std::uint64_t>(os, mesh_hash);
  num::detail::write_le<std::uint64_t>(os, checkpoint_hash);
  num::detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(descriptors.rows()));
  num::detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(descriptors.cols()));
  for (Eigen::Index r = 0; r < descriptors.rows(); ++r)
    for (Eigen::Index c = 0; c < descriptors.cols(); ++c)
      num::detail::write_le<double>(os, descriptors(r, c));
  if (!os) throw DataError(path + ": write failed");
}

Eigen::MatrixXd read_descriptor_cache(const std::string& path, std::uint64_t expected_mesh_hash,
                                      std::uint64_t expected_checkpoint_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path + ": not a descriptor cache (bad magic)");
  const auto mesh_hash = num::detail::read_le<std::uint64_t>(is, path);
  const auto ckpt_hash = num::detail::read_le<std::uint64_t>(is, path);
  if (mesh_hash != expected_mesh_hash)
    throw DataError(path + ": cache was built for a different mesh (hash mismatch)");
  if (ckpt_hash != expected_checkpoint_hash)
    throw DataError(path + ": cache was built for a different checkpoint (hash mismatch)");
  const auto rows = num::detail::read_le<std::uint64_t>(is, path);
  const auto cols = num::detail::read_le<std::uint64_t>(is, path);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = num::detail::read_le<double>(is, path);
  return out;
}

}  // namespace meshloc::io

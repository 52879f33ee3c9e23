#include "meshloc/io/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "meshloc/common/errors.hpp"

namespace meshloc::io {

namespace {

void expect_token(std::istream& is, const std::string& path, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want)
    throw DataError(path + ": expected '" + want + "' in image header, got '" + tok + "'");
}

long read_header_int(std::istream& is, const std::string& path) {
  // skip whitespace and '#' comments
  while (true) {
    const int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  long v = -1;
  if (!(is >> v) || v < 0) throw DataError(path + ": malformed image header");
  return v;
}

}  // namespace

void write_ppm(const std::string& path, const scene::Image& rgb) {
  if (rgb.channels != 3) throw DataError(path + ": write_ppm needs a 3-channel image");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "P6\n" << rgb.width << " " << rgb.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(rgb.width) * 3);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<unsigned char>(
            std::clamp(std::lround(rgb.at(c, y, x) * 255.0), 0l, 255l));
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw DataError(path + ": write failed");
}

scene::Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open");
  expect_token(is, path, "P6");
  const long w = read_header_int(is, path);
  const long h = read_header_int(is, path);
  const long maxval = read_header_int(is, path);
  if (maxval != 255) throw DataError(path + ": only 8-bit PPM supported");
  is.get();  // single whitespace after maxval
  scene::Image img = scene::Image::zeros(static_cast<int>(w), static_cast<int>(h), 3);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (long y = 0; y < h; ++y) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw DataError(path + ": truncated PPM body");
    for (long x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, static_cast<int>(y), static_cast<int>(x)) =
            row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
  }
  return img;
}

void write_pgm16(const std::string& path, const scene::Image& depth, double depth_scale) {
  if (depth.channels != 1) throw DataError(path + ": write_pgm16 needs a 1-channel image");
  if (depth_scale <= 0) throw ConfigError("write_pgm16: depth_scale must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(depth.width) * 2);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const long ticks = std::clamp(std::lround(depth.at(0, y, x) / depth_scale), 0l, 65535l);
      row[static_cast<std::size_t>(x) * 2] = static_cast<unsigned char>(ticks >> 8);
      row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<unsigned char>(ticks & 0xff);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw DataError(path + ": write failed");
}

scene::Image read_pgm16(const std::string& path, double depth_scale) {
  if (depth_scale <= 0) throw ConfigError("read_pgm16: depth_scale must be positive");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open");
  expect_token(is, path, "P5");
  const long w = read_header_int(is, path);
  const long h = read_header_int(is, path);
  const long maxval = read_header_int(is, path);
  if (maxval != 65535) throw DataError(path + ": only 16-bit PGM supported");
  is.get();
  scene::Image img = scene::Image::zeros(static_cast<int>(w), static_cast<int>(h), 1);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (long y = 0; y < h; ++y) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw DataError(path + ": truncated PGM body");
    for (long x = 0; x < w; ++x) {
      const unsigned ticks = (static_cast<unsigned>(row[static_cast<std::size_t>(x) * 2]) << 8) |
                             row[static_cast<std::size_t>(x) * 2 + 1];
      img.at(0, static_cast<int>(y), static_cast<int>(x)) = ticks * depth_scale;
    }
  }
  return img;
}

scene::Image resize_bilinear(const scene::Image& src, int width, int height) {
  scene::Image out = scene::Image::zeros(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
      const int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double fx = u - x0, fy = v - y0;
      for (int c = 0; c < src.channels; ++c)
        out.at(c, y, x) = (1 - fy) * ((1 - fx) * src.at(c, y0, x0) + fx * src.at(c, y0, x1)) +
                          fy * ((1 - fx) * src.at(c, y1, x0) + fx * src.at(c, y1, x1));
    }
  return out;
}

scene::Image resize_nearest(const scene::Image& src, int width, int height) {
  scene::Image out = scene::Image::zeros(width, height, src.channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * src.width / width), src.width - 1);
      const int sy = std::min(static_cast<int>((y + 0.5) * src.height / height), src.height - 1);
      for (int c = 0; c < src.channels; ++c) out.at(c, y, x) = src.at(c, sy, sx);
    }
  return out;
}

}  // namespace meshloc::io

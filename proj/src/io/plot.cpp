#include "meshloc/io/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace meshloc::io {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used
const std::map<char, std::array<unsigned char, 7>>& glyphs() {
  static const std::map<char, std::array<unsigned char, 7>> table = {
      {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
      {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
      {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
      {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
      {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
      {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
      {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
      {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
      {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
      {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
      {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
      {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
      {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
      {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
      {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
      {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
      {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return table;
}

void fill_rect(scene::Image& img, int x0, int y0, int x1, int y1, const Eigen::Vector3d& c) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.width - 1, x1);
  y1 = std::min(img.height - 1, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      for (int k = 0; k < 3; ++k) img.at(k, y, x) = c[k];
}

void draw_line(scene::Image& img, double x0, double y0, double x1, double y1,
               const Eigen::Vector3d& c) {
  const int steps = std::max(2, static_cast<int>(std::hypot(x1 - x0, y1 - y0)) * 2);
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
    for (int k = 0; k < 3; ++k) img.at(k, y, x) = c[k];
  }
}

void draw_text(scene::Image& img, int x, int y, const std::string& text, const Eigen::Vector3d& c,
               int scale = 1) {
  int cx = x;
  for (char raw : text) {
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    auto it = glyphs().find(ch);
    if (it != glyphs().end()) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[static_cast<std::size_t>(row)] & (1 << (4 - col)))
            fill_rect(img, cx + col * scale, y + row * scale, cx + col * scale + scale - 1,
                      y + row * scale + scale - 1, c);
    }
    cx += 6 * scale;
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Frame {
  int left, right, top, bottom;
};

Frame chart_frame(scene::Image& img, const std::string& title) {
  fill_rect(img, 0, 0, img.width - 1, img.height - 1, {1, 1, 1});
  draw_text(img, 20, 12, title, {0.1, 0.1, 0.1}, 2);
  return {70, img.width - 25, 45, img.height - 45};
}

}  // namespace

scene::Image render_line_chart(const std::vector<Series>& series, const std::string& title,
                               int width, int height) {
  scene::Image img = scene::Image::zeros(width, height, 3);
  const Frame f = chart_frame(img, title);
  double lo = 0.0, hi = 1.0;
  std::size_t max_len = 2;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.values) {
      if (first) {
        lo = hi = v;
        first = false;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  for (const auto& s : series) max_len = std::max(max_len, s.values.size());
  if (hi <= lo) hi = lo + 1.0;

  const Eigen::Vector3d axis{0.25, 0.25, 0.25};
  draw_line(img, f.left, f.top, f.left, f.bottom, axis);
  draw_line(img, f.left, f.bottom, f.right, f.bottom, axis);
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    const int y = f.bottom - static_cast<int>((f.bottom - f.top) * tick / 4.0);
    draw_line(img, f.left - 4, y, f.left, y, axis);
    draw_text(img, 6, y - 3, format_number(v), axis);
  }

  int legend_y = f.top;
  for (const auto& s : series) {
    if (s.values.size() < 2) continue;
    for (std::size_t i = 0; i + 1 < s.values.size(); ++i) {
      auto px = [&](std::size_t k) {
        return f.left + static_cast<double>(f.right - f.left) * k / (max_len - 1);
      };
      auto py = [&](double v) {
        return f.bottom - (f.bottom - f.top) * (v - lo) / (hi - lo);
      };
      draw_line(img, px(i), py(s.values[i]), px(i + 1), py(s.values[i + 1]), s.color);
    }
    draw_text(img, f.right - 180, legend_y, s.label, s.color);
    legend_y += 14;
  }
  return img;
}

scene::Image render_bar_chart(const std::vector<std::string>& labels,
                              const std::vector<double>& values, const std::string& title,
                              int width, int height) {
  scene::Image img = scene::Image::zeros(width, height, 3);
  const Frame f = chart_frame(img, title);
  double hi = 1.0;
  for (double v : values) hi = std::max(hi, v);

  const Eigen::Vector3d axis{0.25, 0.25, 0.25};
  draw_line(img, f.left, f.top, f.left, f.bottom, axis);
  draw_line(img, f.left, f.bottom, f.right, f.bottom, axis);
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = hi * tick / 4.0;
    const int y = f.bottom - static_cast<int>((f.bottom - f.top) * tick / 4.0);
    draw_line(img, f.left - 4, y, f.left, y, axis);
    draw_text(img, 6, y - 3, format_number(v), axis);
  }

  const int n = static_cast<int>(values.size());
  if (n == 0) return img;
  const double slot = static_cast<double>(f.right - f.left) / n;
  for (int i = 0; i < n; ++i) {
    const int x0 = f.left + static_cast<int>(slot * i + slot * 0.15);
    const int x1 = f.left + static_cast<int>(slot * i + slot * 0.85);
    const int y = f.bottom - static_cast<int>((f.bottom - f.top) * values[static_cast<std::size_t>(i)] / hi);
    fill_rect(img, x0, y, x1, f.bottom - 1, {0.25, 0.45, 0.8});
    draw_text(img, x0, f.bottom + 8, labels[static_cast<std::size_t>(i)].substr(0, 12), axis);
    draw_text(img, x0, y - 12, format_number(values[static_cast<std::size_t>(i)]), axis);
  }
  return img;
}

}  // namespace meshloc::io

#include "meshloc/synth/render.hpp"

#include <algorithm>
#include <cmath>

namespace meshloc::synth {

namespace {

constexpr double kNearPlane = 0.05;

struct ClipVertex {
  Eigen::Vector3d cam;    // camera-space position
  Eigen::Vector3d color;
};

/// Sutherland-Hodgman clip against z = near; triangles yield up to 4 vertices.
int clip_near(const ClipVertex in[3], ClipVertex out[4]) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool a_in = a.cam.z() > kNearPlane;
    const bool b_in = b.cam.z() > kNearPlane;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
      out[n++] = {a.cam + t * (b.cam - a.cam), a.color + t * (b.color - a.color)};
    }
  }
  return n;
}

struct ScreenVertex {
  double x, y;       // continuous pixel coordinates
  double inv_z;      // 1/depth
  Eigen::Vector3d color_over_z;
};

double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
  // for counter-clockwise triangles: top edge (horizontal, going right) or
  // left edge (going up in y-down screen coordinates)
  return (a.y == b.y && b.x > a.x) || (b.y < a.y);
}

void raster_triangle(const ScreenVertex v[3], const scene::PinholeCamera& cam,
                     scene::Image& rgb, scene::Image& depth) {
  double area = edge(v[0], v[1], v[2].x, v[2].y);
  const ScreenVertex* p0 = &v[0];
  const ScreenVertex* p1 = &v[1];
  const ScreenVertex* p2 = &v[2];
  if (area < 0) {  // render both windings: flip to counter-clockwise
    std::swap(p1, p2);
    area = -area;
  }
  if (area == 0.0) return;

  const double min_x = std::min({p0->x, p1->x, p2->x});
  const double max_x = std::max({p0->x, p1->x, p2->x});
  const double min_y = std::min({p0->y, p1->y, p2->y});
  const double max_y = std::max({p0->y, p1->y, p2->y});
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(max_y)));

  const bool tl0 = top_left(*p1, *p2);
  const bool tl1 = top_left(*p2, *p0);
  const bool tl2 = top_left(*p0, *p1);

  for (int py = y0; py <= y1; ++py) {
    const double cy = py + 0.5;
    for (int px = x0; px <= x1; ++px) {
      const double cx = px + 0.5;
      const double w0 = edge(*p1, *p2, cx, cy);
      const double w1 = edge(*p2, *p0, cx, cy);
      const double w2 = edge(*p0, *p1, cx, cy);
      const bool inside = (w0 > 0 || (w0 == 0 && tl0)) && (w1 > 0 || (w1 == 0 && tl1)) &&
                          (w2 > 0 || (w2 == 0 && tl2));
      if (!inside) continue;
      const double b0 = w0 / area, b1 = w1 / area, b2 = w2 / area;
      const double inv_z = b0 * p0->inv_z + b1 * p1->inv_z + b2 * p2->inv_z;
      if (inv_z <= 0.0) continue;
      const double z = 1.0 / inv_z;
      double& zbuf = depth.at(0, py, px);
      if (zbuf > 0.0 && zbuf <= z) continue;
      zbuf = z;
      const Eigen::Vector3d color =
          (b0 * p0->color_over_z + b1 * p1->color_over_z + b2 * p2->color_over_z) * z;
      rgb.at(0, py, px) = std::clamp(color.x(), 0.0, 1.0);
      rgb.at(1, py, px) = std::clamp(color.y(), 0.0, 1.0);
      rgb.at(2, py, px) = std::clamp(color.z(), 0.0, 1.0);
    }
  }
}

}  // namespace

scene::FrameRecord render_rgbd(const SyntheticScene& scene_data, int config_id,
                               const scene::RigidTransform& pose,
                               const scene::PinholeCamera& cam) {
  const scene::TriangleMesh mesh = scene_data.configured_mesh(config_id);
  const double illumination =
      scene_data.configurations[static_cast<std::size_t>(config_id)].illumination;

  scene::FrameRecord frame;
  frame.rgb = scene::Image::zeros(cam.width, cam.height, 3);
  frame.depth = scene::Image::zeros(cam.width, cam.height, 1);
  frame.pose = pose;
  frame.config_id = config_id;

  for (int f = 0; f < mesh.face_count(); ++f) {
    ClipVertex tri[3];
    for (int k = 0; k < 3; ++k) {
      const int vi = mesh.faces(f, k);
      tri[k].cam = pose.apply(mesh.positions.row(vi).transpose());
      tri[k].color = (mesh.colors.row(vi).transpose() * illumination)
                         .cwiseMax(0.0)
                         .cwiseMin(1.0);
    }
    ClipVertex clipped[4];
    const int n = clip_near(tri, clipped);
    if (n < 3) continue;

    ScreenVertex screen[4];
    for (int k = 0; k < n; ++k) {
      const double z = clipped[k].cam.z();
      screen[k] = {cam.fx * clipped[k].cam.x() / z + cam.cx,
                   cam.fy * clipped[k].cam.y() / z + cam.cy, 1.0 / z, clipped[k].color / z};
    }
    // fan-triangulate the clipped polygon
    for (int k = 1; k + 1 < n; ++k) {
      const ScreenVertex fan[3] = {screen[0], screen[k], screen[k + 1]};
      raster_triangle(fan, cam, frame.rgb, frame.depth);
    }
  }
  return frame;
}

}  // namespace meshloc::synth

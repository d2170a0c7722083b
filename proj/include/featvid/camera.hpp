#pragma once

// Pinhole camera, OpenCV convention: +x right, +y down, +z forward.

#include "json.hpp"

#include "featvid/core.hpp"

namespace featvid {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  std::array<double, 16> world_from_camera{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major

  double r(int row, int col) const { return world_from_camera[std::size_t(row * 4 + col)]; }
  Vec3 position() const { return {r(0, 3), r(1, 3), r(2, 3)}; }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(Errc::range, "camera focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(Errc::range, "camera image size must be positive");
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += r(k, i) * r(k, j);
        if (std::abs(d - (i == j ? 1.0 : 0.0)) > 1e-6) fail(Errc::range, "camera rotation is not orthonormal");
      }
  }

  /// Ray through the center of pixel (u, v).
  Ray ray(int u, int v) const {
    const Vec3 local{(double(u) + 0.5 - cx) / fx, (double(v) + 0.5 - cy) / fy, 1.0};
    Vec3 world{r(0, 0) * local.x + r(0, 1) * local.y + r(0, 2) * local.z,
               r(1, 0) * local.x + r(1, 1) * local.y + r(1, 2) * local.z,
               r(2, 0) * local.x + r(2, 1) * local.y + r(2, 2) * local.z};
    return {position(), normalized(world)};
  }
};

/// Camera on a sphere around `target`, looking at it, with world +y as up
/// hint. Angles in radians; `fov_y` is the vertical field of view.
inline Camera orbit_camera(double azimuth, double elevation, double distance, int width, int height,
                           double fov_y = 0.8, Vec3 target = {0.5, 0.5, 0.5}) {
  const Vec3 eye = target + Vec3{distance * std::cos(elevation) * std::sin(azimuth), distance * std::sin(elevation),
                                 distance * std::cos(elevation) * std::cos(azimuth)};
  const Vec3 forward = normalized(target - eye);
  Vec3 right = cross(forward, Vec3{0, 1, 0});
  if (norm(right) < 1e-9) right = Vec3{1, 0, 0};
  right = normalized(right);
  const Vec3 down = cross(forward, right);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * double(height) / std::tan(0.5 * fov_y);
  cam.fx = cam.fy;
  cam.cx = 0.5 * double(width);
  cam.cy = 0.5 * double(height);
  const Vec3 cols[3] = {right, down, forward};
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) cam.world_from_camera[std::size_t(row * 4 + col)] = cols[col][row];
    cam.world_from_camera[std::size_t(row * 4 + 3)] = eye[row];
  }
  return cam;
}

/// Cameras spread evenly in azimuth over two elevation rings.
inline std::vector<Camera> orbit_rig(int count, int width, int height, double distance = 1.6) {
  std::vector<Camera> rig;
  for (int i = 0; i < count; ++i) {
    const double az = 6.283185307179586 * double(i) / double(count);
    const double el = (i % 2 == 0) ? 0.35 : -0.25;
    rig.push_back(orbit_camera(az, el, distance, width, height));
  }
  return rig;
}

inline nlohmann::json camera_to_json(const Camera& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height},
          {"world_from_camera", c.world_from_camera}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const auto m = j.at("world_from_camera").get<std::vector<double>>();
    if (m.size() != 16) fail(Errc::format, "world_from_camera must have 16 entries");
    std::copy(m.begin(), m.end(), c.world_from_camera.begin());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("camera json: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace featvid

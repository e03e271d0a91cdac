#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dp3/tensor.hpp"

namespace dp3 {

using Vec3 = std::array<double, 3>;

struct PointCloud {
  Tensor points;          // [N,3] world frame, meters
  Tensor colors;          // [N,3] in [0,1], or empty
  bool has_colors() const { return colors.numel() > 0; }
  std::size_t size() const { return points.rank() == 2 ? points.dim(0) : 0; }
};

struct Aabb {
  Vec3 min;
  Vec3 max;
  bool contains(double x, double y, double z) const {
    return x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1] && z >= min[2] && z <= max[2];
  }
};

// Pinhole camera with a rigid camera->world transform. Depth value 0 marks an
// invalid pixel.
struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  std::size_t width = 0, height = 0;
  std::array<std::array<double, 3>, 3> rot{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};  // camera->world
  Vec3 trans{0, 0, 0};

  void validate() const;  // throws std::invalid_argument on a bad model
  Vec3 to_world(const Vec3& pc) const;
  // world -> pixel (u, v) and camera-frame depth; used by the depth renderer
  // and by the projection round-trip tests
  void project(const Vec3& pw, double& u, double& v, double& z) const;
};

struct DepthImage {
  std::size_t width = 0, height = 0;
  std::vector<double> z;  // row-major, meters, 0 = invalid
  double at(std::size_t u, std::size_t v) const { return z[v * width + u]; }
  double& at(std::size_t u, std::size_t v) { return z[v * width + u]; }
};

PointCloud unproject(const DepthImage& depth, const CameraModel& cam);
PointCloud crop(const PointCloud& cloud, const Aabb& box);
PointCloud fps(const PointCloud& cloud, std::size_t m, std::uint64_t seed);
PointCloud strip_color(const PointCloud& cloud);

// fps with the first index fixed; the public fps() picks it by seed. Split
// out so an oracle can drive both implementations from the same start.
PointCloud fps_from(const PointCloud& cloud, std::size_t m, std::size_t first);

}  // namespace dp3

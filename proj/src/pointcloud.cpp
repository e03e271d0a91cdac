#include "dp3/pointcloud.hpp"

#include <cmath>
#include <stdexcept>

#include "dp3/rng.hpp"

namespace dp3 {

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width == 0 || height == 0) throw std::invalid_argument("camera: zero image size");
  if (cx < 0 || cx >= static_cast<double>(width) || cy < 0 || cy >= static_cast<double>(height))
    throw std::invalid_argument("camera: principal point outside image");
  // R^T R == I and det == +1
  double det = rot[0][0] * (rot[1][1] * rot[2][2] - rot[1][2] * rot[2][1]) -
               rot[0][1] * (rot[1][0] * rot[2][2] - rot[1][2] * rot[2][0]) +
               rot[0][2] * (rot[1][0] * rot[2][1] - rot[1][1] * rot[2][0]);
  if (std::abs(det - 1.0) > 1e-9) throw std::invalid_argument("camera: rotation det != +1");
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double dot = 0;
      for (int k = 0; k < 3; ++k) dot += rot[k][a] * rot[k][b];
      if (std::abs(dot - (a == b ? 1.0 : 0.0)) > 1e-9)
        throw std::invalid_argument("camera: rotation not orthonormal");
    }
}

Vec3 CameraModel::to_world(const Vec3& pc) const {
  Vec3 out;
  for (int r = 0; r < 3; ++r)
    out[r] = rot[r][0] * pc[0] + rot[r][1] * pc[1] + rot[r][2] * pc[2] + trans[r];
  return out;
}

void CameraModel::project(const Vec3& pw, double& u, double& v, double& z) const {
  Vec3 d{pw[0] - trans[0], pw[1] - trans[1], pw[2] - trans[2]};
  Vec3 pc;
  for (int r = 0; r < 3; ++r) pc[r] = rot[0][r] * d[0] + rot[1][r] * d[1] + rot[2][r] * d[2];
  z = pc[2];
  u = cx + fx * pc[0] / pc[2];
  v = cy + fy * pc[1] / pc[2];
}

PointCloud unproject(const DepthImage& depth, const CameraModel& cam) {
  cam.validate();
  if (depth.z.size() != depth.width * depth.height)
    throw std::invalid_argument("depth image: buffer size does not match dimensions");
  std::vector<double> pts;
  pts.reserve(depth.z.size() * 3);
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      double z = depth.at(u, v);
      if (z <= 0.0) continue;
      Vec3 pc{(static_cast<double>(u) - cam.cx) * z / cam.fx,
              (static_cast<double>(v) - cam.cy) * z / cam.fy, z};
      Vec3 pw = cam.to_world(pc);
      pts.push_back(pw[0]);
      pts.push_back(pw[1]);
      pts.push_back(pw[2]);
    }
  }
  PointCloud out;
  std::size_t n = pts.size() / 3;
  out.points = Tensor({n, 3}, std::move(pts));
  return out;
}

PointCloud crop(const PointCloud& cloud, const Aabb& box) {
  for (int k = 0; k < 3; ++k)
    if (box.min[k] > box.max[k]) throw std::invalid_argument("crop: box min exceeds max");
  std::size_t n = cloud.size();
  std::vector<double> pts;
  std::vector<double> cols;
  bool colored = cloud.has_colors();
  for (std::size_t i = 0; i < n; ++i) {
    double x = cloud.points.at(i, 0);
    double y = cloud.points.at(i, 1);
    double z = cloud.points.at(i, 2);
    if (!box.contains(x, y, z)) continue;
    pts.insert(pts.end(), {x, y, z});
    if (colored)
      cols.insert(cols.end(),
                  {cloud.colors.at(i, 0), cloud.colors.at(i, 1), cloud.colors.at(i, 2)});
  }
  PointCloud out;
  std::size_t kept = pts.size() / 3;
  out.points = Tensor({kept, 3}, std::move(pts));
  if (colored) out.colors = Tensor({kept, 3}, std::move(cols));
  return out;
}

namespace {

PointCloud gather(const PointCloud& cloud, const std::vector<std::size_t>& idx) {
  PointCloud out;
  out.points = Tensor({idx.size(), 3});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int k = 0; k < 3; ++k) out.points.at(i, k) = cloud.points.at(idx[i], k);
  if (cloud.has_colors()) {
    out.colors = Tensor({idx.size(), 3});
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int k = 0; k < 3; ++k) out.colors.at(i, k) = cloud.colors.at(idx[i], k);
  }
  return out;
}

inline double sq_dist(const Tensor& pts, std::size_t a, std::size_t b) {
  double dx = pts.at(a, 0) - pts.at(b, 0);
  double dy = pts.at(a, 1) - pts.at(b, 1);
  double dz = pts.at(a, 2) - pts.at(b, 2);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

PointCloud fps_from(const PointCloud& cloud, std::size_t m, std::size_t first) {
  std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("fps: empty cloud");
  if (m == 0) throw std::invalid_argument("fps: sample count must be >= 1");
  if (first >= n) throw std::invalid_argument("fps: first index out of range");
  if (m >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return gather(cloud, all);
  }

  std::vector<std::size_t> selected;
  selected.reserve(m);
  selected.push_back(first);
  std::vector<bool> taken(n, false);
  taken[first] = true;
  // min squared distance from each point to the selected set, updated
  // incrementally as picks land
  std::vector<double> mind(n);
  for (std::size_t i = 0; i < n; ++i) mind[i] = sq_dist(cloud.points, i, first);

  while (selected.size() < m) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (mind[i] > best_d) {  // strict keeps the lowest index on ties
        best_d = mind[i];
        best = i;
      }
    }
    selected.push_back(best);
    taken[best] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double d = sq_dist(cloud.points, i, best);
      if (d < mind[i]) mind[i] = d;
    }
  }
  return gather(cloud, selected);
}

PointCloud fps(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
  std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("fps: empty cloud");
  if (m == 0) throw std::invalid_argument("fps: sample count must be >= 1");
  Rng rng(seed);
  return fps_from(cloud, m, rng.index(n));
}

PointCloud strip_color(const PointCloud& cloud) {
  PointCloud out;
  out.points = cloud.points;
  return out;
}

}  // namespace dp3

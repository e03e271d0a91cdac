#include "dp3/env.hpp"

#include <cmath>
#include <stdexcept>

#include "dp3/rng.hpp"

namespace dp3 {

namespace {

Vec3 normalize3(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double clampd(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

// uniform point on the surface of an axis-aligned cube of the given side,
// centered at the origin
Vec3 cube_surface_offset(Rng& rng, double side) {
  const double h = side / 2.0;
  const std::size_t face = rng.index(6);
  const std::size_t axis = face / 2;
  Vec3 o{rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)};
  o[axis] = face % 2 == 0 ? -h : h;
  return o;
}

Vec3 sphere_surface_offset(Rng& rng, double radius) {
  while (true) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n < 1e-12) continue;
    return {radius * v[0] / n, radius * v[1] / n, radius * v[2] / n};
  }
}

constexpr double kGripperColor[3] = {0.5, 0.5, 0.5};
constexpr double kTargetColor[3] = {0.8, 0.1, 0.1};
constexpr double kGroundColor[3] = {0.1, 0.6, 0.1};
constexpr double kClutterColor[3] = {0.1, 0.1, 0.8};

}  // namespace

CameraModel reach_camera() {
  const Vec3 eye{0.5, -0.8, 0.9};
  const Vec3 look{0.5, 0.5, 0.5};
  const Vec3 up{0.0, 0.0, 1.0};

  const Vec3 zc = normalize3({look[0] - eye[0], look[1] - eye[1], look[2] - eye[2]});
  const Vec3 xc = normalize3(cross3(zc, up));
  const Vec3 yc = cross3(zc, xc);

  CameraModel cam;
  cam.fx = 120.0;
  cam.fy = 120.0;
  cam.cx = 42.0;
  cam.cy = 42.0;
  cam.width = 84;
  cam.height = 84;
  for (std::size_t r = 0; r < 3; ++r) {
    cam.rot[r][0] = xc[r];
    cam.rot[r][1] = yc[r];
    cam.rot[r][2] = zc[r];
  }
  cam.trans = eye;
  cam.validate();
  return cam;
}

Reach3dEnv::Reach3dEnv(Reach3dConfig cfg) : cfg_(cfg), cam_(reach_camera()) {}

void Reach3dEnv::reset(std::uint64_t seed, const Vec3& target) {
  for (double c : target) {
    if (c < 0.0 || c > 1.0) throw std::invalid_argument("reach3d: target outside workspace");
  }
  p_ = {0.5, 0.5, 0.5};
  g_ = target;
  t_ = 0;
  done_ = false;
  success_ = false;

  // Independent streams per scene component so turning clutter on or off
  // leaves the rest of the scene untouched.
  Rng grip(derive_seed(seed, "gripper"));
  gripper_offsets_.resize(cfg_.gripper_points);
  for (auto& o : gripper_offsets_) o = cube_surface_offset(grip, 0.04);

  Rng targ(derive_seed(seed, "target"));
  target_offsets_.resize(cfg_.target_points);
  for (auto& o : target_offsets_) o = sphere_surface_offset(targ, 0.03);

  Rng ground(derive_seed(seed, "ground"));
  ground_points_.resize(cfg_.ground_points);
  for (auto& pt : ground_points_) pt = {ground.uniform(), ground.uniform(), 0.0};

  clutter_points_.clear();
  clutter_points_.reserve(cfg_.clutter * cfg_.distractor_points);
  for (std::size_t i = 0; i < cfg_.clutter; ++i) {
    Rng dis(derive_seed(seed, "distractor", i));
    // parked on the ground just outside the workspace in x, so cropping to
    // the workspace box removes them along with the ground
    const bool left = dis.index(2) == 0;
    const Vec3 center{left ? dis.uniform(-0.15, -0.05) : dis.uniform(1.05, 1.15),
                      dis.uniform(0.1, 0.9), 0.02};
    for (std::size_t j = 0; j < cfg_.distractor_points; ++j) {
      const Vec3 o = cube_surface_offset(dis, 0.04);
      clutter_points_.push_back({center[0] + o[0], center[1] + o[1], center[2] + o[2]});
    }
  }
}

Reach3dEnv::StepResult Reach3dEnv::step(const Vec3& action) {
  if (done_) throw std::logic_error("reach3d: step after episode end");
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = clampd(action[c], -cfg_.max_step, cfg_.max_step);
    p_[c] = clampd(p_[c] + d, 0.0, 1.0);
  }
  ++t_;
  const double dx = p_[0] - g_[0], dy = p_[1] - g_[1], dz = p_[2] - g_[2];
  if (std::sqrt(dx * dx + dy * dy + dz * dz) < cfg_.success_radius) success_ = true;
  done_ = success_ || t_ >= cfg_.horizon;
  return {done_, success_};
}

Vec3 Reach3dEnv::expert_action() const {
  Vec3 a;
  for (std::size_t c = 0; c < 3; ++c) a[c] = clampd(g_[c] - p_[c], -cfg_.max_step, cfg_.max_step);
  return a;
}

PointCloud Reach3dEnv::cloud() const {
  const std::size_t n =
      gripper_offsets_.size() + target_offsets_.size() + ground_points_.size() +
      clutter_points_.size();
  std::vector<double> pts;
  std::vector<double> cols;
  pts.reserve(n * 3);
  cols.reserve(n * 3);
  auto emit = [&](const Vec3& p, const double color[3]) {
    pts.insert(pts.end(), {p[0], p[1], p[2]});
    cols.insert(cols.end(), {color[0], color[1], color[2]});
  };
  for (const auto& o : gripper_offsets_) emit({p_[0] + o[0], p_[1] + o[1], p_[2] + o[2]}, kGripperColor);
  for (const auto& o : target_offsets_) emit({g_[0] + o[0], g_[1] + o[1], g_[2] + o[2]}, kTargetColor);
  for (const auto& pt : ground_points_) emit(pt, kGroundColor);
  for (const auto& pt : clutter_points_) emit(pt, kClutterColor);
  PointCloud cloud;
  cloud.points = Tensor({n, 3}, std::move(pts));
  cloud.colors = Tensor({n, 3}, std::move(cols));
  return cloud;
}

DepthImage Reach3dEnv::depth() const { return render_depth(cloud(), cam_); }

DepthImage render_depth(const PointCloud& cloud, const CameraModel& cam) {
  DepthImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.z.assign(cam.width * cam.height, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 pw{cloud.points.at(i, 0), cloud.points.at(i, 1), cloud.points.at(i, 2)};
    double u, v, z;
    cam.project(pw, u, v, z);
    if (z <= 0.0) continue;
    const long pu = std::lround(u);
    const long pv = std::lround(v);
    if (pu < 0 || pv < 0 || pu >= static_cast<long>(cam.width) ||
        pv >= static_cast<long>(cam.height))
      continue;
    double& cell = img.at(static_cast<std::size_t>(pu), static_cast<std::size_t>(pv));
    if (cell == 0.0 || z < cell) cell = z;
  }
  return img;
}

std::vector<Vec3> default_demo_targets() {
  return {{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}, {0.25, 0.75, 0.5}, {0.75, 0.25, 0.5},
          {0.5, 0.5, 0.75}};
}

std::vector<Vec3> grid_targets(std::size_t n) {
  if (n == 0) throw std::invalid_argument("grid_targets: n must be positive");
  std::vector<Vec3> out;
  out.reserve(n * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        out.push_back({(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n});
  return out;
}

std::vector<Vec3> uniform_targets(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out(count);
  for (auto& g : out) g = {rng.uniform(), rng.uniform(), rng.uniform()};
  return out;
}

namespace {

EpisodeStep observe_step(const Reach3dEnv& env, const Vec3& action, bool success) {
  EpisodeStep s;
  const PointCloud cloud = env.cloud();
  s.points = to_f32(cloud.points.storage());
  s.colors = to_f32(cloud.colors.storage());
  s.depth = to_f32(env.depth().z);
  const Vec3 p = env.pos();
  s.pose = to_f32({p[0], p[1], p[2]});
  s.action = to_f32({action[0], action[1], action[2]});
  s.success = success;
  return s;
}

}  // namespace

Episode record_expert_episode(Reach3dEnv& env, std::uint64_t seed, const Vec3& target,
                              std::size_t min_length) {
  env.reset(seed, target);
  Episode ep;
  while (!env.done()) {
    const Vec3 a = env.expert_action();
    EpisodeStep s = observe_step(env, a, false);
    env.step(a);
    s.success = env.success();
    ep.steps.push_back(std::move(s));
  }
  while (ep.steps.size() < min_length)
    ep.steps.push_back(observe_step(env, {0.0, 0.0, 0.0}, env.success()));
  return ep;
}

}  // namespace dp3

#pragma once

#include <cstdint>
#include <vector>

#include "dp3/dataset.hpp"
#include "dp3/pointcloud.hpp"

namespace dp3 {

// Reach task in the unit workspace cube: drive the gripper point from the
// center to a goal position. Everything the camera sees is synthesized from
// three marker shapes (gripper cube, target sphere, ground patch) plus
// optional distractor cubes parked outside the workspace.
struct Reach3dConfig {
  double success_radius = 0.02;
  double max_step = 0.05;  // per-component action clamp, meters
  std::size_t horizon = 50;
  std::size_t gripper_points = 64;
  std::size_t target_points = 64;
  std::size_t ground_points = 256;
  std::size_t clutter = 0;             // distractor cube count
  std::size_t distractor_points = 32;  // surface samples per distractor
};

// Fixed pinhole: eye (0.5,-0.8,0.9) looking at the workspace center,
// fx=fy=120, 84x84 with the principal point at the image center.
CameraModel reach_camera();

class Reach3dEnv {
public:
  explicit Reach3dEnv(Reach3dConfig cfg = {});

  void reset(std::uint64_t seed, const Vec3& target);

  struct StepResult {
    bool done = false;
    bool success = false;
  };
  StepResult step(const Vec3& action);  // throws std::logic_error once done

  Vec3 expert_action() const;  // clamp(g - p) per component

  // Raw scene cloud in world coordinates (always colored); recomputed from
  // the current gripper position and the offsets drawn at reset.
  PointCloud cloud() const;
  DepthImage depth() const;  // z-min rasterization of cloud() through reach_camera()

  Vec3 pos() const { return p_; }
  Vec3 target() const { return g_; }
  std::size_t t() const { return t_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  const Reach3dConfig& config() const { return cfg_; }
  const CameraModel& camera() const { return cam_; }

private:
  Reach3dConfig cfg_;
  CameraModel cam_;
  Vec3 p_{0.5, 0.5, 0.5};
  Vec3 g_{0.5, 0.5, 0.5};
  std::size_t t_ = 0;
  bool done_ = true;  // reset() arms the episode
  bool success_ = false;
  std::vector<Vec3> gripper_offsets_;
  std::vector<Vec3> target_offsets_;
  std::vector<Vec3> ground_points_;
  std::vector<Vec3> clutter_points_;  // absolute; distractors never move
};

// Target generators for demo generation and evaluation. Grid targets are the
// n^3 cell centers ((i+0.5)/n, ...); the fixed list is the 5-demo default.
std::vector<Vec3> default_demo_targets();
std::vector<Vec3> grid_targets(std::size_t n);
std::vector<Vec3> uniform_targets(std::size_t count, std::uint64_t seed);

DepthImage render_depth(const PointCloud& cloud, const CameraModel& cam);

// Rolls the scripted expert from reset to done, recording (observation,
// action, success) per step. Episodes that finish in fewer than min_length
// steps are padded by repeating the final observation with a zero action,
// which is exactly what stepping at the goal would produce; the padding keeps
// short episodes usable for horizon-length action chunks.
Episode record_expert_episode(Reach3dEnv& env, std::uint64_t seed, const Vec3& target,
                              std::size_t min_length = 0);

}  // namespace dp3

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dp3/pointcloud.hpp"

namespace dp3 {

// One recorded step. Arrays are kept in f32, matching the file format
// exactly, so a write/read round trip reproduces the in-memory dataset
// bit for bit. Clouds are raw and uncropped; cropping and downsampling are
// training-time choices and rerun from config.
struct EpisodeStep {
  std::vector<float> points;  // xyz triples, world frame
  std::vector<float> colors;  // rgb triples, same count as points (may be empty)
  std::vector<float> depth;   // row-major z buffer
  std::vector<float> pose;    // gripper position
  std::vector<float> action;  // commanded delta
  bool success = false;
};

struct Episode {
  std::vector<EpisodeStep> steps;
};

struct EpisodeDataset {
  std::vector<Episode> episodes;

  std::size_t total_steps() const;
  void save(const std::string& path) const;
  static EpisodeDataset load(const std::string& path);
};

// f32 storage -> f64 working types
PointCloud step_cloud(const EpisodeStep& s);
Tensor step_depth(const EpisodeStep& s, std::size_t width, std::size_t height);
Vec3 step_pose(const EpisodeStep& s);
Vec3 step_action(const EpisodeStep& s);

std::vector<float> to_f32(const std::vector<double>& v);

}  // namespace dp3

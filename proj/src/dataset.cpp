#include "dp3/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include "dp3/binio.hpp"

namespace dp3 {

namespace {
constexpr char kMagic[9] = "DP3DATA1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::size_t EpisodeDataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.steps.size();
  return n;
}

void EpisodeDataset::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset: cannot open " + path + " for writing");
  os.write(kMagic, 8);
  binio::write_u32(os, kVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(episodes.size()));
  for (const auto& ep : episodes) {
    binio::write_u32(os, static_cast<std::uint32_t>(ep.steps.size()));
    for (const auto& s : ep.steps) {
      binio::write_f32_array(os, s.points);
      binio::write_f32_array(os, s.colors);
      binio::write_f32_array(os, s.depth);
      binio::write_f32_array(os, s.pose);
      binio::write_f32_array(os, s.action);
      binio::write_u8(os, s.success ? 1 : 0);
    }
  }
  if (!os) throw std::runtime_error("dataset: write to " + path + " failed");
}

EpisodeDataset EpisodeDataset::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open " + path);
  binio::expect_magic(is, kMagic, "dataset");
  const std::uint32_t version = binio::read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
  EpisodeDataset data;
  data.episodes.resize(binio::read_u32(is));
  for (auto& ep : data.episodes) {
    ep.steps.resize(binio::read_u32(is));
    for (auto& s : ep.steps) {
      s.points = binio::read_f32_array(is);
      s.colors = binio::read_f32_array(is);
      s.depth = binio::read_f32_array(is);
      s.pose = binio::read_f32_array(is);
      s.action = binio::read_f32_array(is);
      s.success = binio::read_u8(is) != 0;
    }
  }
  return data;
}

namespace {

std::vector<double> widen(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

Vec3 widen3(const std::vector<float>& v, const char* what) {
  if (v.size() != 3) throw std::runtime_error(std::string("dataset: ") + what + " is not 3-d");
  return {v[0], v[1], v[2]};
}

}  // namespace

PointCloud step_cloud(const EpisodeStep& s) {
  if (s.points.size() % 3 != 0) throw std::runtime_error("dataset: point array not xyz triples");
  if (!s.colors.empty() && s.colors.size() != s.points.size())
    throw std::runtime_error("dataset: color array does not match points");
  const std::size_t n = s.points.size() / 3;
  PointCloud cloud;
  cloud.points = Tensor({n, 3}, widen(s.points));
  if (!s.colors.empty()) cloud.colors = Tensor({n, 3}, widen(s.colors));
  return cloud;
}

Tensor step_depth(const EpisodeStep& s, std::size_t width, std::size_t height) {
  if (s.depth.size() != width * height)
    throw std::runtime_error("dataset: depth buffer is " + std::to_string(s.depth.size()) +
                             " values, expected " + std::to_string(width * height));
  return Tensor({height, width}, widen(s.depth));
}

Vec3 step_pose(const EpisodeStep& s) { return widen3(s.pose, "pose"); }
Vec3 step_action(const EpisodeStep& s) { return widen3(s.action, "action"); }

std::vector<float> to_f32(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace dp3

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "dp3/config.hpp"
#include "dp3/dataset.hpp"
#include "dp3/diffusion.hpp"
#include "dp3/harness.hpp"
#include "dp3/pointcloud.hpp"
#include "dp3/policy.hpp"

namespace py = pybind11;

namespace {

using dp3::PointCloud;
using dp3::Tensor;

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud cloud_from_array(const DoubleArray& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3)
    throw std::invalid_argument("expected an (n, 3) array of points");
  std::size_t n = static_cast<std::size_t>(arr.shape(0));
  PointCloud cloud;
  cloud.points = Tensor({n, 3});
  std::memcpy(cloud.points.data(), arr.data(), n * 3 * sizeof(double));
  return cloud;
}

py::array_t<double> array_from_tensor2d(const Tensor& t) {
  std::size_t rows = t.rank() == 2 ? t.dim(0) : 0;
  std::size_t cols = t.rank() == 2 ? t.dim(1) : 0;
  py::array_t<double> out({rows, cols});
  if (t.numel() > 0) std::memcpy(out.mutable_data(), t.data(), t.numel() * sizeof(double));
  return out;
}

py::array_t<double> array_from_vector(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

py::array_t<double> rows_from_vec3(const std::vector<dp3::Vec3>& v) {
  py::array_t<double> out({v.size(), static_cast<std::size_t>(3)});
  double* p = out.mutable_data();
  for (const auto& x : v) {
    *p++ = x[0];
    *p++ = x[1];
    *p++ = x[2];
  }
  return out;
}

// Config text -> fully resolved config, with the same environment seed
// fallback the command line applies.
dp3::ExperimentConfig load_config(const std::string& text) {
  dp3::ExperimentConfig cfg = dp3::ExperimentConfig::parse_text(text, "config");
  dp3::apply_env_seed(cfg);
  return cfg;
}

py::dict eval_report_dict(const dp3::EvalReport& rep) {
  py::dict d;
  d["episodes"] = rep.episodes;
  d["successes"] = rep.successes;
  d["success_rate"] = rep.success_rate;
  d["mean_episode_length"] = rep.mean_length;
  d["diffusion_calls"] = rep.diffusion_calls;
  d["targets"] = rows_from_vec3(rep.targets);
  py::array_t<bool> succ(static_cast<py::ssize_t>(rep.success.size()));
  for (std::size_t i = 0; i < rep.success.size(); ++i)
    succ.mutable_data()[i] = rep.success[i] != 0;
  d["success"] = succ;
  py::array_t<std::size_t> len(static_cast<py::ssize_t>(rep.length.size()));
  for (std::size_t i = 0; i < rep.length.size(); ++i) len.mutable_data()[i] = rep.length[i];
  d["length"] = len;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Point cloud diffusion policy core: perception primitives, the noise schedule, "
            "and the demo/train/eval pipeline.";
  m.attr("__version__") = "0.1.0";

  m.def(
      "fps",
      [](const DoubleArray& points, std::size_t count, std::uint64_t seed) {
        return array_from_tensor2d(dp3::fps(cloud_from_array(points), count, seed).points);
      },
      py::arg("points"), py::arg("count"), py::arg("seed") = 0,
      "Farthest point sampling of an (n, 3) array down to `count` rows; the seed picks the "
      "starting point. Asking for n or more rows returns the input unchanged.");

  m.def(
      "fps_from",
      [](const DoubleArray& points, std::size_t count, std::size_t first) {
        return array_from_tensor2d(dp3::fps_from(cloud_from_array(points), count, first).points);
      },
      py::arg("points"), py::arg("count"), py::arg("first"),
      "Farthest point sampling with a fixed starting row index.");

  m.def(
      "crop",
      [](const DoubleArray& points, const dp3::Vec3& lo, const dp3::Vec3& hi) {
        return array_from_tensor2d(dp3::crop(cloud_from_array(points), dp3::Aabb{lo, hi}).points);
      },
      py::arg("points"), py::arg("lo"), py::arg("hi"),
      "Keep the rows of an (n, 3) array inside the closed box [lo, hi].");

  m.def(
      "unproject",
      [](const DoubleArray& depth, double fx, double fy, double cx, double cy,
         const DoubleArray& rot, const dp3::Vec3& trans) {
        if (depth.ndim() != 2) throw std::invalid_argument("expected an (h, w) depth array");
        if (rot.ndim() != 2 || rot.shape(0) != 3 || rot.shape(1) != 3)
          throw std::invalid_argument("expected a (3, 3) rotation");
        dp3::DepthImage img;
        img.height = static_cast<std::size_t>(depth.shape(0));
        img.width = static_cast<std::size_t>(depth.shape(1));
        img.z.assign(depth.data(), depth.data() + img.width * img.height);
        dp3::CameraModel cam;
        cam.fx = fx;
        cam.fy = fy;
        cam.cx = cx;
        cam.cy = cy;
        cam.width = img.width;
        cam.height = img.height;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) cam.rot[r][c] = rot.data()[r * 3 + c];
        cam.trans = trans;
        cam.validate();
        return array_from_tensor2d(dp3::unproject(img, cam).points);
      },
      py::arg("depth"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
      py::arg("rot"), py::arg("trans"),
      "Lift an (h, w) depth image (0 = invalid pixel) into world-frame points through a "
      "pinhole camera with a camera-to-world rotation and translation.");

  m.def(
      "schedule",
      [](std::size_t steps, const std::string& kind) {
        dp3::NoiseSchedule s = dp3::make_schedule(steps, dp3::parse_schedule_kind(kind));
        py::dict d;
        d["K"] = s.K;
        d["betas"] = array_from_vector(s.betas);
        d["signal_scale"] = array_from_vector(s.signal_scale);
        d["noise_scale"] = array_from_vector(s.noise_scale);
        return d;
      },
      py::arg("steps"), py::arg("kind") = "squared_cosine",
      "Variance-preserving noise schedule as arrays indexed 0..K; index 0 is the clean "
      "sentinel (signal 1, noise 0).");

  m.def(
      "timesteps",
      [](std::size_t steps, std::size_t n) { return dp3::inference_timesteps(steps, n); },
      py::arg("steps"), py::arg("n"),
      "The decreasing timestep subsequence a sampler visits when it spends n of K steps.");

  m.def(
      "resolved_config",
      [](const std::string& text) { return load_config(text).serialize(); },
      py::arg("text"),
      "Parse config text, apply the DP3_SEED fallback, and return the fully resolved dump "
      "(every key explicit, deterministic formatting).");

  m.def("config_help", [] { return dp3::ExperimentConfig::help_text(); },
        "Reference for every config key: type, default, range, and meaning.");

  m.def(
      "gen_demos",
      [](const std::string& config_text, const std::string& out) {
        dp3::ExperimentConfig cfg = load_config(config_text);
        dp3::run_gen_demos(cfg, out);
        dp3::EpisodeDataset data = dp3::EpisodeDataset::load(out);
        py::dict d;
        d["episodes"] = data.episodes.size();
        d["steps"] = data.total_steps();
        return d;
      },
      py::arg("config_text"), py::arg("out"),
      "Record scripted expert demos into a dataset file (plus a resolved-config sidecar).");

  m.def(
      "train",
      [](const std::string& config_text, const std::string& data_path,
         const std::string& ckpt_path, bool resume) {
        dp3::ExperimentConfig cfg = load_config(config_text);
        dp3::TrainOutputs out;
        {
          py::gil_scoped_release release;
          out = dp3::run_training(cfg, data_path, ckpt_path, resume);
        }
        py::dict d;
        d["epochs"] = out.result.epoch_loss.size();
        d["adam_steps"] = out.result.adam_steps;
        d["final_loss"] =
            out.result.epoch_loss.empty() ? 0.0 : out.result.epoch_loss.back();
        d["loss"] = array_from_vector(out.result.epoch_loss);
        d["early_stopped"] = out.result.early_stopped;
        d["resumed"] = out.resumed;
        d["already_complete"] = out.already_complete;
        return d;
      },
      py::arg("config_text"), py::arg("data_path"), py::arg("ckpt_path"),
      py::arg("resume") = false,
      "Train the policy on a dataset file; writes the checkpoint, its sidecar, the loss "
      "history, and the resolved config next to `ckpt_path`.");

  m.def(
      "evaluate",
      [](const std::string& config_text, const std::string& ckpt_path,
         const std::string& out_dir) {
        dp3::ExperimentConfig cfg = load_config(config_text);
        dp3::EvalReport rep;
        {
          py::gil_scoped_release release;
          if (out_dir.empty()) {
            dp3::Dp3Policy policy = dp3::Dp3Policy::load(ckpt_path);
            rep = dp3::evaluate_policy(policy, cfg);
          } else {
            rep = dp3::run_eval(cfg, ckpt_path, out_dir);
          }
        }
        return eval_report_dict(rep);
      },
      py::arg("config_text"), py::arg("ckpt_path"), py::arg("out_dir") = "",
      "Closed-loop rollouts of a checkpoint over the configured eval targets. With an "
      "out_dir the usual metrics/report/scatter artifacts are written as well.");

  m.def(
      "read_dataset",
      [](const std::string& path) {
        dp3::EpisodeDataset data = dp3::EpisodeDataset::load(path);
        py::list episodes;
        for (const auto& ep : data.episodes) {
          std::size_t n = ep.steps.size();
          py::list clouds;
          py::array_t<double> poses({n, static_cast<std::size_t>(3)});
          py::array_t<double> actions({n, static_cast<std::size_t>(3)});
          py::array_t<bool> successes(static_cast<py::ssize_t>(n));
          for (std::size_t i = 0; i < n; ++i) {
            clouds.append(array_from_tensor2d(dp3::step_cloud(ep.steps[i]).points));
            dp3::Vec3 p = dp3::step_pose(ep.steps[i]);
            dp3::Vec3 a = dp3::step_action(ep.steps[i]);
            for (std::size_t d = 0; d < 3; ++d) {
              poses.mutable_data()[i * 3 + d] = p[d];
              actions.mutable_data()[i * 3 + d] = a[d];
            }
            successes.mutable_data()[i] = ep.steps[i].success;
          }
          py::dict e;
          e["clouds"] = clouds;
          e["poses"] = poses;
          e["actions"] = actions;
          e["successes"] = successes;
          episodes.append(e);
        }
        return episodes;
      },
      py::arg("path"),
      "Load a dataset file into per-episode dicts of clouds, poses, actions, and success "
      "flags (working precision, like the trainer sees them).");
}

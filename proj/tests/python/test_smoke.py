"""End-to-end smoke of the python surface; the heavy correctness checks live
in the C++ suites."""

import numpy as np
import pytest

import dp3

TINY_CONFIG = """
seed = 5
env {
  horizon_steps = 8
  gripper_points = 8
  target_points = 8
  ground_points = 16
  fps_count = 12
}
demos { count = 2 }
diffusion {
  embed_dim = 8
  hidden = 16, 16
  inference_steps = 2
}
training {
  epochs = 2
  batch = 4
  lr = 0.001
  plateau_patience = 0
}
eval {
  sampler = fixed
  targets = 0.3,0.4,0.5; 0.7,0.6,0.5
}
"""


def test_fps_is_a_deterministic_subset():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 1.0, size=(50, 3))
    out = dp3.fps(pts, 12, seed=7)
    assert out.shape == (12, 3)
    rows = {tuple(r) for r in pts}
    assert all(tuple(r) in rows for r in out)
    assert np.array_equal(out, dp3.fps(pts, 12, seed=7))
    assert np.array_equal(dp3.fps_from(pts, 5, 3)[0], pts[3])
    # asking for everything returns the cloud unchanged
    assert np.array_equal(dp3.fps(pts, 50, seed=7), pts)


def test_crop_matches_a_numpy_mask():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.0, 2.0, size=(200, 3))
    lo, hi = [0.0, 0.0, 0.25], [1.0, 1.0, 1.0]
    out = dp3.crop(pts, lo, hi)
    mask = np.all((pts >= lo) & (pts <= hi), axis=1)
    assert np.array_equal(out, pts[mask])


def test_unproject_drops_invalid_pixels():
    depth = np.full((6, 6), 0.5)
    depth[:3, :] = 0.0  # invalid
    pts = dp3.unproject(depth, fx=10.0, fy=10.0, cx=2.5, cy=2.5,
                        rot=np.eye(3), trans=[0.0, 0.0, 0.0])
    assert pts.shape == (18, 3)


def test_schedule_preserves_variance():
    for kind in ("squared_cosine", "linear"):
        s = dp3.schedule(100, kind)
        total = s["signal_scale"] ** 2 + s["noise_scale"] ** 2
        assert np.max(np.abs(total - 1.0)) < 1e-12
    ts = dp3.timesteps(100, 10)
    assert ts[0] == 100 and ts[-1] == 1 and len(ts) == 10


def test_config_round_trip_and_rejection():
    resolved = dp3.resolved_config(TINY_CONFIG)
    assert resolved == dp3.resolved_config(resolved)
    assert "fps_count" in dp3.config_help()
    with pytest.raises(RuntimeError, match="fps_count"):
        dp3.resolved_config("env { fsp_count = 4 }")


def test_pipeline_round_trip(tmp_path):
    data = str(tmp_path / "demos.bin")
    info = dp3.gen_demos(TINY_CONFIG, data)
    assert info["episodes"] == 2
    assert info["steps"] >= 2 * 4

    episodes = dp3.read_dataset(data)
    assert len(episodes) == 2
    first = episodes[0]
    assert first["poses"].shape == first["actions"].shape
    assert first["clouds"][0].shape[1] == 3

    # same config, same bytes
    data2 = str(tmp_path / "demos2.bin")
    dp3.gen_demos(TINY_CONFIG, data2)
    assert (tmp_path / "demos.bin").read_bytes() == (tmp_path / "demos2.bin").read_bytes()

    ckpt = str(tmp_path / "policy.ckpt")
    result = dp3.train(TINY_CONFIG, data, ckpt)
    assert result["epochs"] == 2
    assert result["adam_steps"] > 0
    assert np.isfinite(result["final_loss"])
    assert (tmp_path / "policy.ckpt.json").exists()

    report = dp3.evaluate(TINY_CONFIG, ckpt, str(tmp_path / "eval"))
    assert report["episodes"] == 2
    assert 0.0 <= report["success_rate"] <= 1.0
    assert report["targets"].shape == (2, 3)
    assert report["success"].shape == (2,)
    assert (tmp_path / "eval" / "metrics.json").exists()
    assert (tmp_path / "eval" / "scatter.csv").exists()

    quiet = dp3.evaluate(TINY_CONFIG, ckpt)  # no artifacts
    assert quiet["success_rate"] == report["success_rate"]

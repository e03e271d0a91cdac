"""Point cloud diffusion policy: perception primitives and the demo/train/eval pipeline.

Everything heavy lives in the compiled core; this package just re-exports it.
"""

from dp3._core import (
    __version__,
    config_help,
    crop,
    evaluate,
    fps,
    fps_from,
    gen_demos,
    read_dataset,
    resolved_config,
    schedule,
    timesteps,
    train,
    unproject,
)

__all__ = [
    "__version__",
    "config_help",
    "crop",
    "evaluate",
    "fps",
    "fps_from",
    "gen_demos",
    "read_dataset",
    "resolved_config",
    "schedule",
    "timesteps",
    "train",
    "unproject",
]

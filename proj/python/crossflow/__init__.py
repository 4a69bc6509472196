"""Single-intersection traffic signal control: simulator, state encoder,
baseline controllers and DQN training, backed by the C++ core."""

from ._core import (
    CheckpointError,
    ConfigError,
    Error,
    Simulation,
    config,
    phase_count,
    run_episode,
    state_shape,
    train,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Error",
    "Simulation",
    "config",
    "phase_count",
    "run_episode",
    "state_shape",
    "train",
]

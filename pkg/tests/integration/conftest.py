# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

from importlib.resources import files
from pathlib import Path

import pytest

from vtol_transition.planner import Trajectory, read_trajectory
from vtol_transition.policy import PpoConfig

SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture
def transition_40m() -> Trajectory:
    """The shipped 40 m straight transition path."""
    return read_trajectory(Path(str(files("vtol_transition").joinpath("data", "transition_40m.csv"))))


@pytest.fixture
def hover_config() -> PpoConfig:
    """Hyperparameters for runs of a few minutes per seed."""
    return PpoConfig(
        rollout_steps=2048,
        n_envs=4,
        minibatch_size=256,
        epochs=5,
        eval_interval=5,
        eval_episodes=2,
    )

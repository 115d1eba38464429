# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

from pathlib import Path

import pytest

from vtol_transition.dynamics import VehicleParams
from vtol_transition.hover_env import EpisodeConfig, HoverEnv
from vtol_transition.policy import ActorCritic, PpoConfig
from vtol_transition.training import initial_model


@pytest.fixture
def sqlite_file(tmp_path: Path) -> Path:
    """
    Fixture to create a Path object to the SQLite database file.

    This is used during tests in order to create isolated databases.
    """
    Path(tmp_path).mkdir(exist_ok=True)
    return tmp_path / "vtol_transition.sqlite"


@pytest.fixture
def params() -> VehicleParams:
    """The default airframe."""
    return VehicleParams()


@pytest.fixture
def env(params: VehicleParams) -> HoverEnv:
    """Hover environment with short episodes."""
    return HoverEnv(params, EpisodeConfig(horizon=20, seed=0))


@pytest.fixture
def small_config() -> PpoConfig:
    """Hyperparameters small enough to train within a unit test."""
    return PpoConfig(
        rollout_steps=64,
        n_envs=2,
        minibatch_size=32,
        epochs=2,
        max_iterations=2,
        eval_interval=1,
        eval_episodes=1,
        hidden_size=16,
        seed=7,
    )


@pytest.fixture
def model(env: HoverEnv, small_config: PpoConfig) -> ActorCritic:
    """Untrained actor-critic whose mean action is the trim command."""
    return initial_model(env, small_config)

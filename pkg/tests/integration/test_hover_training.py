# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Seed-pooled training runs of the hover controller at k = 0."""

import logging
from dataclasses import replace

import numpy as np
import pytest

from vtol_transition.hover_env import EpisodeConfig, HoverEnv
from vtol_transition.policy import PpoConfig, build_actor_critic
from vtol_transition.training import CurveRow, hrm_train

from .conftest import SEEDS


def train_from_scratch(config: PpoConfig, seed: int, target_reward: float) -> tuple[list[CurveRow], bool]:
    config = replace(config, seed=seed)
    rows: list[CurveRow] = []
    result = hrm_train(
        0.0,
        build_actor_critic(config),
        HoverEnv(config=EpisodeConfig(seed=seed)),
        config,
        target_reward=target_reward,
        on_iteration=rows.append,
    )
    return rows, result.converged


@pytest.mark.integration
def test_reward_improves_from_random_init(hover_config: PpoConfig, caplog: pytest.LogCaptureFixture) -> None:
    """
    Over the first 50 iterations the evaluation reward rises above the one of
    the random initialization in at least four of five seeds.
    """
    caplog.set_level(logging.INFO)
    config = replace(hover_config, max_iterations=50)

    improved = 0
    for seed in SEEDS:
        rows, _ = train_from_scratch(config, seed, float("inf"))
        rewards = np.array([row.eval_reward for row in rows])
        assert [row.iteration for row in rows] == list(range(51))
        assert np.isfinite(rewards[0])
        if np.nanmax(rewards[1:]) > rewards[0]:
            improved += 1
    assert improved >= 4


@pytest.mark.integration
def test_reward_reaches_promotion_threshold(hover_config: PpoConfig) -> None:
    """
    From random initialization the evaluation reward reaches 700 within
    2e6 environment steps in at least three of five seeds.
    """
    config = replace(hover_config, max_iterations=2_000_000 // hover_config.rollout_steps)

    converged = 0
    for seed in SEEDS:
        rows, done = train_from_scratch(config, seed, config.promotion_reward)
        assert rows[-1].env_steps <= 2_000_000
        converged += int(done)
    assert converged >= 3

# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""Unit tests for the hover training loop and the curriculum."""

from dataclasses import replace

import numpy as np
import pytest
import torch

from vtol_transition.hover_env import ACTION_SIZE, OBSERVATION_SIZE, HoverEnv
from vtol_transition.policy import ActorCritic, PpoConfig
from vtol_transition.training import (
    CURVE_COLUMNS,
    CurveRow,
    EnvPool,
    StageResult,
    evaluate_policy,
    hrm_train,
    initial_model,
    progressive_train,
    training_schedule,
)


@pytest.mark.parametrize(
    ("max_range", "mode", "expected"),
    [
        (0.0, "fine", [0.0]),
        (0.0, "direct", [0.0]),
        (3.0, "fine", [0.0, 1.0, 2.0, 3.0]),
        (2.5, "fine", [0.0, 1.0, 2.0, 2.5]),
        (10.0, "coarse", [0.0, 5.0, 10.0]),
        (10.0, "direct", [10.0]),
    ],
)
def test_training_schedule(max_range: float, mode: str, expected: list[float]) -> None:
    """Every schedule ends at the maximum range"""
    assert training_schedule(max_range, mode) == expected  # type: ignore[arg-type]


def test_training_schedule_rejects_invalid_input() -> None:
    with pytest.raises(ValueError, match=r">= 0"):
        training_schedule(-1.0)
    with pytest.raises(ValueError, match=r">= 0"):
        training_schedule(float("inf"))
    with pytest.raises(ValueError, match=r"Unknown schedule"):
        training_schedule(5.0, "random")  # type: ignore[arg-type]


def test_curve_columns_match_row() -> None:
    """The column order covers every field of a curve row"""
    assert set(CURVE_COLUMNS) == set(CurveRow.__dataclass_fields__)


# ==============================================================================


def test_env_pool_collect_shapes(env: HoverEnv, model: ActorCritic) -> None:
    """Rollouts are time-major with one column per environment"""
    pool = EnvPool(env, k=2.0, n_envs=3, seed=0)
    batch = pool.collect(model, 25, torch.Generator().manual_seed(0))
    assert batch.observations.shape == (25, 3, OBSERVATION_SIZE)
    assert batch.actions.shape == (25, 3, ACTION_SIZE)
    assert batch.rewards.shape == (25, 3)
    assert batch.last_values.shape == (3,)
    assert all(member.config.k == 2.0 for member in pool.envs)
    # The environment horizon of 20 forces at least one reset per member.
    assert np.all(batch.dones.sum(axis=0) >= 1)
    assert len(pool.finished_returns) >= 3


def test_env_pool_members_differ(env: HoverEnv) -> None:
    """Members own independent seeds"""
    pool = EnvPool(env, k=0.0, n_envs=2, seed=0)
    assert not np.array_equal(pool.observations[0], pool.observations[1])


def test_evaluate_policy_is_deterministic(env: HoverEnv, model: ActorCritic) -> None:
    """Mean-mode evaluation with fixed seeds gives the same reward"""
    first = evaluate_policy(model, env, k=0.0, episodes=2, seed=3)
    second = evaluate_policy(model, env, k=0.0, episodes=2, seed=3)
    assert first == second
    assert np.isfinite(first)


# ==============================================================================


def test_hrm_train_returns_immediately_on_met_threshold(
    env: HoverEnv,
    model: ActorCritic,
    small_config: PpoConfig,
) -> None:
    """Parameters already meeting the threshold are returned unchanged"""
    before = [p.detach().clone() for p in model.parameters()]
    rows: list[CurveRow] = []
    result = hrm_train(0.0, model, env, small_config, target_reward=float("-inf"), on_iteration=rows.append)
    assert result.converged
    assert result.stages == [StageResult(0.0, True, rows[0].eval_reward, 0, 0)]
    assert len(rows) == 1
    for a, b in zip(before, result.model.parameters(), strict=True):
        assert torch.equal(a, b)


def test_hrm_train_budget_exhausted(env: HoverEnv, model: ActorCritic, small_config: PpoConfig) -> None:
    """An unreachable threshold runs the full budget and flags the stage"""
    rows: list[CurveRow] = []
    result = hrm_train(1.0, model, env, small_config, target_reward=float("inf"), on_iteration=rows.append)
    assert not result.converged
    assert result.stages[0].iterations == small_config.max_iterations
    assert result.env_steps == small_config.max_iterations * small_config.rollout_steps
    assert [row.iteration for row in rows] == [0, 1, 2]
    assert np.isfinite(rows[-1].policy_loss)
    assert result.best_reward == max(row.eval_reward for row in rows)
    assert result.final_k == 1.0


def test_progressive_train_is_reproducible(env: HoverEnv, small_config: PpoConfig) -> None:
    """Identical seeds give identical training curves and weights"""
    config = replace(small_config, max_iterations=1, r_max=float("inf"), promotion_reward=float("inf"))

    def run() -> tuple[np.ndarray, list[np.ndarray]]:
        rows: list[CurveRow] = []
        stages: list[float] = []
        result = progressive_train(
            1.0,
            initial_model(env, config),
            env,
            config,
            on_iteration=rows.append,
            on_stage=lambda stage, _model: stages.append(stage.k),
        )
        assert stages == [0.0, 1.0]
        assert not result.converged
        curve = np.array([[getattr(row, column) for column in CURVE_COLUMNS] for row in rows], dtype=np.float64)
        return curve, [p.detach().numpy().copy() for p in result.model.parameters()]

    first_curve, first_weights = run()
    second_curve, second_weights = run()
    np.testing.assert_array_equal(first_curve, second_curve)
    for a, b in zip(first_weights, second_weights, strict=True):
        np.testing.assert_array_equal(a, b)

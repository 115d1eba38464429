# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Hover reward maximization and the progressive target-range curriculum.

A training stage alternates rollout collection from a pool of independent
hover environments with clipped-surrogate updates until the deterministic
evaluation reward reaches the stage's threshold or the iteration budget is
exhausted. The curriculum runs such stages over an increasing schedule of
target ranges ``k``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from logging import getLogger
from math import isfinite
from typing import TYPE_CHECKING, Literal, Self

import numpy as np
import torch

from vtol_transition.hover_env import ACTION_SIZE, OBSERVATION_SIZE, HoverEnv, normalize_command
from vtol_transition.policy import (
    ActorCritic,
    PpoConfig,
    PpoTrainer,
    RolloutBatch,
    UpdateStats,
    build_actor_critic,
    compute_gae,
    policy_eval,
)

if TYPE_CHECKING:
    from collections.abc import Callable

LOG = getLogger(__name__)

ScheduleMode = Literal["fine", "coarse", "direct"]


@dataclass(frozen=True)
class CurveRow:
    """One row of the training curve."""

    stage_k: float
    iteration: int
    env_steps: int
    eval_reward: float
    policy_loss: float = float("nan")
    value_loss: float = float("nan")
    entropy: float = float("nan")
    clip_fraction: float = float("nan")
    approx_kl: float = float("nan")


CURVE_COLUMNS: tuple[str, ...] = (
    "stage_k",
    "iteration",
    "env_steps",
    "eval_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
)


@dataclass
class StageResult:
    """Outcome of a single training stage."""

    k: float
    converged: bool
    best_reward: float
    iterations: int
    env_steps: int


@dataclass
class TrainingResult:
    """
    Trained controller and the training outcome.

    ``converged`` is False as soon as any stage ended on its iteration budget;
    the model then holds the best weights seen in that stage.
    """

    model: ActorCritic
    converged: bool
    stages: list[StageResult] = field(default_factory=list)

    @property
    def best_reward(self: Self) -> float:
        return self.stages[-1].best_reward if self.stages else float("nan")

    @property
    def env_steps(self: Self) -> int:
        return sum(stage.env_steps for stage in self.stages)

    @property
    def final_k(self: Self) -> float:
        return self.stages[-1].k if self.stages else 0.0


def initial_model(env: HoverEnv, config: PpoConfig) -> ActorCritic:
    """A fresh actor-critic whose mean action is the trim command of ``env``."""
    return build_actor_critic(config, init_action=normalize_command(env.trim.command(), env.params))


def training_schedule(max_range: float, mode: ScheduleMode = "fine") -> list[float]:
    """
    Target ranges of the curriculum, always ending at ``max_range``.

    ``fine`` steps by one, ``coarse`` visits the start, the midpoint and the
    end and ``direct`` trains on ``max_range`` only.
    """
    if not isfinite(max_range) or max_range < 0:
        raise ValueError(f"Maximum target range must be >= 0, got {max_range}")
    if max_range == 0:
        return [0.0]
    if mode == "direct":
        return [float(max_range)]
    if mode == "coarse":
        return [0.0, max_range / 2.0, float(max_range)]
    if mode == "fine":
        schedule = [float(k) for k in range(int(np.floor(max_range)) + 1)]
        if schedule[-1] < max_range:
            schedule.append(float(max_range))
        return schedule
    raise ValueError(f"Unknown schedule mode: {mode}")


# ==============================================================================
#       R O L L O U T S
# ==============================================================================


class EnvPool:
    """
    Independent copies of a template environment at target range ``k``.

    Each member owns a generator derived from ``seed`` and is reset as soon as
    its episode terminates.
    """

    def __init__(self: Self, template: HoverEnv, k: float, n_envs: int, seed: int) -> None:
        seeds = np.random.SeedSequence([seed, int(round(k * 1000))]).generate_state(n_envs)
        self.envs = [
            HoverEnv(
                template.params,
                replace(template.config, k=k, seed=int(env_seed)),
                template.weights,
                random_walk=True,
            )
            for env_seed in seeds
        ]
        self.observations = np.stack([env.reset() for env in self.envs])
        self.episode_returns = np.zeros(len(self.envs))
        self.finished_returns: list[float] = []

    def __len__(self: Self) -> int:
        return len(self.envs)

    def collect(
        self: Self,
        model: ActorCritic,
        steps_per_env: int,
        generator: torch.Generator,
    ) -> RolloutBatch:
        """Runs every environment ``steps_per_env`` steps with sampled actions."""
        n = len(self.envs)
        observations = np.zeros((steps_per_env, n, OBSERVATION_SIZE))
        actions = np.zeros((steps_per_env, n, ACTION_SIZE))
        log_probs = np.zeros((steps_per_env, n))
        rewards = np.zeros((steps_per_env, n))
        values = np.zeros((steps_per_env, n))
        dones = np.zeros((steps_per_env, n))

        for t in range(steps_per_env):
            for i, env in enumerate(self.envs):
                out = policy_eval(self.observations[i], model, mode="sample", generator=generator)
                next_obs, reward, done, _ = env.step(out.action)

                observations[t, i] = self.observations[i]
                actions[t, i] = out.raw_action
                log_probs[t, i] = out.log_prob
                values[t, i] = out.value
                rewards[t, i] = reward
                dones[t, i] = float(done)

                self.episode_returns[i] += reward
                if done:
                    self.finished_returns.append(float(self.episode_returns[i]))
                    self.episode_returns[i] = 0.0
                    next_obs = env.reset()
                self.observations[i] = next_obs

        with torch.no_grad():
            last_values = model.value(torch.as_tensor(self.observations, dtype=torch.float64)).numpy()

        return RolloutBatch(
            observations=observations,
            actions=actions,
            log_probs=log_probs,
            rewards=rewards,
            values=values,
            dones=dones,
            last_values=last_values,
        )


def evaluate_policy(
    model: ActorCritic,
    template: HoverEnv,
    k: float,
    episodes: int = 5,
    seed: int = 0,
) -> float:
    """Mean cumulative reward of deterministic episodes with fixed seeds."""
    returns: list[float] = []
    for episode in range(episodes):
        env = HoverEnv(
            template.params,
            replace(template.config, k=k, seed=seed + episode),
            template.weights,
            random_walk=True,
        )
        obs = env.reset()
        total, done = 0.0, False
        while not done:
            obs, reward, done, _ = env.step(policy_eval(obs, model, mode="mean").action)
            total += reward
        returns.append(total)
    return float(np.mean(returns))


# ==============================================================================
#       T R A I N I N G
# ==============================================================================


def hrm_train(
    k: float,
    params: ActorCritic,
    env: HoverEnv,
    config: PpoConfig,
    *,
    target_reward: float | None = None,
    trainer: PpoTrainer | None = None,
    on_iteration: Callable[[CurveRow], None] | None = None,
) -> TrainingResult:
    """
    Trains the hover controller at target range ``k``.

    Training stops once the evaluation reward reaches ``target_reward``
    (``config.r_max`` by default). Parameters that already meet it are returned
    after the first evaluation. On an exhausted budget the best weights seen
    are restored and the result is flagged as not converged.
    """
    threshold = config.r_max if target_reward is None else target_reward
    trainer = trainer or PpoTrainer(params, config)
    model = trainer.model
    generator = torch.Generator().manual_seed(config.seed)
    emit = on_iteration or (lambda _row: None)

    LOG.info("Training hover controller at k=%s (threshold %.1f)", k, threshold)
    reward = evaluate_policy(model, env, k, config.eval_episodes, config.seed)
    emit(CurveRow(stage_k=k, iteration=0, env_steps=0, eval_reward=reward))
    LOG.info(" - initial evaluation reward: %.2f", reward)

    best_reward = reward
    best_state = copy.deepcopy(model.state_dict())
    if reward >= threshold:
        return TrainingResult(model, True, [StageResult(k, True, reward, 0, 0)])

    pool = EnvPool(env, k, config.n_envs, config.seed)
    env_steps = 0
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        batch = compute_gae(pool.collect(model, config.steps_per_env, generator), config)
        stats: UpdateStats = trainer.update(batch)
        env_steps += config.rollout_steps

        reward = float("nan")
        if iteration % config.eval_interval == 0 or iteration == config.max_iterations:
            reward = evaluate_policy(model, env, k, config.eval_episodes, config.seed)
            LOG.info(" - iteration %d (%d steps): evaluation reward %.2f", iteration, env_steps, reward)
            if reward > best_reward:
                best_reward = reward
                best_state = copy.deepcopy(model.state_dict())
            converged = reward >= threshold

        emit(
            CurveRow(
                stage_k=k,
                iteration=iteration,
                env_steps=env_steps,
                eval_reward=reward,
                policy_loss=stats.policy_loss,
                value_loss=stats.value_loss,
                entropy=stats.entropy,
                clip_fraction=stats.clip_fraction,
                approx_kl=stats.approx_kl,
            ),
        )
        if converged:
            break

    if not converged:
        LOG.warning(
            "Stage k=%s did not reach %.1f within %d iterations, keeping the best weights (%.2f)",
            k,
            threshold,
            config.max_iterations,
            best_reward,
        )
        model.load_state_dict(best_state)

    return TrainingResult(model, converged, [StageResult(k, converged, best_reward, iteration, env_steps)])


def progressive_train(
    max_range: float,
    params: ActorCritic,
    env: HoverEnv,
    config: PpoConfig,
    *,
    mode: ScheduleMode = "fine",
    on_iteration: Callable[[CurveRow], None] | None = None,
    on_stage: Callable[[StageResult, ActorCritic], None] | None = None,
) -> TrainingResult:
    """
    Runs :func:`hrm_train` over the curriculum ``training_schedule(max_range)``.

    Intermediate stages promote at ``config.promotion_reward``; the final stage
    trains up to ``config.r_max``. A stage that ends on its budget does not stop
    the curriculum, but the overall result is flagged as not converged.
    """
    schedule = training_schedule(max_range, mode)
    LOG.info("Progressive training over k=%s (%s schedule)", schedule, mode)

    trainer = PpoTrainer(params, config)
    result = TrainingResult(params, converged=True)
    for index, k in enumerate(schedule):
        final = index == len(schedule) - 1
        stage = hrm_train(
            k,
            trainer.model,
            env,
            config,
            target_reward=config.r_max if final else config.promotion_reward,
            trainer=trainer,
            on_iteration=on_iteration,
        )
        result.stages.extend(stage.stages)
        result.converged = result.converged and stage.converged
        if on_stage is not None:
            on_stage(stage.stages[-1], trainer.model)

    result.model = trainer.model
    return result

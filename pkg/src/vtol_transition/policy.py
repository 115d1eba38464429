# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Stochastic hover policy, value function and the clipped-surrogate optimizer.

The policy is a Gaussian over a pre-activation ``u`` whose applied action is
``tanh(u)``. Log-probabilities and probability ratios are taken on ``u``; the
squash is part of the action mapping. All networks run in double precision on
the CPU.

Concurrency: rollouts may be collected from many environment instances, but
parameter updates are serialized - a :class:`PpoTrainer` is the only writer of
its :class:`ActorCritic` between update steps.
"""

from __future__ import annotations

import copy
import pickle
from dataclasses import asdict, dataclass
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Self

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from vtol_transition.exceptions import ConfigurationError, CorruptModelError
from vtol_transition.hover_env import ACTION_SIZE, OBSERVATION_SIZE

if TYPE_CHECKING:
    from numpy.typing import NDArray

LOG = getLogger(__name__)

LOG_STD_MIN: float = -5.0
LOG_STD_MAX: float = 2.0
CHECKPOINT_FORMAT_VERSION: int = 1

DTYPE = torch.float64


@dataclass(frozen=True)
class PpoConfig:
    """
    Hyperparameters of the optimizer and the hover curriculum.

    ``r_max`` stops a training stage, ``promotion_reward`` promotes the
    curriculum to the next target range. Both are measured as the mean
    cumulative reward of ``eval_episodes`` deterministic episodes.
    """

    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 3e-4
    epochs: int = 10
    minibatch_size: int = 256
    rollout_steps: int = 4096
    n_envs: int = 8
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    hidden_size: int = 64
    init_log_std: float = -1.6
    r_max: float = 700.0
    promotion_reward: float = 700.0
    eval_episodes: int = 5
    eval_interval: int = 5
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self: Self) -> None:
        if not 0 < self.gamma <= 1:
            raise ConfigurationError("gamma must lie in (0, 1]", key="gamma")
        if not 0 < self.gae_lambda <= 1:
            raise ConfigurationError("gae_lambda must lie in (0, 1]", key="gae_lambda")
        if not 0 < self.clip_ratio < 1:
            raise ConfigurationError("clip_ratio must lie in (0, 1)", key="clip_ratio")
        if not LOG_STD_MIN <= self.init_log_std <= LOG_STD_MAX:
            raise ConfigurationError("init_log_std must lie within the log-std clamp", key="init_log_std")
        for name in (
            "learning_rate",
            "epochs",
            "minibatch_size",
            "rollout_steps",
            "n_envs",
            "hidden_size",
            "eval_episodes",
            "eval_interval",
            "max_iterations",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0", key=name)
        if self.rollout_steps % self.n_envs != 0:
            raise ConfigurationError("rollout_steps must be a multiple of n_envs", key="rollout_steps")

    @property
    def steps_per_env(self: Self) -> int:
        return self.rollout_steps // self.n_envs


# ==============================================================================
#       N E T W O R K S
# ==============================================================================


def _trunk(hidden_size: int, out_features: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(OBSERVATION_SIZE, hidden_size),
        nn.Tanh(),
        nn.Linear(hidden_size, hidden_size),
        nn.Tanh(),
        nn.Linear(hidden_size, out_features),
    )


class ActorCritic(nn.Module):
    """
    Policy and value networks of the hover controller.

    Both networks share the trunk shape ``17 -> 64 -> 64`` with tanh
    activations. The policy head emits five means and five log standard
    deviations, the value head a scalar.
    """

    def __init__(self: Self, hidden_size: int = 64) -> None:
        super().__init__()
        self.hidden_size = hidden_size
        self.policy = _trunk(hidden_size, 2 * ACTION_SIZE)
        self.value_net = _trunk(hidden_size, 1)
        self.to(DTYPE)

    def distribution(self: Self, obs: torch.Tensor) -> Normal:
        mean, log_std = torch.chunk(self.policy(obs), 2, dim=-1)
        return Normal(mean, torch.exp(torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)))

    def value(self: Self, obs: torch.Tensor) -> torch.Tensor:
        return self.value_net(obs).squeeze(-1)

    def is_finite(self: Self) -> bool:
        return all(bool(torch.isfinite(p).all()) for p in self.parameters())


def build_actor_critic(
    config: PpoConfig | None = None,
    init_action: NDArray[np.float64] | None = None,
    seed: int | None = None,
) -> ActorCritic:
    """
    Creates a randomly initialized actor-critic.

    The policy head starts with small weights and a bias whose squashed mean is
    ``init_action`` (e.g. the normalized trim command), and a log standard
    deviation of ``config.init_log_std``. The global torch random state is left
    untouched.
    """
    config = config or PpoConfig()
    with torch.random.fork_rng():
        torch.manual_seed(config.seed if seed is None else seed)
        model = ActorCritic(hidden_size=config.hidden_size)
        head = model.policy[-1]
        with torch.no_grad():
            head.weight.mul_(0.01)
            head.bias.zero_()
            head.bias[ACTION_SIZE:] = config.init_log_std
            if init_action is not None:
                clipped = np.clip(np.asarray(init_action, dtype=np.float64), -0.999, 0.999)
                head.bias[:ACTION_SIZE] = torch.as_tensor(np.arctanh(clipped), dtype=DTYPE)
    return model


@dataclass(frozen=True, eq=False)
class PolicyOutput:
    """
    Result of a policy evaluation.

    Attributes:
        action: squashed action in ``[-1, 1]`` applied to the environment.
        raw_action: Gaussian pre-activation the log-probability refers to.
        log_prob: summed Gaussian log-density of ``raw_action``.
        value: value estimate of the observation.
    """

    action: NDArray[np.float64]
    raw_action: NDArray[np.float64]
    log_prob: float
    value: float


def policy_eval(
    obs: NDArray[np.float64],
    params: ActorCritic,
    mode: Literal["sample", "mean"] = "sample",
    generator: torch.Generator | None = None,
) -> PolicyOutput:
    """
    Evaluates the policy on a single observation.

    In ``sample`` mode the pre-activation is drawn from the Gaussian using
    ``generator``; in ``mean`` mode it is the mean, so the result is
    deterministic.

    Raises:
        CorruptModelError: if any weight is non-finite.
    """
    if not params.is_finite():
        raise CorruptModelError("Policy weights contain non-finite values")
    obs_t = torch.as_tensor(np.asarray(obs, dtype=np.float64), dtype=DTYPE)
    if obs_t.shape != (OBSERVATION_SIZE,):
        raise ValueError(f"Observation must have shape ({OBSERVATION_SIZE},), got {tuple(obs_t.shape)}")

    with torch.no_grad():
        dist = params.distribution(obs_t)
        if mode == "mean":
            raw = dist.mean
        elif mode == "sample":
            noise = torch.randn(dist.mean.shape, generator=generator, dtype=DTYPE)
            raw = dist.mean + dist.stddev * noise
        else:
            raise ValueError(f"Unknown policy mode: {mode}")
        log_prob = dist.log_prob(raw).sum()
        value = params.value(obs_t)

    return PolicyOutput(
        action=torch.tanh(raw).numpy(),
        raw_action=raw.numpy(),
        log_prob=float(log_prob),
        value=float(value),
    )


# ==============================================================================
#       R O L L O U T S   A N D   A D V A N T A G E S
# ==============================================================================


@dataclass(eq=False)
class RolloutBatch:
    """
    Time-major rollout storage.

    Arrays carry the time on axis 0 and optionally the environment on axis 1;
    ``last_values`` holds the bootstrap value after the final step of every
    environment. ``advantages`` and ``returns`` are filled by
    :func:`compute_gae`.
    """

    observations: NDArray[np.float64]
    actions: NDArray[np.float64]
    log_probs: NDArray[np.float64]
    rewards: NDArray[np.float64]
    values: NDArray[np.float64]
    dones: NDArray[np.float64]
    last_values: NDArray[np.float64] | float = 0.0
    advantages: NDArray[np.float64] | None = None
    returns: NDArray[np.float64] | None = None

    def __post_init__(self: Self) -> None:
        length = len(self.rewards)
        for name in ("observations", "actions", "log_probs", "values", "dones"):
            if len(getattr(self, name)) != length:
                raise ValueError(f"RolloutBatch.{name} is not aligned with the rewards")

    def __len__(self: Self) -> int:
        return int(np.asarray(self.rewards).size)


def compute_gae(batch: RolloutBatch, config: PpoConfig) -> RolloutBatch:
    """
    Fills ``advantages`` with generalized advantage estimates and ``returns``
    with ``advantages + values``. A ``done`` flag at step ``t`` cuts both the
    bootstrap and the accumulation after ``t``.
    """
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    values = np.asarray(batch.values, dtype=np.float64)
    nonterminal = 1.0 - np.asarray(batch.dones, dtype=np.float64)
    next_values = np.empty_like(values)
    next_values[:-1] = values[1:]
    next_values[-1] = batch.last_values

    advantages = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    for t in reversed(range(len(rewards))):
        delta = rewards[t] + config.gamma * next_values[t] * nonterminal[t] - values[t]
        running = delta + config.gamma * config.gae_lambda * nonterminal[t] * running
        advantages[t] = running

    batch.advantages = advantages
    batch.returns = advantages + values
    return batch


def normalize_advantages(advantages: NDArray[np.float64]) -> NDArray[np.float64]:
    """Shifts and scales to zero mean and unit (population) variance."""
    advantages = np.asarray(advantages, dtype=np.float64)
    return (advantages - advantages.mean()) / max(float(advantages.std()), 1e-8)


# ==============================================================================
#       C L I P P E D   S U R R O G A T E
# ==============================================================================


@dataclass
class UpdateStats:
    """Diagnostics of one :meth:`PpoTrainer.update` call."""

    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    aborted: bool = False
    diagnostic: str = ""

    def as_dict(self: Self) -> dict[str, Any]:
        return asdict(self)


def ppo_loss(
    model: ActorCritic,
    obs: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    config: PpoConfig,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """
    Returns the total loss ``-L_clip + c_v L_value - c_e H`` and its parts.

    Samples whose probability ratio left ``[1 - eps, 1 + eps]`` in the direction
    favoured by their advantage contribute no policy gradient.
    """
    dist = model.distribution(obs)
    log_probs = dist.log_prob(actions).sum(-1)
    ratio = torch.exp(log_probs - old_log_probs)
    surrogate = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio) * advantages
    policy_loss = -torch.min(surrogate, clipped).mean()
    value_loss = 0.5 * ((model.value(obs) - returns) ** 2).mean()
    entropy = dist.entropy().sum(-1).mean()
    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy

    with torch.no_grad():
        parts = {
            "policy_loss": policy_loss.detach(),
            "value_loss": value_loss.detach(),
            "entropy": entropy.detach(),
            "clip_fraction": ((ratio - 1.0).abs() > config.clip_ratio).to(DTYPE).mean(),
            "approx_kl": ((ratio - 1.0) - torch.log(ratio)).mean(),
        }
    return loss, parts


class PpoTrainer:
    """Owns the actor-critic, its Adam optimizer and the minibatch shuffling."""

    def __init__(self: Self, model: ActorCritic, config: PpoConfig, seed: int | None = None) -> None:
        self.model = model
        self.config = config
        self.optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
        self.generator = torch.Generator().manual_seed(config.seed if seed is None else seed)

    def update(self: Self, batch: RolloutBatch) -> UpdateStats:
        """
        Runs ``epochs`` passes of minibatch ascent on the clipped surrogate.

        A non-finite loss aborts the update; the weights and the optimizer
        state are then restored to their values before the call.
        """
        if batch.advantages is None or batch.returns is None:
            raise ValueError("Advantages must be computed before the update")

        cfg = self.config
        obs = torch.as_tensor(np.asarray(batch.observations).reshape(-1, OBSERVATION_SIZE), dtype=DTYPE)
        actions = torch.as_tensor(np.asarray(batch.actions).reshape(-1, ACTION_SIZE), dtype=DTYPE)
        old_log_probs = torch.as_tensor(np.asarray(batch.log_probs).reshape(-1), dtype=DTYPE)
        advantages = torch.as_tensor(normalize_advantages(batch.advantages).reshape(-1), dtype=DTYPE)
        returns = torch.as_tensor(np.asarray(batch.returns).reshape(-1), dtype=DTYPE)

        model_snapshot = copy.deepcopy(self.model.state_dict())
        optimizer_snapshot = copy.deepcopy(self.optimizer.state_dict())

        n_samples = obs.shape[0]
        totals: dict[str, float] = {}
        n_minibatches = 0
        for _ in range(cfg.epochs):
            permutation = torch.randperm(n_samples, generator=self.generator)
            for start in range(0, n_samples, cfg.minibatch_size):
                index = permutation[start : start + cfg.minibatch_size]
                loss, parts = ppo_loss(
                    self.model,
                    obs[index],
                    actions[index],
                    old_log_probs[index],
                    advantages[index],
                    returns[index],
                    cfg,
                )
                if not torch.isfinite(loss):
                    self.model.load_state_dict(model_snapshot)
                    self.optimizer.load_state_dict(optimizer_snapshot)
                    message = "Non-finite loss, update aborted and weights restored"
                    LOG.warning(message)
                    return UpdateStats(aborted=True, diagnostic=message)

                self.optimizer.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(self.model.parameters(), cfg.max_grad_norm)
                self.optimizer.step()

                for key, value in parts.items():
                    totals[key] = totals.get(key, 0.0) + float(value)
                n_minibatches += 1

        stats = UpdateStats(**{key: value / n_minibatches for key, value in totals.items()})
        LOG.debug("Update stats: %s", stats)
        return stats


def ppo_update(
    params: ActorCritic,
    batch: RolloutBatch,
    config: PpoConfig,
    trainer: PpoTrainer | None = None,
) -> tuple[ActorCritic, UpdateStats]:
    """
    Functional entry point of the clipped-surrogate update.

    Pass a long-lived ``trainer`` to keep the optimizer moments across calls.
    """
    trainer = trainer or PpoTrainer(params, config)
    stats = trainer.update(batch)
    return trainer.model, stats


# ==============================================================================
#       C H E C K P O I N T S
# ==============================================================================


@dataclass(frozen=True)
class CheckpointInfo:
    """Metadata stored next to the weights."""

    hidden_size: int = 64
    config_hash: str = ""
    stage_k: float = 0.0


def save_checkpoint(model: ActorCritic, path: str | Path, info: CheckpointInfo | None = None) -> Path:
    """Writes the policy and value weights together with ``info`` to ``path``."""
    if not model.is_finite():
        raise CorruptModelError("Refusing to save non-finite weights")
    info = info or CheckpointInfo(hidden_size=model.hidden_size)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "obs_dim": OBSERVATION_SIZE,
            "act_dim": ACTION_SIZE,
            "hidden_size": info.hidden_size,
            "config_hash": info.config_hash,
            "stage_k": float(info.stage_k),
            "policy_state": model.policy.state_dict(),
            "value_state": model.value_net.state_dict(),
        },
        path,
    )
    LOG.info("Saved checkpoint to '%s'", path)
    return path


def load_checkpoint(path: str | Path) -> tuple[ActorCritic, CheckpointInfo]:
    """
    Restores an actor-critic written by :func:`save_checkpoint`.

    Raises:
        CorruptModelError: on an unreadable file, a version or layout mismatch
            or non-finite weights.
    """
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError, ValueError, EOFError, pickle.UnpicklingError) as exc:
        raise CorruptModelError(f"Unable to read checkpoint '{path}': {exc}") from exc

    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CorruptModelError(f"Unsupported checkpoint version in '{path}'")
    if payload.get("obs_dim") != OBSERVATION_SIZE or payload.get("act_dim") != ACTION_SIZE:
        raise CorruptModelError(f"Checkpoint '{path}' does not match the observation/action layout")

    info = CheckpointInfo(
        hidden_size=int(payload["hidden_size"]),
        config_hash=str(payload.get("config_hash", "")),
        stage_k=float(payload.get("stage_k", 0.0)),
    )
    model = ActorCritic(hidden_size=info.hidden_size)
    try:
        model.policy.load_state_dict(payload["policy_state"])
        model.value_net.load_state_dict(payload["value_state"])
    except (KeyError, RuntimeError) as exc:
        raise CorruptModelError(f"Checkpoint '{path}' has mismatching weights: {exc}") from exc
    if not model.is_finite():
        raise CorruptModelError(f"Checkpoint '{path}' contains non-finite weights")
    return model, info

"""Environment protocol, success predicates, frame stacking, example generation.

Environments are value-like: ``step(state, action)`` is a function of its
arguments (plus an rng for stochastic dynamics), so instances can be copied
and rolled out independently.  Episodes end only on horizon timeout; there is
no terminal marker in the data.

Success predicates exist purely for evaluation and example generation.  The
learner never sees them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from exbc.buffers import ExampleBuffer, TaskId
from exbc.errors import ExpertFailure


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    act_dim: int
    episode_horizon: int
    gamma: float
    initial_state_sampler: str

    def __post_init__(self):
        if self.episode_horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.episode_horizon}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0,1), got {self.gamma}")


@dataclass(frozen=True)
class SuccessPredicate:
    """Evaluation-only deterministic test of whether a state completes a task."""

    task: TaskId
    evaluator: Callable[[np.ndarray], bool]

    def __call__(self, state: np.ndarray) -> bool:
        return bool(self.evaluator(np.asarray(state)))


class Env:
    """Interface implemented by the built-in environments."""

    spec: EnvSpec

    def reset(self, rng) -> np.ndarray:
        raise NotImplementedError

    def step(self, state: np.ndarray, action: np.ndarray, rng=None) -> np.ndarray:
        raise NotImplementedError

    def task_names(self) -> list[str]:
        """Names of all tasks this env has predicates and scripted experts for."""
        raise NotImplementedError

    def success_predicate(self, task: TaskId) -> SuccessPredicate:
        raise NotImplementedError

    def expert_action(self, task_name: str, state: np.ndarray, rng) -> np.ndarray:
        """Scripted expert policy for a task; used by oracles and example generation."""
        raise NotImplementedError

    def clamp_action(self, action: np.ndarray) -> np.ndarray:
        action = np.asarray(action, dtype=np.float64)
        if np.any(np.abs(action) > 1.0):
            self.clamp_warnings = getattr(self, "clamp_warnings", 0) + 1
            action = np.clip(action, -1.0, 1.0)
        return action


class FrameStack(Env):
    """Observation wrapper concatenating the k most recent raw observations.

    The stack lives inside the observation vector itself, so the wrapper stays
    functional: the newest raw observation occupies the last raw_dim slots.
    """

    def __init__(self, env: Env, k: int):
        if k < 1:
            raise ValueError(f"frame stack k must be >= 1, got {k}")
        self.env = env
        self.k = k
        raw = env.spec
        self.spec = EnvSpec(
            obs_dim=raw.obs_dim * k,
            act_dim=raw.act_dim,
            episode_horizon=raw.episode_horizon,
            gamma=raw.gamma,
            initial_state_sampler=f"{raw.initial_state_sampler} (x{k} stacked)",
        )

    def raw_obs(self, state: np.ndarray) -> np.ndarray:
        """The newest unstacked observation inside a stacked state."""
        return np.asarray(state)[..., -self.env.spec.obs_dim :]

    def reset(self, rng) -> np.ndarray:
        o0 = self.env.reset(rng)
        return np.tile(o0, self.k)

    def step(self, state, action, rng=None):
        d = self.env.spec.obs_dim
        state = np.asarray(state)
        nxt = self.env.step(state[-d:], action, rng)
        return np.concatenate([state[d:], nxt])

    def task_names(self):
        return self.env.task_names()

    def success_predicate(self, task: TaskId) -> SuccessPredicate:
        inner = self.env.success_predicate(task)
        d = self.env.spec.obs_dim
        return SuccessPredicate(task, lambda s: inner(np.asarray(s)[-d:]))

    def expert_action(self, task_name, state, rng):
        return self.env.expert_action(task_name, self.raw_obs(state), rng)

    def example_reset(self, task, rng):
        if hasattr(self.env, "example_reset"):
            return np.tile(self.env.example_reset(task, rng), self.k)
        return self.reset(rng)


def generate_examples(env: Env, task: TaskId, count: int, rng, max_retries: int = 20) -> ExampleBuffer:
    """Collect `count` success states for a task by rolling the scripted expert.

    Every returned state is checked against the task's success predicate.  An
    episode whose expert fails to hit success within the horizon is retried
    from a fresh reset; exceeding the retry budget raises with the attempt
    count.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    predicate = env.success_predicate(task)
    reset = getattr(env, "example_reset", None)
    states = []
    attempts = 0
    while len(states) < count:
        attempts += 1
        if attempts > max_retries * count:
            raise ExpertFailure(
                f"scripted expert for {task.name!r} failed: "
                f"{len(states)}/{count} states after {attempts} attempts"
            )
        s = reset(task, rng) if reset is not None else env.reset(rng)
        hit = None
        for _ in range(env.spec.episode_horizon):
            if predicate(s):
                hit = s
                break
            a = env.expert_action(task.name, s, rng)
            s = env.step(s, a, rng)
        if hit is None and predicate(s):
            hit = s
        if hit is not None:
            states.append(np.asarray(hit, dtype=np.float64))
    return ExampleBuffer(task, np.stack(states))

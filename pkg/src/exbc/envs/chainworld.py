"""A small one-dimensional chain with an absorbing goal, plus its exact-Q oracle.

States are one-hot encoded.  The single continuous action dimension is read as
a direction: a >= 0 steps right, a < 0 steps left, clamped at the ends.  The
goal state self-transitions regardless of action.  With slip_prob > 0 the
intended direction is reversed with that probability.
"""

from __future__ import annotations

import numpy as np

from exbc.buffers import TaskId
from exbc.envs.base import Env, EnvSpec, SuccessPredicate
from exbc.errors import ConvergenceError

MAIN_TASK = "reach_goal"


class ChainWorld(Env):
    def __init__(self, n_states: int = 5, goal_state: int | None = None,
                 slip_prob: float = 0.0, horizon: int = 50, gamma: float = 0.9):
        if n_states < 2:
            raise ValueError(f"need at least 2 states, got {n_states}")
        if not 0.0 <= slip_prob <= 1.0:
            raise ValueError(f"slip_prob must be in [0,1], got {slip_prob}")
        self.n_states = n_states
        self.goal_state = n_states - 1 if goal_state is None else goal_state
        self.slip_prob = slip_prob
        self.spec = EnvSpec(
            obs_dim=n_states,
            act_dim=1,
            episode_horizon=horizon,
            gamma=gamma,
            initial_state_sampler="fixed at state 0",
        )

    def encode(self, idx: int) -> np.ndarray:
        s = np.zeros(self.n_states)
        s[idx] = 1.0
        return s

    def decode(self, state: np.ndarray) -> int:
        return int(np.argmax(state))

    def reset(self, rng) -> np.ndarray:
        return self.encode(0)

    def _move(self, idx: int, direction: int) -> int:
        if idx == self.goal_state:
            return idx
        return int(np.clip(idx + direction, 0, self.n_states - 1))

    def step(self, state, action, rng=None):
        action = self.clamp_action(action)
        idx = self.decode(state)
        direction = 1 if action[0] >= 0 else -1
        if self.slip_prob > 0.0:
            if rng is None:
                raise ValueError("slip_prob > 0 requires an rng")
            if rng.random() < self.slip_prob:
                direction = -direction
        return self.encode(self._move(idx, direction))

    def task_names(self):
        return [MAIN_TASK]

    def success_predicate(self, task: TaskId) -> SuccessPredicate:
        if task.name != MAIN_TASK:
            raise KeyError(f"chain world has no task {task.name!r}")
        goal = self.goal_state
        return SuccessPredicate(task, lambda s: int(np.argmax(s)) == goal)

    def expert_action(self, task_name, state, rng):
        idx = self.decode(state)
        return np.array([1.0 if idx < self.goal_state else -1.0])


def chain_exact_q(env: ChainWorld, reward_spec, gamma: float,
                  tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Value iteration for ChainWorld; returns Q as an (n_states, 2) table.

    Column 0 is the left action, column 1 the right action.  reward_spec maps
    state index to the per-state reward (array of length n_states or callable).
    Iterates until the sup-norm Bellman residual drops below tol.
    """
    n = env.n_states
    if callable(reward_spec):
        r = np.array([reward_spec(i) for i in range(n)], dtype=np.float64)
    else:
        r = np.asarray(reward_spec, dtype=np.float64)
        if r.shape != (n,):
            raise ValueError(f"reward_spec must have shape ({n},), got {r.shape}")
    p = env.slip_prob
    # next-state index for each (state, intended direction)
    nxt = np.zeros((n, 2), dtype=np.int64)
    for s in range(n):
        nxt[s, 0] = env._move(s, -1)
        nxt[s, 1] = env._move(s, +1)
    q = np.zeros((n, 2))
    for _ in range(max_iter):
        v = q.max(axis=1)
        q_new = np.empty_like(q)
        for a in (0, 1):
            intended = v[nxt[:, a]]
            slipped = v[nxt[:, 1 - a]]
            q_new[:, a] = r + gamma * ((1.0 - p) * intended + p * slipped)
        residual = np.max(np.abs(q_new - q))
        q = q_new
        if residual < tol:
            return q
    raise ConvergenceError(
        f"value iteration did not reach tol={tol} within {max_iter} iterations"
    )

"""Episode-level task scheduling across the main and auxiliary intentions.

An episode is split into equal periods (the last absorbs any remainder).  At
episode start the plan is either a handcrafted task trajectory or a fresh
weighted draw per period: the main task keeps probability main_task_rate and
the auxiliaries split the rest evenly.
"""

from dataclasses import dataclass

import numpy as np

from exbc.errors import ConfigError


@dataclass
class SchedulerConfig:
    num_periods: int = 8
    main_task_rate: float = 0.5
    handcraft_rate: float = 0.5
    trajectories: tuple = ()

    def __post_init__(self):
        if self.num_periods < 1:
            raise ConfigError("num_periods must be >= 1")
        if not 0.0 <= self.main_task_rate <= 1.0:
            raise ConfigError("main_task_rate must lie in [0, 1]")
        if not 0.0 <= self.handcraft_rate <= 1.0:
            raise ConfigError("handcraft_rate must lie in [0, 1]")


def default_trajectories(main_name, num_periods):
    """Handcrafted plans interleaving prerequisite auxiliaries with the main
    task.  Defined for the period counts used by the built-in environments."""
    m = main_name
    if num_periods == 8:
        return (
            ("reach", "lift", m, "release", "reach", "lift", m, "release"),
            ("lift", m, "release", "lift", m, "release", "lift", m),
            (m, "release") * 4,
        )
    if num_periods == 5:
        return (
            ("reach", "grasp", m, m, m),
            (m,) * 5,
        )
    return ()


class TaskScheduler:
    """Owns the per-episode plan; query task_at(step) while stepping."""

    def __init__(self, tasks, horizon, config):
        self.tasks = tasks
        self.config = config
        self.horizon = int(horizon)
        n = config.num_periods
        if self.horizon < n:
            raise ConfigError("horizon shorter than the number of periods")
        base = self.horizon // n
        self.period_starts = [i * base for i in range(n)]
        known = {t.name for t in tasks}
        for traj in config.trajectories:
            if len(traj) != n:
                raise ConfigError(
                    f"trajectory {traj!r} must have {n} entries"
                )
            for name in traj:
                if name not in known:
                    raise ConfigError(f"trajectory references unknown task {name!r}")
        self.plan = None

    def probabilities(self):
        """Per-task selection weights for a non-handcrafted period draw."""
        aux = list(tasks.name for tasks in self.tasks.auxiliary)
        if not aux:
            return {self.tasks.main.name: 1.0}
        p_main = self.config.main_task_rate
        share = (1.0 - p_main) / len(aux)
        out = {self.tasks.main.name: p_main}
        out.update({name: share for name in aux})
        return out

    def draw_task(self, rng):
        """One weighted draw over task names."""
        probs = self.probabilities()
        names = sorted(probs)
        p = np.array([probs[n] for n in names])
        return names[rng.choice(len(names), p=p)]

    def begin_episode(self, rng):
        """Sample the plan for the coming episode; returns it."""
        cfg = self.config
        if (cfg.trajectories and len(self.tasks.auxiliary) > 0
                and rng.uniform() < cfg.handcraft_rate):
            idx = rng.integers(len(cfg.trajectories))
            self.plan = list(cfg.trajectories[idx])
        else:
            self.plan = [self.draw_task(rng) for _ in range(cfg.num_periods)]
        return list(self.plan)

    def task_at(self, step):
        """Task name active at a within-episode step index."""
        if self.plan is None:
            raise ConfigError("begin_episode was never called")
        idx = int(np.searchsorted(self.period_starts, step, side="right")) - 1
        idx = max(0, min(idx, len(self.plan) - 1))
        return self.plan[idx]

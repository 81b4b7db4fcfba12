"""Training outer loop: collect with the scheduled task mix, store everything
in one shared replay buffer, and run per-task updates off-policy.

Phases: the first `warmup` interactions only fill the buffer; actions stay
uniform random until `exploration` interactions have elapsed; updates run
every step once past warmup.  Each update step touches every task: optional
discriminator step, then bound refresh, critic, actor, and temperature."""

import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from exbc import __version__
from exbc.buffers import ReplayBuffer, Transition, save_examples
from exbc.checkpoint import save_checkpoint
from exbc.errors import ConfigError, DimensionError
from exbc.intentions import Intention
from exbc.scheduler import TaskScheduler


@dataclass
class RunConfig:
    """Outer-loop knobs; network and penalty settings live elsewhere."""

    total: int = 20000
    warmup: int = 500
    exploration: int = 1000
    batch_size: int = 128
    buffer_capacity: int = None  # None -> total
    grad_steps: int = 1
    eval_every: int = 2000       # 0 disables periodic evaluation
    eval_episodes: int = 10
    metrics_every: int = 100
    seed: int = 0
    augmentation_factor: float = 0.1

    def __post_init__(self):
        if not 0 <= self.warmup <= self.exploration <= self.total:
            raise ConfigError(
                "phases must satisfy 0 <= warmup <= exploration <= total"
            )
        for fname in ("batch_size", "grad_steps", "metrics_every"):
            if getattr(self, fname) < 1:
                raise ConfigError(f"{fname} must be >= 1")
        if self.eval_every < 0 or self.eval_episodes < 0:
            raise ConfigError("eval cadence and episode count must be >= 0")
        if self.augmentation_factor < 0:
            raise ConfigError("augmentation_factor must be >= 0")
        if self.buffer_capacity is not None and self.buffer_capacity < 1:
            raise ConfigError("buffer_capacity must be >= 1 when given")


def augment_example(states, per_dim_std, factor, rng):
    """Add zero-mean Gaussian noise, sigma_i = factor * per_dim_std[i].

    Dimensions with zero spread across the example set stay untouched.
    Accepts a single state or a batch; never mutates the input.
    """
    if factor < 0:
        raise ValueError("augmentation factor must be >= 0")
    states = np.asarray(states, dtype=np.float64)
    if factor == 0:
        return states.copy()
    noise = rng.standard_normal(states.shape) * (factor * per_dim_std)
    return states + noise


class MetricsWriter:
    """Append-only line-delimited metric records, also kept in memory."""

    def __init__(self, path=None):
        self.path = path
        self.records = []
        self._fh = open(path, "w") if path else None

    def log(self, step, task, metric_name, value):
        rec = {"step": int(step), "task": task,
               "metric_name": metric_name, "value": float(value)}
        self.records.append(rec)
        if self._fh is not None:
            self._fh.write(json.dumps(rec) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
            self._fh = None


def evaluate(intentions, env, episodes, predicates, rng, tasks=None):
    """Deterministic per-task rollouts; never touches the replay buffer.

    For each task, rolls `episodes` episodes with that task's mean action.
    Success means the task predicate held at some step; return is the
    undiscounted sum of the per-step success indicator.
    """
    results = {}
    horizon = env.spec.episode_horizon
    for name in sorted(intentions) if tasks is None else tasks:
        intent = intentions[name]
        pred = predicates[name]
        hits = 0
        returns = np.zeros(max(episodes, 1))
        for ep in range(episodes):
            state = env.reset(rng)
            reached = False
            ret = 0.0
            for _ in range(horizon):
                ok = bool(pred(state))
                reached = reached or ok
                ret += float(ok)
                action = intent.act(state, rng, deterministic=True)
                state = env.step(state, action, rng)
            if bool(pred(state)):
                reached = True
                ret += 1.0
            hits += reached
            returns[ep] = ret
        results[name] = {
            "success": hits / episodes if episodes else 0.0,
            "mean_return": float(returns[:episodes].mean()) if episodes else 0.0,
        }
    return results


class Trainer:
    """Owns all mutable training state for one run."""

    def __init__(self, env, tasks, example_buffers, run_cfg, settings,
                 scheduler_cfg, reward_model, run_dir=None):
        self.env = env
        self.tasks = tasks
        self.cfg = run_cfg
        self.settings = settings
        self.scheduler = TaskScheduler(
            tasks, env.spec.episode_horizon, scheduler_cfg
        )
        self.reward_model = reward_model
        self.run_dir = run_dir

        spec = env.spec
        for task in tasks:
            if task.name not in example_buffers:
                raise ConfigError(f"no example buffer for task {task.name!r}")
            buf = example_buffers[task.name]
            if buf.state_dim != spec.obs_dim:
                raise DimensionError(
                    f"examples for {task.name!r} have dim {buf.state_dim}, "
                    f"env observes {spec.obs_dim}"
                )
        self.example_buffers = example_buffers

        capacity = run_cfg.buffer_capacity or max(run_cfg.total, 1)
        self.replay = ReplayBuffer(capacity)

        root = np.random.SeedSequence(run_cfg.seed)
        streams = root.spawn(5)
        self.rng_env = np.random.default_rng(streams[0])
        self.rng_action = np.random.default_rng(streams[1])
        self.rng_update = np.random.default_rng(streams[2])
        self.rng_sched = np.random.default_rng(streams[3])
        self._eval_seq = streams[4]
        init_rng = np.random.default_rng(root.spawn(1)[0])

        self.intentions = {}
        for task in sorted(tasks, key=lambda t: t.name):
            self.intentions[task.name] = Intention(
                task, spec.obs_dim, spec.act_dim, settings,
                reward_model, init_rng,
            )
        self.predicates = {
            t.name: env.success_predicate(t) for t in tasks
        }
        self.metrics = MetricsWriter(
            os.path.join(run_dir, "metrics.jsonl") if run_dir else None
        )
        self.step_count = 0
        self.eval_history = {t.name: [] for t in tasks}

    # -------------------------------------------------------------- #

    def _write_metadata(self, config_snapshot=None):
        meta = {
            "version": __version__,
            "env": type(self.env).__name__,
            "tasks": [t.name for t in self.tasks],
            "run_config": asdict(self.cfg),
            "config": config_snapshot,
            "started_at": time.time(),
        }
        if self.run_dir:
            path = os.path.join(self.run_dir, "metadata.json")
            with open(path, "w") as fh:
                json.dump(meta, fh, indent=2, default=str)
        return meta

    def _save_examples(self):
        if not self.run_dir:
            return
        ex_dir = os.path.join(self.run_dir, "examples")
        os.makedirs(ex_dir, exist_ok=True)
        for name, buf in self.example_buffers.items():
            save_examples(buf, os.path.join(ex_dir, f"{name}.txt"))

    def _example_batch(self, task_name, n, rng):
        buf = self.example_buffers[task_name]
        states = buf.sample(n, rng)
        return augment_example(
            states, buf.per_dim_std, self.cfg.augmentation_factor, rng
        )

    def _replay_batch(self, rng):
        if self.settings.n_step > 1:
            return self.replay.sample_chains(
                self.cfg.batch_size, self.settings.n_step, rng
            )
        return self.replay.sample(self.cfg.batch_size, rng)

    def _update_all(self, step):
        rng = self.rng_update
        log = step % self.cfg.metrics_every == 0
        for name in sorted(self.intentions):
            intent = self.intentions[name]
            if self.reward_model is not None and self.reward_model.kind == "dac":
                disc_states = self.replay.sample(self.cfg.batch_size, rng)["states"]
                disc_examples = self._example_batch(
                    name, self.cfg.batch_size, rng
                )
                d_info = self.reward_model.update(
                    name, disc_states, disc_examples, rng
                )
                if log:
                    for key, value in d_info.items():
                        self.metrics.log(step, name, f"disc/{key}", value)
            replay_batch = self._replay_batch(rng)
            example_batch = self._example_batch(name, self.cfg.batch_size, rng)
            info = intent.update(replay_batch, example_batch, rng)
            if log:
                for key, value in info.items():
                    self.metrics.log(step, name, f"update/{key}", value)

    def _evaluate_point(self, step):
        rng = np.random.default_rng(self._eval_seq.spawn(1)[0])
        results = evaluate(
            self.intentions, self.env, self.cfg.eval_episodes,
            self.predicates, rng, tasks=[self.tasks.main.name],
        )
        for name, res in results.items():
            self.metrics.log(step, name, "eval/success", res["success"])
            self.metrics.log(step, name, "eval/return", res["mean_return"])
            self.eval_history[name].append(
                (step, res["success"], res["mean_return"])
            )
        self.save_checkpoint_file(step)
        return results

    def checkpoint_arrays(self):
        out = {}
        for name, intent in self.intentions.items():
            for key, arr in intent.state_arrays().items():
                out[f"task.{name}.{key}"] = arr
        if self.reward_model is not None and hasattr(self.reward_model,
                                                     "state_arrays"):
            out.update(self.reward_model.state_arrays())
        return out

    def load_checkpoint_arrays(self, arrays):
        for name, intent in self.intentions.items():
            prefix = f"task.{name}."
            sub = {k[len(prefix):]: v for k, v in arrays.items()
                   if k.startswith(prefix)}
            intent.load_state_arrays(sub)
        if self.reward_model is not None and hasattr(self.reward_model,
                                                     "load_state_arrays"):
            sub = {k: v for k, v in arrays.items() if k.startswith("disc.")}
            if sub:
                self.reward_model.load_state_arrays(sub)

    def save_checkpoint_file(self, step):
        if not self.run_dir:
            return
        save_checkpoint(
            os.path.join(self.run_dir, "checkpoint.npz"),
            self.checkpoint_arrays(),
            {"step": int(step), "seed": self.cfg.seed,
             "tasks": [t.name for t in self.tasks]},
        )

    # -------------------------------------------------------------- #

    def train(self, config_snapshot=None):
        """Run cfg.total interactions; returns a summary dictionary."""
        cfg = self.cfg
        meta = self._write_metadata(config_snapshot)
        self._save_examples()
        env = self.env
        horizon = env.spec.episode_horizon
        act_dim = env.spec.act_dim

        state = env.reset(self.rng_env)
        self.scheduler.begin_episode(self.rng_sched)
        ep_step = 0
        for step in range(1, cfg.total + 1):
            task_name = self.scheduler.task_at(ep_step)
            if step <= cfg.exploration:
                action = self.rng_action.uniform(-1.0, 1.0, act_dim)
            else:
                action = self.intentions[task_name].act(state, self.rng_action)
            next_state = env.step(state, action, self.rng_env)
            self.replay.push(Transition(state, action, next_state, ep_step))
            state = next_state
            ep_step += 1
            if ep_step >= horizon:
                state = env.reset(self.rng_env)
                self.scheduler.begin_episode(self.rng_sched)
                ep_step = 0

            if step > cfg.warmup:
                for _ in range(cfg.grad_steps):
                    self._update_all(step)

            if cfg.eval_every and step % cfg.eval_every == 0:
                self._evaluate_point(step)
            self.step_count = step

        if (cfg.total and cfg.eval_every
                and cfg.total % cfg.eval_every != 0):
            self._evaluate_point(cfg.total)
        if cfg.total and not cfg.eval_every:
            self.save_checkpoint_file(cfg.total)
        self.metrics.close()
        return {
            "metadata": meta,
            "eval_history": self.eval_history,
            "final": {name: hist[-1] if hist else None
                      for name, hist in self.eval_history.items()},
            "steps": self.step_count,
        }

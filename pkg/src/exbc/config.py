"""Run configuration: defaults, file loading, overrides, and object assembly.

The default document below is the schema; user files may supply any subset of
its keys and nothing else.  Dotted-path overrides (section.key=value) are
applied after the file, last writer wins.
"""

import copy
import inspect
from dataclasses import dataclass, field

import numpy as np
import yaml

from exbc.buffers import TaskSet, load_examples
from exbc.envs import ENV_REGISTRY, FrameStack, generate_examples, make_env
from exbc.errors import ConfigError
from exbc.intentions import IntentionSettings
from exbc.rewards import DacRewards, RceClassifier, SqilReward
from exbc.scheduler import SchedulerConfig, default_trajectories
from exbc.trainer import RunConfig, Trainer

DEFAULT_YAML = """\
# Training run configuration.  Every key is optional in user files; values
# shown here are the defaults.  Unknown keys are rejected.

env:
  name: pointgrab        # environment id: chain | pointgrab
  frame_stack: 1         # concatenate this many consecutive observations
  params: {}             # keyword overrides for the environment constructor

tasks:
  main: stack            # the task being learned
  auxiliary: [reach, grasp, lift, release]   # scheduled side tasks; [] = single-task
  examples_per_task: 200 # success examples generated per task
  examples_dir: null     # load examples from <dir>/<task>.txt instead of generating

reward_model:
  kind: sqil             # sqil | dac | rce
  scale: 0.1             # reward magnitude for sqil labels / dac logits
  dac:
    hidden: [256, 256]   # discriminator layer widths
    lr: 3.0e-4           # discriminator learning rate
    grad_penalty: 10.0   # gradient-penalty coefficient on interpolated states
    logit_clip: 15.0     # clamp on the logit used as reward
    share_first_layer: true   # one shared input layer across task heads
    weight_decay: 1.0e-2 # decoupled weight decay for the discriminator

penalty:
  kind: hinge            # hinge | none | l2 | conservative
  lambda: 10.0           # penalty coefficient
  window: 50             # median-filter length for the return bounds
  ood_actions: 4         # sampled actions per state (conservative kind only)

scheduler:
  num_periods: 8         # equal task periods per episode (last takes remainder)
  main_task_rate: 0.5    # weighted-draw mass on the main task
  handcraft_rate: 0.5    # chance an episode follows a handcrafted trajectory
  use_default_trajectories: true  # install the built-in trajectory set
  trajectories: []       # explicit per-episode task sequences (overrides built-ins)

approx:
  hidden: [256, 256]     # policy/critic layer widths
  lr_actor: 3.0e-4       # policy learning rate
  lr_critic: 3.0e-4      # critic learning rate
  lr_alpha: 3.0e-4       # temperature learning rate
  init_alpha: 1.0e-2     # initial entropy temperature
  target_entropy: null   # null -> -action_dim
  polyak_tau: 1.0e-3     # target-network averaging rate
  max_grad_norm: 10.0    # global gradient-norm clip
  weight_decay: 1.0e-2   # decoupled weight decay for policy and critics
  entropy_in_td: false   # subtract alpha * log pi inside TD targets
  n_step: 1              # multi-step return length for replay targets

trainer:
  total: 20000           # environment interactions to run
  warmup: 500            # interactions collected before updates start
  exploration: 1000      # interactions with uniform-random actions
  batch_size: 128        # replay and example batch size
  buffer_capacity: null  # null -> equal to total
  grad_steps: 1          # gradient steps per environment step
  eval_every: 2000       # evaluation/checkpoint cadence in steps; 0 disables
  eval_episodes: 10      # episodes per evaluation point
  metrics_every: 100     # update-metric logging cadence in steps
  seed: 0                # master seed for the whole run
  augmentation_factor: 0.1  # example-noise scale relative to per-dim std

eval:
  final_window: 5        # trailing evaluation points pooled for final scores
  bootstrap_resamples: 2000  # bootstrap draws for confidence intervals
  confidence: 0.95       # confidence level for intervals
"""

DEFAULTS = yaml.safe_load(DEFAULT_YAML)

# subtrees whose contents are validated elsewhere, not against the schema
_FREE_PATHS = {
    ("env", "params"),
    ("tasks", "auxiliary"),
    ("scheduler", "trajectories"),
    ("reward_model", "dac", "hidden"),
    ("approx", "hidden"),
}


def default_config():
    return copy.deepcopy(DEFAULTS)


def _check_keys(user, defaults, path=()):
    if path in _FREE_PATHS:
        return
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise ConfigError(f"{'.'.join(path)}: expected a mapping")
        for key, value in user.items():
            if key not in defaults:
                dotted = ".".join(path + (key,))
                raise ConfigError(f"unknown configuration key {dotted!r}")
            _check_keys(value, defaults[key], path + (key,))


def _merge(base, user, path=()):
    for key, value in user.items():
        if (isinstance(value, dict) and isinstance(base.get(key), dict)
                and path + (key,) not in _FREE_PATHS):
            _merge(base[key], value, path + (key,))
        else:
            base[key] = copy.deepcopy(value)


def load_config(path=None):
    """Defaults deep-merged with an optional YAML file."""
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _check_keys(user, DEFAULTS)
        _merge(cfg, user)
    return cfg


def apply_overrides(cfg, overrides):
    """Apply dotted-path assignments like trainer.total=5000 in order."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like path.key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        ref = DEFAULTS
        for i, key in enumerate(keys):
            if tuple(keys[: i]) in _FREE_PATHS:
                break
            if not isinstance(ref, dict) or key not in ref:
                raise ConfigError(f"unknown configuration key {dotted!r}")
            ref = ref[key]
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: bad value ({exc})") from exc
        target = cfg
        for key in keys[:-1]:
            target = target.setdefault(key, {})
        target[keys[-1]] = value
    return cfg


@dataclass
class RunBundle:
    """Everything needed to construct a Trainer, built from one config."""

    env: object
    tasks: TaskSet
    example_buffers: dict
    run_cfg: RunConfig
    settings: IntentionSettings
    scheduler_cfg: SchedulerConfig
    reward_model: object
    eval_cfg: dict
    raw: dict = field(repr=False)

    def trainer(self, run_dir=None):
        return Trainer(
            self.env, self.tasks, self.example_buffers, self.run_cfg,
            self.settings, self.scheduler_cfg, self.reward_model,
            run_dir=run_dir,
        )


def _build_env(cfg):
    name = cfg["env"]["name"]
    if name not in ENV_REGISTRY:
        known = ", ".join(sorted(ENV_REGISTRY))
        raise ConfigError(f"unknown env {name!r} (known: {known})")
    params = cfg["env"]["params"] or {}
    allowed = set(inspect.signature(ENV_REGISTRY[name].__init__).parameters)
    allowed.discard("self")
    for key in params:
        if key not in allowed:
            raise ConfigError(f"env.params.{key}: {name} takes no such parameter")
    env = make_env(name, **params)
    k = int(cfg["env"]["frame_stack"])
    if k < 1:
        raise ConfigError("env.frame_stack must be >= 1")
    if k > 1:
        env = FrameStack(env, k)
    return env


def _build_tasks(cfg, env):
    names = set(env.task_names())
    main = cfg["tasks"]["main"]
    aux = list(cfg["tasks"]["auxiliary"] or [])
    if main not in names:
        raise ConfigError(f"tasks.main: env has no task {main!r}")
    for a in aux:
        if a not in names:
            raise ConfigError(f"tasks.auxiliary: env has no task {a!r}")
    if main in aux:
        raise ConfigError("tasks.auxiliary must not repeat the main task")
    return TaskSet(main, tuple(aux))


def _build_examples(cfg, env, tasks):
    count = int(cfg["tasks"]["examples_per_task"])
    if count < 1:
        raise ConfigError("tasks.examples_per_task must be >= 1")
    ex_dir = cfg["tasks"]["examples_dir"]
    seed = int(cfg["trainer"]["seed"])
    buffers = {}
    for i, task in enumerate(sorted(tasks, key=lambda t: t.name)):
        if ex_dir is not None:
            buffers[task.name] = load_examples(
                f"{ex_dir}/{task.name}.txt", task
            )
        else:
            rng = np.random.default_rng([seed, 1009, i])
            buffers[task.name] = generate_examples(env, task, count, rng)
    return buffers


def _build_reward_model(cfg, env, tasks):
    section = cfg["reward_model"]
    kind = section["kind"]
    if kind == "sqil":
        return SqilReward(scale=float(section["scale"]))
    if kind == "rce":
        if cfg["penalty"]["kind"] != "none":
            raise ConfigError(
                "classifier-style targets have no separate reward to bound; "
                "set penalty.kind to none"
            )
        return RceClassifier()
    if kind == "dac":
        d = section["dac"]
        rng = np.random.default_rng([int(cfg["trainer"]["seed"]), 2003])
        return DacRewards(
            env.spec.obs_dim, [t.name for t in sorted(tasks, key=lambda t: t.name)],
            tuple(int(h) for h in d["hidden"]), rng,
            lr=float(d["lr"]), scale=float(section["scale"]),
            grad_penalty=float(d["grad_penalty"]),
            weight_decay=float(d["weight_decay"]),
            max_grad_norm=float(cfg["approx"]["max_grad_norm"]),
            logit_clip=float(d["logit_clip"]),
            share_first_layer=bool(d["share_first_layer"]),
        )
    raise ConfigError(f"unknown reward_model.kind {kind!r}")


def _build_scheduler_cfg(cfg, tasks):
    section = cfg["scheduler"]
    trajectories = tuple(tuple(t) for t in section["trajectories"] or ())
    if not trajectories and section["use_default_trajectories"]:
        known = {t.name for t in tasks}
        candidates = default_trajectories(
            tasks.main.name, int(section["num_periods"])
        )
        trajectories = tuple(
            traj for traj in candidates if set(traj) <= known
        )
    return SchedulerConfig(
        num_periods=int(section["num_periods"]),
        main_task_rate=float(section["main_task_rate"]),
        handcraft_rate=float(section["handcraft_rate"]),
        trajectories=trajectories,
    )


def build_run(cfg):
    """Turn a validated config dict into live objects."""
    env = _build_env(cfg)
    tasks = _build_tasks(cfg, env)
    example_buffers = _build_examples(cfg, env, tasks)
    reward_model = _build_reward_model(cfg, env, tasks)

    ap = cfg["approx"]
    pen = cfg["penalty"]
    settings = IntentionSettings(
        hidden=tuple(int(h) for h in ap["hidden"]),
        gamma=env.spec.gamma,
        lr_actor=float(ap["lr_actor"]),
        lr_critic=float(ap["lr_critic"]),
        lr_alpha=float(ap["lr_alpha"]),
        init_alpha=float(ap["init_alpha"]),
        target_entropy=(None if ap["target_entropy"] is None
                        else float(ap["target_entropy"])),
        polyak_tau=float(ap["polyak_tau"]),
        max_grad_norm=float(ap["max_grad_norm"]),
        weight_decay=float(ap["weight_decay"]),
        penalty=pen["kind"],
        penalty_lambda=float(pen["lambda"]),
        bound_window=int(pen["window"]),
        entropy_in_td=bool(ap["entropy_in_td"]),
        n_step=int(ap["n_step"]),
        ood_actions=int(pen["ood_actions"]),
    )

    tr = cfg["trainer"]
    run_cfg = RunConfig(
        total=int(tr["total"]), warmup=int(tr["warmup"]),
        exploration=int(tr["exploration"]), batch_size=int(tr["batch_size"]),
        buffer_capacity=(None if tr["buffer_capacity"] is None
                         else int(tr["buffer_capacity"])),
        grad_steps=int(tr["grad_steps"]), eval_every=int(tr["eval_every"]),
        eval_episodes=int(tr["eval_episodes"]),
        metrics_every=int(tr["metrics_every"]), seed=int(tr["seed"]),
        augmentation_factor=float(tr["augmentation_factor"]),
    )
    return RunBundle(
        env=env, tasks=tasks, example_buffers=example_buffers,
        run_cfg=run_cfg, settings=settings,
        scheduler_cfg=_build_scheduler_cfg(cfg, tasks),
        reward_model=reward_model,
        eval_cfg=dict(cfg["eval"]),
        raw=copy.deepcopy(cfg),
    )

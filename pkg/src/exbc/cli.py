"""Command-line entry point: train, eval, diagnose, export-table.

Run directories are self-describing: the resolved config, metadata, metrics
stream, checkpoint, and the example sets all live inside.  Exit codes: 0
success, 2 usage or configuration problem, 3 runtime failure.
"""

import argparse
import os
import sys
import time

import numpy as np
import yaml

from exbc.buffers import load_examples
from exbc.checkpoint import load_checkpoint
from exbc.config import apply_overrides, build_run, load_config
from exbc.errors import ConfigError, ExbcError
from exbc.stats import export_table, matrix_from_metrics, q_trace
from exbc.trainer import evaluate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

RUN_ROOT_VAR = "EXBC_RUN_ROOT"


def _default_run_dir(cfg):
    root = os.environ.get(RUN_ROOT_VAR, "runs")
    stamp = time.strftime("%Y%m%d-%H%M%S")
    name = "{}-{}-seed{}-{}".format(
        cfg["env"]["name"], cfg["tasks"]["main"], cfg["trainer"]["seed"], stamp
    )
    return os.path.join(root, name)


def _load_run(run_dir):
    """Rebuild a trainer from a run directory and load its checkpoint."""
    cfg_path = os.path.join(run_dir, "config.yaml")
    if not os.path.exists(cfg_path):
        raise ExbcError(f"{run_dir}: no config.yaml; not a run directory?")
    cfg = load_config(cfg_path)
    bundle = build_run(cfg)
    trainer = bundle.trainer(run_dir=None)
    ckpt_path = os.path.join(run_dir, "checkpoint.npz")
    if not os.path.exists(ckpt_path):
        raise ExbcError(f"{run_dir}: missing checkpoint.npz")
    arrays, meta = load_checkpoint(ckpt_path)
    trainer.load_checkpoint_arrays(arrays)
    return cfg, bundle, trainer, meta


def cmd_train(args):
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    apply_overrides(cfg, args.override)
    bundle = build_run(cfg)
    run_dir = args.run_dir or _default_run_dir(cfg)
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "config.yaml"), "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
    trainer = bundle.trainer(run_dir)
    summary = trainer.train(config_snapshot=cfg)
    print(f"run directory: {run_dir}")
    for name, final in sorted(summary["final"].items()):
        if final is not None:
            step, success, ret = final
            print(f"final {name}: success {success:.3f} "
                  f"return {ret:.2f} (step {step})")
    return EXIT_OK


def cmd_eval(args):
    cfg, bundle, trainer, meta = _load_run(args.run_dir)
    episodes = (args.episodes if args.episodes is not None
                else cfg["trainer"]["eval_episodes"])
    lines = ["task\tsuccess\tmean_return\tepisodes"]
    if episodes > 0:
        rng = np.random.default_rng([cfg["trainer"]["seed"], 4242])
        results = evaluate(
            trainer.intentions, bundle.env, episodes, trainer.predicates, rng
        )
        for name in sorted(results):
            res = results[name]
            lines.append(f"{name}\t{res['success']:.4f}"
                         f"\t{res['mean_return']:.4f}\t{episodes}")
    text = "\n".join(lines) + "\n"
    out_path = os.path.join(args.run_dir, "eval_summary.tsv")
    with open(out_path, "w") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_diagnose(args):
    cfg, bundle, trainer, meta = _load_run(args.run_dir)
    ex_dir = os.path.join(args.run_dir, "examples")
    if not os.path.isdir(ex_dir):
        raise ExbcError(f"{args.run_dir}: missing examples directory")
    for name in sorted(trainer.intentions):
        path = os.path.join(ex_dir, f"{name}.txt")
        if not os.path.exists(path):
            raise ExbcError(f"missing example file {path}")
        task = next(t for t in bundle.tasks if t.name == name)
        buf = load_examples(path, task)
        trace = q_trace(
            trainer.intentions[name], bundle.env, buf.states,
            args.episode_seed,
        )
        out_path = os.path.join(args.run_dir, f"qtrace_{name}.tsv")
        with open(out_path, "w") as fh:
            fh.write("t\tgap\n")
            for t, gap in trace:
                fh.write(f"{int(t)}\t{gap:.6f}\n")
        violations = int(np.sum(trace[:, 1] > 0))
        print(f"{name}: max gap {trace[:, 1].max():+.4f}, "
              f"bound violations {violations}/{len(trace)}")
    return EXIT_OK


def cmd_export_table(args):
    paths = []
    for run_dir in args.run_dirs:
        path = os.path.join(run_dir, "metrics.jsonl")
        if not os.path.exists(path):
            raise ExbcError(f"{run_dir}: missing metrics.jsonl")
        paths.append(path)
    task = args.task
    if task is None:
        cfg = load_config(os.path.join(args.run_dirs[0], "config.yaml"))
        task = cfg["tasks"]["main"]
    matrix = matrix_from_metrics(paths, args.metric, task)
    text = export_table(
        matrix, task, args.out, window=args.window,
        resamples=args.resamples, level=args.level,
        rng=np.random.default_rng(args.table_seed),
    )
    print(text, end="")
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="exbc",
        description="Example-driven control: train and inspect agents that "
                    "learn from success-state examples only.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run training from a config file")
    p.add_argument("config", nargs="?", default=None,
                   help="YAML config; omitted = built-in defaults")
    p.add_argument("-o", "--override", action="append", default=[],
                   metavar="PATH=VALUE", help="dotted-path config override")
    p.add_argument("--run-dir", default=None,
                   help=f"output directory (default under ${RUN_ROOT_VAR})")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpointed run")
    p.add_argument("run_dir")
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose",
                       help="emit value-overestimation traces per task")
    p.add_argument("run_dir")
    p.add_argument("--episode-seed", type=int, default=0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("export-table",
                       help="summarize metrics across runs into a table")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--metric", default="eval/success")
    p.add_argument("--task", default=None)
    p.add_argument("--out", default="table.tsv")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--table-seed", type=int, default=0)
    p.set_defaults(func=cmd_export_table)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExbcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry():
    sys.exit(main())

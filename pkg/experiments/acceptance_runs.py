"""Run the desk-scale experiment arms backing the acceptance suite.

Each (arm, seed) run trains from scratch, then writes a small JSON summary
into results/acceptance/.  tests/test_acceptance.py asserts on those
summaries, so the multi-hour training cost is paid here, once, rather than
on every pytest invocation.  Runs are deterministic: the stored config plus
seed reproduce every number bit for bit.

Usage:
    python3 experiments/acceptance_runs.py --arm vp10 --seed 0
    python3 experiments/acceptance_runs.py --all            # every missing run
    python3 experiments/acceptance_runs.py --all --force    # rerun everything
"""

import argparse
import copy
import json
import os
import time

import numpy as np

from exbc.config import build_run, default_config
from exbc.stats import q_trace

RESULTS_DIR = os.path.join(os.path.dirname(__file__), "..", "results", "acceptance")
SEEDS = (0, 1, 2, 3, 4)

# Shared desk budget for the main-task comparison (multitask arms and the
# single-task baseline see the same number of environment steps).
TOTAL_MAIN = 50000
TOTAL_BOUND = 20000   # overestimation contrast needs >= 20k
TOTAL_REACH = 16000

AUX = ["reach", "grasp", "lift", "release"]


def base_config(total, seed):
    cfg = default_config()
    cfg["tasks"]["examples_per_task"] = 200
    cfg["approx"]["hidden"] = [32, 32]
    for k in ("lr_actor", "lr_critic", "lr_alpha"):
        cfg["approx"][k] = 1e-3
    cfg["approx"]["polyak_tau"] = 5e-3
    cfg["trainer"].update(total=total, warmup=500, exploration=1000,
                          eval_every=2000, eval_episodes=20,
                          metrics_every=1000, seed=seed)
    return cfg


def multitask(total, lam, seed):
    cfg = base_config(total, seed)
    cfg["tasks"].update(main="stack", auxiliary=list(AUX))
    cfg["penalty"]["lambda"] = lam
    if lam == 0.0:
        cfg["penalty"]["kind"] = "none"
    return cfg


def single_task(main, total, seed, lam=10.0, examples=200):
    cfg = base_config(total, seed)
    cfg["tasks"].update(main=main, auxiliary=[])
    cfg["tasks"]["examples_per_task"] = examples
    cfg["scheduler"]["num_periods"] = 1
    cfg["penalty"]["lambda"] = lam
    if lam == 0.0:
        cfg["penalty"]["kind"] = "none"
    return cfg


# cheap arms first so problems surface early in an --all sweep
ARMS = {
    "reach200": lambda seed: single_task("reach", TOTAL_REACH, seed, examples=200),
    "reach10": lambda seed: single_task("reach", TOTAL_REACH, seed, examples=10),
    "sqil": lambda seed: single_task("stack", TOTAL_MAIN, seed, lam=0.0),
    "vp0": lambda seed: multitask(TOTAL_BOUND, 0.0, seed),
    "vp10": lambda seed: multitask(TOTAL_MAIN, 10.0, seed),
    "vp1": lambda seed: multitask(TOTAL_MAIN, 1.0, seed),
    "vp100": lambda seed: multitask(TOTAL_MAIN, 100.0, seed),
}


def run_one(arm, seed):
    cfg = ARMS[arm](seed)
    snapshot = copy.deepcopy(cfg)
    t0 = time.time()
    bundle = build_run(cfg)
    trainer = bundle.trainer(run_dir=None)
    out = trainer.train()
    elapsed = time.time() - t0

    main = trainer.tasks.main.name
    intention = trainer.intentions[main]
    trace = q_trace(intention, trainer.env, trainer.example_buffers[main].states,
                    episode_seed=seed)
    history = out["eval_history"][main]
    result = {
        "arm": arm,
        "seed": seed,
        "main_task": main,
        "config": snapshot,
        "eval_steps": [int(s) for s, _, _ in history],
        "eval_success": [float(v) for _, v, _ in history],
        "final_success": float(history[-1][1]),
        "q_trace_max": float(trace[:, 1].max()),
        "elapsed_sec": round(elapsed, 1),
    }
    os.makedirs(RESULTS_DIR, exist_ok=True)
    path = os.path.join(RESULTS_DIR, f"{arm}_s{seed}.json")
    with open(path, "w") as fh:
        json.dump(result, fh, indent=1)
    tail = ", ".join(f"{v:.2f}" for v in result["eval_success"][-5:])
    print(f"{arm} seed {seed}: final {result['final_success']:.2f} "
          f"(tail {tail}) trace_max {result['q_trace_max']:.3f} "
          f"[{elapsed / 60:.1f} min]", flush=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--arm", choices=sorted(ARMS))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--all", action="store_true")
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()

    if args.all:
        jobs = [(a, s) for a in ARMS for s in SEEDS]
    elif args.arm is not None and args.seed is not None:
        jobs = [(args.arm, args.seed)]
    else:
        ap.error("give --arm and --seed, or --all")

    for arm, seed in jobs:
        path = os.path.join(RESULTS_DIR, f"{arm}_s{seed}.json")
        if os.path.exists(path) and not args.force:
            print(f"{arm} seed {seed}: exists, skipping")
            continue
        run_one(arm, seed)


if __name__ == "__main__":
    main()

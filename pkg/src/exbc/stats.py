"""Evaluation statistics: interquartile means, stratified bootstrap intervals,
value-overestimation traces, and metrics-file tooling."""

import json
from dataclasses import dataclass

import numpy as np

from exbc.buffers import _as_rng


def iqm(values):
    """Interquartile mean with fractional trimming.

    Each sorted value occupies the unit interval [i, i+1); the estimator
    averages with weights equal to the overlap of that interval with
    [n/4, 3n/4], so quartile boundaries falling inside a value's interval
    count it fractionally.
    """
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("iqm of an empty sequence")
    lo = n / 4.0
    hi = 3.0 * n / 4.0
    edges = np.arange(n, dtype=np.float64)
    w = np.clip(np.minimum(edges + 1.0, hi) - np.maximum(edges, lo), 0.0, 1.0)
    return float(np.sum(w * x) / np.sum(w))


def stratified_bootstrap_ci(values_by_stratum, resamples=2000, level=0.95,
                            rng=None):
    """Percentile bootstrap interval for the pooled IQM.

    values_by_stratum maps a stratum label (typically the task) to an array
    whose first axis indexes seeds; remaining axes (evaluation points) are
    flattened per seed.  Each resample redraws seeds with replacement
    independently inside every stratum, pools all values, and takes the IQM.
    Returns (low, high).
    """
    rng = _as_rng(rng)
    groups = []
    for key in sorted(values_by_stratum):
        arr = np.asarray(values_by_stratum[key], dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        arr = arr.reshape(arr.shape[0], -1)
        if arr.shape[0] < 2:
            raise ValueError(
                f"stratum {key!r} has {arr.shape[0]} seed(s); the bootstrap "
                "needs at least 2"
            )
        groups.append(arr)
    stats = np.empty(resamples)
    for b in range(resamples):
        pooled = [g[rng.integers(g.shape[0], size=g.shape[0])].ravel()
                  for g in groups]
        stats[b] = iqm(np.concatenate(pooled))
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(stats, [tail, 1.0 - tail])
    return float(lo), float(hi)


@dataclass
class RunMatrix:
    """Per-task evaluation scores on a fixed step grid.

    values maps task name to an array of shape (n_seeds, n_points) aligned
    with steps.
    """

    steps: np.ndarray
    values: dict

    def __post_init__(self):
        self.steps = np.asarray(self.steps)
        n = self.steps.size
        clean = {}
        for task, arr in self.values.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != n:
                raise ValueError(
                    f"task {task!r}: expected shape (seeds, {n}), got {arr.shape}"
                )
            clean[task] = arr
        self.values = clean

    def final_scores(self, task, window=5):
        """Last `window` evaluation points per seed, shape (n_seeds, w)."""
        arr = self.values[task]
        w = min(window, arr.shape[1])
        return arr[:, arr.shape[1] - w:]

    def final_iqm(self, task, window=5):
        return iqm(self.final_scores(task, window))


def q_trace(intention, env, example_states, episode_seed):
    """Per-step gap between the rolled-out value and mean example value.

    Rolls one stochastic episode, recording at each step t the difference
    min-twin Q(s_t, a_t) minus the batch mean of min-twin Q at the example
    states under fresh policy actions.  Returns an array of (t, gap) rows of
    length equal to the episode horizon.
    """
    rng = np.random.default_rng(episode_seed)
    example_states = np.asarray(example_states, dtype=np.float64)
    ex_actions, _, _ = intention.policy.sample(example_states, rng)
    v_star = float(np.mean(intention.min_q(example_states, ex_actions)))
    horizon = env.spec.episode_horizon
    out = np.empty((horizon, 2))
    state = env.reset(rng)
    for t in range(horizon):
        action = intention.act(state, rng)
        q = float(intention.min_q(state, action)[0])
        out[t, 0] = t
        out[t, 1] = q - v_star
        state = env.step(state, action, rng)
    return out


# ---------------------------------------------------------------------- #
# metrics stream tooling                                                 #
# ---------------------------------------------------------------------- #

def read_metrics(path):
    """Yield metric records from a line-delimited metrics file."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def collect_series(path, metric_name, task):
    """(steps, values) arrays for one metric of one task, in file order."""
    steps, values = [], []
    for rec in read_metrics(path):
        if rec["metric_name"] == metric_name and rec["task"] == task:
            steps.append(rec["step"])
            values.append(rec["value"])
    return np.asarray(steps), np.asarray(values, dtype=np.float64)


def matrix_from_metrics(paths, metric_name, task):
    """Stack one metric series per run file into a RunMatrix.

    All files must share the same evaluation-step grid.
    """
    steps_ref = None
    rows = []
    for path in paths:
        steps, values = collect_series(path, metric_name, task)
        if steps_ref is None:
            steps_ref = steps
        elif not np.array_equal(steps, steps_ref):
            raise ValueError(f"{path}: evaluation steps differ across runs")
        rows.append(values)
    if steps_ref is None:
        raise ValueError("no metrics files given")
    return RunMatrix(steps_ref, {task: np.stack(rows)})


def export_table(matrix, task, out_path, window=5, resamples=2000,
                 level=0.95, rng=None):
    """Write a plot-ready summary: task, step, iqm, ci_low, ci_high.

    Each row pools a trailing window of evaluation points across seeds.
    """
    rng = _as_rng(rng)
    arr = matrix.values[task]
    lines = ["task\tstep\tiqm\tci_low\tci_high"]
    for j, step in enumerate(matrix.steps):
        start = max(0, j - window + 1)
        block = arr[:, start:j + 1]
        point = iqm(block)
        lo, hi = stratified_bootstrap_ci(
            {task: block}, resamples=resamples, level=level, rng=rng
        )
        lines.append(f"{task}\t{int(step)}\t{point:.6f}\t{lo:.6f}\t{hi:.6f}")
    text = "\n".join(lines) + "\n"
    with open(out_path, "w") as fh:
        fh.write(text)
    return text

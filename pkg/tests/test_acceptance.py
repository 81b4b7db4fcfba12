"""Release gate: eleven numbered end-to-end checks.

Each test prints one PASS/FAIL line (visible with -s, or in the captured
output on failure) and asserts the stated tolerance.  Checks 2-5 read the
desk-scale run summaries under results/acceptance/, produced once by
`python3 experiments/acceptance_runs.py --all`; everything else runs inline
in about a minute total.
"""

import json
import pathlib
import time

import numpy as np
import pytest
import scipy.stats

from exbc.buffers import ExampleBuffer, TaskId, TaskSet
from exbc.envs.chainworld import ChainWorld, chain_exact_q
from exbc.intentions import Intention, IntentionSettings
from exbc.rewards import DacRewards, RceClassifier, SqilReward, rce_targets
from exbc.scheduler import SchedulerConfig, TaskScheduler
from exbc.stats import iqm, stratified_bootstrap_ci
from exbc.trainer import RunConfig, Trainer

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results" / "acceptance"
SEEDS = range(5)


def _report(num, name, ok, detail):
    print(f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num:02d} {name}: {detail}"


def _load_arm(arm, seeds=SEEDS):
    runs = []
    for s in seeds:
        path = RESULTS / f"{arm}_s{s}.json"
        if not path.exists():
            pytest.fail(
                f"missing {path}; generate the desk-scale runs once with "
                "`python3 experiments/acceptance_runs.py --all`"
            )
        runs.append(json.loads(path.read_text()))
    return runs


def _final_window(runs, window=5):
    """Per-seed scores over the last `window` evaluation points."""
    return np.array([r["eval_success"][-window:] for r in runs])


def _ci(matrix, seed=0):
    return stratified_bootstrap_ci({"main": matrix}, resamples=10000,
                                   level=0.95, rng=np.random.default_rng(seed))


# ---------------------------------------------------------------------- #
# 1. critic matches the exact chain solution                             #
# ---------------------------------------------------------------------- #

def test_01_chain_oracle_equivalence():
    t0 = time.time()
    env = ChainWorld(n_states=5, horizon=4)
    tasks = TaskSet("reach_goal", ())
    goal = np.eye(5)[4]
    buffers = {"reach_goal": ExampleBuffer(tasks.main, np.tile(goal, (32, 1)))}
    settings = IntentionSettings(
        hidden=(32,), gamma=0.9, lr_actor=1e-3, lr_critic=1e-3, lr_alpha=1e-3,
        init_alpha=1e-3, target_entropy=-6.0, polyak_tau=1e-2,
        penalty="hinge", penalty_lambda=10.0,
    )
    cfg = RunConfig(total=12000, warmup=200, exploration=800, batch_size=64,
                    eval_every=0, eval_episodes=0, metrics_every=1000, seed=0)
    trainer = Trainer(env, tasks, buffers, cfg, settings,
                      SchedulerConfig(num_periods=1, handcraft_rate=0.0),
                      SqilReward(0.1))
    trainer.train()

    oracle = chain_exact_q(env, np.array([-0.1, -0.1, -0.1, -0.1, 0.1]),
                           gamma=0.9)
    intent = trainer.intentions["reach_goal"]

    # visited (state, direction) pairs, compared at the canonical actions +-1
    n = len(trainer.replay)
    s_idx = trainer.replay._states[:n].argmax(axis=1)
    a_col = (trainer.replay._actions[:n, 0] > 0).astype(int)
    visited = sorted(set(zip(s_idx.tolist(), a_col.tolist())))
    errs = {}
    for s, col in visited:
        a = np.array([[1.0 if col else -1.0]])
        q = float(intent.min_q(np.eye(5)[s][None, :], a)[0])
        errs[(s, col)] = abs(q - oracle[s, col])
    sup = max(errs.values())

    v_goal = float(np.mean(intent.example_values(goal[None, :],
                                                 np.random.default_rng(0))))
    q3_right = float(intent.min_q(np.eye(5)[3][None, :], np.array([[1.0]]))[0])
    elapsed = time.time() - t0

    ok = (sup <= 0.05 and abs(v_goal - 1.0) <= 0.05
          and abs(q3_right - 0.8) <= 0.05 and elapsed < 60.0)
    _report(1, "chain critic matches value iteration", ok,
            f"sup|Q-Q*|={sup:.3f} over {len(visited)} visited pairs, "
            f"V(goal)={v_goal:.3f}, Q(3,+1)={q3_right:.3f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------- #
# 2-5. desk-scale training arms (precomputed summaries)                  #
# ---------------------------------------------------------------------- #

def test_02_bound_conformance():
    with_pen = [r["q_trace_max"] for r in _load_arm("vp10")]
    without = [r["q_trace_max"] for r in _load_arm("vp0")]
    ok = max(with_pen) <= 0.1 and max(without) > 0.0
    _report(2, "value stays below the example bound", ok,
            f"penalized max {max(with_pen):.3f} (all of 5 <= 0.1), "
            f"unpenalized max {max(without):.3f} (> 0)")


def test_03_multitask_beats_single_task():
    multi = _final_window(_load_arm("vp10"))
    single = _final_window(_load_arm("sqil"))
    iqm_m, iqm_s = iqm(multi), iqm(single)
    lo_m, hi_m = _ci(multi)
    lo_s, hi_s = _ci(single)
    ok = iqm_m > iqm_s and iqm_m >= 0.8 and lo_m > hi_s
    _report(3, "scheduled multitask beats single-task baseline", ok,
            f"multitask IQM {iqm_m:.2f} CI [{lo_m:.2f},{hi_m:.2f}] vs "
            f"single IQM {iqm_s:.2f} CI [{lo_s:.2f},{hi_s:.2f}]")


def test_04_penalty_weight_insensitivity():
    cis = {}
    for arm in ("vp1", "vp10", "vp100"):
        cis[arm] = _ci(_final_window(_load_arm(arm)))
    arms = sorted(cis)
    ok = all(cis[a][0] <= cis[b][1] and cis[b][0] <= cis[a][1]
             for i, a in enumerate(arms) for b in arms[i + 1:])
    detail = ", ".join(f"{a} [{lo:.2f},{hi:.2f}]" for a, (lo, hi) in cis.items())
    _report(4, "penalty weight has overlapping intervals", ok, detail)


def test_05_example_quantity_ablation():
    few = _final_window(_load_arm("reach10"))
    many = _final_window(_load_arm("reach200"))
    per_seed = few.mean(axis=1)
    ok = (per_seed > 0).all()
    _report(5, "ten examples still solve reach", ok,
            f"per-seed final means {np.round(per_seed, 2).tolist()} all > 0 "
            f"(200-example IQM {iqm(many):.2f}, 10-example IQM {iqm(few):.2f})")


# ---------------------------------------------------------------------- #
# 6. closed-form return bound                                            #
# ---------------------------------------------------------------------- #

def test_06_closed_form_return_bound():
    lo, hi = SqilReward(0.1).return_bounds(0.99)
    ok = lo == -10.0 and hi == 10.0
    _report(6, "return bound is exact", ok, f"bounds ({lo}, {hi})")


# ---------------------------------------------------------------------- #
# 7. finite-difference integrity of every training loss                  #
# ---------------------------------------------------------------------- #

class _GradRecorder:
    """Optimizer stand-in: records gradients, never moves parameters."""

    def __init__(self):
        self.grads = None

    def step(self, grads):
        self.grads = [np.array(g, dtype=np.float64, copy=True) for g in grads]
        return 0.0


def _make_intention(kind, penalty, n_step=1):
    rng = np.random.default_rng(3)
    obs, act = 6, 2
    if kind == "sqil":
        rm = SqilReward(0.1)
    elif kind == "dac":
        rm = DacRewards(obs, ["probe"], (8,), rng, grad_penalty=5.0)
    else:
        rm = RceClassifier()
    settings = IntentionSettings(hidden=(8,), gamma=0.9, penalty=penalty,
                                 penalty_lambda=3.0, n_step=n_step,
                                 ood_actions=3)
    intent = Intention(TaskId("probe", "main"), obs, act, settings, rm, rng)
    if penalty == "hinge":
        intent.bounds.observe_example_value(0.6)
    return intent


def _batches(n_step=1, n=12, obs=6, act=2, seed=5):
    rng = np.random.default_rng(seed)
    if n_step == 1:
        batch = {"states": rng.normal(size=(n, obs)),
                 "actions": rng.uniform(-1, 1, size=(n, act)),
                 "next_states": rng.normal(size=(n, obs))}
    else:
        batch = {"states": rng.normal(size=(n, n_step, obs)),
                 "lengths": rng.integers(1, n_step + 1, size=n),
                 "bootstrap_states": rng.normal(size=(n, obs)),
                 "first_actions": rng.uniform(-1, 1, size=(n, act))}
    s_star = rng.normal(size=(6, obs)) + 2.0
    return batch, s_star


def _probe(params, loss_and_grads, n_probes, rng, h=1e-6):
    """Max symmetric relative error between central FD and analytic slopes."""
    worst = 0.0
    for _ in range(n_probes):
        _, grads = loss_and_grads()
        direction = [rng.standard_normal(p.shape) for p in params]
        norm = np.sqrt(sum(float((d * d).sum()) for d in direction))
        direction = [d / norm for d in direction]
        analytic = sum(float((g * d).sum()) for g, d in zip(grads, direction))
        for p, d in zip(params, direction):
            p += h * d
        up, _ = loss_and_grads()
        for p, d in zip(params, direction):
            p -= 2 * h * d
        down, _ = loss_and_grads()
        for p, d in zip(params, direction):
            p += h * d
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - analytic) / max(abs(fd) + abs(analytic), 1e-8))
    return worst


def test_07_gradient_integrity():
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst = {}
    total_probes = 0

    critic_cases = [("sqil", "hinge", 1, 15), ("sqil", "none", 1, 10),
                    ("sqil", "l2", 1, 10), ("sqil", "conservative", 1, 15),
                    ("dac", "hinge", 1, 10), ("rce", "none", 1, 15),
                    ("sqil", "hinge", 3, 10)]
    for kind, penalty, n_step, probes in critic_cases:
        intent = _make_intention(kind, penalty, n_step)
        batch, s_star = _batches(n_step)
        rec = _GradRecorder()
        intent.critic_optim = rec
        step = (intent._critic_step_rce if kind == "rce"
                else intent._critic_step_td)

        def crit_loss(step=step, batch=batch, s_star=s_star, rec=rec):
            m = step(batch, s_star, np.random.default_rng(17))
            return m["critic_loss"] + m["penalty_loss"], rec.grads

        params = (intent.critics.q1.parameters()
                  + intent.critics.q2.parameters())
        label = f"critic[{kind},{penalty},n={n_step}]"
        worst[label] = _probe(params, crit_loss, probes, rng)
        total_probes += probes

    intent = _make_intention("sqil", "hinge")
    batch, s_star = _batches()
    rec = _GradRecorder()
    intent.actor_optim = rec

    def actor_loss():
        m = intent._actor_step(batch["states"], np.random.default_rng(19))
        return m["actor_loss"], rec.grads

    worst["actor"] = _probe(intent.policy.parameters(), actor_loss, 15, rng)
    total_probes += 15

    intent = _make_intention("sqil", "hinge")
    batch, s_star = _batches()
    recorder = _GradRecorder()
    intent.critic_optim = _GradRecorder()
    intent.actor_optim = _GradRecorder()
    intent.alpha_optim = recorder
    targets = intent.critics.t1.parameters() + intent.critics.t2.parameters()
    frozen = [p.copy() for p in targets]

    def alpha_loss():
        # update() applies a polyak step to the target nets; undo it so each
        # probe evaluation sees the same state
        for p, f in zip(targets, frozen):
            p[...] = f
        m = intent.update(batch, s_star, np.random.default_rng(23))
        return m["alpha_loss"], recorder.grads

    worst["temperature"] = _probe([intent.log_alpha], alpha_loss, 5, rng)
    total_probes += 5

    dac = DacRewards(6, ["probe"], (8,), np.random.default_rng(29),
                     grad_penalty=5.0)
    batch, s_star = _batches()
    rec = _GradRecorder()
    dac.optim["probe"] = rec

    def disc_loss():
        m = dac.update("probe", batch["states"], s_star,
                       np.random.default_rng(31))
        return m["loss"], rec.grads

    worst["discriminator"] = _probe(dac.nets["probe"].parameters(),
                                    disc_loss, 15, rng)
    total_probes += 15

    elapsed = time.time() - t0
    max_err = max(worst.values())
    ok = max_err < 1e-4 and total_probes >= 100 and elapsed < 120.0
    worst_name = max(worst, key=worst.get)
    _report(7, "all losses pass finite-difference checks", ok,
            f"max rel err {max_err:.2e} ({worst_name}), "
            f"{total_probes} probes, {elapsed:.0f}s")


# ---------------------------------------------------------------------- #
# 8. evaluation statistics                                               #
# ---------------------------------------------------------------------- #

def test_08_statistics_exactness():
    exact = iqm(np.arange(1, 9))
    scores = np.array([[0.1, 0.4, 0.5], [0.2, 0.6, 0.7], [0.0, 0.3, 0.9],
                       [0.5, 0.5, 0.6], [0.3, 0.8, 1.0]])
    lo, hi = stratified_bootstrap_ci({"t": scores}, resamples=10000,
                                     level=0.95, rng=np.random.default_rng(0))

    rng = np.random.default_rng(1)
    stats = []
    for _ in range(10000):
        pick = scores[rng.integers(0, 5, size=5)]
        stats.append(iqm(pick))
    ref_lo, ref_hi = np.percentile(stats, [2.5, 97.5])

    ok = (exact == 4.5 and abs(lo - ref_lo) <= 0.01 and abs(hi - ref_hi) <= 0.01)
    _report(8, "trimmed mean and bootstrap agree with references", ok,
            f"iqm(1..8)={exact}, CI [{lo:.3f},{hi:.3f}] vs "
            f"independent [{ref_lo:.3f},{ref_hi:.3f}]")


# ---------------------------------------------------------------------- #
# 9. weighted task selection frequencies                                 #
# ---------------------------------------------------------------------- #

def test_09_scheduler_frequencies():
    tasks = TaskSet("stack", ("reach", "grasp", "lift", "release"))
    sched = TaskScheduler(tasks, horizon=40,
                          config=SchedulerConfig(num_periods=4,
                                                 main_task_rate=0.5,
                                                 handcraft_rate=0.0))
    rng = np.random.default_rng(1)
    draws = [sched.draw_task(rng) for _ in range(100_000)]
    names = sorted(sched.probabilities())
    counts = np.array([draws.count(n) for n in names])
    expected = np.array([sched.probabilities()[n] for n in names]) * len(draws)
    p = scipy.stats.chisquare(counts, expected).pvalue
    ok = p > 0.01 and sched.probabilities()["stack"] == 0.5
    _report(9, "task draw frequencies match their weights", ok,
            f"chi-square p={p:.3f} over {len(draws)} draws, main weight 0.5, "
            f"aux weights 0.125")


# ---------------------------------------------------------------------- #
# 10. reward model contracts                                             #
# ---------------------------------------------------------------------- #

def test_10_reward_model_contracts():
    rng = np.random.default_rng(2)
    dac = DacRewards(4, ["t"], (32,), rng)
    replay = rng.normal(size=(64, 4)) - 2.0
    example = rng.normal(size=(64, 4)) + 2.0
    for _ in range(400):
        dac.update("t", replay, example, rng)
    from exbc.rewards import _sigmoid
    d_ex = float(np.mean(_sigmoid(dac.logits("t", example))))
    d_re = float(np.mean(_sigmoid(dac.logits("t", replay))))

    v = rng.uniform(0.01, 0.99, size=256)
    y, w = rce_targets(v, 0.99)
    ww = v / (1.0 - v)
    y_ref = 0.99 * ww / (1.0 + 0.99 * ww)
    w_ref = 1.0 + 0.99 * ww
    rce_err = max(np.abs(y - y_ref).max(), np.abs(w - w_ref).max())

    sq = SqilReward(0.1)
    ordering = (sq.example_reward(8) > sq.replay_reward(8)).all()

    ok = d_ex > 0.9 and d_re < 0.1 and rce_err <= 1e-12 and ordering
    _report(10, "reward models honour their contracts", ok,
            f"D(example)={d_ex:.3f} > 0.9, D(replay)={d_re:.3f} < 0.1, "
            f"classifier target err {rce_err:.1e}, labels strictly ordered")


# ---------------------------------------------------------------------- #
# 11. bitwise determinism                                                #
# ---------------------------------------------------------------------- #

def _tiny_run():
    env = ChainWorld(n_states=4, horizon=6)
    tasks = TaskSet("reach_goal", ())
    buffers = {"reach_goal": ExampleBuffer(tasks.main,
                                           np.tile(np.eye(4)[3], (8, 1)))}
    cfg = RunConfig(total=400, warmup=50, exploration=100, batch_size=16,
                    eval_every=200, eval_episodes=3, metrics_every=50, seed=9)
    trainer = Trainer(env, tasks, buffers, cfg,
                      IntentionSettings(hidden=(16,), gamma=0.9),
                      SchedulerConfig(num_periods=1, handcraft_rate=0.0),
                      SqilReward(0.1))
    out = trainer.train()
    return trainer.metrics.records, out["eval_history"]


def test_11_determinism():
    rec_a, hist_a = _tiny_run()
    rec_b, hist_b = _tiny_run()
    same = (json.dumps(rec_a) == json.dumps(rec_b)
            and json.dumps(hist_a) == json.dumps(hist_b))
    _report(11, "identical config and seed replay bitwise", same,
            f"{len(rec_a)} metric records and {sum(len(v) for v in hist_a.values())} "
            "evaluation points identical across two runs")

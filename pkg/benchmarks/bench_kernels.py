"""Timing comparison between the compiled kernels and the pure-NumPy fallback.

Run as a script:  python3 benchmarks/bench_kernels.py [--repeats 200]

Shapes mirror the training hot path: batches of states through a two-layer
net, the matching backward sweep, and an optimizer step over the same
parameter count.
"""

import argparse
import time

import numpy as np

from exbc.nets import _kernels_py

try:
    from exbc.nets import _kernels
except ImportError:
    _kernels = None


CASES = (
    ("small batch", 32, 16, (32, 32), 1),
    ("train batch", 128, 16, (32, 32), 1),
    ("wide net", 128, 16, (256, 256), 1),
)


def bench(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_net(rng, in_dim, hidden, out_dim):
    sizes = (in_dim,) + hidden + (out_dim,)
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(np.ascontiguousarray(rng.normal(size=(b, a)) / np.sqrt(a)))
        biases.append(np.ascontiguousarray(rng.normal(size=b) * 0.01))
    return weights, biases


def run_case(label, batch, in_dim, hidden, out_dim, repeats):
    rng = np.random.default_rng(0)
    weights, biases = build_net(rng, in_dim, hidden, out_dim)
    x = np.ascontiguousarray(rng.normal(size=(batch, in_dim)))
    g = np.ascontiguousarray(rng.normal(size=(batch, out_dim)))
    n_params = sum(w.size for w in weights) + sum(b.size for b in biases)
    p = rng.normal(size=n_params)
    pg = rng.normal(size=n_params)
    m = np.zeros(n_params)
    v = np.zeros(n_params)

    rows = []
    for name, mod in (("compiled", _kernels), ("fallback", _kernels_py)):
        if mod is None:
            rows.append((name, None, None, None))
            continue
        acts = mod.mlp_forward(x, weights, biases)
        fwd = bench(lambda: mod.mlp_forward(x, weights, biases), repeats)
        bwd = bench(lambda: mod.mlp_backward(acts, weights, g, True), repeats)
        opt = bench(
            lambda: mod.adamw_step(p, pg, m, v, 10, 3e-4, 0.9, 0.999, 1e-8, 1e-2),
            repeats,
        )
        rows.append((name, fwd, bwd, opt))

    print(f"\n{label}: batch {batch}, net {in_dim}->{hidden}->{out_dim}")
    print(f"  {'backend':<10} {'forward':>12} {'backward':>12} {'adamw':>12}")
    for name, fwd, bwd, opt in rows:
        if fwd is None:
            print(f"  {name:<10} {'unavailable':>12}")
            continue
        print(f"  {name:<10} {fwd * 1e6:>10.1f}us {bwd * 1e6:>10.1f}us "
              f"{opt * 1e6:>10.1f}us")
    if _kernels is not None:
        (_, cf, cb, co), (_, pf, pb, po) = rows
        print(f"  {'speedup':<10} {pf / cf:>11.2f}x {pb / cb:>11.2f}x "
              f"{po / co:>11.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=200,
                    help="timing repetitions; the minimum is reported")
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not importable; timing fallback only")
    for label, batch, in_dim, hidden, out_dim in CASES:
        run_case(label, batch, in_dim, hidden, out_dim, args.repeats)


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import time

import numpy as np

from ffpia import _kernels_py, kernels
from ffpia import circuits as cc
from ffpia import sampling as sp

try:
    from ffpia import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def ff_case(S=200_000, D=8, seed=0):
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((S, D))
    c = np.zeros(D)
    c[0] = 1.0
    return (means, c, rng.standard_normal(D - 2), np.arange(2, D, dtype=np.int64), 0.7,
            rng.standard_normal(S), np.array([0, 3], dtype=np.int64), np.array([0.5, -1.1]))


def scan_case(n=100_000, seed=0):
    rng = np.random.default_rng(seed)
    ph = rng.uniform(0, 2 * np.pi, n)
    return ph, rng.standard_normal(n), np.array([0.1, -0.2, 0.9, 1.1, 0.05])


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)

    impls = {"python": _kernels_py}
    if _kernels is not None:
        impls["cython"] = _kernels
    ff, scan = ff_case(), scan_case()
    rows = []
    for name, impl in impls.items():
        rows.append(("homodyne_feedforward 2e5x8", name,
                     best_of(lambda: impl.homodyne_feedforward(*ff), args.repeat)))
        rows.append(("scan_loglik 1e5", name, best_of(lambda: impl.scan_loglik(*scan), args.repeat)))

    # end to end, through the public API
    prog = cc.build_cloner_program()
    state = cc.to_gaussian(prog)
    ds = sp.sample_scan(state, 0, sp.scan_phases(100_000), np.random.default_rng(1))
    for name in impls:
        rows.append(("fit_moments 1e5", name,
                     best_of(lambda: sp.fit_moments(ds, backend=name), max(1, args.repeat // 2))))
    t = best_of(lambda: sp.monte_carlo_circuit(prog, 1_000_000, np.random.default_rng(0)), 1)
    rows.append(("monte_carlo_circuit 1e6 (cloner)", kernels.BACKEND, t))

    ref = {k: t for k, b, t in rows if b == "python"}
    print(f"{'case':34s} {'backend':8s} {'seconds':>10s} {'speedup':>8s}")
    for case, b, t in rows:
        sp_ = ref.get(case, t) / t
        print(f"{case:34s} {b:8s} {t:10.4f} {sp_:8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([{"case": c, "backend": b, "seconds": t} for c, b, t in rows], fh, indent=2)


if __name__ == "__main__":
    main()

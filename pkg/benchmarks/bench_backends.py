"""Time the compiled kernels against the numpy fallback.

Run: python3 benchmarks/bench_backends.py [--repeats N]
Both implementations are imported directly, so one process measures both
regardless of which backend the package selected.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from invnet.backend import kernels_py
from invnet.rng import Rng

try:
    from invnet.backend import _kernels as compiled
except ImportError:
    compiled = None


def _time(fn, *args, repeats: int = 20) -> float:
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    rng = Rng(0)
    x = rng.gaussian(size=(4096, 256))
    g = rng.gaussian(size=(4096, 256))
    p = rng.gaussian(size=(512, 512))
    gp = rng.gaussian(size=(512, 512))
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    c = rng.gaussian(size=(64, 2, 32, 32)) + 2.0
    d1 = np.full(64, 3e-3)
    d2 = np.full(64, 4e-3)
    kap = np.full(64, 3e-3)

    cases = [
        ("silu forward", lambda k: k.silu(x)),
        ("silu vjp", lambda k: k.silu_vjp(x, g)),
        ("relu forward", lambda k: k.relu(x)),
        ("relu vjp", lambda k: k.relu_vjp(x, g)),
        ("adam update", lambda k: k.adam_update(p.copy(), gp, m.copy(),
                                                v.copy(), 3, 1e-3, 0.9, 0.999,
                                                1e-8, 0.0)),
        ("rd stencil rhs", lambda k: k.rd_rhs(c, d1, d2, kap, 256.0)),
    ]

    print(f"{'kernel':<16} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, call in cases:
        t_py = _time(call, kernels_py, repeats=args.repeats)
        if compiled is None:
            print(f"{name:<16} {t_py * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
            continue
        t_ext = _time(call, compiled, repeats=args.repeats)
        print(f"{name:<16} {t_py * 1e3:>10.3f}ms {t_ext * 1e3:>10.3f}ms "
              f"{t_py / t_ext:>8.2f}x")
    if compiled is None:
        print("compiled backend not built; run pip install -e . first")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Timing comparison of the compiled kernels against the numpy fallback.

Run as a script: ``python benchmarks/bench_backends.py``. Both kernel
sets are imported directly, so one process measures both regardless of
which backend the package selected at import time.
"""

from __future__ import annotations

import time

import numpy as np

from infoshift.numkit import BACKEND_NAME, Rng
from infoshift.numkit import _npkern as npk

try:
    from infoshift.numkit import _ckern as ck
except ImportError:
    ck = None


def _time(fn, *args, repeat: int = 5, inner: int = 1) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_jacobi(mod, dim: int, rng: Rng) -> float:
    base = rng.normal(size=(dim, dim))
    sym = 0.5 * (base + base.T)

    def run():
        a = np.array(sym, copy=True)
        v = np.eye(dim)
        mod.jacobi_eig(a, v, 100, 1e-14)

    return _time(run)


def bench_mlp_forward(mod, batch: int, hidden: int, rng: Rng) -> float:
    d_in, d_out = 8, 4
    x = rng.normal(size=(batch, d_in))
    w1 = rng.normal(size=(d_in, hidden)) / np.sqrt(d_in)
    b1 = np.zeros(hidden)
    w2 = rng.normal(size=(hidden, d_out)) / np.sqrt(hidden)
    b2 = np.zeros(d_out)
    hid = np.empty((batch, hidden))
    out = np.empty((batch, d_out))
    return _time(mod.mlp2_forward, x, w1, b1, w2, b2, hid, out, inner=10)


def bench_adamw(mod, n: int, rng: Rng) -> float:
    p = rng.normal(size=n)
    g = rng.normal(size=n)
    m = np.zeros(n)
    v = np.zeros(n)
    return _time(
        mod.adamw_update, p, g, m, v, 10, 1e-3, 0.9, 0.999, 1e-8, 0.01, inner=10
    )


def main() -> None:
    rng = Rng(0)
    mods = [("numpy", npk)] + ([("compiled", ck)] if ck is not None else [])
    rows = []
    cases = [
        ("jacobi 32x32", lambda m: bench_jacobi(m, 32, rng.child("j32"))),
        ("jacobi 64x64", lambda m: bench_jacobi(m, 64, rng.child("j64"))),
        ("mlp fwd 512x250", lambda m: bench_mlp_forward(m, 512, 250, rng.child("mlp"))),
        ("adamw 100k", lambda m: bench_adamw(m, 100_000, rng.child("opt"))),
    ]
    for label, runner in cases:
        times = {name: runner(mod) for name, mod in mods}
        rows.append((label, times))

    print(f"active backend: {BACKEND_NAME}")
    header = f"{'case':<18}" + "".join(f"{name:>14}" for name, _ in mods)
    if len(mods) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, times in rows:
        line = f"{label:<18}" + "".join(f"{times[name] * 1e3:>12.3f}ms" for name, _ in mods)
        if len(mods) == 2:
            line += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()

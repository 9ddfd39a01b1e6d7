"""Benchmark the compiled simplex kernels against the numpy fallback.

The pivot rank-1 update dominates solve time, so the microbenchmark runs
identical pivot sequences on identical tableaus through both
implementations and checks they produce the same numbers.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels_py


def _load_compiled():
    try:
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    except ImportError:
        return None


def bench_kernels(m=600, n_struct=900, pivots=150, seed=0):
    """Time `pivots` tableau pivots per implementation on one random
    tableau; returns a dict of timings plus the max numeric deviation."""
    rng = np.random.default_rng(seed)
    N = m + n_struct
    T0 = rng.normal(0, 1, (m, N))
    d0 = rng.normal(0, 1, N)
    moves = [(int(rng.integers(0, m)), int(rng.integers(0, n_struct))) for _ in range(pivots)]
    # keep pivots well-conditioned
    for r, e in moves:
        T0[r, e] += np.sign(T0[r, e]) + 1.0

    impls = {"numpy": _kernels_py}
    compiled = _load_compiled()
    if compiled is not None:
        impls["compiled"] = compiled

    results = {}
    outputs = {}
    for name, impl in impls.items():
        T = np.ascontiguousarray(T0.copy())
        d = d0.copy()
        t0 = time.perf_counter()
        for r, e in moves:
            if abs(T[r, e]) < 1e-9:
                continue
            impl.pivot(T, d, r, e)
        elapsed = time.perf_counter() - t0
        results[name] = {
            "seconds": elapsed,
            "pivots_per_second": pivots / elapsed if elapsed > 0 else float("inf"),
        }
        outputs[name] = (T, d)

    if len(outputs) == 2:
        dT = float(np.max(np.abs(outputs["numpy"][0] - outputs["compiled"][0])))
        dd = float(np.max(np.abs(outputs["numpy"][1] - outputs["compiled"][1])))
        results["max_deviation"] = max(dT, dd)
        results["speedup"] = results["numpy"]["seconds"] / results["compiled"]["seconds"]
    return results


def render(results) -> str:
    lines = [f"tableau pivots ({'compiled available' if 'compiled' in results else 'fallback only'})"]
    for name in ("numpy", "compiled"):
        if name in results:
            r = results[name]
            lines.append(f"  {name:>9}: {r['seconds']:.3f}s "
                         f"({r['pivots_per_second']:.0f} pivots/s)")
    if "speedup" in results:
        lines.append(f"  speedup: {results['speedup']:.2f}x, "
                     f"max deviation {results['max_deviation']:.2e}")
    return "\n".join(lines)

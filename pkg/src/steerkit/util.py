"""Small shared helpers: scalar optimization, threading cap, float canon."""

from __future__ import annotations

import math
import os

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(fn, lo: float, hi: float, tol: float = 1e-4) -> float:
    """Golden-section search for the maximum of a unimodal scalar function."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def bisect_zero(fn, lo: float, hi: float, tol: float = 1e-4, max_iter: int = 200) -> float:
    """Plain bisection for a sign change bracketed by [lo, hi]."""
    a, b = float(lo), float(hi)
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = fn(mid)
        if fm == 0.0 or (b - a) <= tol:
            return mid
        if fa * fm < 0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def thread_count() -> int:
    """Parallelism cap from STEERKIT_THREADS (default 1 = serial)."""
    raw = os.environ.get("STEERKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STEERKIT_THREADS must be an integer, got {raw!r}")
    return max(n, 1)


def canonical_float(value: float) -> float:
    """Round to the 9-significant-digit decimal used by the record files.

    The mapping is idempotent: formatting the result again with %.9g yields
    the same decimal, so in-memory analysis and CSV round trips agree bit
    for bit.
    """
    return float(f"{value:.9g}")


def canonical_floats(values: np.ndarray) -> np.ndarray:
    """Vectorized canonical_float."""
    return np.array([float(f"{v:.9g}") for v in np.asarray(values, dtype=float)])

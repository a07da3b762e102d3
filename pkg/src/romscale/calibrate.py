"""Stability-threshold and optimal-parameter searches.

The threshold search bisects a stability predicate (stable at the upper
bracket end, unstable at the lower end); the optimal-parameter search runs
golden-section on the |mean KE - reference| objective after a 16-point
grid pre-scan selects the bracket.
"""

from __future__ import annotations

import io
import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .integrators import DELTA1, DELTA2


class BracketError(RuntimeError):
    """The search bracket does not contain the sought point."""


@dataclass(frozen=True)
class SweepSpec:
    r_values: tuple[int, ...]
    param_lo: float
    param_hi: float
    tol_param: float
    variant: str                       # "ml" or "efr"
    fixed: float                       # U_ML for ml, chi for efr
    which_delta: str = DELTA1

    def __post_init__(self):
        object.__setattr__(self, "r_values", tuple(int(r) for r in self.r_values))
        if not self.param_lo < self.param_hi:
            raise ValueError("param_lo must be below param_hi")
        if self.tol_param <= 0.0:
            raise ValueError("tol_param must be positive")
        if self.variant not in ("ml", "efr"):
            raise ValueError("variant must be 'ml' or 'efr'")
        if self.which_delta not in (DELTA1, DELTA2):
            raise ValueError("which_delta must be delta1 or delta2")


@dataclass(frozen=True)
class ThresholdResult:
    r: int
    threshold: float
    verified: bool  # post-hoc: stable at threshold + tol, unstable at threshold - tol


def bisect_threshold(stable: Callable[[float], bool], lo: float, hi: float,
                     tol: float) -> float:
    """Bisection on a monotone stability predicate; returns the bracket midpoint."""
    if stable(lo):
        raise BracketError(f"run is already stable at the lower end {lo}")
    if not stable(hi):
        raise BracketError(f"run is still unstable at the upper end {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def max_workers(n_tasks: int) -> int:
    """Worker cap: ROMSCALE_THREADS when set, else hardware parallelism."""
    env = os.environ.get("ROMSCALE_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def find_threshold(spec: SweepSpec,
                   probes: Mapping[int, Callable[[float], bool]]) -> list[ThresholdResult]:
    """Per-r threshold search with a post-hoc monotonicity check.

    probes maps each r to a predicate param -> stable.  Independent
    r-values run concurrently.  A BracketError names the offending r.
    """
    def search(r: int) -> ThresholdResult:
        stable = probes[r]
        try:
            p = bisect_threshold(stable, spec.param_lo, spec.param_hi, spec.tol_param)
        except BracketError as exc:
            raise BracketError(f"r = {r}: {exc}") from exc
        below = max(p - spec.tol_param, spec.param_lo)
        verified = stable(p + spec.tol_param) and not stable(below)
        return ThresholdResult(r=r, threshold=p, verified=verified)

    with ThreadPoolExecutor(max_workers(len(spec.r_values))) as pool:
        return list(pool.map(search, spec.r_values))


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(objective: Callable[[float], float], lo: float, hi: float,
                   tol: float) -> float:
    """Golden-section minimization of a unimodal scalar objective."""
    if not lo < hi:
        raise ValueError("lo must be below hi")
    f_lo, f_hi = objective(lo), objective(hi)
    if not (np.isfinite(f_lo) or np.isfinite(f_hi)):
        raise BracketError("objective is infinite at both bracket ends")
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = objective(d)
    return 0.5 * (a + b)


def find_optimal(spec: SweepSpec,
                 objectives: Mapping[int, Callable[[float], float]],
                 n_prescan: int = 16) -> dict[int, float]:
    """Per-r golden-section search with a grid pre-scan to pick the bracket.

    Objectives should return +inf for unstable runs.  Independent r-values
    run concurrently.
    """
    def search(r: int) -> float:
        f = objectives[r]
        grid = np.linspace(spec.param_lo, spec.param_hi, n_prescan)
        vals = np.array([f(p) for p in grid])
        if not np.any(np.isfinite(vals)):
            raise BracketError(f"r = {r}: objective infinite on the whole bracket")
        k = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.inf)))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, n_prescan - 1)]
        if hi - lo <= spec.tol_param:
            return float(grid[k])
        return float(golden_section(f, lo, hi, spec.tol_param))

    with ThreadPoolExecutor(max_workers(len(spec.r_values))) as pool:
        return dict(zip(spec.r_values, pool.map(search, spec.r_values)))


def mean_ke_objective(run_fn: Callable[[float], "ROMTrajectory"],
                      reference_ke: float) -> Callable[[float], float]:
    """|time-mean ROM KE - reference|; +inf when the run blows up."""
    def objective(param: float) -> float:
        traj = run_fn(param)
        if traj.blew_up:
            return float("inf")
        return abs(float(np.mean(traj.ke)) - reference_ke)
    return objective


def format_float(x) -> str:
    if x is None:
        return "n/a"
    return format(float(x), ".17g")


def table_report(rows: Sequence[Mapping[str, object]],
                 columns: Sequence[str]) -> str:
    """RFC-4180 CSV with one row per r and 17-significant-digit floats."""
    def cell(v) -> str:
        if v is None:
            return "n/a"
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return format_float(v)
        return str(v)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([cell(row[c]) for c in columns])
    return buf.getvalue()

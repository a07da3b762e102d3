"""Linearized BDF2 time stepping for G-ROM, ML-ROM, and EFR-ROM.

One linear r x r solve per step: the quadratic term is linearized with the
second-order extrapolant a* = 2 a^n - a^(n-1) in its first slot.  EFR
applies the differential filter and the relaxation after each evolve step
and carries the relaxed states as BDF2 history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rom_ops import ROMOperators
from .stats import CoefficientKE


class StepFailure(RuntimeError):
    """Singular BDF2 system."""


class FilterFailure(RuntimeError):
    """The differential-filter system is not symmetric positive definite."""


DELTA1 = "delta1"
DELTA2 = "delta2"
EXPLICIT = "explicit"
_DELTA_TAGS = (DELTA1, DELTA2, EXPLICIT)


@dataclass(frozen=True)
class MLConfig:
    """Mixing-length closure tau = -(alpha * U_ML * delta) S a."""

    alpha: float
    U_ML: float
    delta: float
    which_delta: str = EXPLICIT

    def __post_init__(self):
        if self.alpha < 0.0 or not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite and >= 0")
        if self.U_ML <= 0.0 or self.delta <= 0.0:
            raise ValueError("U_ML and delta must be positive")
        if self.which_delta not in _DELTA_TAGS:
            raise ValueError(f"which_delta must be one of {_DELTA_TAGS}")


@dataclass(frozen=True)
class EFRConfig:
    """Differential filter (M + gamma delta^2 S) and convex relaxation chi."""

    gamma: float
    delta: float
    chi: float
    which_delta: str = EXPLICIT

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError("chi must lie in [0, 1]")
        if self.which_delta not in _DELTA_TAGS:
            raise ValueError(f"which_delta must be one of {_DELTA_TAGS}")


@dataclass(frozen=True)
class ROMTrajectory:
    times: np.ndarray
    coefficients: np.ndarray  # (n_times, r)
    ke: np.ndarray
    blew_up: bool = False
    blowup_time: float | None = None


def step_bdf2(ops: ROMOperators, a_prev: np.ndarray, a_curr: np.ndarray,
              dt: float, extra_matrix: np.ndarray | None = None) -> np.ndarray:
    """One linearized BDF2 step.

    Solves [3/(2 dt) I - A - extra - N(a*)] a+ = (4 a^n - a^(n-1))/(2 dt) + b,
    where N(a*) is the quadratic tensor contracted with a* = 2 a^n - a^(n-1)
    in the first slot.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r = ops.r
    a_star = 2.0 * a_curr - a_prev
    lhs = (1.5 / dt) * np.eye(r) - ops.A - np.einsum("imn,m->in", ops.B, a_star)
    if extra_matrix is not None:
        lhs -= extra_matrix
    rhs_vec = (4.0 * a_curr - a_prev) / (2.0 * dt) + ops.b
    try:
        out = np.linalg.solve(lhs, rhs_vec)
    except np.linalg.LinAlgError as exc:
        raise StepFailure(str(exc)) from exc
    return out


def ml_matrix(cfg: MLConfig, S: np.ndarray) -> np.ndarray:
    """Closure matrix -(alpha U_ML delta) S, added to A inside the step."""
    return (-cfg.alpha * cfg.U_ML * cfg.delta) * S


def efr_filter(cfg: EFRConfig, Mmat: np.ndarray, S: np.ndarray,
               w: np.ndarray) -> np.ndarray:
    """Differential-filter solve (M + gamma delta^2 S) w_bar = w."""
    lhs = Mmat + (cfg.gamma * cfg.delta**2) * S
    try:
        chol = np.linalg.cholesky(lhs)
    except np.linalg.LinAlgError as exc:
        raise FilterFailure("filter system is not SPD") from exc
    y = np.linalg.solve(chol, w)
    return np.linalg.solve(chol.T, y)


def efr_relax(chi: float, w: np.ndarray, w_bar: np.ndarray) -> np.ndarray:
    """(1 - chi) w + chi w_bar."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")
    if chi == 0.0:
        return w
    if chi == 1.0:
        return w_bar
    return (1.0 - chi) * w + chi * w_bar


def default_u_ml(mean_field) -> float:
    """Space-average of the absolute streamwise component of the mean field."""
    return float(np.mean(np.abs(mean_field.components[0])))


def run(variant: str, ops: ROMOperators, ke: CoefficientKE,
        config: MLConfig | EFRConfig | None,
        a0: np.ndarray, a1: np.ndarray, dt: float, n_steps: int,
        ke_reference: float, ke_blowup_factor: float = 10.0,
        t0: float = 0.0) -> ROMTrajectory:
    """Advance the ROM n_steps from history (a0, a1).

    variant is "g", "ml", or "efr".  A run is declared blown up (and halts)
    when the kinetic energy exceeds ke_blowup_factor * ke_reference or any
    value becomes non-finite.
    """
    variant = variant.lower()
    if variant not in ("g", "ml", "efr"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "ml" and not isinstance(config, MLConfig):
        raise ValueError("ml variant requires an MLConfig")
    if variant == "efr" and not isinstance(config, EFRConfig):
        raise ValueError("efr variant requires an EFRConfig")

    # alpha = 0 must reduce ML to G bitwise, so skip the closure entirely
    extra = ml_matrix(config, ops.S) if variant == "ml" and config.alpha != 0.0 else None
    ke_bound = ke_blowup_factor * ke_reference

    a_prev = np.asarray(a0, dtype=np.float64)
    a_curr = np.asarray(a1, dtype=np.float64)
    times = [t0, t0 + dt]
    coeffs = [a_prev, a_curr]
    kes = [ke(a_prev), ke(a_curr)]
    blew_up = False
    blowup_time = None
    for step in range(n_steps):
        t_next = t0 + (step + 2) * dt
        try:
            w = step_bdf2(ops, a_prev, a_curr, dt, extra)
            if variant == "efr":
                w_bar = efr_filter(config, ops.Mmat, ops.S, w)
                a_next = efr_relax(config.chi, w, w_bar)
            else:
                a_next = w
        except (StepFailure, FilterFailure):
            blew_up, blowup_time = True, t_next
            break
        e = ke(a_next)
        times.append(t_next)
        coeffs.append(a_next)
        kes.append(e)
        if not np.isfinite(e) or not np.all(np.isfinite(a_next)) or e > ke_bound:
            blew_up, blowup_time = True, t_next
            break
        a_prev, a_curr = a_curr, a_next
    return ROMTrajectory(times=np.asarray(times), coefficients=np.stack(coeffs),
                         ke=np.asarray(kes), blew_up=blew_up, blowup_time=blowup_time)

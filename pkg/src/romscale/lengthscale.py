"""ROM lengthscales.

Two definitions are provided:

* ``delta1`` -- dimensionality-based: the square root of the ratio of
  time-averaged unresolved fluctuation energy to time-averaged fluctuation
  gradient energy.  Numerator and denominator are averaged over snapshots
  separately, then the ratio is taken.
* ``delta2`` -- energy-based closed form
  [Lambda h^(2/3) + (1 - Lambda) L^(2/3)]^(3/2), where Lambda is the
  retained-energy ratio, h the FOM meshsize and L the characteristic
  domain length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import SnapshotSet, VelocityField, field_from_flat, gradient, \
    quadrature_weights
from .pod import PODBasis, energy_ratio, project_all


class DegenerateFluctuationError(ValueError):
    """The unresolved fluctuation is (numerically) zero."""


@dataclass(frozen=True)
class LengthscaleInputs:
    h: float
    L: float
    eigenvalues: np.ndarray
    r: int

    def __post_init__(self):
        lam = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        object.__setattr__(self, "eigenvalues", lam)
        if not 0.0 < self.h < self.L:
            raise ValueError(f"need 0 < h < L, got h={self.h}, L={self.L}")
        if not 1 <= self.r <= lam.size:
            raise ValueError(f"r must be in [1, {lam.size}], got {self.r}")

    @property
    def R(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def lambda_ratio(self) -> float:
        total = float(np.sum(self.eigenvalues))
        if total <= 0.0:
            raise ValueError("total modal energy is zero")
        return float(np.sum(self.eigenvalues[:self.r]) / total)


@dataclass(frozen=True)
class LengthscaleReport:
    r: int
    lambda_ratio: float
    delta1: float | None
    delta2: float
    k_cutoff: float


def fluctuation_matrix(basis: PODBasis, snap_set: SnapshotSet, r: int) -> np.ndarray:
    """Unresolved fluctuations of every snapshot, shape (M, d*N).

    Row k is sum_{j>r} a_j(t_k) phi_j, with coefficients computed against
    the full retained basis.
    """
    if not 0 <= r <= basis.R:
        raise ValueError(f"r must be in [0, {basis.R}], got {r}")
    coeffs = project_all(basis, snap_set)  # (M, R)
    return coeffs[:, r:] @ basis.mode_matrix()[r:, :]


def fluctuation_field(basis: PODBasis, snap_set: SnapshotSet, r: int,
                      snapshot_index: int) -> VelocityField:
    """Unresolved component of one snapshot: sum_{j>r} a_j phi_j."""
    row = fluctuation_matrix(basis, snap_set, r)[snapshot_index]
    return field_from_flat(basis.grid, basis.d, row)


def delta1(basis: PODBasis, snap_set: SnapshotSet, r: int) -> float:
    """Dimensionality-based lengthscale from field-space quadrature.

    sqrt(N / D) with
    N = (1/M) sum_k integral of |u'_k|^2 and
    D = (1/M) sum_k integral of |grad u'_k|^2.
    """
    if not 0 <= r < basis.R:
        raise ValueError(f"r must be in [0, {basis.R}), got {r}")
    grid, d = basis.grid, basis.d
    w = quadrature_weights(grid)
    fl = fluctuation_matrix(basis, snap_set, r)
    num = 0.0
    den = 0.0
    for row in fl:
        f = field_from_flat(grid, d, row)
        num += sum(float(np.sum(w * c * c)) for c in f.components)
        den += sum(float(np.sum(w * g * g)) for grads in gradient(f) for g in grads)
    if den <= 0.0:
        raise DegenerateFluctuationError("fluctuation gradient energy is zero")
    return float(np.sqrt(num / den))


def delta2(inputs: LengthscaleInputs) -> float:
    """Energy-based lengthscale [Lambda h^(2/3) + (1-Lambda) L^(2/3)]^(3/2)."""
    lam = inputs.lambda_ratio
    return delta2_from_ratio(lam, inputs.h, inputs.L)


def delta2_from_ratio(lambda_ratio: float, h: float, L: float) -> float:
    return float((lambda_ratio * h ** (2.0 / 3.0)
                  + (1.0 - lambda_ratio) * L ** (2.0 / 3.0)) ** 1.5)


def invert_delta2(value: float, h: float, L: float) -> float:
    """Retained-energy ratio implied by a delta2 value (round-trip inverse)."""
    if not h <= value <= L:
        raise ValueError(f"delta2 must lie in [h, L] = [{h}, {L}], got {value}")
    return float((L ** (2.0 / 3.0) - value ** (2.0 / 3.0))
                 / (L ** (2.0 / 3.0) - h ** (2.0 / 3.0)))


def convexity_check(inputs: LengthscaleInputs) -> tuple[float, float, float, float]:
    """Return (k0, kh, k_cutoff, weight) and verify the convex-combination identity.

    k_cutoff^(-2/3) = weight * kh^(-2/3) + (1 - weight) * k0^(-2/3), with
    weight equal to the retained-energy ratio.
    """
    lam = inputs.lambda_ratio
    k0 = 2.0 * np.pi / inputs.L
    kh = 2.0 * np.pi / inputs.h
    d2 = delta2(inputs)
    kc = 2.0 * np.pi / d2
    lhs = kc ** (-2.0 / 3.0)
    rhs = lam * kh ** (-2.0 / 3.0) + (1.0 - lam) * k0 ** (-2.0 / 3.0)
    if abs(lhs - rhs) > 1e-12 * abs(rhs):
        raise AssertionError(
            f"convex-combination identity violated: {lhs!r} vs {rhs!r}")
    return float(k0), float(kh), float(kc), float(lam)


def lengthscale_report(basis: PODBasis, snap_set: SnapshotSet | None, r: int,
                       h: float | None = None, L: float | None = None) -> LengthscaleReport:
    """delta1 (when snapshots are given and r < R) and delta2 at one truncation level."""
    h = basis.grid.meshsize if h is None else h
    L = basis.grid.characteristic_length() if L is None else L
    inputs = LengthscaleInputs(h, L, basis.eigenvalues, r)
    d2 = delta2(inputs)
    d1 = None
    if snap_set is not None and r < basis.R:
        d1 = delta1(basis, snap_set, r)
    return LengthscaleReport(r=r, lambda_ratio=inputs.lambda_ratio,
                             delta1=d1, delta2=d2, k_cutoff=2.0 * np.pi / d2)

"""Flow diagnostics: kinetic energy, Reynolds stresses, RMS velocity,
friction velocity.

Averaging conventions: scalar statistics use the volume average over all
axes (quadrature-weighted); profile statistics average over the periodic
axes only and are resolved along the wall-normal axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import (WALL, Grid, SnapshotSet, VelocityField,
                         inner_product, quadrature_weights)
from .pod import PODBasis


@dataclass(frozen=True)
class StatsReport:
    ke_series: np.ndarray
    R_tensor: np.ndarray
    U_rms: float | None
    R12: float | None
    u_tau: float | None
    U_mean_profile: np.ndarray | None


def kinetic_energy(velocity: VelocityField) -> float:
    """(1/2) integral of |u|^2 over the domain."""
    return 0.5 * inner_product(velocity, velocity)


class CoefficientKE:
    """Kinetic energy of mean + sum_j a_j phi_j evaluated in coefficient space.

    Caches <U, U>, <U, phi_j> and the mass matrix once; each evaluation is
    then O(r^2).  Matches the field-space quadrature to round-off.
    """

    def __init__(self, basis: PODBasis, r: int, Mmat: np.ndarray | None = None):
        if not 1 <= r <= basis.R:
            raise ValueError(f"r must be in [1, {basis.R}], got {r}")
        self.r = r
        self.uu = inner_product(basis.mean_field, basis.mean_field)
        self.uphi = np.array([inner_product(basis.mean_field, basis.modes[j])
                              for j in range(r)])
        if Mmat is None:
            w = quadrature_weights(basis.grid).ravel()
            phi = basis.mode_matrix(r)
            Mmat = (phi * np.tile(w, basis.d)[None, :]) @ phi.T
        self.Mmat = np.asarray(Mmat, dtype=np.float64)

    def __call__(self, a: np.ndarray) -> float:
        a = np.asarray(a, dtype=np.float64)
        return 0.5 * float(self.uu + 2.0 * (self.uphi @ a) + a @ self.Mmat @ a)


def _wall_axis(grid: Grid) -> int | None:
    for ax, kind in enumerate(grid.axis_kind):
        if kind == WALL:
            return ax
    return None


def _volume_average(grid: Grid, arr: np.ndarray) -> float:
    w = quadrature_weights(grid)
    return float(np.sum(w * arr) / np.sum(w))


def reynolds_stress(snap_set: SnapshotSet) -> np.ndarray:
    """Scalar Reynolds stress tensor R_ij.

    With a wall-normal axis: the covariance
    <<u_i u_j>>_{s,t} - <<u_i>>_{s,t} <<u_j>>_{s,t} is formed per
    wall-normal node (spatial average over the homogeneous axes), then
    quadrature-averaged along the wall axis, so homogeneous steady fields
    carry zero stress.  Without one, the spatial average runs over the
    whole domain and the covariance is over time.
    """
    if snap_set.M < 2:
        raise ValueError("Reynolds stresses need at least 2 snapshots")
    grid, d, M = snap_set.grid, snap_set.d, snap_set.M
    ax = _wall_axis(grid)
    if ax is not None:
        _, Rp = reynolds_stress_profile(snap_set)
        w = np.full(grid.dims[ax], grid.spacing[ax])
        w[0] *= 0.5
        w[-1] *= 0.5
        return np.einsum("y,yij->ij", w, Rp) / np.sum(w)
    mean_ui = np.zeros(d)
    mean_uiuj = np.zeros((d, d))
    for snap in snap_set.snapshots:
        for i in range(d):
            mean_ui[i] += _volume_average(grid, snap.components[i])
            for j in range(i, d):
                mean_uiuj[i, j] += _volume_average(
                    grid, snap.components[i] * snap.components[j])
    mean_ui /= M
    mean_uiuj /= M
    R = mean_uiuj - np.outer(mean_ui, mean_ui)
    return np.triu(R) + np.triu(R, 1).T


def reynolds_stress_profile(snap_set: SnapshotSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-wall-normal-node stress profiles.

    Returns (y, R) with R of shape (n_wall_nodes, d, d); averaging runs over
    the periodic axes and time only.
    """
    grid = snap_set.grid
    ax = _wall_axis(grid)
    if ax is None:
        raise ValueError("no wall-normal axis in this grid")
    other = tuple(a for a in range(grid.naxes) if a != ax)
    d, M = snap_set.d, snap_set.M
    ny = grid.dims[ax]
    mean_ui = np.zeros((ny, d))
    mean_uiuj = np.zeros((ny, d, d))
    for snap in snap_set.snapshots:
        for i in range(d):
            mean_ui[:, i] += snap.components[i].mean(axis=other)
            for j in range(d):
                mean_uiuj[:, i, j] += (snap.components[i]
                                       * snap.components[j]).mean(axis=other)
    mean_ui /= M
    mean_uiuj /= M
    R = mean_uiuj - np.einsum("yi,yj->yij", mean_ui, mean_ui)
    return grid.axis_coordinates(ax), R


def mean_velocity_profile(snap_set: SnapshotSet) -> tuple[np.ndarray, np.ndarray]:
    """Space-time-averaged streamwise velocity along the wall-normal axis."""
    grid = snap_set.grid
    ax = _wall_axis(grid)
    if ax is None:
        raise ValueError("no wall-normal axis in this grid")
    other = tuple(a for a in range(grid.naxes) if a != ax)
    prof = np.zeros(grid.dims[ax])
    for snap in snap_set.snapshots:
        prof += snap.components[0].mean(axis=other)
    return grid.axis_coordinates(ax), prof / snap_set.M


def u_rms(R_tensor: np.ndarray, u_tau: float) -> float:
    """Normalized streamwise RMS: |R_11 - tr(R)/3|^(1/2) / u_tau."""
    R_tensor = np.asarray(R_tensor)
    if R_tensor.shape != (3, 3):
        raise ValueError("U_RMS requires a 3x3 stress tensor")
    if u_tau == 0.0:
        raise ZeroDivisionError("u_tau must be nonzero")
    return float(np.sqrt(abs(R_tensor[0, 0] - np.trace(R_tensor) / 3.0)) / u_tau)


def r12(R_tensor: np.ndarray, u_tau: float) -> float:
    """Normalized streamwise-spanwise stress R_12 / u_tau^2."""
    R_tensor = np.asarray(R_tensor)
    if R_tensor.shape[0] < 2:
        raise ValueError("R12 requires at least 2 components")
    if u_tau == 0.0:
        raise ZeroDivisionError("u_tau must be nonzero")
    return float(R_tensor[0, 1] / u_tau**2)


def friction_velocity(u_mean_profile: np.ndarray, y: np.ndarray, nu: float) -> float:
    """sqrt(nu * U_mean(y_min) / y_min) at the first off-wall node."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    y = np.asarray(y, dtype=np.float64)
    off_wall = np.nonzero(y > 0.0)[0]
    if off_wall.size == 0:
        raise ValueError("no off-wall node in profile")
    k = off_wall[0]
    u1 = float(np.asarray(u_mean_profile)[k])
    if u1 < 0.0:
        raise ValueError(f"reversed flow at first off-wall node (U = {u1})")
    return float(np.sqrt(nu * u1 / y[k]))


def compute_stats(snap_set: SnapshotSet, nu: float | None = None) -> StatsReport:
    """All diagnostics available for the given grid dimensionality."""
    ke_series = np.array([kinetic_energy(s) for s in snap_set.snapshots])
    R = reynolds_stress(snap_set)
    has_wall = _wall_axis(snap_set.grid) is not None
    u_tau = urms = r_12 = prof = None
    if has_wall and nu is not None:
        y, prof = mean_velocity_profile(snap_set)
        u_tau = friction_velocity(prof, y, nu)
        if u_tau > 0.0:
            if snap_set.d == 3:
                urms = u_rms(R, u_tau)
            if snap_set.d >= 2:
                r_12 = r12(R, u_tau)
    return StatsReport(ke_series=ke_series, R_tensor=R, U_rms=urms,
                       R12=r_12, u_tau=u_tau, U_mean_profile=prof)

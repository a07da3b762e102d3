"""POD basis construction via the method of snapshots.

The M x M Gram matrix of mean-subtracted snapshots is normalized by 1/M,
so the eigenvalues are time-averaged modal energies and the snapshot
coefficients satisfy (1/M) sum_k a_j(t_k) a_l(t_k) = lambda_j delta_jl.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data_model import (Grid, GridMismatchError, SnapshotSet, VelocityField,
                         field_from_flat, quadrature_weights, read_snapshots,
                         write_snapshots)

EIGENVALUES_FILE = "eigenvalues.json"


class EmptyBasisError(ValueError):
    """All snapshots coincide: the fluctuation has no energy to decompose."""


@dataclass(frozen=True, eq=False)
class PODBasis:
    grid: Grid
    mean_field: VelocityField
    modes: tuple[VelocityField, ...] = field(repr=False)
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.modes) != lam.size:
            raise ValueError("modes and eigenvalues length mismatch")
        if np.any(np.diff(lam) > 0.0):
            raise ValueError("eigenvalues must be descending")

    @property
    def R(self) -> int:
        return len(self.modes)

    @property
    def d(self) -> int:
        return self.mean_field.d

    def mode_matrix(self, r: int | None = None) -> np.ndarray:
        """First r modes stacked as rows of flattened fields, shape (r, d*N)."""
        r = self.R if r is None else r
        return np.stack([m.flat() for m in self.modes[:r]])


def _weight_vector(grid: Grid, d: int) -> np.ndarray:
    w = quadrature_weights(grid).ravel()
    return np.tile(w, d)


def compute_mean(snap_set: SnapshotSet) -> VelocityField:
    """Arithmetic mean over snapshots (discrete centering trajectory)."""
    mean_flat = snap_set.as_matrix().mean(axis=0)
    return field_from_flat(snap_set.grid, snap_set.d, mean_flat)


def compute_pod(snap_set: SnapshotSet, r_max: int | None = None,
                tol: float = 1e-12) -> PODBasis:
    """Method of snapshots.

    Retains eigenpairs with lambda > tol * lambda_1, at most r_max of them.
    Each mode's sign is flipped so that its largest-magnitude entry is
    positive, making the basis deterministic across eigen-solvers.
    """
    grid, d, M = snap_set.grid, snap_set.d, snap_set.M
    mean = compute_mean(snap_set)
    X = snap_set.as_matrix() - mean.flat()[None, :]
    w = _weight_vector(grid, d)
    gram = (X * w) @ X.T / M
    lam, vec = np.linalg.eigh(gram)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    if lam[0] <= 0.0:
        raise EmptyBasisError("snapshots have zero fluctuation energy")
    keep = lam > tol * lam[0]
    if r_max is not None:
        keep &= np.arange(lam.size) < r_max
    lam, vec = lam[keep], vec[:, keep]

    # phi_j = sum_k vec_kj u'_k / sqrt(M lambda_j) gives unit L2 norm
    modes_flat = (vec.T @ X) / np.sqrt(M * lam)[:, None]
    signs = np.sign(modes_flat[np.arange(modes_flat.shape[0]),
                               np.argmax(np.abs(modes_flat), axis=1)])
    signs[signs == 0.0] = 1.0
    modes_flat *= signs[:, None]
    modes = tuple(field_from_flat(grid, d, row) for row in modes_flat)
    return PODBasis(grid, mean, modes, lam)


def project(basis: PODBasis, velocity: VelocityField, r: int) -> np.ndarray:
    """Coefficients a_j = <velocity - mean, phi_j>, j = 1..r."""
    if not 1 <= r <= basis.R:
        raise ValueError(f"r must be in [1, {basis.R}], got {r}")
    if velocity.grid != basis.grid:
        raise GridMismatchError("field grid differs from basis grid")
    w = _weight_vector(basis.grid, basis.d)
    fluct = velocity.flat() - basis.mean_field.flat()
    return basis.mode_matrix(r) @ (w * fluct)


def project_all(basis: PODBasis, snap_set: SnapshotSet, r: int | None = None) -> np.ndarray:
    """Coefficient matrix of every snapshot, shape (M, r)."""
    r = basis.R if r is None else r
    w = _weight_vector(basis.grid, basis.d)
    X = snap_set.as_matrix() - basis.mean_field.flat()[None, :]
    return (X * w) @ basis.mode_matrix(r).T


def reconstruct(basis: PODBasis, a: np.ndarray) -> VelocityField:
    """mean + sum_j a_j phi_j."""
    a = np.asarray(a, dtype=np.float64)
    if a.size > basis.R:
        raise ValueError(f"coefficient vector longer than basis ({a.size} > {basis.R})")
    flat = basis.mean_field.flat().copy()
    if a.size:
        flat += a @ basis.mode_matrix(a.size)
    return field_from_flat(basis.grid, basis.d, flat)


def energy_ratio(basis: PODBasis, r: int) -> float:
    """Retained-energy ratio sum_{i<=r} lambda_i / sum_{i<=R} lambda_i."""
    if not 1 <= r <= basis.R:
        raise ValueError(f"r must be in [1, {basis.R}], got {r}")
    total = float(np.sum(basis.eigenvalues))
    if total <= 0.0:
        raise EmptyBasisError("total modal energy is zero")
    return float(np.sum(basis.eigenvalues[:r]) / total)


def write_basis(basis: PODBasis, path: str) -> None:
    """Basis directory: snapshot container (mean first, then modes) + eigenvalues."""
    times = np.arange(basis.R + 1, dtype=np.float64)
    container = SnapshotSet(basis.grid, times, (basis.mean_field,) + basis.modes)
    write_snapshots(container, path)
    with open(os.path.join(path, EIGENVALUES_FILE), "w", encoding="utf-8") as fh:
        json.dump(basis.eigenvalues.tolist(), fh)


def read_basis(path: str) -> PODBasis:
    container = read_snapshots(path)
    with open(os.path.join(path, EIGENVALUES_FILE), encoding="utf-8") as fh:
        lam = np.asarray(json.load(fh), dtype=np.float64)
    return PODBasis(container.grid, container.snapshots[0],
                    container.snapshots[1:], lam)


class POD(BaseEstimator, TransformerMixin):
    """Scikit-learn style wrapper around the method of snapshots.

    fit takes a SnapshotSet; transform maps fields (or a SnapshotSet) to
    coefficient vectors and inverse_transform maps coefficients back to
    flattened fields.

    Parameters
    ----------
    r_max : int or None
        Maximum number of retained modes.
    tol : float
        Relative eigenvalue cutoff; modes with lambda <= tol * lambda_1
        are dropped.
    """

    def __init__(self, r_max: int | None = None, tol: float = 1e-12):
        self.r_max = r_max
        self.tol = tol

    def fit(self, X: SnapshotSet, y=None):
        self.basis_ = compute_pod(X, r_max=self.r_max, tol=self.tol)
        return self

    def _check_fitted(self) -> PODBasis:
        if not hasattr(self, "basis_"):
            raise NotFittedError("POD instance is not fitted yet")
        return self.basis_

    def transform(self, X) -> np.ndarray:
        basis = self._check_fitted()
        if isinstance(X, SnapshotSet):
            return project_all(basis, X)
        if isinstance(X, VelocityField):
            return project(basis, X, basis.R)[None, :]
        return np.stack([project(basis, f, basis.R) for f in X])

    def inverse_transform(self, A: np.ndarray) -> np.ndarray:
        basis = self._check_fitted()
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        return np.stack([reconstruct(basis, a).flat() for a in A])

    @property
    def eigenvalues_(self) -> np.ndarray:
        return self._check_fitted().eigenvalues

    def energy_ratio(self, r: int) -> float:
        return energy_ratio(self._check_fitted(), r)

"""Galerkin ROM operators assembled from a POD basis.

Index convention for the quadratic tensor: B[i, m, n] multiplies a_m a_n
in row i and equals -<phi_i, phi_m . grad phi_n>.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .data_model import VelocityField, gradient, quadrature_weights
from .pod import PODBasis

OPS_META = "ops_meta.json"
_OPS_FILES = {"b": "b.bin", "A": "A.bin", "B": "B.bin", "S": "S.bin", "Mmat": "M.bin"}


@dataclass(frozen=True)
class ROMOperators:
    r: int
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    Mmat: np.ndarray
    Re_inv: float

    def __post_init__(self):
        for name, shape in (("b", (self.r,)), ("A", (self.r, self.r)),
                            ("B", (self.r, self.r, self.r)),
                            ("S", (self.r, self.r)), ("Mmat", (self.r, self.r))):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _advection(u_comps, v_grads) -> list[np.ndarray]:
    """(u . grad) v, componentwise: sum_j u_j dv_i/dx_j."""
    return [sum(u_comps[j] * v_grads[i][j] for j in range(len(u_comps)))
            for i in range(len(v_grads))]


def assemble(basis: PODBasis, r: int, Re_inv: float,
             forcing: VelocityField | None = None) -> ROMOperators:
    """Assemble b, A, B plus the stiffness and mass matrices for the first r modes.

    Mode gradients are computed once and cached; the quadratic tensor is
    stored dense (r^3 entries).
    """
    if not 1 <= r <= basis.R:
        raise ValueError(f"r must be in [1, {basis.R}], got {r}")
    grid, d = basis.grid, basis.d
    if d != grid.naxes:
        raise ValueError("advection needs as many velocity components as grid axes")
    w = quadrature_weights(grid)
    wflat = np.tile(w.ravel(), d)
    modes = basis.modes[:r]
    phi = basis.mode_matrix(r)          # (r, d*N)
    wphi = phi * wflat[None, :]          # rows pre-weighted for fast inner products

    U = basis.mean_field
    grad_U = gradient(U)
    grad_phi = [gradient(m) for m in modes]

    def flat(comps) -> np.ndarray:
        return np.concatenate([np.asarray(c).ravel() for c in comps])

    # stiffness and mass
    S = np.zeros((r, r))
    for i in range(r):
        for j in range(i, r):
            S[i, j] = S[j, i] = sum(
                float(np.sum(w * gi * gj))
                for rowi, rowj in zip(grad_phi[i], grad_phi[j])
                for gi, gj in zip(rowi, rowj))
    Mmat = wphi @ phi.T

    # b_i = <phi_i, f> - <phi_i, U.grad U> - Re_inv <grad phi_i, grad U>
    b = np.zeros(r)
    if forcing is not None:
        b += wphi @ forcing.flat()
    b -= wphi @ flat(_advection(U.components, grad_U))
    visc_U = np.array([
        sum(float(np.sum(w * gi * gu))
            for rowi, rowu in zip(grad_phi[i], grad_U)
            for gi, gu in zip(rowi, rowu))
        for i in range(r)])
    b -= Re_inv * visc_U

    # A_im = -<phi_i, U.grad phi_m> - <phi_i, phi_m.grad U> - Re_inv S_im
    A = np.zeros((r, r))
    for m in range(r):
        A[:, m] -= wphi @ flat(_advection(U.components, grad_phi[m]))
        A[:, m] -= wphi @ flat(_advection(modes[m].components, grad_U))
    A -= Re_inv * S

    # B_imn = -<phi_i, phi_m.grad phi_n>
    B = np.zeros((r, r, r))
    for m in range(r):
        for n in range(r):
            B[:, m, n] = -(wphi @ flat(_advection(modes[m].components, grad_phi[n])))

    return ROMOperators(r=r, b=b, A=A, B=B, S=S, Mmat=Mmat, Re_inv=Re_inv)


def rhs(ops: ROMOperators, a: np.ndarray) -> np.ndarray:
    """b + A a + q with q_i = sum_{m,n} B_imn a_m a_n."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (ops.r,):
        raise ValueError(f"coefficient vector must have length {ops.r}")
    return ops.b + ops.A @ a + np.einsum("imn,m,n->i", ops.B, a, a)


def write_operators(ops: ROMOperators, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    meta = {"r": ops.r, "Re_inv": ops.Re_inv}
    with open(os.path.join(path, OPS_META), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    for attr, fn in _OPS_FILES.items():
        getattr(ops, attr).astype("<f8").tofile(os.path.join(path, fn))


def read_operators(path: str) -> ROMOperators:
    with open(os.path.join(path, OPS_META), encoding="utf-8") as fh:
        meta = json.load(fh)
    r = int(meta["r"])
    shapes = {"b": (r,), "A": (r, r), "B": (r, r, r), "S": (r, r), "Mmat": (r, r)}
    arrays = {}
    for attr, fn in _OPS_FILES.items():
        arr = np.fromfile(os.path.join(path, fn), dtype="<f8")
        arrays[attr] = arr.reshape(shapes[attr])
    return ROMOperators(r=r, Re_inv=float(meta["Re_inv"]), **arrays)

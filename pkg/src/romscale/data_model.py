"""Grids, velocity fields, snapshot sets, and the L2 machinery built on them.

All arrays are 64-bit IEEE floats stored row-major.  Fields are immutable
after construction (their buffers are marked read-only) so they can be
shared freely between threads.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

PERIODIC = "periodic"
WALL = "wall"

SNAP_META = "meta.json"
SNAP_PATTERN = "snap_%06d.bin"


class GridMismatchError(ValueError):
    """Two fields that should live on the same grid do not."""


class SnapshotIOError(ValueError):
    """Malformed or inconsistent on-disk snapshot container."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid, 1 to 3 axes, each periodic or wall-bounded.

    On a periodic axis of n nodes the axis length is n * spacing (the
    right endpoint is identified with the left); on a wall axis it is
    (n - 1) * spacing (both walls carry nodes).
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    axis_kind: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "axis_kind", tuple(str(k) for k in self.axis_kind))
        if not (1 <= len(self.dims) <= 3):
            raise ValueError(f"grid must have 1-3 axes, got {len(self.dims)}")
        if len(self.spacing) != len(self.dims) or len(self.axis_kind) != len(self.dims):
            raise ValueError("dims, spacing and axis_kind must have equal length")
        if any(n < 2 for n in self.dims):
            raise ValueError(f"all dims must be >= 2, got {self.dims}")
        if any(s <= 0.0 for s in self.spacing):
            raise ValueError(f"all spacings must be positive, got {self.spacing}")
        for k in self.axis_kind:
            if k not in (PERIODIC, WALL):
                raise ValueError(f"axis_kind must be '{PERIODIC}' or '{WALL}', got {k!r}")

    @property
    def naxes(self) -> int:
        return len(self.dims)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(
            n * s if k == PERIODIC else (n - 1) * s
            for n, s, k in zip(self.dims, self.spacing, self.axis_kind)
        )

    @property
    def meshsize(self) -> float:
        """Coarsest resolved scale h: the maximum spacing over all axes."""
        return max(self.spacing)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.dims))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return self.spacing[axis] * np.arange(self.dims[axis])

    def characteristic_length(self) -> float:
        """Wall-normal axis length when one exists, else the maximum length."""
        for k, ell in zip(self.axis_kind, self.lengths):
            if k == WALL:
                return ell
        return max(self.lengths)


@lru_cache(maxsize=32)
def quadrature_weights(grid: Grid) -> np.ndarray:
    """Tensor-product quadrature weights, shape ``grid.dims``.

    Rectangle rule (weight = spacing at every node) on periodic axes,
    trapezoidal rule (half weight at the walls) on wall axes.
    """
    axis_w = []
    for n, s, k in zip(grid.dims, grid.spacing, grid.axis_kind):
        w = np.full(n, s)
        if k == WALL:
            w[0] *= 0.5
            w[-1] *= 0.5
        axis_w.append(w)
    out = axis_w[0]
    for w in axis_w[1:]:
        out = np.multiply.outer(out, w)
    return np.ascontiguousarray(out)


def _freeze(arr: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    a = np.array(arr, dtype=np.float64, order="C").reshape(dims)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VelocityField:
    """d-component velocity sampled on every node of a grid (m/s)."""

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(_freeze(c, self.grid.dims) for c in self.components)
        if not (1 <= len(comps) <= 3):
            raise ValueError(f"1-3 velocity components expected, got {len(comps)}")
        for c in comps:
            if not np.all(np.isfinite(c)):
                raise ValueError("velocity field contains non-finite values")
        object.__setattr__(self, "components", comps)

    @property
    def d(self) -> int:
        return len(self.components)

    def flat(self) -> np.ndarray:
        """Components concatenated, each row-major."""
        return np.concatenate([c.ravel() for c in self.components])


def field_from_flat(grid: Grid, d: int, flat: np.ndarray) -> VelocityField:
    n = grid.n_nodes
    if flat.size != d * n:
        raise ValueError(f"expected {d * n} values, got {flat.size}")
    return VelocityField(grid, tuple(flat[i * n:(i + 1) * n] for i in range(d)))


def zero_field(grid: Grid, d: int) -> VelocityField:
    return VelocityField(grid, tuple(np.zeros(grid.dims) for _ in range(d)))


def inner_product(f: VelocityField, g: VelocityField) -> float:
    """L2 inner product summed over components."""
    if f.grid != g.grid or f.d != g.d:
        raise GridMismatchError("fields live on different grids or have different "
                                "component counts")
    w = quadrature_weights(f.grid)
    return float(sum(np.sum(w * fc * gc) for fc, gc in zip(f.components, g.components)))


def _axis_gradient(arr: np.ndarray, axis: int, spacing: float, kind: str) -> np.ndarray:
    if kind == PERIODIC:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2.0 * spacing)
    g = np.empty_like(arr)
    n = arr.shape[axis]
    sl = lambda i: tuple(i if ax == axis else slice(None) for ax in range(arr.ndim))
    inner = tuple(slice(1, -1) if ax == axis else slice(None) for ax in range(arr.ndim))
    g[inner] = (arr[sl(slice(2, None))] - arr[sl(slice(None, -2))]) / (2.0 * spacing)
    if n >= 3:
        g[sl(0)] = (-3.0 * arr[sl(0)] + 4.0 * arr[sl(1)] - arr[sl(2)]) / (2.0 * spacing)
        g[sl(-1)] = (3.0 * arr[sl(-1)] - 4.0 * arr[sl(-2)] + arr[sl(-3)]) / (2.0 * spacing)
    else:
        g[sl(0)] = g[sl(-1)] = (arr[sl(1)] - arr[sl(0)]) / spacing
    return g


def gradient(f: VelocityField) -> list[list[np.ndarray]]:
    """``gradient(f)[i][j]`` is d(u_i)/d(x_j) on every node.

    Central differences in the interior, periodic wrap on periodic axes,
    one-sided second-order stencils at wall boundaries.
    """
    grid = f.grid
    return [
        [_axis_gradient(c, ax, grid.spacing[ax], grid.axis_kind[ax])
         for ax in range(grid.naxes)]
        for c in f.components
    ]


def gradient_norm_sq(f: VelocityField) -> float:
    """Quadrature of sum_i sum_j (d u_i / d x_j)^2 over the domain."""
    w = quadrature_weights(f.grid)
    return float(sum(np.sum(w * g * g) for row in gradient(f) for g in row))


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Time-ordered velocity fields sharing one grid."""

    grid: Grid
    times: np.ndarray
    snapshots: tuple[VelocityField, ...] = field(repr=False)

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if len(self.snapshots) < 2:
            raise ValueError("a snapshot set needs at least 2 snapshots")
        if t.size != len(self.snapshots):
            raise ValueError("times and snapshots length mismatch")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
        d = self.snapshots[0].d
        for s in self.snapshots:
            if s.grid != self.grid:
                raise GridMismatchError("snapshot grid differs from set grid")
            if s.d != d:
                raise ValueError("snapshots have inconsistent component counts")

    @property
    def M(self) -> int:
        return len(self.snapshots)

    @property
    def d(self) -> int:
        return self.snapshots[0].d

    def as_matrix(self) -> np.ndarray:
        """Snapshots stacked as rows, components concatenated: shape (M, d*N)."""
        return np.stack([s.flat() for s in self.snapshots])


def write_snapshots(snap_set: SnapshotSet, path: str) -> None:
    """Write the directory container: meta.json + one raw .bin per snapshot."""
    os.makedirs(path, exist_ok=True)
    grid = snap_set.grid
    meta = {
        "dims": list(grid.dims),
        "spacing": list(grid.spacing),
        "axis_kind": list(grid.axis_kind),
        "components": snap_set.d,
        "times": snap_set.times.tolist(),
        "order": "row-major",
    }
    with open(os.path.join(path, SNAP_META), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    for k, snap in enumerate(snap_set.snapshots):
        snap.flat().astype("<f8").tofile(os.path.join(path, SNAP_PATTERN % k))


def read_snapshots(path: str) -> SnapshotSet:
    meta_path = os.path.join(path, SNAP_META)
    if not os.path.isfile(meta_path):
        raise SnapshotIOError(f"missing {SNAP_META} in {path}")
    try:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        grid = Grid(tuple(meta["dims"]), tuple(meta["spacing"]), tuple(meta["axis_kind"]))
        d = int(meta["components"])
        times = np.asarray(meta["times"], dtype=np.float64)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SnapshotIOError(f"malformed {SNAP_META}: {exc}") from exc
    if times.size < 2 or np.any(np.diff(times) <= 0.0):
        raise SnapshotIOError("times must be strictly increasing with at least 2 entries")
    expected = d * grid.n_nodes
    snaps = []
    for k in range(times.size):
        fn = os.path.join(path, SNAP_PATTERN % k)
        if not os.path.isfile(fn):
            raise SnapshotIOError(f"missing snapshot file {fn}")
        flat = np.fromfile(fn, dtype="<f8")
        if flat.size != expected:
            raise SnapshotIOError(
                f"{fn}: payload has {flat.size} values, header declares {expected}")
        snaps.append(field_from_flat(grid, d, flat))
    return SnapshotSet(grid, times, tuple(snaps))

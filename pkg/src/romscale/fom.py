"""Desk-scale snapshot generators.

Two sources of data:

* a 1D viscous Burgers solver on a periodic grid, integrated with explicit
  RK2 (Heun), whose snapshots are dynamically consistent and can be used
  for end-to-end ROM runs;
* a synthetic 3D channel-like field generator (parabolic mean profile plus
  random Fourier fluctuations with a prescribed spectral slope) used to
  exercise the 3D statistics and gradient-based lengthscale formulas.

All randomness comes from ``numpy.random.default_rng(seed)``, i.e. the
PCG64 generator, so runs are reproducible given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import (PERIODIC, WALL, Grid, SnapshotSet, VelocityField)


class ConfigurationError(ValueError):
    """Config values are inconsistent or violate a stability limit."""


class InstabilityError(RuntimeError):
    """The FOM integration produced non-finite values or broke the CFL bound."""


@dataclass(frozen=True)
class BurgersConfig:
    nx: int = 512
    length: float = 1.0
    nu: float = 1e-3
    forcing_amplitude: float = 0.05
    n_forcing_waves: int = 60
    ic_amplitude: float = 1.0
    dt: float = 2e-4
    t_collect_start: float = 2.0
    t_collect_end: float = 10.0
    n_snapshots: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.nx < 2:
            raise ConfigurationError("nx must be >= 2")
        if self.n_forcing_waves < 0:
            raise ConfigurationError("n_forcing_waves must be >= 0")
        if self.nu <= 0.0:
            raise ConfigurationError("nu must be positive")
        if self.dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if not self.t_collect_start < self.t_collect_end:
            raise ConfigurationError("t_collect_start must precede t_collect_end")
        if self.n_snapshots < 2:
            raise ConfigurationError("n_snapshots must be >= 2")

    @property
    def grid(self) -> Grid:
        return Grid((self.nx,), (self.length / self.nx,), (PERIODIC,))


def _burgers_forcing_coeffs(cfg: BurgersConfig):
    """Seeded coefficients for a band of standing + traveling forcing waves.

    Wave k in 1..n_forcing_waves carries amplitude proportional to k, which
    keeps the velocity response spectrum broad and slowly decaying; the
    traveling waves sweep with frequency proportional to k (a random
    advection speed per wave).
    """
    n_waves = cfg.n_forcing_waves
    rng = np.random.default_rng(cfg.seed)
    k = np.arange(1, n_waves + 1, dtype=np.float64)
    steady_amp = rng.uniform(0.5, 1.0, n_waves) * k
    steady_phase = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    moving_amp = rng.uniform(0.5, 1.0, n_waves) * k
    moving_phase = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    moving_freq = 2.0 * np.pi * k * rng.uniform(0.5, 1.5, n_waves)
    return steady_amp, steady_phase, moving_amp, moving_phase, moving_freq


def burgers_forcing_field(cfg: BurgersConfig) -> VelocityField:
    """Steady (time-averaged) part of the Burgers forcing, for ROM assembly."""
    grid = cfg.grid
    x = grid.axis_coordinates(0)
    sa, sp, _, _, _ = _burgers_forcing_coeffs(cfg)
    f = np.zeros_like(x)
    for k in range(sa.size):
        f += sa[k] * np.sin(2.0 * np.pi * (k + 1) * x / cfg.length + sp[k])
    return VelocityField(grid, (cfg.forcing_amplitude * f,))


def run_burgers(cfg: BurgersConfig) -> SnapshotSet:
    """Integrate forced viscous Burgers and sample snapshots uniformly.

    The advective term is discretized in skew-symmetric form,
    (1/3) d(u^2)/dx + (1/3) u du/dx, which conserves energy discretely on
    the periodic grid, so the viscous term alone sets the energy budget.
    """
    grid = cfg.grid
    dx = grid.spacing[0]
    if cfg.nu * cfg.dt / dx**2 > 0.5:
        raise ConfigurationError(
            f"diffusive CFL violated: nu*dt/dx^2 = {cfg.nu * cfg.dt / dx**2:.3g} > 0.5")

    x = grid.axis_coordinates(0)
    sa, sp, ma, mp_, mf = _burgers_forcing_coeffs(cfg)
    kx = 2.0 * np.pi * np.arange(1, sa.size + 1)[:, None] * x[None, :] / cfg.length
    steady = cfg.forcing_amplitude * np.sum(sa[:, None] * np.sin(kx + sp[:, None]), axis=0)
    # sin(kx + phase + omega t) expanded so each evaluation is one matvec
    sin_part = cfg.forcing_amplitude * ma[:, None] * np.sin(kx + mp_[:, None])
    cos_part = cfg.forcing_amplitude * ma[:, None] * np.cos(kx + mp_[:, None])

    def forcing(t: float) -> np.ndarray:
        return steady + np.cos(mf * t) @ sin_part + np.sin(mf * t) @ cos_part

    def deriv(arr: np.ndarray, axis_spacing: float = dx) -> np.ndarray:
        return (np.roll(arr, -1) - np.roll(arr, 1)) / (2.0 * axis_spacing)

    def rhs(u: np.ndarray, t: float) -> np.ndarray:
        adv = (deriv(u * u) / 2.0 + u * deriv(u)) / 3.0
        diff = cfg.nu * (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / dx**2
        return -adv + diff + forcing(t)

    # map sample times to step indices so recorded times are exact multiples of dt
    targets = np.linspace(cfg.t_collect_start, cfg.t_collect_end, cfg.n_snapshots)
    sample_steps = np.rint(targets / cfg.dt).astype(int)
    if np.any(np.diff(sample_steps) < 1):
        raise ConfigurationError("snapshot spacing is below dt; reduce n_snapshots or dt")

    u = cfg.ic_amplitude * np.sin(2.0 * np.pi * x / cfg.length)
    snaps: list[VelocityField] = []
    times: list[float] = []
    wanted = set(sample_steps.tolist())
    n_steps = int(sample_steps[-1])
    for step in range(n_steps + 1):
        if step in wanted:
            snaps.append(VelocityField(grid, (u.copy(),)))
            times.append(step * cfg.dt)
        if step == n_steps:
            break
        t = step * cfg.dt
        k1 = rhs(u, t)
        k2 = rhs(u + cfg.dt * k1, t + cfg.dt)
        u = u + 0.5 * cfg.dt * (k1 + k2)
        if not np.all(np.isfinite(u)):
            raise InstabilityError(f"non-finite state at t = {t + cfg.dt:.6g}")
        if np.max(np.abs(u)) * cfg.dt / dx > 1.0:
            raise InstabilityError(f"advective CFL exceeded 1 at t = {t + cfg.dt:.6g}")
    return SnapshotSet(grid, np.asarray(times), tuple(snaps))


@dataclass(frozen=True)
class SyntheticChannelConfig:
    dims: tuple[int, int, int] = (24, 17, 12)
    lengths: tuple[float, float, float] = (4.0 * np.pi, 2.0, 4.0 * np.pi / 3.0)
    n_modes: int = 12
    spectrum_slope: float = -5.0 / 3.0
    mean_profile_amplitude: float = 1.0
    n_snapshots: int = 40
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.dims) != 3 or len(self.lengths) != 3:
            raise ConfigurationError("dims and lengths must each have 3 entries")
        if any(n < 4 for n in self.dims):
            raise ConfigurationError("each dim must be >= 4")
        if self.n_modes < 0:
            raise ConfigurationError("n_modes must be >= 0")
        if self.n_snapshots < 2:
            raise ConfigurationError("n_snapshots must be >= 2")

    @property
    def grid(self) -> Grid:
        n1, n2, n3 = self.dims
        l1, l2, l3 = self.lengths
        return Grid((n1, n2, n3),
                    (l1 / n1, l2 / (n2 - 1), l3 / n3),
                    (PERIODIC, WALL, PERIODIC))


def generate_synthetic_channel(cfg: SyntheticChannelConfig) -> SnapshotSet:
    """Mean parabolic profile plus zero-mean random Fourier fluctuations.

    Fluctuation modes carry a wall-normal sine factor, so they vanish
    exactly on the wall nodes; mode amplitudes scale as |k|^(slope/2).
    """
    grid = cfg.grid
    l1, l2, l3 = cfg.lengths
    x = grid.axis_coordinates(0)[:, None, None]
    y = grid.axis_coordinates(1)[None, :, None]
    z = grid.axis_coordinates(2)[None, None, :]

    mean_u1 = cfg.mean_profile_amplitude * 4.0 * y * (l2 - y) / l2**2
    mean = np.broadcast_to(mean_u1, grid.dims)

    rng = np.random.default_rng(cfg.seed)
    shapes = []  # (d, *dims) spatial shape per mode
    for _ in range(cfg.n_modes):
        k1 = rng.integers(1, 5)
        k2 = rng.integers(1, 5)
        k3 = rng.integers(1, 5)
        kmag = np.sqrt((2 * np.pi * k1 / l1) ** 2 + (np.pi * k2 / l2) ** 2
                       + (2 * np.pi * k3 / l3) ** 2)
        amp = kmag ** (cfg.spectrum_slope / 2.0)
        pol = rng.normal(size=3)
        pol /= np.linalg.norm(pol)
        phx = rng.uniform(0.0, 2.0 * np.pi, 3)
        phz = rng.uniform(0.0, 2.0 * np.pi, 3)
        wall_factor = np.sin(np.pi * k2 * y / l2)
        comp = [amp * pol[c]
                * np.sin(2 * np.pi * k1 * x / l1 + phx[c])
                * wall_factor
                * np.sin(2 * np.pi * k3 * z / l3 + phz[c])
                for c in range(3)]
        shapes.append(np.stack(comp))

    snaps = []
    for _ in range(cfg.n_snapshots):
        field = np.stack([mean, np.zeros(grid.dims), np.zeros(grid.dims)]).copy()
        if cfg.n_modes:
            coeff = rng.normal(size=cfg.n_modes)
            for c_m, shape in zip(coeff, shapes):
                field += c_m * shape
        snaps.append(VelocityField(grid, tuple(field)))
    times = np.arange(cfg.n_snapshots, dtype=np.float64)
    return SnapshotSet(grid, times, tuple(snaps))

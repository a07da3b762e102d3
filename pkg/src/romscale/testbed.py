"""Canonical desk-scale testbed shared by the test suite and `romscale repro`.

One tuned Burgers configuration with a broad, slowly decaying modal
spectrum: the fluctuation lengthscale delta1 stays flat (within a few
percent) across truncation levels while delta2 decreases with r, and the
plain Galerkin ROM blows up at the default truncation levels, so closure
and filter stabilization thresholds are well defined.
"""

from __future__ import annotations

import numpy as np

from .fom import BurgersConfig, burgers_forcing_field, run_burgers
from .integrators import DELTA1, DELTA2, EFRConfig, MLConfig, default_u_ml, run
from .lengthscale import LengthscaleInputs, delta1, delta2
from .pod import PODBasis, compute_pod, project
from .rom_ops import ROMOperators, assemble
from .stats import CoefficientKE, kinetic_energy

TESTBED_NU = 2e-4
TESTBED_SEED = 1
TESTBED_R_MAX = 64
TESTBED_R_VALUES = (4, 8, 16)

ROM_DT = 2e-4
ROM_STEPS = 4000
EFR_CHI = 0.06


def testbed_config(**overrides) -> BurgersConfig:
    params = {"nu": TESTBED_NU, "seed": TESTBED_SEED}
    params.update(overrides)
    return BurgersConfig(**params)


def make_testbed(cfg: BurgersConfig | None = None, r_max: int = TESTBED_R_MAX):
    """Generate snapshots and the POD basis for the canonical configuration."""
    cfg = testbed_config() if cfg is None else cfg
    snap_set = run_burgers(cfg)
    basis = compute_pod(snap_set, r_max=r_max)
    return cfg, snap_set, basis


class ROMProblem:
    """ROM run setup bound to one basis truncation level.

    Holds the assembled operators, both lengthscales, the coefficient-space
    KE evaluator, the projected initial history, and the snapshot KE
    reference used by the blow-up criterion.
    """

    def __init__(self, cfg: BurgersConfig, snap_set, basis: PODBasis, r: int,
                 dt: float = ROM_DT, n_steps: int = ROM_STEPS):
        self.r = r
        self.dt = dt
        self.n_steps = n_steps
        self.ops: ROMOperators = assemble(
            basis, r, cfg.nu, forcing=burgers_forcing_field(cfg))
        self.ke = CoefficientKE(basis, r, Mmat=self.ops.Mmat)
        self.delta1 = delta1(basis, snap_set, r)
        self.delta2 = delta2(LengthscaleInputs(
            basis.grid.meshsize, basis.grid.characteristic_length(),
            basis.eigenvalues, r))
        self.u_ml = default_u_ml(basis.mean_field)
        self.a0 = project(basis, snap_set.snapshots[0], r)
        self.a1 = project(basis, snap_set.snapshots[1], r)
        self.ke_reference = max(kinetic_energy(s) for s in snap_set.snapshots)

    def delta(self, which: str) -> float:
        return self.delta1 if which == DELTA1 else self.delta2

    def run_g(self):
        return run("g", self.ops, self.ke, None, self.a0, self.a1,
                   self.dt, self.n_steps, self.ke_reference)

    def run_ml(self, alpha: float, which_delta: str = DELTA1):
        cfg = MLConfig(alpha=alpha, U_ML=self.u_ml,
                       delta=self.delta(which_delta), which_delta=which_delta)
        return run("ml", self.ops, self.ke, cfg, self.a0, self.a1,
                   self.dt, self.n_steps, self.ke_reference)

    def run_efr(self, gamma: float, chi: float = EFR_CHI,
                which_delta: str = DELTA1):
        cfg = EFRConfig(gamma=gamma, delta=self.delta(which_delta),
                        chi=chi, which_delta=which_delta)
        return run("efr", self.ops, self.ke, cfg, self.a0, self.a1,
                   self.dt, self.n_steps, self.ke_reference)

    def ml_stable(self, which_delta: str):
        def stable(alpha: float) -> bool:
            return not self.run_ml(alpha, which_delta).blew_up
        return stable

    def efr_stable(self, which_delta: str, chi: float = EFR_CHI):
        def stable(gamma: float) -> bool:
            return not self.run_efr(gamma, chi, which_delta).blew_up
        return stable

    def mean_snapshot_ke(self, snap_set) -> float:
        return float(np.mean([kinetic_energy(s) for s in snap_set.snapshots]))

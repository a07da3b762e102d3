"""romscale: lengthscale-aware reduced-order models for turbulent flows.

Build POD bases from snapshot data, compute the dimensionality-based and
energy-based ROM lengthscales, run Galerkin / mixing-length / evolve-
filter-relax ROM variants, and calibrate their stabilization parameters.
"""

from .data_model import (PERIODIC, WALL, Grid, GridMismatchError, SnapshotIOError,
                         SnapshotSet, VelocityField, field_from_flat, gradient,
                         gradient_norm_sq, inner_product, quadrature_weights,
                         read_snapshots, write_snapshots, zero_field)
from .fom import (BurgersConfig, ConfigurationError, InstabilityError,
                  SyntheticChannelConfig, burgers_forcing_field,
                  generate_synthetic_channel, run_burgers)
from .pod import (EmptyBasisError, POD, PODBasis, compute_mean, compute_pod,
                  energy_ratio, project, project_all, read_basis, reconstruct,
                  write_basis)
from .lengthscale import (DegenerateFluctuationError, LengthscaleInputs,
                          LengthscaleReport, convexity_check, delta1, delta2,
                          delta2_from_ratio, fluctuation_field, invert_delta2,
                          lengthscale_report)
from .rom_ops import ROMOperators, assemble, read_operators, rhs, write_operators
from .integrators import (DELTA1, DELTA2, EFRConfig, FilterFailure, MLConfig,
                          ROMTrajectory, StepFailure, default_u_ml, efr_filter,
                          efr_relax, ml_matrix, run, step_bdf2)
from .stats import (CoefficientKE, StatsReport, compute_stats, friction_velocity,
                    kinetic_energy, mean_velocity_profile, r12, reynolds_stress,
                    reynolds_stress_profile, u_rms)
from .calibrate import (BracketError, SweepSpec, ThresholdResult,
                        bisect_threshold, find_optimal, find_threshold,
                        golden_section, mean_ke_objective, table_report)

__version__ = "0.1.0"

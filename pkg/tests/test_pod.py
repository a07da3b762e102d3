import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from romscale.data_model import VelocityField, inner_product
from romscale.pod import (EmptyBasisError, POD, compute_mean, compute_pod,
                          energy_ratio, project, project_all, read_basis,
                          reconstruct, write_basis)


class TestComputePOD:
    def test_orthonormal_modes(self, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        for i, mi in enumerate(basis.modes):
            for j, mj in enumerate(basis.modes):
                expected = 1.0 if i == j else 0.0
                assert inner_product(mi, mj) == pytest.approx(expected, abs=1e-10)

    def test_eigenvalues_descending_nonnegative(self, sine_snapshots):
        lam = compute_pod(sine_snapshots).eigenvalues
        assert np.all(np.diff(lam) <= 0.0)
        assert np.all(lam > 0.0)

    def test_coefficient_covariance_identity(self, sine_snapshots):
        # (1/M) sum_k a_j(t_k) a_l(t_k) = lambda_j delta_jl
        basis = compute_pod(sine_snapshots)
        A = project_all(basis, sine_snapshots)
        cov = A.T @ A / sine_snapshots.M
        np.testing.assert_allclose(cov, np.diag(basis.eigenvalues),
                                   atol=1e-12 * basis.eigenvalues[0])

    def test_energy_capture(self, sine_snapshots):
        # three independent harmonics -> three significant modes
        basis = compute_pod(sine_snapshots)
        assert basis.R == 3

    def test_r_max_truncates(self, sine_snapshots):
        basis = compute_pod(sine_snapshots, r_max=2)
        assert basis.R == 2

    def test_identical_snapshots_raise(self, grid_1d):
        from romscale.data_model import SnapshotSet, zero_field
        f = zero_field(grid_1d, 1)
        ss = SnapshotSet(grid_1d, np.arange(3.0), (f, f, f))
        with pytest.raises(EmptyBasisError):
            compute_pod(ss)

    def test_sign_convention(self, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        for mode in basis.modes:
            flat = mode.flat()
            assert flat[np.argmax(np.abs(flat))] > 0.0

    def test_mean_plus_modes_reconstructs_snapshots(self, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        A = project_all(basis, sine_snapshots)
        for k, snap in enumerate(sine_snapshots.snapshots):
            rec = reconstruct(basis, A[k])
            np.testing.assert_allclose(rec.flat(), snap.flat(), atol=1e-10)


class TestProjection:
    def test_project_mean_is_zero(self, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        a = project(basis, basis.mean_field, basis.R)
        np.testing.assert_allclose(a, 0.0, atol=1e-12)

    def test_project_mode_is_unit_vector(self, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        shifted = VelocityField(
            basis.grid,
            (basis.mean_field.components[0] + basis.modes[1].components[0],))
        a = project(basis, shifted, basis.R)
        expected = np.zeros(basis.R)
        expected[1] = 1.0
        np.testing.assert_allclose(a, expected, atol=1e-10)

    def test_energy_ratio_monotone(self, testbed_basis):
        ratios = [energy_ratio(testbed_basis, r) for r in (1, 4, 16, 48)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        assert 0.0 < ratios[0] and ratios[-1] <= 1.0


class TestBasisIO:
    def test_roundtrip(self, tmp_path, sine_snapshots):
        basis = compute_pod(sine_snapshots)
        write_basis(basis, str(tmp_path / "b"))
        back = read_basis(str(tmp_path / "b"))
        assert back.R == basis.R
        np.testing.assert_array_equal(back.eigenvalues, basis.eigenvalues)
        np.testing.assert_array_equal(back.mean_field.flat(),
                                      basis.mean_field.flat())
        np.testing.assert_array_equal(back.mode_matrix(), basis.mode_matrix())


class TestEstimator:
    def test_get_params_roundtrip(self):
        est = POD(r_max=5, tol=1e-10)
        assert est.get_params() == {"r_max": 5, "tol": 1e-10}
        est.set_params(r_max=3)
        assert est.r_max == 3

    def test_not_fitted(self, sine_snapshots):
        with pytest.raises(NotFittedError):
            POD().transform(sine_snapshots)

    def test_fit_transform_shapes(self, sine_snapshots):
        est = POD().fit(sine_snapshots)
        A = est.transform(sine_snapshots)
        assert A.shape == (sine_snapshots.M, est.basis_.R)

    def test_inverse_transform_recovers(self, sine_snapshots):
        est = POD().fit(sine_snapshots)
        A = est.transform(sine_snapshots)
        X = est.inverse_transform(A)
        np.testing.assert_allclose(X, sine_snapshots.as_matrix(), atol=1e-10)

    def test_mean_of_snapshots(self, sine_snapshots):
        mean = compute_mean(sine_snapshots)
        np.testing.assert_allclose(mean.flat(),
                                   sine_snapshots.as_matrix().mean(axis=0))

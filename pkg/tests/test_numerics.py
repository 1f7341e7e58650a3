import numpy as np
import pytest

from qatkit.numerics import (
    finite_diff_grad,
    gaussian_vector,
    make_rng,
    make_spd,
    matvec,
    pca_project,
    power_iteration_lmax,
)
from qatkit.objectives import quadratic, rosenbrock, toy_scalar


class TestMatvec:
    def test_identity(self):
        assert np.array_equal(matvec(np.eye(2), np.array([3.0, 4.0])), [3.0, 4.0])

    def test_diagonal_scaling(self):
        A = np.array([[2.0, 0.0], [0.0, 2.0]])
        assert np.array_equal(matvec(A, np.array([1.0, -1.0])), [2.0, -2.0])

    def test_hand_arithmetic(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matvec(A, np.array([1.0, 1.0])), [3.0, 7.0])

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            matvec(np.eye(3), np.ones(2))


class TestFiniteDiff:
    def test_toy_scalar_grad(self):
        f = lambda x: 0.5 * float((x[0] - 0.5) ** 2)
        g = finite_diff_grad(f, np.array([0.9]), h=1e-5)
        assert abs(g[0] - 0.4) <= 1e-8

    def test_constant_function(self):
        g = finite_diff_grad(lambda x: 3.0, np.array([1.0, -2.0, 0.3]))
        assert np.array_equal(g, np.zeros(3))

    def test_quadratic_matches_analytic(self):
        rng = make_rng(11)
        A = make_spd(5, 7.0, rng)
        b = rng.standard_normal(5)
        obj = quadratic(A, b)
        x = rng.standard_normal(5)
        g_fd = finite_diff_grad(obj.loss, x, h=1e-5)
        g = obj.grad(x)
        assert np.linalg.norm(g_fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))

    def test_nonfinite_reports_index(self):
        def f(x):
            return float("nan") if x[1] > 1.0 else float(x @ x)

        with pytest.raises(FloatingPointError, match="coordinate 1"):
            finite_diff_grad(f, np.array([0.0, 1.0]), h=0.5)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda x: 0.0, np.ones(2), h=0.0)


class TestMakeSpd:
    def test_kappa_one_is_identity(self):
        M = make_spd(3, 1.0, make_rng(0))
        assert np.allclose(M, np.eye(3), atol=1e-12)

    def test_dim2_kappa100_eigenvalues(self):
        M = make_spd(2, 100.0, make_rng(1))
        evals = np.linalg.eigvalsh(M)
        assert np.allclose(sorted(evals), [1.0, 100.0], rtol=1e-9)

    def test_condition_number_dim5(self):
        M = make_spd(5, 10.0, make_rng(2))
        evals = np.linalg.eigvalsh(M)
        assert abs(evals[-1] / evals[0] - 10.0) <= 1e-4

    def test_measured_kappa_close(self):
        for seed, kappa in enumerate([1.0, 3.0, 10.0, 100.0]):
            M = make_spd(8, kappa, make_rng(seed))
            evals = np.linalg.eigvalsh(M)
            assert abs(evals[-1] / evals[0] - kappa) <= 1e-6 * kappa

    def test_positive_definite_property(self):
        rng = make_rng(3)
        M = make_spd(6, 50.0, rng)
        for _ in range(100):
            x = rng.standard_normal(6)
            while np.all(x == 0):
                x = rng.standard_normal(6)
            assert x @ M @ x > 0

    def test_symmetric(self):
        M = make_spd(7, 25.0, make_rng(4))
        assert np.abs(M - M.T).max() <= 1e-12 * np.abs(M).max()

    def test_bad_kappa(self):
        with pytest.raises(ValueError):
            make_spd(3, 0.5, make_rng(0))


class TestPca:
    def test_collinear_points(self):
        pts = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [-1.0, 0.0]])
        proj, comps = pca_project(pts, 2)
        assert np.allclose(comps[0], [1.0, 0.0], atol=1e-12)
        # no variance along the second component
        assert np.abs(proj[:, 1]).max() <= 1e-12

    def test_variance_ordering(self):
        pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.1], [0.0, -0.1]])
        _, comps = pca_project(pts, 2)
        assert np.allclose(comps[0], [1.0, 0.0], atol=1e-12)

    def test_full_rank_roundtrip(self):
        rng = make_rng(5)
        pts = rng.standard_normal((50, 10))
        proj, comps = pca_project(pts, 10)
        recon = proj @ comps + pts.mean(axis=0)
        assert np.abs(recon - pts).max() <= 1e-8

    def test_components_orthonormal_property(self):
        rng = make_rng(6)
        for _ in range(100):
            n = int(rng.integers(3, 30))
            d = int(rng.integers(2, 8))
            k = int(rng.integers(1, d + 1))
            _, comps = pca_project(rng.standard_normal((n, d)), k)
            gram = comps @ comps.T
            assert np.abs(gram - np.eye(k)).max() <= 1e-10

    def test_sign_convention(self):
        rng = make_rng(7)
        for _ in range(20):
            _, comps = pca_project(rng.standard_normal((20, 5)), 3)
            for row in comps:
                nz = np.nonzero(np.abs(row) > 1e-12)[0]
                assert row[nz[0]] > 0

    def test_zero_variance_warns_not_raises(self):
        pts = np.ones((4, 3))
        with pytest.warns(RuntimeWarning):
            proj, _ = pca_project(pts, 2)
        assert np.abs(proj).max() == 0.0


class TestGaussianVector:
    def test_zero_std_is_constant(self):
        v = gaussian_vector(5, 2.5, 0.0, make_rng(8))
        assert np.array_equal(v, np.full(5, 2.5))

    def test_moments(self):
        v = gaussian_vector(100_000, 0.0, 1.0, make_rng(9))
        assert abs(v.mean()) <= 0.02
        assert abs(v.std() - 1.0) <= 0.02

    def test_same_seed_same_vector(self):
        a = gaussian_vector(100, 1.0, 2.0, make_rng(10))
        b = gaussian_vector(100, 1.0, 2.0, make_rng(10))
        assert np.array_equal(a, b)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            gaussian_vector(3, 0.0, -1.0, make_rng(0))


class TestPowerIteration:
    def test_matches_eigsolver(self):
        rng = make_rng(12)
        M = make_spd(6, 40.0, rng)
        est = power_iteration_lmax(M, rng)
        assert abs(est - np.linalg.eigvalsh(M)[-1]) <= 1e-6 * 40.0


def test_fd_agreement_invariant_over_objectives():
    # 100 random points spread across the analytic objectives
    rng = make_rng(13)
    A = make_spd(5, 12.0, rng)
    b = rng.standard_normal(5)
    objs = [quadratic(A, b), toy_scalar(), rosenbrock(6)]
    checked = 0
    while checked < 100:
        obj = objs[checked % len(objs)]
        x = rng.standard_normal(obj.dim)
        g = obj.grad(x)
        g_fd = finite_diff_grad(obj.loss, x, h=1e-5)
        denom = max(1.0, float(np.linalg.norm(g)))
        assert np.linalg.norm(g_fd - g) / denom <= 1e-5
        checked += 1

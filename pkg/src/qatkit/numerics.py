"""Dense vector/matrix primitives, seeded randomness, and numerical oracles.

Everything here works on plain float64 ``numpy`` arrays: a ``Vector`` is a
1-d array, a ``Matrix`` a 2-d array.  All computation is in doubles so that
the optimizer and convergence checks elsewhere in the package are not
confounded by precision.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray

__all__ = [
    "Vector",
    "Matrix",
    "make_rng",
    "matvec",
    "finite_diff_grad",
    "make_spd",
    "pca_project",
    "gaussian_vector",
    "power_iteration_lmax",
]


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator.

    PCG64 is a counter-based generator with fixed documented constants, so an
    identical seed plus call sequence reproduces the same stream on every
    platform.  ``seed`` may be an int or a tuple of ints (stream labels).
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _as_vector(x, name: str = "x") -> Vector:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {v.shape}")
    return v


def matvec(A: Matrix, x: Vector) -> Vector:
    """Dense matrix-vector product with shape validation."""
    A = np.asarray(A, dtype=np.float64)
    x = _as_vector(x)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-dimensional, got shape {A.shape}")
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has dim {x.shape[0]}")
    return A @ x


def finite_diff_grad(f: Callable[[Vector], float], x: Vector, h: float = 1e-5) -> Vector:
    """Central-difference gradient, the oracle for analytic-gradient checks.

    result_i = (f(x + h e_i) - f(x - h e_i)) / (2 h)
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    x = _as_vector(x)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        fp = float(f(x + e))
        fm = float(f(x - e))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective value at coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def make_spd(dim: int, kappa: float, rng: np.random.Generator) -> Matrix:
    """Random symmetric positive definite matrix with condition number ``kappa``.

    Eigenvalues are log-spaced in [1, kappa]; the eigenbasis is a random
    orthogonal matrix obtained by QR of a Gaussian matrix (sign-fixed so the
    factorization is unique).
    """
    if kappa < 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if dim == 1 and kappa != 1.0:
        raise ValueError("a 1x1 matrix cannot have condition number > 1")
    eigs = np.logspace(0.0, np.log10(kappa), dim)
    G = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    Q = Q * d
    M = (Q * eigs) @ Q.T
    return (M + M.T) / 2.0


def pca_project(points, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Project points onto the top-``k`` principal components.

    Returns ``(projections, components)`` where projections has shape
    (n_points, k) holding centered dot products and components has shape
    (k, dim) with orthonormal rows ordered by descending eigenvalue of the
    centered covariance.  Sign convention: the first nonzero entry of each
    component is positive.  Zero-variance input yields all-zero projections
    and a ``RuntimeWarning`` rather than an error.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"points must form a 2-d array, got shape {X.shape}")
    n, dim = X.shape
    if n < 2:
        raise ValueError("need at least 2 points for PCA")
    if not 1 <= k <= dim:
        raise ValueError(f"component count {k} out of range [1, {dim}]")
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 1e-15 * max(1.0, float(np.abs(X).max())):
        warnings.warn("zero-variance data: projections are all zero", RuntimeWarning)
    # eigh returns ascending order; take the top k, largest first
    comps = evecs[:, ::-1][:, :k].T.copy()
    for row in comps:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return Xc @ comps.T, comps


def gaussian_vector(dim: int, mean: float, std: float, rng: np.random.Generator) -> Vector:
    """I.i.d. normal entries; std = 0 returns the constant vector ``mean``."""
    if std < 0:
        raise ValueError(f"std must be non-negative, got {std}")
    return rng.normal(mean, std, size=dim)


def power_iteration_lmax(A: Matrix, rng: np.random.Generator, iters: int = 200) -> float:
    """Largest-eigenvalue estimate of a symmetric PSD matrix via power iteration."""
    A = np.asarray(A, dtype=np.float64)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(v @ (A @ v))

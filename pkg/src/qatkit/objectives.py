"""Test objectives with analytic gradients, plus quantized and noisy wrappers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .qat_grad import StePolicy, ste_backward
from .quantize import QuantSpec, quantize

__all__ = [
    "Objective",
    "NoisyGradient",
    "quadratic",
    "toy_scalar",
    "rosenbrock",
    "quantized_objective",
    "noisy_grad",
]


@dataclass(frozen=True)
class Objective:
    """Scalar objective with an analytic gradient.

    ``eval_fn`` maps a point to ``(loss, grad)``.  ``x_star`` / ``f_star`` are
    the known minimizer and minimum when available.
    """

    dim: int
    eval_fn: Callable[[np.ndarray], tuple[float, np.ndarray]]
    x_star: np.ndarray | None = None
    f_star: float | None = None

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return self.eval_fn(np.asarray(x, dtype=np.float64))

    def loss(self, x: np.ndarray) -> float:
        return self.value_and_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[1]


def quadratic(A: np.ndarray, b: np.ndarray) -> Objective:
    """f(x) = 1/2 x^T A x - b^T x for symmetric positive definite A.

    The minimizer A^{-1} b is solved once by Cholesky factorization;
    f* = -1/2 b^T x*.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise ValueError(f"bad shapes: A {A.shape}, b {b.shape}")
    scale = float(np.abs(A).max())
    if scale == 0 or float(np.abs(A - A.T).max()) > 1e-12 * scale:
        raise ValueError("A must be symmetric")
    try:
        factor = cho_factor(A)
    except np.linalg.LinAlgError as err:
        raise ValueError("A must be positive definite") from err
    x_star = cho_solve(factor, b)
    f_star = -0.5 * float(b @ x_star)

    def eval_fn(x):
        Ax = A @ x
        return 0.5 * float(x @ Ax) - float(b @ x), Ax - b

    return Objective(dim=A.shape[0], eval_fn=eval_fn, x_star=x_star, f_star=f_star)


def toy_scalar() -> Objective:
    """The scalar objective f(x) = 1/2 (x - 1/2)^2."""

    def eval_fn(x):
        d = x - 0.5
        return 0.5 * float(d @ d), d

    return Objective(dim=1, eval_fn=eval_fn, x_star=np.array([0.5]), f_star=0.0)


def rosenbrock(dim: int) -> Objective:
    """Standard Rosenbrock function, a smooth non-convex rate-study objective."""
    if dim < 2:
        raise ValueError(f"rosenbrock needs dim >= 2, got {dim}")

    def eval_fn(x):
        d = x[1:] - x[:-1] ** 2
        loss = float(np.sum(100.0 * d * d + (1.0 - x[:-1]) ** 2))
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * d - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * d
        return loss, g

    return Objective(dim=dim, eval_fn=eval_fn, x_star=np.ones(dim), f_star=0.0)


def quantized_objective(base: Objective, spec: QuantSpec, policy: StePolicy) -> Objective:
    """QAT view of ``base``: loss at Q(x), gradient transported by ``policy``.

    loss(x) = base.loss(Q(x)); grad(x) = ste_backward(policy, base.grad(Q(x)), x).
    """
    if spec.row_length is not None and base.dim % spec.row_length:
        raise ValueError(f"row_length {spec.row_length} does not partition dim {base.dim}")

    def eval_fn(x):
        xq = quantize(spec, x).quantized
        loss, g = base.value_and_grad(xq)
        return loss, ste_backward(policy, g, x)

    return Objective(dim=base.dim, eval_fn=eval_fn, x_star=base.x_star, f_star=base.f_star)


@dataclass
class NoisyGradient:
    """Unbiased stochastic gradient: analytic gradient plus isotropic Gaussian noise."""

    base: Objective
    noise_std: float
    rng: np.random.Generator

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std}")


def noisy_grad(ng: NoisyGradient, x: np.ndarray) -> np.ndarray:
    """grad(x) + noise_std * xi with xi ~ N(0, I), deterministic given the rng."""
    g = ng.base.grad(x)
    if ng.noise_std == 0.0:
        return g
    return g + ng.noise_std * ng.rng.standard_normal(g.shape[0])

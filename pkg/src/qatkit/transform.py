"""Fast Walsh-Hadamard transform used as the pre-quantization rotation.

The transform is the orthonormal Sylvester-ordered Hadamard matrix
H in {+-1/sqrt(n)}^{n x n} applied with an O(n log n) butterfly; H is never
materialized.  Inputs whose length is not a power of two are zero-padded on
the forward pass and truncated on the inverse, which preserves orthogonality
on the embedded subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["HadamardPlan", "hadamard_plan", "fwht_unnormalized", "hadamard_forward", "hadamard_inverse"]


@dataclass(frozen=True)
class HadamardPlan:
    """Transform geometry for one row length."""

    logical_dim: int
    padded_dim: int
    scale: float


def hadamard_plan(dim: int) -> HadamardPlan:
    """Plan for input length ``dim``: pad to the next power of two."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    padded = 1 << (dim - 1).bit_length()
    return HadamardPlan(logical_dim=dim, padded_dim=padded, scale=1.0 / math.sqrt(padded))


def fwht_unnormalized(x: np.ndarray) -> np.ndarray:
    """In-place-style butterfly; input length must be a power of two.

    Applying this twice multiplies the input by its length (Sylvester
    Hadamard matrices are symmetric, so the same butterfly serves as the
    transpose).
    """
    v = np.array(x, dtype=np.float64, copy=True)
    n = v.size
    if n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    h = 1
    while h < n:
        v = v.reshape(-1, 2, h)
        top = v[:, 0, :] + v[:, 1, :]
        bot = v[:, 0, :] - v[:, 1, :]
        v = np.stack((top, bot), axis=1).reshape(-1)
        h *= 2
    return v


def hadamard_forward(plan: HadamardPlan, x: np.ndarray) -> np.ndarray:
    """z = Hx on the zero-padded input; output has length ``plan.padded_dim``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != plan.logical_dim:
        raise ValueError(f"expected vector of dim {plan.logical_dim}, got shape {x.shape}")
    if plan.padded_dim != plan.logical_dim:
        padded = np.zeros(plan.padded_dim)
        padded[: plan.logical_dim] = x
    else:
        padded = x
    return fwht_unnormalized(padded) * plan.scale


def hadamard_inverse(plan: HadamardPlan, z: np.ndarray) -> np.ndarray:
    """x = H^T z, truncated back to the logical length."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != plan.padded_dim:
        raise ValueError(f"expected vector of dim {plan.padded_dim}, got shape {z.shape}")
    out = fwht_unnormalized(z) * plan.scale
    return out[: plan.logical_dim]

"""Desk-scale experiment loops driven by the CLI and the demo scripts.

Three lanes:

* the scalar floor-quantized problem, where corrected SGD lands on the
  closed-form balance points x(lam) = 1 / (2 (1 + lam));
* condition-number-swept quadratics with a 4-bit quantized forward pass,
  comparing plain and corrected optimizers on the final optimality gap;
* the ergodic-rate study, which runs corrected SGD over a grid of horizons
  and fits the log-log decay of the mean squared balance gradient.

Every run owns its generators (seeded by integer tuples), so replicates are
reproducible and independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import make_rng, power_iteration_lmax, make_spd
from .objectives import Objective, quadratic, rosenbrock, toy_scalar
from .optim import (
    AdamState,
    OptimConfig,
    adamw_step,
    cage_adamw_coupled_step,
    cage_adamw_decoupled_step,
    cage_sgd_step,
    grad_clip,
    lambda_at,
    sgd_step,
)
from .pareto import ParetoMeasure
from .qat_grad import identity_policy, trust_masked_policy, ste_backward
from .quantize import INT_SCHEMES, QuantSpec, quantize

__all__ = [
    "NumericalFailure",
    "OPTIMIZERS",
    "lr_at",
    "ToyParetoResult",
    "run_toy_pareto",
    "QuadraticRun",
    "make_quadratic_problem",
    "run_quadratic",
    "ConvergenceRun",
    "make_rate_objective",
    "run_convergence_run",
]

OPTIMIZERS = ("sgd", "adamw", "cage-sgd", "cage-adamw-dec", "cage-adamw-cpl")

# seed-stream labels so the problem draw, init, and noise never alias
_STREAM_PROBLEM = 11
_STREAM_INIT = 12
_STREAM_NOISE = 13


class NumericalFailure(RuntimeError):
    """A run produced a non-finite loss or iterate."""


def lr_at(base_lr: float, t: int, total_steps: int, schedule: str = "constant") -> float:
    """Step-t learning rate; cosine decay includes a 10% linear warmup."""
    if schedule == "constant":
        return base_lr
    if schedule != "cosine":
        raise ValueError(f"unknown lr schedule {schedule!r}")
    warm = max(1, math.ceil(0.1 * total_steps))
    if t <= warm:
        return base_lr * t / warm
    progress = (t - warm) / max(1, total_steps - warm)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def _check_finite(x: np.ndarray, loss: float, where: str) -> None:
    if not np.isfinite(loss) or not np.all(np.isfinite(x)):
        raise NumericalFailure(f"non-finite value during {where}")


# ---------------------------------------------------------------------------
# scalar floor-quantized lane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyParetoResult:
    lam: float
    final_x: float
    pareto_grad_abs: float
    ste_grad_abs: float
    trace: ParetoMeasure


def run_toy_pareto(lam: float, lr: float = 0.05, steps: int = 5000, x0: float = 0.9,
                   grid: float = 1.0) -> ToyParetoResult:
    """Corrected SGD with constant lam on the scalar problem under a floor grid.

    The iterate moves by x - lr (grad f(x) + lam (x - Q(x))); for lam > 0 it
    converges to the balance point 1 / (2 (1 + lam)) from x0 = 0.9, while the
    straight-through gradient at Q(x) stays bounded away from zero.
    """
    obj = toy_scalar()
    spec = QuantSpec(scheme="floor-toy", grid=grid)
    x = np.array([float(x0)])
    trace = ParetoMeasure(lam=lam)
    for _ in range(steps):
        loss, g = obj.value_and_grad(x)
        e = quantize(spec, x).error
        trace.record(loss, g, e, lam)
        x = cage_sgd_step(x, g, e, lr, lam)
        _check_finite(x, loss, "toy-pareto run")
    g = obj.grad(x)
    e = quantize(spec, x).error
    xq = quantize(spec, x).quantized
    return ToyParetoResult(
        lam=lam,
        final_x=float(x[0]),
        pareto_grad_abs=float(np.abs(g + lam * e)[0]),
        ste_grad_abs=float(np.abs(obj.grad(xq))[0]),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# quadratic lane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticRun:
    final_gap: float
    final_loss: float
    trace: ParetoMeasure
    iterates: np.ndarray | None = None


def make_quadratic_problem(dim: int, kappa: float, seed: int, sigma0: float = 1.0):
    """Shared problem draw for one (kappa, seed) cell: SPD matrix, target, init.

    All optimizers in a cell must see the same triple so that per-seed
    comparisons are paired.
    """
    rng = make_rng((_STREAM_PROBLEM, seed, int(round(kappa * 1000))))
    A = make_spd(dim, kappa, rng)
    b = rng.standard_normal(dim)
    x0 = sigma0 * rng.standard_normal(dim)
    return quadratic(A, b), x0


def run_quadratic(
    obj: Objective,
    x0: np.ndarray,
    optimizer: str,
    steps: int,
    spec: QuantSpec | None,
    cfg: OptimConfig,
    lr_schedule: str = "constant",
    ste_kind: str = "trust-masked",
    grad_clip_norm: float | None = 1.0,
    record_iterates: bool = False,
) -> QuadraticRun:
    """Run one optimizer on a quantized-forward quadratic.

    The loss and gradient are evaluated at Q(x) with the gradient transported
    back by the chosen estimator; the reported gap is f(Q(x_T)) - f* (or
    f(x_T) - f* when quantization is disabled).
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if spec is not None and ste_kind == "trust-masked" and spec.scheme in INT_SCHEMES:
        policy = trust_masked_policy(spec)
    else:
        policy = identity_policy()
    lam_for_measure = cfg.lam if optimizer.startswith("cage") else 0.0
    trace = ParetoMeasure(lam=lam_for_measure)
    sched = cfg.schedule()
    x = np.array(x0, dtype=np.float64, copy=True)
    state = AdamState.zeros(obj.dim)
    snapshots = np.empty((steps, obj.dim)) if record_iterates else None

    for t in range(1, steps + 1):
        a_t = lr_at(cfg.lr, t, steps, lr_schedule)
        if spec is not None:
            qres = quantize(spec, x)
            loss, g_at_q = obj.value_and_grad(qres.quantized)
            g = ste_backward(policy, g_at_q, x)
            e = qres.error
        else:
            loss, g = obj.value_and_grad(x)
            e = np.zeros_like(x)
        if grad_clip_norm:
            g = grad_clip(g, grad_clip_norm)

        if optimizer.startswith("cage"):
            lam_t = cfg.lam if optimizer == "cage-sgd" else lambda_at(sched, t)
        else:
            lam_t = 0.0
        trace.record(loss, obj.grad(x), e, lam_t)

        if optimizer == "sgd":
            x = sgd_step(x, g, a_t)
        elif optimizer == "adamw":
            state, x = adamw_step(state, x, g, cfg, lr=a_t)
        elif optimizer == "cage-sgd":
            x = cage_sgd_step(x, g, e, a_t, lam_t)
        elif optimizer == "cage-adamw-dec":
            state, x = cage_adamw_decoupled_step(state, x, g, cfg, t, e=e, spec=spec, lr=a_t)
        else:
            state, x = cage_adamw_coupled_step(state, x, g, e, cfg, t, lr=a_t)
        _check_finite(x, loss, "quadratic run")
        if snapshots is not None:
            snapshots[t - 1] = x

    x_final = quantize(spec, x).quantized if spec is not None else x
    final_loss = obj.loss(x_final)
    return QuadraticRun(
        final_gap=final_loss - obj.f_star,
        final_loss=final_loss,
        trace=trace,
        iterates=snapshots,
    )


# ---------------------------------------------------------------------------
# ergodic-rate lane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRun:
    horizon: int
    seed: int
    alpha: float
    ergodic_mean: float
    trace: ParetoMeasure | None


def make_rate_objective(name: str, dim: int, kappa: float = 10.0, seed: int = 0,
                        lipschitz: float = 1000.0) -> tuple[Objective, float]:
    """Objective for the rate study plus its gradient-Lipschitz estimate.

    Quadratics get a power-iteration estimate of the top curvature; the
    non-convex objective uses the configured constant.
    """
    if name == "rosenbrock":
        return rosenbrock(dim), lipschitz
    if name == "quadratic":
        rng = make_rng((_STREAM_PROBLEM, seed, int(round(kappa * 1000))))
        A = make_spd(dim, kappa, rng)
        lhat = power_iteration_lmax(A, make_rng((_STREAM_PROBLEM, seed, 7)))
        return quadratic(A, rng.standard_normal(dim)), lhat
    raise ValueError(f"unknown rate objective {name!r}")


def run_convergence_run(
    obj: Objective,
    spec: QuantSpec | None,
    lam: float,
    noise_std: float,
    horizon: int,
    seed: int,
    lipschitz: float,
    x0_std: float = 0.25,
    keep_trace: bool = False,
) -> ConvergenceRun:
    """One corrected-SGD run at fixed horizon with alpha = min(1/L, 1/sqrt(T)).

    The squared balance-gradient norm is recorded at each iterate before the
    step; the ergodic mean over the horizon is the rate study's observable.
    The init draw depends only on the seed, so runs at different horizons
    share their starting point.
    """
    alpha = min(1.0 / lipschitz, 1.0 / math.sqrt(horizon))
    x = x0_std * make_rng((_STREAM_INIT, seed)).standard_normal(obj.dim)
    noise_rng = make_rng((_STREAM_NOISE, seed, horizon))
    trace = ParetoMeasure(lam=lam) if keep_trace else None
    pareto_sq = np.empty(horizon)
    for t in range(horizon):
        loss, g = obj.value_and_grad(x)
        e = quantize(spec, x).error if spec is not None else np.zeros_like(x)
        p = g + lam * e
        pareto_sq[t] = p @ p
        if trace is not None:
            trace.record(loss, g, e, lam)
        g_tilde = g if noise_std == 0.0 else g + noise_std * noise_rng.standard_normal(obj.dim)
        x = cage_sgd_step(x, g_tilde, e, alpha, lam)
        _check_finite(x, loss, "convergence run")
    return ConvergenceRun(
        horizon=horizon,
        seed=seed,
        alpha=alpha,
        ergodic_mean=float(pareto_sq.mean()),
        trace=trace,
    )

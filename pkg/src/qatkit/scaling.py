"""Separable data/model/precision scaling law and its nonlinear fit.

The law is L(N, D, P) = A / (N * eff)^alpha + B / D^beta + E with one
effective-capacity factor eff in (0, 1] per (method, precision) group;
full-precision rows ("FP") are pinned at eff = 1.  The fit is
Levenberg-Marquardt on log-space residuals in a reparametrized space
(A = e^a etc., eff = sigmoid(u)) with weak log-priors on the exponents and a
seeded multi-start.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .numerics import make_rng

__all__ = [
    "FP_LABEL",
    "ScalingDatum",
    "ScalingFit",
    "predict_loss",
    "build_residual_system",
    "fit_scaling",
    "synthesize_scaling_data",
    "read_scaling_csv",
    "write_scaling_csv",
    "fit_to_json_dict",
    "write_fit_json",
]

FP_LABEL = "FP"
CSV_HEADER = ("method", "P", "N", "D", "loss")


@dataclass(frozen=True)
class ScalingDatum:
    """One observed training run: method label, precision label, sizes, loss."""

    method: str
    precision: str
    N: float
    D: float
    loss: float

    def __post_init__(self):
        if self.N <= 0 or self.D <= 0:
            raise ValueError(f"N and D must be positive, got N={self.N}, D={self.D}")
        if self.loss <= 0:
            raise ValueError(f"loss must be positive, got {self.loss}")


@dataclass(frozen=True)
class ScalingFit:
    """Fitted law parameters plus the per-group capacity factors."""

    A: float
    alpha: float
    B: float
    beta: float
    E: float
    eff: dict[tuple[str, str], float]
    residual_rms: float


def _eff_for(fit_eff: dict[tuple[str, str], float], method: str, precision: str) -> float:
    if precision == FP_LABEL:
        return 1.0
    key = (method, precision)
    if key not in fit_eff:
        raise KeyError(f"no fitted eff for group {key}")
    return fit_eff[key]


def predict_loss(fit: ScalingFit, N: float, D: float, method: str, precision: str) -> float:
    """Evaluate the fitted law at (N, D) for one method/precision group."""
    eff = _eff_for(fit.eff, method, precision)
    return fit.A / (N * eff) ** fit.alpha + fit.B / D**fit.beta + fit.E


def _sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


def _canonical(data: list[ScalingDatum]) -> list[ScalingDatum]:
    # fixed row order makes the fit exactly invariant to input ordering
    return sorted(data, key=lambda r: (r.method, r.precision, r.N, r.D, r.loss))


def _validate(data: list[ScalingDatum]) -> list[tuple[str, str]]:
    if len({r.N for r in data}) < 2:
        raise ValueError("insufficient data diversity: need at least 2 distinct N")
    if len({r.D for r in data}) < 2:
        raise ValueError("insufficient data diversity: need at least 2 distinct D")
    groups: dict[tuple[str, str], int] = {}
    for r in data:
        groups[(r.method, r.precision)] = groups.get((r.method, r.precision), 0) + 1
    if not any(p == FP_LABEL for _, p in groups):
        raise ValueError("insufficient data diversity: need a full-precision (FP) group")
    for key, count in groups.items():
        if count < 2:
            raise ValueError(f"insufficient data diversity: group {key} has {count} point(s), need >= 2")
    return sorted(k for k in groups if k[1] != FP_LABEL)


def _unpack_theta(theta):
    a, abar, b, bbar, ebar = theta[:5]
    u = theta[5:]
    return math.exp(a), math.exp(abar), math.exp(b), math.exp(bbar), math.exp(ebar), _sigmoid(u)


def build_residual_system(data: list[ScalingDatum], prior_weight: float, residual_space: str):
    """Residual and Jacobian closures over the reparametrized variables.

    The parameter vector is theta = (log A, log alpha, log B, log beta, log E,
    u_1..u_G) with eff_g = sigmoid(u_g); the residual vector is the per-point
    data misfit followed by the two prior rows sqrt(w) log alpha and
    sqrt(w) log beta.  Returns (residuals, jacobian, groups).
    """
    if residual_space not in ("log", "linear"):
        raise ValueError(f"unknown residual_space {residual_space!r}")
    data = _canonical(list(data))
    groups = _validate(data)
    g_index = {key: i for i, key in enumerate(groups)}
    n = len(data)
    log_n = np.array([math.log(r.N) for r in data])
    log_d = np.array([math.log(r.D) for r in data])
    obs = np.array([r.loss for r in data])
    log_obs = np.log(obs)
    # group membership matrix: column g is 1 for rows in fitted group g
    member = np.zeros((n, len(groups)))
    for i, r in enumerate(data):
        if r.precision != FP_LABEL:
            member[i, g_index[(r.method, r.precision)]] = 1.0
    in_group = member.sum(axis=1) > 0
    sqrt_w = math.sqrt(prior_weight)

    def terms(theta):
        A, alpha, B, beta, E, eff = _unpack_theta(theta)
        eff_row = np.where(in_group, member @ eff, 1.0)
        t1 = A * np.exp(-alpha * (log_n + np.log(eff_row)))
        t2 = B * np.exp(-beta * log_d)
        return A, alpha, B, beta, E, eff, eff_row, t1, t2

    def residuals(theta):
        _, alpha, _, beta, E, _, _, t1, t2 = terms(theta)
        pred = t1 + t2 + E
        if residual_space == "log":
            r = np.log(pred) - log_obs
        else:
            r = pred - obs
        return np.concatenate([r, [sqrt_w * math.log(alpha), sqrt_w * math.log(beta)]])

    def jacobian(theta):
        _, alpha, _, beta, E, eff, eff_row, t1, t2 = terms(theta)
        pred = t1 + t2 + E
        J = np.zeros((n + 2, theta.size))
        J[:n, 0] = t1
        J[:n, 1] = -alpha * (log_n + np.log(eff_row)) * t1
        J[:n, 2] = t2
        J[:n, 3] = -beta * log_d * t2
        J[:n, 4] = E
        # d pred / d u_g = -alpha * t1 * (1 - eff_g) for member rows
        J[:n, 5:] = member * (-alpha * t1 * (member @ (1.0 - eff)))[:, None]
        if residual_space == "log":
            J[:n] /= pred[:, None]
        J[n, 1] = sqrt_w
        J[n + 1, 3] = sqrt_w
        return J

    return residuals, jacobian, groups


def fit_scaling(
    data: list[ScalingDatum],
    prior_weight: float = 1e-3,
    residual_space: str = "log",
    n_starts: int = 8,
    seed: int = 0,
    max_iter: int = 500,
) -> ScalingFit:
    """Jointly fit A, alpha, B, beta, E shared across methods plus per-group eff.

    Minimizes sum (log pred - log obs)^2 (or linear residuals with
    ``residual_space='linear'``) plus prior_weight * ((log alpha)^2 +
    (log beta)^2), by Levenberg-Marquardt with an analytic Jacobian in the
    reparametrized variables.  ``n_starts`` seeded initializations are run and
    the best final objective wins, ties broken by lowest start index.  The
    rows are canonically sorted first, so the result is independent of input
    ordering.
    """
    data = _canonical(list(data))
    residuals, jacobian, groups = build_residual_system(data, prior_weight, residual_space)
    g_index = {key: i for i, key in enumerate(groups)}
    n = len(data)
    obs = np.array([r.loss for r in data])
    log_n = np.array([math.log(r.N) for r in data])
    log_d = np.array([math.log(r.D) for r in data])

    spread = max(obs.max() - obs.min(), 0.1 * obs.min())
    best = None
    for start in range(n_starts):
        rng = make_rng((seed, start))
        theta0 = np.concatenate(
            [
                [
                    math.log(spread) + rng.normal(0.0, 0.5) + 0.3 * np.mean(log_n),
                    math.log(0.3) + rng.normal(0.0, 0.3),
                    math.log(spread) + rng.normal(0.0, 0.5) + 0.3 * np.mean(log_d),
                    math.log(0.3) + rng.normal(0.0, 0.3),
                    math.log(0.8 * obs.min()) + rng.normal(0.0, 0.2),
                ],
                rng.normal(1.0, 1.0, size=len(groups)),
            ]
        )
        try:
            sol = least_squares(
                residuals,
                theta0,
                jac=jacobian,
                method="lm",
                xtol=1e-10,
                ftol=1e-14,
                gtol=1e-14,
                max_nfev=max_iter * 4,
            )
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(sol.cost) and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise RuntimeError("all fit starts failed")

    A, alpha, B, beta, E, eff = _unpack_theta(best.x)
    data_resid = best.fun[:n]
    fit = ScalingFit(
        A=A,
        alpha=alpha,
        B=B,
        beta=beta,
        E=E,
        eff={key: float(eff[g_index[key]]) for key in groups},
        residual_rms=float(np.sqrt(np.mean(data_resid**2))),
    )
    return fit


DEFAULT_SYNTH_GRID = (
    (1.0, 10.0),
    (1.0, 1e3),
    (3.0, 1e2),
    (3.0, 1e4),
    (10.0, 1e3),
    (10.0, 1e5),
    (30.0, 1e4),
    (30.0, 10.0),
    (1e2, 1e5),
    (1e2, 1e2),
)


def synthesize_scaling_data(
    A: float,
    alpha: float,
    B: float,
    beta: float,
    E: float,
    eff_by_group: dict[tuple[str, str], float],
    noise: float,
    rng: np.random.Generator,
    grid=DEFAULT_SYNTH_GRID,
) -> list[ScalingDatum]:
    """Generate losses from known law parameters with multiplicative noise.

    ``eff_by_group`` maps (method, precision) to eff; precision 'FP' entries
    must use eff = 1.  Every group gets the full list of (N, D) pairs; the
    default grid carries enough distinct N and D values (5 and 3) to pin all
    five shared parameters, which two distinct D alone cannot do.
    """
    rows = []
    for (method, precision), eff in sorted(eff_by_group.items()):
        if precision == FP_LABEL and eff != 1.0:
            raise ValueError("FP groups must have eff = 1")
        for N, D in grid:
            loss = A / (N * eff) ** alpha + B / D**beta + E
            rows.append(
                ScalingDatum(
                    method=method,
                    precision=precision,
                    N=float(N),
                    D=float(D),
                    loss=loss * (1.0 + noise * rng.standard_normal()),
                )
            )
    return rows


def read_scaling_csv(path) -> list[ScalingDatum]:
    """Parse the (method, P, N, D, loss) CSV; errors carry the line number."""
    path = Path(path)
    rows: list[ScalingDatum] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                rows.append(
                    ScalingDatum(
                        method=row[0].strip(),
                        precision=row[1].strip(),
                        N=float(row[2]),
                        D=float(row[3]),
                        loss=float(row[4]),
                    )
                )
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from err
    return rows


def write_scaling_csv(path, data: list[ScalingDatum]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in data:
            writer.writerow([r.method, r.precision, repr(r.N), repr(r.D), repr(r.loss)])


def fit_to_json_dict(fit: ScalingFit, data: list[ScalingDatum]) -> dict:
    """JSON-ready document: parameters, eff table, rms, per-point residuals."""
    residuals = []
    for r in _canonical(data):
        pred = predict_loss(fit, r.N, r.D, r.method, r.precision)
        residuals.append(
            {
                "method": r.method,
                "P": r.precision,
                "N": r.N,
                "D": r.D,
                "loss": r.loss,
                "predicted": pred,
                "log_residual": math.log(pred) - math.log(r.loss),
            }
        )
    eff_table = [
        {"method": m, "P": p, "eff": fit.eff[(m, p)]} for (m, p) in sorted(fit.eff)
    ]
    return {
        "A": fit.A,
        "alpha": fit.alpha,
        "B": fit.B,
        "beta": fit.beta,
        "E": fit.E,
        "eff": eff_table,
        "residual_rms": fit.residual_rms,
        "residuals": residuals,
    }


def write_fit_json(path, fit: ScalingFit, data: list[ScalingDatum]) -> None:
    Path(path).write_text(json.dumps(fit_to_json_dict(fit, data), indent=2) + "\n")

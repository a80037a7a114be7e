"""Square roots of truncated-generator eigenvalues grow nearly linearly.

That near-linearity is what lets the sum of exponential modes collapse into
the closed-form integral density.  The fit quality differs by model: rate
profiles whose off-diagonals vanish toward a boundary stay linear much
longer than flat ones.
"""

from bdfpt import (
    bessel_like,
    eigenvalues,
    imitation,
    ornstein_uhlenbeck,
    sqrt_linearity,
    threshold_to_state,
    truncate,
)

N = 1000
CASES = [
    (bessel_like(0.5, N), 0.3),
    (ornstein_uhlenbeck(N), 0.5),
    (imitation(1.0, N), 0.2),
]

print(f"{'process':<28} {'n':>4} {'slope':>10} {'intercept':>11} {'R^2':>8}")
for spec, h in CASES:
    n = threshold_to_state(h, N)
    eig = eigenvalues(truncate(spec, n))
    rep = sqrt_linearity(eig)
    print(
        f"{spec.label:<28} {n:>4} {rep.sqrt_fit_slope:>10.3f} "
        f"{rep.sqrt_fit_intercept:>11.2f} {rep.r_squared:>8.5f}"
    )

print(
    "\nsample of sqrt(eigenvalue) against rank for the flat-band case "
    "(note the sine-like saturation at the top):"
)
eig = eigenvalues(truncate(bessel_like(0.5, N), 300))
for rank in (1, 60, 120, 180, 240, 300):
    print(f"  rank {rank:>4}: sqrt(lambda) = {eig[rank - 1] ** 0.5:9.1f}")

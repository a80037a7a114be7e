"""Fitting the four-parameter duration density by matching four moments.

Draws a synthetic duration sample from a known mixture, refits it from the
moments alone, and reports parameter recovery and per-moment residuals.
"""

import numpy as np

from bdfpt import MixtureParams, fit_diagnostics, fit_moments, sample_mixture

true = MixtureParams(rho=0.05, lambda1=0.8, lambda2=2.4, lambda_m=40.0)
print("true parameters: ", true.to_dict())

d = sample_mixture(true, 500_000, rng=7)
print(f"sample: {d.size} durations, mean {d.mean():.4f}, max {d.max():.1f}")

res = fit_moments(d)
p = res.params
print("\nfitted parameters:")
for name, got, want in [
    ("rho", p.rho, true.rho),
    ("lambda1", p.lambda1, true.lambda1),
    ("lambda2", p.lambda2, true.lambda2),
    ("lambda_m", p.lambda_m, true.lambda_m),
]:
    print(f"  {name:<9} {got:10.5g}   (true {want:g}, rel err {abs(got / want - 1):.3f})")
print(f"converged: {res.converged}; objective {res.objective:.2e}")
print(f"moment residuals (mean, var, m3, m4): {np.round(res.moment_residuals, 8)}")

diag = fit_diagnostics(d, p, bins_per_decade=8)
print(
    f"\ndensity diagnostics: max |log ratio| = {diag.max_abs_log_ratio:.4f} "
    f"over {diag.n_qualifying} well-filled bins"
)

"""Closed-form first-passage-density approximations and exact hitting moments.

The workhorse is the integral density

    I(theta, a, b) = 1/(sqrt(b)-sqrt(a)) * int_{sqrt(a)}^{sqrt(b)} x^2 exp(-x^2 theta) dx,

a normalized density in ``theta`` obtained by treating a sum of exponentials
with near-linearly-spaced square-root rates as a Riemann sum.  The second-order
refinement splits off the slowest rate explicitly:

    p(theta) = rho * lam1 * exp(-lam1*theta) + (1-rho) * I(theta, lam2, lam_m),

with the weight ``rho`` pinned by the exact first moment of the hitting time,
which is available in closed form for any birth-death process.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .spectrum import eigenvalues as _eigenvalues
from .spectrum import truncate as _truncate

_SQRT_PI = np.sqrt(np.pi)


def erfc(x):
    """Complementary error function (vectorized, full double accuracy)."""
    return special.erfc(x)


def erfcx(x):
    """Scaled complement ``erfc(x) * exp(x^2)``; stable deep in the tail."""
    return special.erfcx(x)


def _i_density_series(theta, a, b, sqrt_gap):
    # Maclaurin expansion in theta; used when b*theta is small, where the
    # closed form loses all its digits to 1/theta cancellation.
    am, bm = a * np.sqrt(a), b * np.sqrt(b)  # a^{3/2}, b^{3/2}
    total = np.zeros_like(theta)
    term_b, term_a = bm, am
    m = 0
    while True:
        total += (term_b - term_a) / (2 * m + 3)
        if np.all(np.abs(term_b) <= 1e-18 * np.abs(total) * (2 * m + 3)):
            break
        m += 1
        term_b *= -theta * b / m
        term_a *= -theta * a / m
        if m > 200:  # unreachable for b*theta <= 0.5
            break
    return total / sqrt_gap


def _i_density_direct(theta, a, b, sqrt_gap):
    sa, sb = np.sqrt(a), np.sqrt(b)
    t1 = 2.0 * (sa * np.exp(-a * theta) - sb * np.exp(-b * theta)) / theta
    t2 = _SQRT_PI * (special.erfc(np.sqrt(a * theta)) - special.erfc(np.sqrt(b * theta)))
    return (t1 + t2 / theta**1.5) / (4.0 * sqrt_gap)


def _i_density_scaled(theta, a, b, sqrt_gap):
    # Factor exp(-a*theta) out so that only the well-scaled erfcx remains;
    # keeps relative accuracy once erfc itself underflows.
    sa, sb = np.sqrt(a), np.sqrt(b)
    damp = np.exp(-(b - a) * theta)
    t1 = 2.0 * (sa - sb * damp) / theta
    t2 = _SQRT_PI * (special.erfcx(np.sqrt(a * theta)) - special.erfcx(np.sqrt(b * theta)) * damp)
    return np.exp(-a * theta) * (t1 + t2 / theta**1.5) / (4.0 * sqrt_gap)


def i_density(theta, a, b):
    """Integral density ``I(theta, a, b)`` for rate band ``0 < a < b``.

    Normalized over ``theta in (0, inf)``; mean ``1/sqrt(a*b)``; decays as
    ``theta^(-3/2)`` for ``1/b << theta << 1/a`` and exponentially with rate
    ``a`` beyond.  Evaluation switches between a small-theta series, the
    direct closed form, and a scaled-erfc tail path so every regime keeps
    relative accuracy.
    """
    a = float(a)
    b = float(b)
    if not (0 < a < b):
        raise ValueError(f"need 0 < a < b, got a={a}, b={b}")
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta)
    if np.any(th < 0):
        raise ValueError("theta must be >= 0")
    sqrt_gap = np.sqrt(b) - np.sqrt(a)
    out = np.empty_like(th)
    small = b * th <= 0.5
    tail = np.sqrt(a * th) > 25.0
    mid = ~small & ~tail
    if np.any(small):
        out[small] = _i_density_series(th[small], a, b, sqrt_gap)
    if np.any(mid):
        out[mid] = _i_density_direct(th[mid], a, b, sqrt_gap)
    if np.any(tail):
        out[tail] = _i_density_scaled(th[tail], a, b, sqrt_gap)
    np.clip(out, 0.0, None, out=out)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MixtureParams:
    """Parameters (rho, lam1, lam2, lam_m) of the two-part density.

    ``rho`` weights the slowest exponential ``lam1``; the remainder is the
    integral density over the rate band ``[lam2, lam_m]``.
    """

    rho: float
    lambda1: float
    lambda2: float
    lambda_m: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        ok = 0.0 < self.lambda1 <= self.lambda2 < self.lambda_m
        if not ok or not np.isfinite([self.lambda1, self.lambda2, self.lambda_m]).all():
            raise ValueError(
                "rates must satisfy 0 < lambda1 <= lambda2 < lambda_m, got "
                f"lambda1={self.lambda1}, lambda2={self.lambda2}, lambda_m={self.lambda_m}"
            )

    def to_dict(self):
        return {
            "rho": self.rho,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda_m": self.lambda_m,
        }


def second_order_density(theta, params):
    """Two-part duration density: slow exponential plus integral band."""
    p = params
    theta = np.asarray(theta, dtype=float)
    expo = p.lambda1 * np.exp(-p.lambda1 * theta)
    if p.rho == 1.0:
        return expo if expo.ndim else float(expo)
    return p.rho * expo + (1.0 - p.rho) * i_density(theta, p.lambda2, p.lambda_m)


def rho_from_mean(exact_mean, lambda1, lambda2, lambda_m):
    """Weight of the slow mode that reproduces the exact first moment.

    Solves ``mean = rho/lam1 + (1-rho)/sqrt(lam2*lam_m)`` for ``rho``.
    A result outside [0, 1] (inconsistent inputs) is clamped with a warning.
    """
    if not (0 < lambda1 <= lambda2 < lambda_m):
        raise ValueError("need 0 < lambda1 <= lambda2 < lambda_m")
    if not exact_mean > 0:
        raise ValueError(f"exact_mean must be > 0, got {exact_mean}")
    g = np.sqrt(lambda2 * lambda_m)
    if abs(lambda1 - g) <= 1e-12 * g:
        raise ZeroDivisionError(
            "lambda1 equals sqrt(lambda2*lambda_m); the moment split is degenerate"
        )
    rho = lambda1 * (1.0 - g * exact_mean) / (lambda1 - g)
    if rho < 0.0 or rho > 1.0:
        warnings.warn(
            f"moment-matched rho={rho:.6g} outside [0, 1]; clamping. "
            "The supplied mean is inconsistent with the rate band.",
            RuntimeWarning,
            stacklevel=2,
        )
        rho = min(max(rho, 0.0), 1.0)
    return float(rho)


def exact_mean_hitting(spec, threshold_state):
    """Exact mean first-passage time from ``threshold_state - 1`` up to ``threshold_state``.

    Uses the standard one-step recursion ``m_0 = 1/birth[0]``,
    ``m_k = 1/birth[k] + (death[k]/birth[k]) m_{k-1}``; the passage mean is
    ``m_{n-1}``.
    """
    n = int(threshold_state)
    if not 1 <= n <= spec.n_states:
        raise ValueError(f"threshold_state must be in 1..{spec.n_states}, got {n}")
    birth = spec.birth_rate
    death = spec.death_rate
    dead = np.nonzero(birth[:n] == 0.0)[0]
    if dead.size:
        raise ValueError(
            f"state {n} is unreachable: birth_rate[{dead[0]}] = 0 blocks the path"
        )
    m = 0.0
    for k in range(n):
        m = 1.0 / birth[k] + (death[k] / birth[k]) * m
    return float(m)


@dataclass(frozen=True)
class HittingMoments:
    """First four moments of a duration distribution."""

    mean: float
    raw_moments: tuple
    central_moments: tuple  # (variance, third, fourth)

    def __post_init__(self):
        var = self.central_moments[0]
        if var < 0:
            raise ValueError(f"variance must be >= 0, got {var}")
        if len(self.central_moments) >= 3:
            m4 = self.central_moments[2]
            with np.errstate(over="ignore", invalid="ignore"):
                bad = m4 < var * var * (1.0 - 1e-9) - 1e-300
            if bad:
                raise ValueError(
                    f"fourth central moment {m4} violates m4 >= variance^2 = {var * var}"
                )


def _central_from_raw(raw):
    # extreme slow modes (lambda1 ~ 1e-80 across a probability barrier) push
    # mu^4 past double range; the resulting inf/nan centrals are honest
    mu = raw[0]
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        if len(raw) >= 2:
            out.append(raw[1] - mu**2)
        if len(raw) >= 3:
            out.append(raw[2] - 3 * mu * raw[1] + 2 * mu**3)
        if len(raw) >= 4:
            out.append(raw[3] - 4 * mu * raw[2] + 6 * mu**2 * raw[1] - 3 * mu**4)
    return tuple(out)


def mixture_moments(params, max_order=4):
    """Analytic raw and central moments of the two-part density.

    Raw moments: ``E[theta^m] = rho m!/lam1^m
    + (1-rho) m! (lam2^{(1-2m)/2} - lam_m^{(1-2m)/2}) / ((2m-1)(sqrt(lam_m)-sqrt(lam2)))``.
    """
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be in 1..4")
    p = params
    gap = np.sqrt(p.lambda_m) - np.sqrt(p.lambda2)
    raw = []
    fact = 1.0
    for m in range(1, max_order + 1):
        fact *= m
        e = 0.5 * (1 - 2 * m)
        band = fact * (p.lambda2**e - p.lambda_m**e) / ((2 * m - 1) * gap)
        raw.append(p.rho * fact / p.lambda1**m + (1.0 - p.rho) * band)
    central = _central_from_raw(raw)
    return HittingMoments(raw[0], tuple(raw), central)


def approx_pdf_from_spec(spec, threshold_state):
    """Mixture parameters for the inter-burst duration at a threshold state.

    Composes the truncated-generator spectrum (slowest, second and largest
    eigenvalues) with the exact hitting mean: the returned parameters
    reproduce that mean exactly whenever the matched weight lands in [0, 1].
    """
    n = int(threshold_state)
    if n < 3:
        raise ValueError(f"threshold_state must be >= 3, got {threshold_state}")
    eig = _eigenvalues(_truncate(spec, n))
    lam1, lam2, lam_m = float(eig[0]), float(eig[1]), float(eig[-1])
    mean = exact_mean_hitting(spec, n)
    rho = rho_from_mean(mean, lam1, lam2, lam_m)
    return MixtureParams(rho, lam1, lam2, lam_m)


def write_density_csv(theta, pdf, path):
    """Export a density curve as ``theta,pdf`` CSV."""
    theta = np.asarray(theta, dtype=float)
    pdf = np.asarray(pdf, dtype=float)
    with open(path, "w") as fh:
        fh.write("theta,pdf\n")
        for t, f in zip(theta, pdf):
            fh.write(f"{float(t)!r},{float(f)!r}\n")

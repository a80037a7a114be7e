"""Reference solution for upward passages of the continuous Bessel process.

For half-integer index the passage density from ``y0`` up to ``h`` is an
explicit series over Bessel-function zeros, and its Riemann-sum integral
approximation has the same closed form as the birth-death one.  Both are
used to cross-validate the discrete machinery, together with a plain
Euler-Maruyama simulator of ``dx = (nu+1/2) dt / x + dW``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .simulate import DurationSample, _substream


def _check_half_integer(nu):
    k = float(nu) - 0.5
    if not (np.isfinite(nu) and abs(k - round(k)) < 1e-12 and round(k) >= 0):
        raise ValueError(f"nu must be half-integer >= 1/2, got {nu}")
    return int(round(k))


def bessel_j_half(nu, x):
    """Bessel function of the first kind for half-integer ``nu >= 1/2``.

    Uses the elementary closed forms ``J_{1/2} = sqrt(2/(pi x)) sin(x)``,
    ``J_{-1/2} = sqrt(2/(pi x)) cos(x)`` and the upward three-term
    recurrence.  Accurate to ~1e-10 relative for x >= 1 at moderate orders.
    """
    steps = _check_half_integer(nu)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0):
        raise ValueError("x must be > 0")
    pref = np.sqrt(2.0 / (np.pi * x))
    j_prev = pref * np.cos(x)  # order -1/2
    j_cur = pref * np.sin(x)  # order +1/2
    order = 0.5
    for _ in range(steps):
        j_prev, j_cur = j_cur, (2.0 * order / x) * j_cur - j_prev
        order += 1.0
    return float(j_cur[0]) if scalar else j_cur


def _zeros_upward(nu, count):
    """First ``count`` positive zeros via interlacing from the sine zeros.

    Zeros of successive orders interlace,
    ``j_{nu-1,k} < j_{nu,k} < j_{nu-1,k+1}``, so each zero of order ``nu``
    is bracketed by consecutive zeros of order ``nu - 1``; starting from
    ``k*pi`` this stays robust for any half-integer order and rank.
    """
    steps = _check_half_integer(nu)
    zeros = np.pi * np.arange(1, count + steps + 1)
    order = 0.5
    for _ in range(steps):
        order += 1.0
        f = lambda x: bessel_j_half(order, x)
        zeros = np.array(
            [
                brentq(f, lo, hi, xtol=1e-300, rtol=8.9e-16)
                for lo, hi in zip(zeros[:-1], zeros[1:])
            ]
        )
    return zeros[:count]


_ZERO_CACHE = {}


def bessel_zeros(nu, count):
    """First ``count`` positive zeros of ``J_nu`` (half-integer ``nu``), cached."""
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    key = float(nu)
    have = _ZERO_CACHE.get(key)
    if have is None or have.size < count:
        _ZERO_CACHE[key] = _zeros_upward(nu, max(count, 64))
    return _ZERO_CACHE[key][:count].copy()


def bessel_zero(nu, k):
    """The ``k``-th positive zero of ``J_nu``; refined to full precision."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(bessel_zeros(nu, k)[k - 1])


@dataclass(frozen=True)
class BesselFPTSpec:
    """Upward passage problem ``y0 -> h`` of the Bessel process with index ``nu``."""

    nu: float
    h: float
    y0: float
    k_max: int = 2000

    def __post_init__(self):
        _check_half_integer(self.nu)
        if not 0.0 < self.y0 < self.h:
            raise ValueError(f"need 0 < y0 < h, got y0={self.y0}, h={self.h}")
        if self.k_max < 10:
            raise ValueError(f"k_max must be >= 10, got {self.k_max}")


def series_terms(spec):
    """Exponential rates and signed weights of the passage-density series.

    The density is ``sum_k weights[k] * exp(-rates[k] * theta)`` with
    ``rates[k] = j_{nu,k}^2 / (2 h^2)``.
    """
    nu, h, y0 = spec.nu, spec.h, spec.y0
    zeros = bessel_zeros(nu, spec.k_max)
    rates = zeros**2 / (2.0 * h * h)
    pref = h ** (nu - 2.0) / y0**nu
    weights = pref * zeros * bessel_j_half(nu, (y0 / h) * zeros) / bessel_j_half(
        nu + 1.0, zeros
    )
    return rates, weights


_TERM_CACHE = {}


def _cached_terms(spec):
    val = _TERM_CACHE.get(spec)
    if val is None:
        val = _TERM_CACHE[spec] = series_terms(spec)
    return val


def series_density(spec, theta):
    """Truncated series for the passage density at ``theta``.

    Warns when the last retained term still carries more than 1e-6 of the
    sum, i.e. when ``theta`` is too small for the chosen ``k_max``.
    """
    rates, weights = _cached_terms(spec)
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta)
    if np.any(th <= 0):
        raise ValueError("theta must be > 0")
    ex = np.exp(-np.multiply.outer(th, rates))
    val = ex @ weights
    last = np.abs(weights[-1]) * ex[:, -1]
    bad = last > 1e-6 * np.maximum(np.abs(val), 1e-300)
    if np.any(bad):
        worst = float((last / np.maximum(np.abs(val), 1e-300)).max())
        warnings.warn(
            f"series truncation error up to {worst:.2e} of the sum at small theta; "
            f"increase k_max ({spec.k_max}) or restrict theta",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(val[0]) if scalar else val


def series_cdf(spec, theta):
    """CDF companion of :func:`series_density` (same truncation)."""
    rates, weights = _cached_terms(spec)
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta)
    val = 1.0 - np.exp(-np.multiply.outer(th, rates)) @ (weights / rates)
    return float(val[0]) if scalar else val


def integral_approx_terms(nu, h, theta):
    """The two unnormalized addends of the integral approximation.

    First: exponential-cutoff term; second: the erfc tail term responsible
    for the ``theta^(-3/2)`` regime.
    """
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta)
    j1 = bessel_zero(nu, 1)
    alpha = j1 * j1 / (2.0 * h * h)
    arg = np.sqrt(alpha * th)
    t1 = h * h * j1 * np.exp(-alpha * th) / th
    t2 = np.sqrt(np.pi / 2.0) * h**3 * special.erfc(arg) / th**1.5
    big = arg > 25.0
    if np.any(big):
        t2[big] = (
            np.sqrt(np.pi / 2.0)
            * h**3
            * special.erfcx(arg[big])
            * np.exp(-alpha * th[big])
            / th[big] ** 1.5
        )
    if scalar:
        return float(t1[0]), float(t2[0])
    return t1, t2


def integral_approx_density(nu, h, theta, theta_min):
    """Normalized integral approximation of the passage density.

    The raw approximation is not normalizable near zero, so a minimum
    duration ``theta_min > 0`` must be supplied (the natural choice when
    comparing against simulated data is the discretization period).  The
    normalization constant over ``[theta_min, inf)`` is known in closed
    form, so the result integrates to 1 there by construction.
    """
    if not theta_min > 0:
        raise ValueError(f"theta_min must be > 0, got {theta_min}")
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta)
    if np.any(th < theta_min):
        raise ValueError(
            f"theta below theta_min={theta_min}: the approximation diverges there"
        )
    j1 = bessel_zero(nu, 1)
    alpha = j1 * j1 / (2.0 * h * h)
    t1, t2 = integral_approx_terms(nu, h, th)
    norm = h**3 * np.sqrt(2.0 * np.pi / theta_min) * special.erfc(np.sqrt(alpha * theta_min))
    val = (t1 + t2) / norm
    return float(val[0]) if scalar else val


def simulate_bessel_em(
    nu,
    h,
    y0,
    dt,
    rng_seed,
    n_samples,
    batch_size=4096,
    max_chunk_len=4096,
    max_steps=10**9,
):
    """Euler-Maruyama passage times of ``dx = (nu+1/2) dt/x + dW`` from ``y0`` to ``h``.

    A trajectory dipping to ``x <= 0`` is reflected to ``|x|`` (a
    discretization artifact; its frequency is reported if it stops being
    negligible).  Sample ``j`` consumes normals from its own substream, so
    output is bit-identical for fixed ``(rng_seed, n_samples)``.
    """
    _check_half_integer(nu)
    if not 0.0 < y0 < h:
        raise ValueError(f"need 0 < y0 < h, got y0={y0}, h={h}")
    if not 0.0 < dt <= 1e-4 * h * h:
        raise ValueError(f"dt must satisfy 0 < dt <= 1e-4*h^2 = {1e-4 * h * h:g}")
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    drift = (float(nu) + 0.5) * dt
    sqdt = np.sqrt(dt)
    floor = 1e-12 * h
    durations = np.empty(n_samples)
    total_steps = 0
    total_reflections = 0
    for base in range(0, n_samples, batch_size):
        m = min(batch_size, n_samples - base)
        rngs = [_substream(rng_seed, base + j) for j in range(m)]
        idx = np.arange(m)
        x = np.full(m, float(y0))
        steps = np.zeros(m, dtype=np.int64)
        chunk = 256
        while idx.size:
            k = idx.size
            noise = np.empty((k, chunk))
            for r in range(k):
                noise[r] = rngs[idx[r]].standard_normal(chunk)
            noise *= sqdt
            alive = np.ones(k, dtype=bool)
            entering = steps[:k].copy()
            xs = x[:k]
            for t in range(chunk):
                xs = np.where(alive, xs + drift / xs + noise[:, t], xs)
                neg = alive & (xs <= 0.0)
                if np.any(neg):
                    total_reflections += int(neg.sum())
                    xs = np.where(neg, np.maximum(-xs, floor), xs)
                steps[:k] += alive
                hit = alive & (xs >= h)
                if np.any(hit):
                    durations[base + idx[hit]] = steps[:k][hit] * dt
                    alive &= ~hit
                    if not np.any(alive):
                        break
            total_steps += int((steps[:k] - entering).sum())
            if np.any(steps[:k] > max_steps):
                raise RuntimeError(f"step cap {max_steps} exceeded before reaching h")
            x[:k] = xs
            keep = alive
            idx = idx[keep]
            x[: idx.size] = x[:k][keep]
            steps[: idx.size] = steps[:k][keep]
            chunk = min(2 * chunk, max_chunk_len)
    if total_reflections > 1e-3 * max(total_steps, 1):
        warnings.warn(
            f"{total_reflections} reflections at x<=0 over {total_steps} steps; "
            "decrease dt",
            RuntimeWarning,
            stacklevel=2,
        )
    label = f"bessel-em(nu={nu}, h={h}, y0={y0}, dt={dt})"
    return DurationSample(
        durations, "inter_burst", None, label, int(rng_seed), n_samples
    )

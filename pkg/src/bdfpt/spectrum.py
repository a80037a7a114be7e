"""Truncated-generator spectra of birth-death processes.

Making a threshold state ``n`` absorbing and restricting the negative
generator to the states ``0..n-1`` gives a tridiagonal matrix whose
eigenvalues are all positive.  Those eigenvalues are the exponential
rates entering the first-passage-time density, and the near-linear
growth of their square roots across ranks is what justifies the
closed-form density approximations in :mod:`bdfpt.approx`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal


class SpectrumError(RuntimeError):
    """Raised when a spectrum violates the positive-eigenvalue contract."""


@dataclass(frozen=True)
class TruncatedGenerator:
    """Negative generator restricted to states ``0..size-1``.

    ``diag[i] = birth[i] + death[i]``, ``upper[i] = birth[i]`` (coupling
    i -> i+1), ``lower[i] = death[i+1]`` (coupling i+1 -> i).  Transitions
    into the absorbing state ``size`` are dropped, which is what makes the
    spectrum strictly positive.
    """

    size: int
    diag: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.size
        diag = np.asarray(self.diag, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if n < 1 or diag.shape != (n,) or lower.shape != (n - 1,) or upper.shape != (n - 1,):
            raise ValueError("inconsistent tridiagonal shapes")
        if np.any(diag < 0) or np.any(lower < 0) or np.any(upper < 0):
            raise ValueError("tridiagonal entries must be >= 0")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def dense(self):
        """Dense ``-Q`` matrix (small sizes only; used by oracles and tests)."""
        m = np.diag(self.diag)
        for i in range(self.size - 1):
            m[i, i + 1] = -self.upper[i]
            m[i + 1, i] = -self.lower[i]
        return m


def truncate(spec, threshold_state):
    """Truncated negative generator for absorption at ``threshold_state``."""
    n = int(threshold_state)
    if not 1 <= n <= spec.n_states:
        raise ValueError(
            f"threshold_state must be in 1..{spec.n_states}, got {threshold_state}"
        )
    diag = spec.birth_rate[:n] + spec.death_rate[:n]
    upper = spec.birth_rate[: n - 1].copy()
    lower = spec.death_rate[1:n].copy()
    return TruncatedGenerator(n, diag, lower, upper)


def _blocks(upper, lower):
    """Split indices at zero off-diagonal products.

    Where ``upper[i]*lower[i] == 0`` the matrix is block triangular across
    position i, so the spectrum is the union of the diagonal blocks' spectra
    (and the symmetrization square root is well defined inside each block).
    """
    n = len(upper) + 1
    cuts = [i for i in range(n - 1) if upper[i] * lower[i] == 0.0]
    starts = [0] + [c + 1 for c in cuts]
    stops = [c + 1 for c in cuts] + [n]
    return list(zip(starts, stops))


def _ldl_form(gen, lo, hi):
    """Exact LDL^T data (d_i, l_i^2) of the symmetrized block ``lo:hi``.

    When the block starts with no down-rate (``lower`` boundary absorbing or
    block cut), the factorization is available in closed form:
    ``d_i = birth[i]`` and ``l_i^2 = death[i+1]/birth[i]``; otherwise the
    scalar Cholesky recurrence is used.  A non-positive pivot means the
    block has no absorption path at all.
    """
    diag = gen.diag[lo:hi]
    m = hi - lo
    d = np.empty(m)
    li2 = np.empty(max(m - 1, 0))
    if lo == 0 or gen.lower[lo - 1] == 0.0:
        # block starts with zero down-rate: diag[i] = birth[i] + death[i]
        # and the recurrence cancels death[i] exactly, pivot = birth[i]
        low = gen.lower[lo : hi - 1]
        d[: m - 1] = gen.upper[lo : hi - 1]
        d[m - 1] = diag[m - 1] - low[m - 2]
        li2[:] = low / d[: m - 1]
    else:
        c2 = 0.0
        for i in range(m):
            piv = diag[i] - c2
            if piv <= 0.0:
                raise SpectrumError(
                    f"non-positive Cholesky pivot at state {lo + i}: "
                    "the truncated generator has no absorption path"
                )
            d[i] = piv
            if i < m - 1:
                off2 = gen.upper[lo + i] * gen.lower[lo + i]
                c2 = off2 / piv
                li2[i] = c2 / piv
    if np.any(d <= 0.0) or (li2.size and np.any(li2 < 0.0)):
        raise SpectrumError("invalid LDL^T factor; generator not positive definite")
    return d, li2


def _count_below(d, li2, tau):
    """Number of block eigenvalues below ``tau`` (differential stationary qds).

    High relative accuracy even for shifts far below round-off of the matrix
    norm, because the shift propagates multiplicatively through ``s``.
    """
    s = -tau
    count = 0
    n = d.shape[0]
    dl = d.tolist()
    ll = li2.tolist()
    for i in range(n - 1):
        dplus = dl[i] + s
        if dplus < 0.0:
            count += 1
        if dplus == 0.0:
            dplus = -5e-324
        s = (dl[i] * ll[i] / dplus) * s - tau
    if dl[n - 1] + s < 0.0:
        count += 1
    return count


_TINY = 1e-290


def _refine_small(d, li2, k, hi0):
    """k-th smallest eigenvalue (1-based) by geometric bisection on counts."""
    hi = max(hi0, _TINY * 4)
    while _count_below(d, li2, hi) < k:
        hi *= 16.0
    lo = hi / 16.0
    while _count_below(d, li2, lo) >= k:
        lo /= 16.0
        if lo < _TINY:
            raise SpectrumError(
                "eigenvalue indistinguishable from zero; "
                "the truncated generator has no absorption path"
            )
    while hi - lo > 1e-13 * lo:
        mid = np.sqrt(lo * hi)
        if _count_below(d, li2, mid) >= k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def eigenvalues(gen):
    """All ``size`` eigenvalues of the truncated negative generator, ascending.

    The tridiagonal is symmetrized (off-diagonals ``sqrt(upper[i]*lower[i])``)
    and handed to a symmetric-tridiagonal solver; decoupled blocks are solved
    independently.  Eigenvalues that land below the solver's absolute noise
    floor (possible here: absorption across a probability barrier makes the
    slowest rate exponentially small) are re-computed by bisection with
    Sturm-style counts on the exact LDL^T factor, which resolves them to
    ~1e-13 relative accuracy.  Raises :class:`SpectrumError` if any
    eigenvalue fails to be positive, which indicates an invalid generator.
    """
    diag, upper, lower = gen.diag, gen.upper, gen.lower
    out = []
    for lo, hi in _blocks(upper, lower):
        dblk = diag[lo:hi]
        if hi - lo == 1:
            if dblk[0] <= 0.0:
                raise SpectrumError(
                    f"isolated state {lo} has zero exit rate; invalid generator"
                )
            out.append(dblk.copy())
            continue
        e = np.sqrt(upper[lo : hi - 1] * lower[lo : hi - 1])
        eig = eigvalsh_tridiagonal(dblk, e)
        noise = 1e4 * (hi - lo) * np.finfo(float).eps * float(dblk.max())
        if eig[0] < noise:
            d, li2 = _ldl_form(gen, lo, hi)
            for k in range(eig.size):
                if eig[k] >= noise:
                    break
                eig[k] = _refine_small(d, li2, k + 1, noise)
        out.append(eig)
    eig = np.sort(np.concatenate(out))
    if eig[0] <= 0.0:
        raise SpectrumError(
            f"non-positive eigenvalue {eig[0]!r}; "
            "the truncated generator has no absorption path"
        )
    return eig


@dataclass(frozen=True)
class SpectrumReport:
    """Least-squares description of the sqrt-eigenvalue growth."""

    eigenvalues: np.ndarray
    sqrt_fit_slope: float
    sqrt_fit_intercept: float
    fit_window: tuple
    r_squared: float
    residuals: np.ndarray

    def to_json(self):
        return json.dumps(
            {
                "eigenvalues": self.eigenvalues.tolist(),
                "sqrt_fit_slope": self.sqrt_fit_slope,
                "sqrt_fit_intercept": self.sqrt_fit_intercept,
                "fit_window": list(self.fit_window),
                "r_squared": self.r_squared,
                "residuals": self.residuals.tolist(),
            },
            indent=2,
        )


def sqrt_linearity(eigs, window=None):
    """Fit ``sqrt(lambda_i)`` against the rank ``i`` over a rank window.

    Ranks are 1-based.  The default window covers the central 20%..80% of
    ranks, where the growth is expected to be linear; the first few and the
    top-of-band eigenvalues routinely deviate.
    """
    eigs = np.asarray(eigs, dtype=float)
    n = eigs.size
    if n < 4:
        raise ValueError(f"need at least 4 eigenvalues, got {n}")
    if np.any(eigs <= 0) or np.any(np.diff(eigs) < 0):
        raise ValueError("eigenvalues must be positive and ascending")
    if window is None:
        window = (int(np.ceil(0.2 * n)), int(np.floor(0.8 * n)))
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo <= hi <= n):
        raise ValueError(f"window {window} out of rank range 1..{n}")
    if hi - lo + 1 < 3:
        raise ValueError(f"window {window} has fewer than 3 points")
    ranks = np.arange(lo, hi + 1, dtype=float)
    y = np.sqrt(eigs[lo - 1 : hi])
    slope, intercept = np.polyfit(ranks, y, 1)
    fitted = slope * ranks + intercept
    resid = y - fitted
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-30 else 1.0 - ss_res / ss_tot
    r2 = float(min(max(r2, 0.0), 1.0))
    return SpectrumReport(eigs, float(slope), float(intercept), (lo, hi), r2, resid)


def write_spectrum_csv(eigs, path):
    """Export eigenvalues as ``rank,eigenvalue,sqrt_eigenvalue`` CSV."""
    eigs = np.asarray(eigs, dtype=float)
    with open(path, "w") as fh:
        fh.write("rank,eigenvalue,sqrt_eigenvalue\n")
        for i, lam in enumerate(eigs, start=1):
            fh.write(f"{i},{float(lam)!r},{float(np.sqrt(lam))!r}\n")

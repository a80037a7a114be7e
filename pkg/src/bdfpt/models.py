"""Birth-death process definitions via per-state transition rate tables.

A process lives on the integer states ``{0, ..., N}``.  From state ``X`` it
jumps up with rate ``birth_rate[X]`` and down with rate ``death_rate[X]``.
Rates are precomputed into dense tables at construction so that simulation
and matrix assembly are plain array lookups.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

MAX_STATES = 10**6


@dataclass(frozen=True)
class BirthDeathSpec:
    """A birth-death process on states ``{0, ..., n_states}``.

    Attributes
    ----------
    n_states : int
        The largest state N; the chain has N+1 states.
    birth_rate, death_rate : ndarray, shape (N+1,)
        Per-state up/down jump rates (events per unit time).
        ``death_rate[0] == 0`` and ``birth_rate[N] == 0`` always hold,
        so the chain never leaves the state space.
    label : str
        Short identifier carried into simulation output metadata.
    """

    n_states: int
    birth_rate: np.ndarray
    death_rate: np.ndarray
    label: str = field(default="birth-death")

    def __post_init__(self):
        n = self.n_states
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"n_states must be a positive integer, got {n!r}")
        if n > MAX_STATES:
            raise ValueError(f"n_states={n} exceeds the supported maximum {MAX_STATES}")
        birth = np.ascontiguousarray(self.birth_rate, dtype=float)
        death = np.ascontiguousarray(self.death_rate, dtype=float)
        if birth.shape != (n + 1,) or death.shape != (n + 1,):
            raise ValueError(
                f"rate tables must have length n_states+1={n + 1}, "
                f"got {birth.shape} and {death.shape}"
            )
        if not (np.all(np.isfinite(birth)) and np.all(np.isfinite(death))):
            raise ValueError("all rates must be finite")
        if np.any(birth < 0) or np.any(death < 0):
            raise ValueError("all rates must be >= 0")
        if death[0] != 0.0:
            raise ValueError(f"death_rate[0] must be 0, got {death[0]}")
        if birth[n] != 0.0:
            raise ValueError(f"birth_rate[N] must be 0, got {birth[n]}")
        birth.flags.writeable = False
        death.flags.writeable = False
        object.__setattr__(self, "birth_rate", birth)
        object.__setattr__(self, "death_rate", death)

    def __repr__(self):
        return f"BirthDeathSpec(label={self.label!r}, n_states={self.n_states})"


def bessel_like(nu, n_states):
    """Symmetric Bessel-like birth-death process.

    Interior rates are ``(N^2/2) * (1 +/- (nu+1/2)/X -/+ (nu+1/2)/(N-X))``
    (up: plus on the 1/X term).  The index must be half-odd-integer,
    ``nu = 1/2 + n`` with integer ``n >= 0``, which keeps the rates well
    behaved; any residual negative value near a boundary is clamped to 0,
    turning the affected state one-way (the boundary is repulsive anyway).

    The rate formulas are singular at X=0 and X=N.  There we keep the
    total jump rate at its interior-constant value N^2, i.e.
    ``birth[0] = death[N] = N^2``, which also preserves the exact mirror
    symmetry birth[X] == death[N-X].
    """
    n = int(n_states)
    if n < 4:
        raise ValueError(f"bessel_like needs n_states >= 4, got {n_states}")
    k = (float(nu) - 0.5)
    if not (np.isfinite(nu) and abs(k - round(k)) < 1e-12 and round(k) >= 0):
        raise ValueError(
            f"nu must be of the form 1/2 + n with integer n >= 0, got {nu}"
        )
    x = np.arange(n + 1, dtype=float)
    c = float(nu) + 0.5
    birth = np.empty(n + 1)
    xi = x[1:n]
    half_n2 = 0.5 * n * n
    birth[1:n] = half_n2 * (1.0 + c / xi - c / (n - xi))
    birth[0] = float(n) ** 2
    birth[n] = 0.0
    np.clip(birth, 0.0, None, out=birth)
    # the symmetric process mirrors exactly: down-rate at X = up-rate at N-X
    death = birth[::-1].copy()
    return BirthDeathSpec(n, birth, death, label=f"bessel-like(nu={nu}, N={n})")


def ornstein_uhlenbeck(n_states):
    """Ornstein-Uhlenbeck-type process: birth ``N^2(1 - X/N)``, death ``N X``."""
    n = int(n_states)
    if n < 2:
        raise ValueError(f"ornstein_uhlenbeck needs n_states >= 2, got {n_states}")
    x = np.arange(n + 1, dtype=float)
    birth = float(n) * (n - x)
    death = float(n) * x
    return BirthDeathSpec(n, birth, death, label=f"ou(N={n})")


def imitation(epsilon, n_states):
    """Pairwise-imitation (herding) process.

    N agents switch between two camps, independently at rate ``epsilon``
    and through pairwise interactions at unit rate:
    birth ``(N-X)(eps+X)``, death ``X(eps+N-X)``.
    """
    eps = float(epsilon)
    if not (np.isfinite(eps) and eps > 0):
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    n = int(n_states)
    if n < 2:
        raise ValueError(f"imitation needs n_states >= 2, got {n_states}")
    x = np.arange(n + 1, dtype=float)
    birth = (n - x) * (eps + x)
    death = x * (eps + (n - x))
    return BirthDeathSpec(n, birth, death, label=f"imitation(eps={eps}, N={n})")


def from_table(birth, death, label="table"):
    """Build a process from explicit rate tables (validated verbatim)."""
    birth = np.asarray(birth, dtype=float)
    death = np.asarray(death, dtype=float)
    if birth.ndim != 1 or birth.shape != death.shape:
        raise ValueError(
            f"birth and death tables must be equal-length 1-d sequences, "
            f"got shapes {birth.shape} and {death.shape}"
        )
    if birth.size < 2:
        raise ValueError("need at least two states")
    return BirthDeathSpec(birth.size - 1, birth, death, label=label)


def write_rates_csv(spec, path):
    """Export the rate tables as ``state,birth_rate,death_rate`` CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "birth_rate", "death_rate"])
        for s in range(spec.n_states + 1):
            w.writerow([s, repr(float(spec.birth_rate[s])), repr(float(spec.death_rate[s]))])


def read_rates_csv(path, label=None):
    """Read a rate table CSV written by :func:`write_rates_csv`."""
    states, birth, death = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["state", "birth_rate", "death_rate"]:
            raise ValueError(f"unexpected header {header!r} in {path}")
        for row in r:
            if not row:
                continue
            states.append(int(row[0]))
            birth.append(float(row[1]))
            death.append(float(row[2]))
    if states != list(range(len(states))):
        raise ValueError(f"states in {path} must run 0..N in order")
    return from_table(birth, death, label=label or str(path))

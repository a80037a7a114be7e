"""Exact-in-distribution Monte Carlo for birth-death first-passage durations.

Samples are generated by direct stochastic simulation: at state X wait an
Exponential(birth[X]+death[X]) time, then step up with probability
birth/(birth+death).  Sample ``j`` always consumes random numbers from its
own substream, derived from the master seed with ``SeedSequence`` spawn key
``(j,)``, so results are bit-identical for a given ``(seed, n_samples)``
regardless of batching or worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .spectrum import _blocks, truncate

PRNG_FAMILY = "numpy PCG64, SeedSequence(seed) with per-sample spawn_key=(j,)"

_STEP_CAP_DEFAULT = 10**10


@dataclass(frozen=True)
class DurationSample:
    """First-passage durations plus the provenance needed to regenerate them."""

    durations: np.ndarray
    kind: str  # "burst" | "inter_burst"
    threshold_state: int | None
    spec_label: str
    rng_seed: int
    n_requested: int
    prng_family: str = field(default=PRNG_FAMILY)

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float)
        if d.ndim != 1:
            raise ValueError("durations must be one-dimensional")
        if d.size and not np.all(d > 0):
            raise ValueError("all durations must be > 0")
        if d.size > self.n_requested:
            raise ValueError("more durations than requested")
        if self.kind not in ("burst", "inter_burst"):
            raise ValueError(f"kind must be 'burst' or 'inter_burst', got {self.kind!r}")
        d.flags.writeable = False
        object.__setattr__(self, "durations", d)

    def __len__(self):
        return self.durations.size

    def metadata(self):
        return {
            "kind": self.kind,
            "threshold_state": self.threshold_state,
            "spec_label": self.spec_label,
            "rng_seed": self.rng_seed,
            "n_requested": self.n_requested,
            "n_durations": int(self.durations.size),
            "prng_family": self.prng_family,
        }


def _substream(seed, j):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))


def threshold_to_state(h, n_states):
    """Map a threshold ``h in (0,1)`` to the nearest interior state."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"threshold h must be in (0, 1), got {h}")
    n = int(round(h * n_states))
    if n <= 0 or n >= n_states:
        raise ValueError(
            f"threshold h={h} lands on boundary state {n} of 0..{n_states}"
        )
    return n


def _check_reachable(spec, start, target):
    if start < target:
        cut = np.nonzero(spec.birth_rate[start:target] == 0.0)[0]
        if cut.size:
            raise ValueError(
                f"target {target} unreachable from {start}: "
                f"birth_rate[{start + cut[0]}] = 0"
            )
    else:
        cut = np.nonzero(spec.death_rate[target + 1 : start + 1] == 0.0)[0]
        if cut.size:
            raise ValueError(
                f"target {target} unreachable from {start}: "
                f"death_rate[{target + 1 + cut[0]}] = 0"
            )


def _scalar_finish(rng, s, clock, steps, target, p_up, inv_total, max_steps, chunk):
    """Run one walker to absorption in plain Python (fast for small batches).

    Consumes ``(wait, direction)`` pairs from the walker's substream in the
    same order as the vectorized path, and evaluates the waiting-time log
    with the same numpy ufunc, so switching paths never changes a duration.
    """
    while True:
        u = rng.random((chunk, 2))
        waits = (-np.log1p(-u[:, 0])).tolist()
        dirs = u[:, 1].tolist()
        for t in range(chunk):
            clock += waits[t] * inv_total[s]
            s += 1 if dirs[t] < p_up[s] else -1
            steps += 1
            if s == target:
                return clock
        if steps > max_steps:
            raise RuntimeError(f"step cap {max_steps} exceeded before reaching {target}")
        chunk = min(2 * chunk, 4096)


def sample_fpt(
    spec,
    start_state,
    target_state,
    rng_seed,
    n_samples,
    max_steps=_STEP_CAP_DEFAULT,
    batch_size=8192,
    max_chunk_len=1024,
    scalar_cutoff=96,
):
    """Independent first-passage durations from ``start_state`` to ``target_state``.

    Walkers of a batch run in vectorized lockstep; once only a few stragglers
    remain they finish in a scalar loop.  Each walker reads ``(wait,
    direction)`` uniform pairs from its own substream in chunks, so output
    depends only on ``(rng_seed, n_samples)`` and the fixed batching defaults.

    Returns a :class:`DurationSample` tagged ``inter_burst`` for upward
    passages and ``burst`` for downward ones (threshold = target state).
    """
    start = int(start_state)
    target = int(target_state)
    n_samples = int(n_samples)
    N = spec.n_states
    if not (0 <= start <= N and 0 <= target <= N):
        raise ValueError(f"states must lie in 0..{N}")
    if start == target:
        raise ValueError("start_state must differ from target_state")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    _check_reachable(spec, start, target)

    kind = "inter_burst" if start < target else "burst"
    total = spec.birth_rate + spec.death_rate
    danger = bool(np.any(total == 0.0))
    if danger:
        scalar_cutoff = 0  # keep the zero-rate check of the vectorized path
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_total = np.where(total > 0.0, 1.0 / total, np.inf)
        p_up = np.where(total > 0.0, spec.birth_rate / total, 0.0)
    p_up_l = inv_total_l = None
    durations = np.empty(n_samples)

    for base in range(0, n_samples, batch_size):
        m = min(batch_size, n_samples - base)
        rngs = [_substream(rng_seed, base + j) for j in range(m)]
        idx = np.arange(m)  # original index within the batch
        state = np.full(m, start, dtype=np.int64)
        clock = np.zeros(m)
        steps = np.zeros(m, dtype=np.int64)
        chunk_len = 16  # grows geometrically; the schedule only affects wasted draws
        while idx.size > scalar_cutoff:
            k = idx.size
            u = np.empty((k, chunk_len, 2))
            for r in range(k):
                rngs[idx[r]].random(out=u[r])
            waits = -np.log1p(-u[:, :, 0])
            dirs = u[:, :, 1]
            alive = np.ones(k, dtype=bool)
            for t in range(chunk_len):
                s = state[:k]
                if danger and np.any((total[s] == 0.0) & alive):
                    bad = s[(total[s] == 0.0) & alive][0]
                    raise RuntimeError(f"walker stuck at state {bad} with zero total rate")
                clock[:k] += waits[:, t] * inv_total[s] * alive
                state[:k] += ((dirs[:, t] < p_up[s]) * 2 - 1) * alive
                hit = alive & (state[:k] == target)
                if hit.any():
                    durations[base + idx[hit]] = clock[:k][hit]
                    alive &= ~hit
                    if not alive.any():
                        break
            steps[:k] += chunk_len  # upper bound per walker; guards the cap only
            if steps[0] > max_steps:
                raise RuntimeError(
                    f"step cap {max_steps} exceeded before reaching {target}"
                )
            keep = alive
            idx = idx[keep]
            state[: idx.size] = state[:k][keep]
            clock[: idx.size] = clock[:k][keep]
            steps[: idx.size] = steps[:k][keep]
            chunk_len = min(2 * chunk_len, max_chunk_len)
        if idx.size:
            if p_up_l is None:
                p_up_l = p_up.tolist()
                inv_total_l = inv_total.tolist()
            for r in range(idx.size):
                durations[base + idx[r]] = _scalar_finish(
                    rngs[idx[r]],
                    int(state[r]),
                    float(clock[r]),
                    int(steps[r]),
                    target,
                    p_up_l,
                    inv_total_l,
                    max_steps,
                    chunk_len,
                )
    return DurationSample(
        durations, kind, target, spec.label, int(rng_seed), n_samples
    )


def sample_inter_bursts(spec, threshold_state, rng_seed, n_samples, **kw):
    """Durations below the threshold: passages ``n-1 -> n``."""
    n = int(threshold_state)
    return sample_fpt(spec, n - 1, n, rng_seed, n_samples, **kw)


def sample_bursts(spec, threshold_state, rng_seed, n_samples, **kw):
    """Durations above the threshold: passages ``n+1 -> n``."""
    n = int(threshold_state)
    return sample_fpt(spec, n + 1, n, rng_seed, n_samples, **kw)


def stationary_distribution(spec):
    """Stationary probabilities from the detailed-balance product form.

    Zero rates may cut the state space; the unique closed recurrent interval
    carries all the mass.  Raises if no single such interval exists.
    """
    birth = spec.birth_rate
    death = spec.death_rate
    N = spec.n_states
    # maximal intervals with strictly positive crossing rates inside
    segments = []
    lo = 0
    for k in range(N):
        if birth[k] == 0.0 or death[k + 1] == 0.0:
            segments.append((lo, k))
            lo = k + 1
    segments.append((lo, N))
    closed = [
        (a, b)
        for a, b in segments
        if (a == 0 or death[a] == 0.0) and (b == N or birth[b] == 0.0)
    ]
    if len(closed) != 1:
        raise ValueError(
            f"stationary distribution is not unique: {len(closed)} closed classes"
        )
    a, b = closed[0]
    log_w = np.full(N + 1, -np.inf)
    log_w[a] = 0.0
    for k in range(a, b):
        log_w[k + 1] = log_w[k] + np.log(birth[k]) - np.log(death[k + 1])
    log_w -= log_w[np.isfinite(log_w)].max()
    pi = np.exp(log_w)
    pi /= pi.sum()
    return pi


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant sample path.

    State ``states[i]`` holds on ``[times[i], times[i+1])``; the last state
    holds until ``t_end``.
    """

    times: np.ndarray
    states: np.ndarray
    t_end: float
    spec_label: str = "trajectory"
    rng_seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=np.int64)
        if t.ndim != 1 or t.shape != s.shape or t.size == 0:
            raise ValueError("times and states must be equal-length 1-d arrays")
        if np.any(np.diff(t) < 0) or (t.size and self.t_end < t[-1]):
            raise ValueError("event times must be nondecreasing and end before t_end")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)


def simulate_trajectory(spec, rng_seed, n_events, initial_state=None):
    """One long trajectory of ``n_events`` jumps.

    The initial state defaults to a draw from the stationary distribution,
    which removes burn-in.  Stream layout: one stationary draw, then the
    direction uniforms (in chunks of 65536), then all waiting-time
    exponentials in a single block.
    """
    n_events = int(n_events)
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    if initial_state is None:
        pi = stationary_distribution(spec)
        state = int(rng.choice(pi.size, p=pi))
    else:
        state = int(initial_state)
        if not 0 <= state <= spec.n_states:
            raise ValueError("initial_state out of range")
    p_up = spec.birth_rate / np.maximum(spec.birth_rate + spec.death_rate, 1e-300)
    total = spec.birth_rate + spec.death_rate
    if total[state] == 0.0:
        raise RuntimeError(f"initial state {state} has zero total rate")
    states = np.empty(n_events + 1, dtype=np.int64)
    states[0] = state
    p_up_list = p_up.tolist()  # plain floats: the sequential loop is Python
    s = state
    filled = 1
    while filled <= n_events:
        chunk = rng.random(min(65536, n_events - filled + 1)).tolist()
        for u in chunk:
            s += 1 if u < p_up_list[s] else -1
            states[filled] = s
            filled += 1
    if np.any(total[states] == 0.0):
        raise RuntimeError("trajectory reached a state with zero total rate")
    waits = rng.standard_exponential(n_events + 1) / total[states]
    times = np.concatenate(([0.0], np.cumsum(waits[:-1])))
    t_end = times[-1] + waits[-1]
    return Trajectory(times, states, float(t_end), spec.label, int(rng_seed))


def extract_durations(traj, threshold_state):
    """Split a path into burst / inter-burst durations at a threshold.

    Maximal intervals with state >= threshold are bursts, the rest
    inter-bursts.  The clipped first and last intervals are discarded
    because their true start/end lies outside the observation window.
    """
    n = int(threshold_state)
    above = traj.states >= n
    if above.size == 0:
        raise ValueError("empty trajectory")
    # run-length encode the above/below classification
    change = np.nonzero(above[1:] != above[:-1])[0] + 1
    starts = np.concatenate(([0], change))
    bounds = np.concatenate((traj.times[starts], [traj.t_end]))
    run_above = above[starts]
    lengths = np.diff(bounds)
    if starts.size <= 2:
        bursts = np.empty(0)
        inter = np.empty(0)
    else:
        core = slice(1, starts.size - 1)  # drop clipped first and last runs
        bursts = lengths[core][run_above[core]]
        inter = lengths[core][~run_above[core]]
    mk = lambda d, kind: DurationSample(
        d[d > 0], kind, n, traj.spec_label, traj.rng_seed, int(d.size)
    )
    return mk(bursts, "burst"), mk(inter, "inter_burst")


@dataclass(frozen=True)
class LogBinnedPdf:
    """Histogram density on geometrically spaced bins."""

    bin_edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray

    def widths(self):
        return np.diff(self.bin_edges)

    def centers(self):
        return np.sqrt(self.bin_edges[:-1] * self.bin_edges[1:])


def log_binned_pdf(sample, bins_per_decade=10):
    """Log-binned probability density of a duration sample."""
    if not 2 <= int(bins_per_decade) <= 20:
        raise ValueError(f"bins_per_decade must be in 2..20, got {bins_per_decade}")
    d = sample.durations if isinstance(sample, DurationSample) else np.asarray(sample)
    if d.size < 100:
        raise ValueError(f"need at least 100 samples, got {d.size}")
    lo, hi = float(d.min()), float(d.max())
    ratio = 10.0 ** (1.0 / bins_per_decade)
    n_bins = max(1, int(np.ceil(np.log(hi / lo) / np.log(ratio)))) if hi > lo else 1
    edges = lo * ratio ** np.arange(n_bins + 1)
    edges[-1] = max(edges[-1], hi)  # guard rounding: last edge must cover max
    counts, _ = np.histogram(d, bins=edges)
    dens = counts / (d.size * np.diff(edges))
    return LogBinnedPdf(edges, dens, counts)


def exact_small_n_mixture(spec, threshold_state):
    """Exact rate/weight mixture of the passage ``n-1 -> n`` for small ``n``.

    Returns ``(rates, weights)`` such that the passage density is
    ``f(theta) = sum_i weights[i] * exp(-rates[i] * theta)``.  The weights
    absorb the exit rate into state ``n``, so ``sum_i weights[i]/rates[i] = 1``.
    """
    n = int(threshold_state)
    if not 1 <= n <= 8:
        raise ValueError(f"exact density supported for threshold_state <= 8, got {n}")
    if n > spec.n_states:
        raise ValueError("threshold_state out of range")
    gen = truncate(spec, n)
    absorb = spec.birth_rate[n - 1]
    if absorb == 0.0:
        raise ValueError(f"state {n} unreachable: birth_rate[{n - 1}] = 0")
    # only the decoupled block containing the start state n-1 matters
    for lo, hi in _blocks(gen.upper, gen.lower):
        if lo <= n - 1 < hi:
            break
    d = gen.diag[lo:hi]
    if hi - lo == 1:
        rates = np.asarray([d[0]])
        vecs = np.ones((1, 1))
    else:
        e = np.sqrt(gen.upper[lo : hi - 1] * gen.lower[lo : hi - 1])
        rates, vecs = eigh_tridiagonal(d, e)
    w = vecs[n - 1 - lo, :] ** 2 * absorb
    return rates, w


def exact_small_n_density(spec, threshold_state, theta):
    """Exact first-passage density ``n-1 -> n`` (n <= 8) at ``theta``."""
    rates, w = exact_small_n_mixture(spec, threshold_state)
    theta = np.asarray(theta, dtype=float)
    val = np.exp(-np.multiply.outer(theta, rates)) @ w
    return float(val) if val.ndim == 0 else val


def exact_small_n_cdf(spec, threshold_state, theta):
    """Exact first-passage CDF companion of :func:`exact_small_n_density`."""
    rates, w = exact_small_n_mixture(spec, threshold_state)
    theta = np.asarray(theta, dtype=float)
    val = (1.0 - np.exp(-np.multiply.outer(theta, rates))) @ (w / rates)
    return float(val) if val.ndim == 0 else val


def write_durations_csv(sample, path):
    """Write durations as a one-column CSV plus a JSON metadata sidecar."""
    path = str(path)
    with open(path, "w") as fh:
        fh.write("duration\n")
        for d in sample.durations:
            fh.write(f"{float(d)!r}\n")
    with open(path + ".json", "w") as fh:
        json.dump(sample.metadata(), fh, indent=2)
        fh.write("\n")


def read_durations_csv(path):
    """Read durations written by :func:`write_durations_csv`."""
    import os

    with open(path) as fh:
        header = fh.readline().strip()
        if header != "duration":
            raise ValueError(f"unexpected header {header!r} in {path}")
        durations = np.array([float(line) for line in fh if line.strip()])
    meta = {}
    sidecar = str(path) + ".json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
    return DurationSample(
        durations,
        meta.get("kind", "inter_burst"),
        meta.get("threshold_state"),
        meta.get("spec_label", str(path)),
        meta.get("rng_seed", 0),
        meta.get("n_requested", durations.size),
        meta.get("prng_family", "unknown"),
    )


def write_log_binned_csv(binned, path):
    """Export a log-binned density as ``bin_lo,bin_hi,count,density`` CSV."""
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count,density\n")
        for lo, hi, c, d in zip(
            binned.bin_edges[:-1], binned.bin_edges[1:], binned.counts, binned.densities
        ):
            fh.write(f"{float(lo)!r},{float(hi)!r},{int(c)},{float(d)!r}\n")

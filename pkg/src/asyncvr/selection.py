"""Block-selection distributions, block sampling and the Poisson-clock model."""

from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12


@dataclass(frozen=True)
class SelectionDist:
    p: np.ndarray
    cdf: np.ndarray

    @property
    def n(self):
        return len(self.p)


def from_probabilities(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise ValueError("selection probabilities must be a nonempty vector")
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError(f"selection probabilities must lie in (0, 1], got {p}")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"selection probabilities sum to {p.sum()!r}, not 1")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return SelectionDist(p, cdf)


def build_distribution(kind, L):
    L = np.asarray(L, dtype=float)
    n = len(L)
    if n < 1:
        raise ValueError("need at least one block")
    if kind == "uniform":
        return from_probabilities(np.full(n, 1.0 / n))
    if kind == "lipschitz":
        if np.any(L <= 0):
            raise ValueError(f"Lipschitz-proportional selection needs positive L, got {L}")
        p = L / L.sum()
        # renormalize residual rounding so the sum check holds exactly enough
        return from_probabilities(p / p.sum())
    raise ValueError(f"unknown selection kind {kind!r}")


def draw_block(dist, rng):
    """Inverse-CDF draw; independent of everything except ``rng``."""
    if dist.n == 1:
        rng.random()  # keep stream consumption independent of n
        return 0
    return int(np.searchsorted(dist.cdf, rng.random(), side="right"))


def draw_blocks(dist, size, rng):
    """Vectorized counterpart of :func:`draw_block` (same stream consumption per draw)."""
    u = rng.random(size)
    return np.minimum(np.searchsorted(dist.cdf, u, side="right"), dist.n - 1)


def simulate_clock_runs(dist, k, trials, rng):
    """Local clocks Gamma_i(k) after ``k`` selections, for ``trials`` independent runs.

    Returns an integer array of shape (trials, n).
    """
    out = np.empty((trials, dist.n), dtype=np.int64)
    chunk = max(1, 2_000_000 // max(k, 1))
    for start in range(0, trials, chunk):
        m = min(chunk, trials - start)
        picks = draw_blocks(dist, (m, k), rng)
        offs = picks + dist.n * np.arange(m)[:, None]
        out[start:start + m] = np.bincount(offs.ravel(), minlength=m * dist.n).reshape(m, dist.n)
    return out


def poisson_clock_frequencies(rates, horizon, rng):
    """Empirical selection frequencies of the virtual global clock over ``[0, horizon]``.

    Each block owns an independent Poisson clock with the given rate; the global clock ticks
    whenever any local clock ticks and the ticking block is recorded. Ties (probability zero)
    go to the lowest index.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates <= 0) or not horizon > 0:
        raise ValueError("rates and horizon must be positive")
    ticks = []
    blocks = []
    for i, rate in enumerate(rates):
        # arrival times of a rate-`rate` Poisson process, generated in batches
        times = []
        t = 0.0
        while t <= horizon:
            m = int(rate * (horizon - t) + 5 * np.sqrt(rate * (horizon - t) + 1) + 10)
            arr = t + np.cumsum(rng.exponential(1.0 / rate, size=m))
            times.append(arr)
            t = arr[-1]
        times = np.concatenate(times)
        times = times[times <= horizon]
        ticks.append(times)
        blocks.append(np.full(len(times), i))
    ticks = np.concatenate(ticks)
    blocks = np.concatenate(blocks)
    if len(ticks) == 0:
        return np.zeros(len(rates))
    order = np.lexsort((blocks, ticks))
    fired = blocks[order]
    return np.bincount(fired, minlength=len(rates)) / len(fired)

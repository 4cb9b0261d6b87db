"""Stationarity and suboptimality measurements over solver trajectories."""

from dataclasses import dataclass

import numpy as np

from . import regularizers as regs


@dataclass
class GradientMapping:
    blocks: list
    norm_sq: float


def gradient_mapping(problem, x, alphas, pred=None):
    """Per-block prox-gradient residuals ``(x_i - prox(x_i - a_i grad_i)) / a_i``."""
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (problem.n_blocks,))
    if np.any(alphas <= 0):
        raise ValueError("gradient-mapping steps must be positive")
    if np.shape(x) != (problem.dim,):
        raise ValueError(f"expected a vector of length {problem.dim}")
    grad = problem.full_gradient(x, pred)
    blocks = []
    total = 0.0
    for r, sl, a in zip(problem.regs, problem.slices, alphas):
        xi = x[sl]
        if r.kind == "zero":
            g = grad[sl].copy()
        else:
            g = (xi - regs.prox(r, xi - a * grad[sl], a)) / a
        blocks.append(g)
        total += float(g @ g)
    return GradientMapping(blocks, total)


def ergodic_gap(records):
    """Running average ``(1/(K+1)) sum_{k<=K} ||G(x(k))||^2``, averaged over trajectories.

    ``records`` is a sequence of run records (or of 1-d arrays of per-iteration values).
    Returns ``(K, values)``; the series is truncated to the shortest trajectory.
    """
    series = [np.asarray(getattr(r, "gmap_sq", r), dtype=float) for r in records]
    if not series:
        raise ValueError("no trajectories given")
    length = min(len(s) for s in series)
    stacked = np.vstack([s[:length] for s in series])
    if np.isnan(stacked).any():
        raise ValueError("gradient-mapping values missing; rerun with metrics_stride=1")
    K = np.arange(length)
    running = np.cumsum(stacked, axis=1) / (K + 1)
    return K, running.mean(axis=0)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: int


def fit_line(k, values, window=None, scale="loglog"):
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is not None:
        lo, hi = window
        keep = (k >= lo) & (k <= hi)
        k, values = k[keep], values[keep]
    if len(k) < 10:
        raise ValueError(f"need at least 10 points to fit a rate, got {len(k)}")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError("rate fitting needs positive finite values")
    if scale == "loglog":
        if np.any(k <= 0):
            raise ValueError("loglog fit needs positive k")
        t = np.log(k)
    elif scale == "semilog":
        t = k
    else:
        raise ValueError(f"unknown scale {scale!r}")
    y = np.log(values)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, len(k))


def fit_rate(series, window=None, scale="loglog"):
    """Least-squares slope of ``log(value)`` against ``log(k)`` or ``k``."""
    series = np.asarray(series, dtype=float)
    return fit_line(series[:, 0], series[:, 1], window, scale).slope


def relative_error(F, F_star):
    """``(F - F*) / F*``, or the absolute gap when ``F* == 0``."""
    gap = np.asarray(F, dtype=float) - F_star
    return gap / F_star if F_star != 0 else gap

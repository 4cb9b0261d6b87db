"""Stochastic first-order oracle over a problem's finite data set."""

from dataclasses import dataclass

import numpy as np

from .errors import BlockIndexError, DimensionError


@dataclass
class GradientSample:
    grad: np.ndarray
    draws: int


def draw_samples(n_samples, batch, rng, replace=True):
    """Uniform draws from ``range(n_samples)``, with or without replacement.

    Batches up to ``n_samples`` come back as an index array. Larger batches come back as
    multiplicities ``("counts", counts, batch)``, which has the same distribution as
    ``batch`` index draws but costs O(n_samples). Without replacement the batch may not
    exceed the data set, and a batch of exactly ``n_samples`` is the whole data set.
    """
    if not replace:
        if batch > n_samples:
            raise ValueError(f"cannot draw {batch} distinct samples from {n_samples}")
        if batch == n_samples:
            return np.arange(n_samples)
        return rng.choice(n_samples, size=batch, replace=False)
    if batch <= n_samples:
        return rng.integers(0, n_samples, size=batch)
    counts = rng.multinomial(batch, np.full(n_samples, 1.0 / n_samples))
    return ("counts", counts.astype(float), batch)


def sample_gradient_block(problem, x, i, batch, rng, pred=None, replace=True):
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    problem._check_block(i)
    if np.shape(x) != (problem.dim,):
        raise DimensionError(f"expected a vector of length {problem.dim}, got {np.shape(x)}")
    draw = draw_samples(problem.n_samples, int(batch), rng, replace)
    return GradientSample(problem.sample_gradient_block(x, i, draw, pred), int(batch))


def full_gradient_block(problem, x, i, pred=None):
    if not 0 <= i < problem.n_blocks:
        raise BlockIndexError(f"block index {i} out of range for {problem.n_blocks} blocks")
    return problem.full_gradient_block(x, i, pred)


def enumerate_gradient_block(problem, x, i):
    """Sampled-gradient path with every datum drawn exactly once."""
    return problem.sample_gradient_block(x, i, np.arange(problem.n_samples))


def estimate_sigma2(problem, x, rng, draws=1000):
    """Largest per-block empirical variance of single-sample block gradients at ``x``.

    Used only to build constant-batch policies that need a noise level.
    """
    pred = problem.predictor(x)
    worst = 0.0
    for i in range(problem.n_blocks):
        full = problem.full_gradient_block(x, i, pred)
        idx = rng.integers(0, problem.n_samples, size=draws)
        dev = [problem.sample_gradient_block(x, i, idx[j:j + 1], pred) - full for j in range(draws)]
        worst = max(worst, float(np.mean(np.sum(np.square(dev), axis=1))))
    return worst

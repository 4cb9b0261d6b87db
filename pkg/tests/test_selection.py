import numpy as np
import pytest
from scipy import stats

from asyncvr.selection import (build_distribution, draw_block, draw_blocks,
                               from_probabilities, poisson_clock_frequencies)


def test_uniform_and_lipschitz():
    assert build_distribution("uniform", np.ones(4)).p.tolist() == [0.25] * 4
    assert build_distribution("lipschitz", [1, 2, 3, 4]).p == pytest.approx([0.1, 0.2, 0.3, 0.4])
    assert build_distribution("uniform", [3.0]).p.tolist() == [1.0]


def test_lipschitz_needs_positive():
    with pytest.raises(ValueError):
        build_distribution("lipschitz", [1.0, 0.0])


def test_bad_probabilities():
    for p in ([0.5, 0.6], [1.0, 0.0], []):
        with pytest.raises(ValueError):
            from_probabilities(p)


def test_single_block_always_zero():
    d = build_distribution("uniform", [1.0])
    rng = np.random.default_rng(0)
    assert {draw_block(d, rng) for _ in range(100)} == {0}


def _freqs(dist, m, seed):
    rng = np.random.default_rng(seed)
    draws = np.array([draw_block(dist, rng) for _ in range(m)])
    return np.bincount(draws, minlength=dist.n)


def test_uniform_frequencies():
    m = 100_000
    f = _freqs(build_distribution("uniform", np.ones(10)), m, 1) / m
    assert np.all(np.abs(f - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / m))


def test_lipschitz_frequencies():
    m = 100_000
    f = _freqs(build_distribution("lipschitz", [1, 9]), m, 2) / m
    assert np.all(np.abs(f - [0.1, 0.9]) <= 3 * np.sqrt(0.1 * 0.9 / m))


def test_chi_squared():
    dist = build_distribution("lipschitz", [1, 2, 3, 4, 5])
    counts = _freqs(dist, 100_000, 3)
    assert stats.chisquare(counts, dist.p * counts.sum()).pvalue > 0.001


def test_vectorized_matches_scalar_stream():
    dist = build_distribution("lipschitz", [1, 2, 3])
    a = draw_blocks(dist, 50, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    assert a.tolist() == [draw_block(dist, rng) for _ in range(50)]


def test_poisson_symmetric():
    f = poisson_clock_frequencies([1, 1], 20_000, np.random.default_rng(0))
    assert f == pytest.approx([0.5, 0.5], abs=0.02)


def test_poisson_rates():
    rng = np.random.default_rng(4)
    f, = [poisson_clock_frequencies([1, 3], 5_000, rng)]
    ticks = 4 * 5_000
    se = np.sqrt(0.25 * 0.75 / ticks)
    assert np.all(np.abs(np.asarray(f) - [0.25, 0.75]) <= 3 * se)
    expected = build_distribution("lipschitz", [1, 3]).p
    assert np.all(np.abs(np.asarray(f) - expected) <= 3 * se)


def test_poisson_single():
    assert list(poisson_clock_frequencies([5], 3.0, np.random.default_rng(0))) == [1.0]

"""Local block clocks and batch-size policies driven by them."""

import math
from dataclasses import dataclass
from decimal import ROUND_CEILING, Decimal, localcontext
from functools import lru_cache

import numpy as np

from .errors import BlockIndexError

BATCH_SATURATION = 2 ** 62


@dataclass
class BlockClocks:
    """Per-block selection counts ``gamma`` and the global iteration count ``k``."""

    gamma: np.ndarray
    k: int = 0

    @classmethod
    def fresh(cls, n):
        return cls(np.zeros(n, dtype=np.int64), 0)

    @property
    def n(self):
        return len(self.gamma)


def record_selection(clocks, i):
    if not 0 <= i < clocks.n:
        raise BlockIndexError(f"block index {i} out of range for {clocks.n} blocks")
    clocks.gamma[i] += 1
    clocks.k += 1
    return clocks


@dataclass(frozen=True)
class BatchPolicy:
    kind: str  # constant | geometric | polynomial | power
    param: float

    def __post_init__(self):
        p = self.param
        if self.kind == "constant":
            if p != int(p) or p < 1:
                raise ValueError(f"constant batch must be a positive integer, got {p}")
            object.__setattr__(self, "param", int(p))
        elif self.kind == "geometric":
            if not 0 < p < 1:
                raise ValueError(f"geometric base must lie in (0, 1), got {p}")
        elif self.kind == "polynomial":
            if p != int(p) or p < 1:
                raise ValueError(f"polynomial degree must be an integer >= 1, got {p}")
            object.__setattr__(self, "param", int(p))
        elif self.kind == "power":
            if not p > 0:
                raise ValueError(f"power exponent delta must be positive, got {p}")
        else:
            raise ValueError(f"unknown batch policy {self.kind!r}")

    def __str__(self):
        return f"{self.kind}:{self.param!r}"

    def __call__(self, gamma):
        return batch_size(self, gamma)


def constant(n):
    return BatchPolicy("constant", n)


def geometric(base):
    return BatchPolicy("geometric", base)


def polynomial(degree):
    return BatchPolicy("polynomial", degree)


def power(delta):
    return BatchPolicy("power", delta)


def _decimal(value):
    # repr keeps the user's decimal literal: 0.95 -> Decimal("0.95"), not the binary expansion
    return Decimal(repr(float(value)))


@lru_cache(maxsize=None)
def _geometric(base, gamma):
    if gamma * -math.log(base) > 62 * math.log(2):
        return BATCH_SATURATION
    with localcontext() as ctx:
        ctx.prec = 60
        val = (_decimal(base) ** -gamma).to_integral_value(rounding=ROUND_CEILING)
    return min(int(val), BATCH_SATURATION)


@lru_cache(maxsize=None)
def _power(delta, gamma):
    if (1 + delta) * math.log(gamma + 1) > 62 * math.log(2):
        return BATCH_SATURATION
    with localcontext() as ctx:
        ctx.prec = 60
        val = (Decimal(gamma + 1) ** (1 + _decimal(delta))).to_integral_value(rounding=ROUND_CEILING)
    return min(int(val), BATCH_SATURATION)


def batch_size(policy, gamma):
    """Batch size for a block that has been selected ``gamma`` times; saturates at 2**62."""
    gamma = int(gamma)
    if gamma < 0:
        raise ValueError(f"clock value must be nonnegative, got {gamma}")
    if policy.kind == "constant":
        return policy.param
    if policy.kind == "geometric":
        return _geometric(policy.param, gamma)
    if policy.kind == "polynomial":
        out = 1
        for t in range(1, policy.param + 1):
            out *= gamma + t
            if out >= BATCH_SATURATION:
                return BATCH_SATURATION
        return out
    return _power(policy.param, gamma)


def parse_policy(text):
    """Parse ``constant:N``, ``geometric:b``, ``polynomial:v`` or ``power:delta``."""
    kind, sep, arg = text.strip().partition(":")
    if not sep or kind not in ("constant", "geometric", "polynomial", "power"):
        raise ValueError(f"cannot parse batch policy {text!r}")
    return BatchPolicy(kind, float(arg))


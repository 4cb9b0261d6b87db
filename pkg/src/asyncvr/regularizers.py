"""Separable convex regularizers and their proximal operators."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidStepError

# Value of an indicator outside its set. float inf keeps objective values orderable.
INFEASIBLE = math.inf

BOX_TOL = 1e-12


@dataclass(frozen=True)
class Regularizer:
    kind: str  # "zero" | "l1" | "box"
    weight: float = 0.0
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("zero", "l1", "box"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "l1" and not self.weight >= 0:
            raise ValueError(f"l1 weight must be nonnegative, got {self.weight}")
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if lo.shape != hi.shape:
                raise DimensionError("box bounds must have the same shape")
            if np.any(lo > hi):
                raise ValueError("box lower bound exceeds upper bound")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    def __eq__(self, other):
        if not isinstance(other, Regularizer) or self.kind != other.kind:
            return False
        if self.kind == "box":
            return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)
        return self.weight == other.weight

    __hash__ = None


def zero():
    return Regularizer("zero")


def l1(weight):
    return Regularizer("l1", weight=float(weight))


def box(lower, upper):
    return Regularizer("box", lower=lower, upper=upper)


def soft_threshold(x, tau):
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def _check_box_dim(reg, x):
    if reg.lower.shape != np.shape(x):
        raise DimensionError(f"box bounds have shape {reg.lower.shape}, block has {np.shape(x)}")


def prox(reg, x, alpha):
    """argmin_y r(y) + ||y - x||^2 / (2 alpha)."""
    if not alpha > 0:
        raise InvalidStepError(f"prox step must be positive, got {alpha}")
    x = np.asarray(x, dtype=float)
    if reg.kind == "zero":
        return x.copy()
    if reg.kind == "l1":
        return soft_threshold(x, alpha * reg.weight)
    _check_box_dim(reg, x)
    return np.clip(x, reg.lower, reg.upper)


def reg_value(reg, x):
    x = np.asarray(x, dtype=float)
    if reg.kind == "zero":
        return 0.0
    if reg.kind == "l1":
        return reg.weight * float(np.abs(x).sum())
    _check_box_dim(reg, x)
    inside = np.all(x >= reg.lower - BOX_TOL) and np.all(x <= reg.upper + BOX_TOL)
    return 0.0 if inside else INFEASIBLE


def parse_regularizer(text, dim=None):
    """Parse ``zero``, ``l1:LAMBDA`` or ``box:LO:HI`` (scalar bounds broadcast to ``dim``)."""
    parts = text.strip().split(":")
    if parts[0] == "zero" and len(parts) == 1:
        return zero()
    if parts[0] == "l1" and len(parts) == 2:
        return l1(float(parts[1]))
    if parts[0] == "box" and len(parts) == 3 and dim is not None:
        return box(np.full(dim, float(parts[1])), np.full(dim, float(parts[2])))
    raise ValueError(f"cannot parse regularizer {text!r}")

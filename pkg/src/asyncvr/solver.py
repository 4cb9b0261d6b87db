"""Asynchronous variance-reduced block proximal stochastic gradient loop.

One trajectory is strictly sequential: at each tick of a virtual global clock one
block is drawn, its local clock sets the batch size, and the block takes a single
proximal stochastic gradient step. Everything random flows from three independent
streams spawned from the run seed (block selection, data sampling, delays), so
changing the delay bound never perturbs which blocks or data are drawn.
"""

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import regularizers as regs
from .errors import BudgetExceededError, DivergenceError
from .metrics import gradient_mapping
from .oracles import draw_samples
from .schedules import BATCH_SATURATION, BatchPolicy, BlockClocks, batch_size, record_selection
from .selection import build_distribution, draw_block

PL_STEP = 2.0 - math.sqrt(3.0)
PREDICTOR_REFRESH = 2000


@dataclass(frozen=True)
class SteplengthRule:
    kind: str  # quarter_inverse | pl_optimal | inverse | fixed | global_scaled
    value: float = None

    def __post_init__(self):
        if self.kind not in ("quarter_inverse", "pl_optimal", "inverse", "fixed", "global_scaled"):
            raise ValueError(f"unknown steplength rule {self.kind!r}")
        if self.kind in ("fixed", "global_scaled") and not (self.value is not None and self.value > 0):
            raise ValueError(f"{self.kind} steplength needs a positive value")

    def alphas(self, problem):
        L = np.asarray(problem.L, dtype=float)
        if self.kind == "quarter_inverse":
            return 1.0 / (4.0 * L)
        if self.kind == "pl_optimal":
            return PL_STEP / L
        if self.kind == "inverse":
            return 1.0 / L
        if self.kind == "fixed":
            return np.full(len(L), float(self.value))
        return np.full(len(L), float(self.value) / problem.global_lipschitz())

    def __str__(self):
        return self.kind if self.value is None else f"{self.kind}:{self.value!r}"


def parse_steplength(text):
    kind, sep, arg = text.strip().partition(":")
    return SteplengthRule(kind, float(arg) if sep else None)


@dataclass(frozen=True)
class Budget:
    kind: str  # iterations | epochs
    value: float

    def __post_init__(self):
        if self.kind not in ("iterations", "epochs"):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if self.value < 0 or (self.kind == "iterations" and self.value != int(self.value)):
            raise ValueError(f"invalid {self.kind} budget {self.value!r}")

    def __str__(self):
        v = int(self.value) if self.value == int(self.value) else self.value
        return f"{self.kind}:{v}"


def parse_budget(text):
    kind, sep, arg = text.strip().partition(":")
    if not sep:
        raise ValueError(f"cannot parse budget {text!r}")
    return Budget(kind, float(arg))


@dataclass(frozen=True)
class SolverConfig:
    steplength: SteplengthRule = SteplengthRule("quarter_inverse")
    schedule: object = BatchPolicy("constant", 1)  # one policy, or one per block
    selection: str = "uniform"
    delay_max: int = 0
    budget: Budget = Budget("iterations", 1000)
    seed: int = 0
    batch_cap: object = None  # None, an int, or "dataset"
    batch_min: int = 1  # floor on every batch, applied before the cap
    sampling: str = "with_replacement"  # or without_replacement (needs a cap <= N)
    cost_model: str = "sample"  # sample | block_fraction
    metrics_stride: int = 0  # record ||G||^2 every this many iterations; 0 disables

    def __post_init__(self):
        if self.delay_max < 0:
            raise ValueError("delay_max must be nonnegative")
        if self.cost_model not in ("sample", "block_fraction"):
            raise ValueError(f"unknown cost model {self.cost_model!r}")
        if self.metrics_stride < 0:
            raise ValueError("metrics_stride must be nonnegative")
        if self.sampling not in ("with_replacement", "without_replacement"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.batch_min < 1:
            raise ValueError("batch_min must be at least 1")


@dataclass
class RunRecord:
    k: np.ndarray
    block: np.ndarray
    batch: np.ndarray
    po_calls: np.ndarray
    sfo_calls: np.ndarray
    F: np.ndarray
    gmap_sq: np.ndarray
    x_final: np.ndarray
    gamma: np.ndarray

    @property
    def iterations(self):
        return int(self.k[-1])


@dataclass
class SolverState:
    x: np.ndarray
    pred: object
    clocks: BlockClocks
    po_units: int = 0
    sfo_units: int = 0
    history: deque = field(default=None)


class Trajectory:
    """Everything one run owns: state, random streams, and resolved parameters."""

    def __init__(self, problem, config, x0=None):
        self.problem = problem
        self.config = config
        n = problem.n_blocks
        self.alphas = config.steplength.alphas(problem)
        if np.any(~(self.alphas > 0)):
            raise ValueError(f"steplengths must be positive, got {self.alphas}")
        sched = config.schedule
        self.policies = tuple(sched) if isinstance(sched, (tuple, list)) else (sched,) * n
        if len(self.policies) != n:
            raise ValueError(f"need one batch policy per block ({n}), got {len(self.policies)}")
        self.dist = build_distribution(config.selection, problem.L)
        cap = config.batch_cap
        self.cap = problem.n_samples if cap == "dataset" else cap
        self.replace = config.sampling == "with_replacement"
        if not self.replace and (self.cap is None or self.cap > problem.n_samples):
            raise ValueError("sampling without replacement needs batch_cap <= the data set size")
        # cost weight of block i: 1 per call, or d_i per call measured in units of d
        if config.cost_model == "block_fraction":
            self.weights = [int(d) for d in problem.partition.dims]
            self.scale = problem.dim
        else:
            self.weights = [1] * n
            self.scale = 1
        seeds = np.random.SeedSequence(config.seed).spawn(3)
        self.select_rng, self.sample_rng, self.delay_rng = (np.random.default_rng(s) for s in seeds)

        x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
        problem._check_x(x)
        self.state = SolverState(x, problem.predictor(x), BlockClocks.fresh(n))
        # regularizer values per block, refreshed only for the block that moves
        self.reg_vals = [regs.reg_value(r, x[sl]) for r, sl in zip(problem.regs, problem.slices)]
        if config.delay_max > 0:
            self.state.history = deque(maxlen=config.delay_max + 1)
            self._push_history()

    def _push_history(self):
        s = self.state
        self.state.history.append((s.x.copy(), None if s.pred is None else s.pred.copy()))

    def po_calls(self):
        return self.state.po_units / self.scale

    def sfo_calls(self):
        return self.state.sfo_units / self.scale

    def budget_left(self):
        b = self.config.budget
        if b.kind == "iterations":
            return self.state.clocks.k < b.value
        return self.state.sfo_units < b.value * self.problem.n_samples * self.scale

    def objective(self):
        s = self.state
        return self.problem.smooth_value(s.x, s.pred) + sum(self.reg_vals)

    def gmap_sq(self):
        s = self.state
        return gradient_mapping(self.problem, s.x, self.alphas, s.pred).norm_sq

    def step(self):
        return async_vr_step(self)


def async_vr_step(traj):
    """One tick: draw a block, sample its gradient at a (possibly stale) point, prox-update it.

    Returns ``(block, batch)``; the trajectory state is updated in place.
    """
    problem, cfg, s = traj.problem, traj.config, traj.state
    i = draw_block(traj.dist, traj.select_rng)
    N = max(batch_size(traj.policies[i], s.clocks.gamma[i]), cfg.batch_min)
    if traj.cap is not None:
        N = min(N, int(traj.cap))
    if N >= BATCH_SATURATION:
        raise BudgetExceededError(
            f"batch size for block {i} saturated at 2**62 after {s.clocks.gamma[i]} selections")
    if cfg.delay_max > 0:
        d = int(traj.delay_rng.integers(0, min(cfg.delay_max, s.clocks.k) + 1))
        base_x, base_pred = s.history[-1 - d]
    else:
        base_x, base_pred = s.x, s.pred
    draw = draw_samples(problem.n_samples, N, traj.sample_rng, traj.replace)
    g = problem.sample_gradient_block(base_x, i, draw, base_pred)

    sl = problem.slices[i]
    a = traj.alphas[i]
    old = s.x[sl]
    new = regs.prox(problem.regs[i], old - a * g, a)
    if not np.all(np.isfinite(new)):
        raise DivergenceError(
            f"non-finite iterate at k={s.clocks.k}, block {i}, batch {N}, |g|={np.linalg.norm(g):.3g}")
    delta = new - old
    s.x[sl] = new
    traj.reg_vals[i] = regs.reg_value(problem.regs[i], new)
    if s.pred is not None:
        problem.update_predictor(s.pred, i, delta)

    record_selection(s.clocks, i)
    s.po_units += traj.weights[i]
    s.sfo_units += N * traj.weights[i]
    if s.pred is not None and s.clocks.k % PREDICTOR_REFRESH == 0:
        s.pred = problem.predictor(s.x)
    if cfg.delay_max > 0:
        traj._push_history()
    return i, N


def run(problem, config, x0=None):
    """Iterate until the budget is spent and return the full per-iteration record."""
    traj = Trajectory(problem, config, x0)
    stride = config.metrics_stride
    ks, blocks, batches, po, sfo, F, gm = [0], [-1], [0], [0.0], [0.0], [traj.objective()], []
    gm.append(traj.gmap_sq() if stride else math.nan)
    while traj.budget_left():
        i, N = async_vr_step(traj)
        k = traj.state.clocks.k
        ks.append(k)
        blocks.append(i)
        batches.append(N)
        po.append(traj.po_calls())
        sfo.append(traj.sfo_calls())
        F.append(traj.objective())
        gm.append(traj.gmap_sq() if stride and k % stride == 0 else math.nan)
    return RunRecord(
        k=np.asarray(ks), block=np.asarray(blocks), batch=np.asarray(batches, dtype=float),
        po_calls=np.asarray(po), sfo_calls=np.asarray(sfo), F=np.asarray(F),
        gmap_sq=np.asarray(gm), x_final=traj.state.x.copy(), gamma=traj.state.clocks.gamma.copy())


def run_bsg(problem, m, alpha, budget, seed=0, **kwargs):
    """Mini-batch block stochastic gradient baseline: batch ``m`` and one shared steplength."""
    if m < 1:
        raise ValueError(f"minibatch must be >= 1, got {m}")
    step = alpha if isinstance(alpha, SteplengthRule) else SteplengthRule("fixed", float(alpha))
    if step.kind not in ("fixed", "global_scaled"):
        raise ValueError("the baseline uses one steplength shared by all blocks")
    kwargs.setdefault("selection", "uniform")
    cfg = SolverConfig(steplength=step, schedule=BatchPolicy("constant", int(m)), budget=budget,
                       seed=seed, **kwargs)
    return run(problem, cfg)


@dataclass
class OptimumResult:
    x: np.ndarray
    F: float
    converged: bool
    certified: bool
    iterations: int
    gmap_norm: float


def reference_optimum(problem, tol=1e-10, max_iter=10 ** 6, x0=None):
    """Deterministic full-gradient proximal gradient with step ``1/L``.

    Stops when ``||G(x)|| <= tol``. ``F`` is the smallest objective over all visited
    iterates; ``certified`` is True only for convex problems that converged.
    """
    L = problem.global_lipschitz()
    alpha = 1.0 / L
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    best_x, best_F = x.copy(), problem.objective(x)
    gnorm = math.inf
    it = 0
    for it in range(max_iter + 1):
        grad = problem.full_gradient(x)
        y = np.empty_like(x)
        for r, sl in zip(problem.regs, problem.slices):
            y[sl] = regs.prox(r, x[sl] - alpha * grad[sl], alpha)
        gnorm = float(np.linalg.norm(x - y)) / alpha
        F = problem.objective(x)
        if F <= best_F:
            best_x, best_F = x.copy(), F
        if gnorm <= tol or it == max_iter:
            break
        x = y
    converged = gnorm <= tol
    # the last stationary-certified iterate is the answer even if an earlier F was lower by rounding
    if converged:
        best_x = x.copy()
        best_F = min(best_F, problem.objective(x))
    return OptimumResult(best_x, float(best_F), converged, converged and problem.certified, it, gnorm)


def with_seed(config, seed):
    return replace(config, seed=int(seed))

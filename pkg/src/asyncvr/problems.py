"""Finite-sum test problems with per-block sampled gradients.

Every problem keeps a cached *predictor* alongside the iterate (the residual
``A x - b`` for least squares, the linear score for the sigmoid model) so that a
block update costs ``O(N d_i)`` instead of ``O(N d)``.
"""

import math

import numpy as np

from . import regularizers as regs
from .errors import BlockIndexError, DimensionError, ParseError
from .partition import BlockPartition, even_partition

L_FLOOR = 1e-12
# sup over z and y in {0,1} of |d/dz[(phi(z) - y) phi'(z)]| is about 0.077 (see sigmoid_curvature_bound)
SIGMOID_CURVATURE = 0.2


def power_iteration(matvec, dim, max_iter=200, tol=1e-10, seed=0):
    """Largest eigenvalue of a symmetric PSD operator given by ``matvec``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return lam


class Problem:
    """Composite objective ``mean_j f(x, xi_j) + sum_i r_i(x_i)`` over a block partition.

    Subclasses implement the smooth part through a cached predictor.
    """

    kind = None
    certified = True  # convex: reference optimum is a certified global minimum

    def __init__(self, partition, regularizers, n_samples):
        if len(regularizers) != partition.n:
            raise DimensionError(f"need {partition.n} regularizers, got {len(regularizers)}")
        self.partition = partition
        self.regs = tuple(regularizers)
        self.n_samples = int(n_samples)
        self.slices = partition.slices()
        self.pl_mu = None
        self.L = None

    @property
    def dim(self):
        return self.partition.dim

    @property
    def n_blocks(self):
        return self.partition.n

    def _check_block(self, i):
        if not 0 <= i < self.n_blocks:
            raise BlockIndexError(f"block index {i} out of range for {self.n_blocks} blocks")

    def _check_x(self, x):
        if np.shape(x) != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got {np.shape(x)}")

    # smooth part -----------------------------------------------------------
    def predictor(self, x):
        return None

    def update_predictor(self, pred, i, delta):
        pass

    def smooth_value(self, x, pred=None):
        raise NotImplementedError

    def full_gradient(self, x, pred=None):
        raise NotImplementedError

    def full_gradient_block(self, x, i, pred=None):
        self._check_block(i)
        return self.full_gradient(x, pred)[self.slices[i]]

    def sample_gradient_block(self, x, i, draw, pred=None):
        """Average of per-sample block gradients over ``draw``.

        ``draw`` is either an index array (one entry per sampled datum, repeats allowed)
        or a ``("counts", counts, total)`` triple giving multiplicities over all data.
        """
        raise NotImplementedError

    # composite ---------------------------------------------------------------
    def reg_value(self, x):
        return sum(regs.reg_value(r, x[s]) for r, s in zip(self.regs, self.slices))

    def objective(self, x, pred=None):
        self._check_x(x)
        if pred is None:
            pred = self.predictor(x)
        return self.smooth_value(x, pred) + self.reg_value(x)

    def global_lipschitz(self):
        """Upper bound on the Lipschitz constant of the full smooth gradient."""
        return float(np.max(self.L)) * self.n_blocks


class LeastSquaresProblem(Problem):
    """``(1/2N) sum_j (a_j^T x - b_j)^2`` with one regularizer per block."""

    kind = "lasso"

    def __init__(self, A, b, partition, regularizers, x_true=None):
        A = np.ascontiguousarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != b.shape[0] or A.shape[1] != partition.dim:
            raise DimensionError(f"data shapes A{A.shape}, b{b.shape} do not match partition")
        super().__init__(partition, regularizers, A.shape[0])
        self.A = A
        self.b = b
        self.x_true = x_true
        self.columns = [np.ascontiguousarray(A[:, s]) for s in self.slices]
        self.L = lipschitz_blocks(self)

    def predictor(self, x):
        return self.A @ x - self.b

    def update_predictor(self, pred, i, delta):
        pred += self.columns[i] @ delta

    def smooth_value(self, x, pred=None):
        r = self.predictor(x) if pred is None else pred
        return 0.5 * float(r @ r) / self.n_samples

    def full_gradient(self, x, pred=None):
        r = self.predictor(x) if pred is None else pred
        return self.A.T @ r / self.n_samples

    def full_gradient_block(self, x, i, pred=None):
        self._check_block(i)
        r = self.predictor(x) if pred is None else pred
        return self.columns[i].T @ r / self.n_samples

    def sample_gradient_block(self, x, i, draw, pred=None):
        r = self.predictor(x) if pred is None else pred
        cols = self.columns[i]
        if isinstance(draw, tuple):
            _, counts, total = draw
            return cols.T @ (counts * r) / total
        return cols[draw].T @ r[draw] / len(draw)

    def global_lipschitz(self):
        return power_iteration(lambda v: self.A.T @ (self.A @ v) / self.n_samples, self.dim,
                               max_iter=1000, tol=1e-12)


class SigmoidLSProblem(Problem):
    """``(1/2N) sum_j (y_j - phi(w^T x_j + b))^2`` over ``theta = (w, b)``.

    The bias is the last coordinate of ``theta`` and belongs to the last block.
    """

    kind = "sigmoid_ls"
    certified = False

    def __init__(self, X, y, partition, regularizers=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] + 1 != partition.dim:
            raise DimensionError(f"features {X.shape} and labels {y.shape} do not match partition")
        if regularizers is None:
            regularizers = [regs.zero()] * partition.n
        super().__init__(partition, regularizers, X.shape[0])
        self.X = np.hstack([X, np.ones((X.shape[0], 1))])
        self.y = y
        self.columns = [np.ascontiguousarray(self.X[:, s]) for s in self.slices]
        self.L = lipschitz_blocks(self)

    def predictor(self, x):
        return self.X @ x

    def update_predictor(self, pred, i, delta):
        pred += self.columns[i] @ delta

    def _weights(self, z):
        # d/dz of 0.5 (y - phi(z))^2
        phi = _sigmoid(z)
        return (phi - self.y) * phi * (1.0 - phi), phi

    def smooth_value(self, x, pred=None):
        z = self.predictor(x) if pred is None else pred
        res = self.y - _sigmoid(z)
        return 0.5 * float(res @ res) / self.n_samples

    def full_gradient(self, x, pred=None):
        z = self.predictor(x) if pred is None else pred
        h, _ = self._weights(z)
        return self.X.T @ h / self.n_samples

    def full_gradient_block(self, x, i, pred=None):
        self._check_block(i)
        z = self.predictor(x) if pred is None else pred
        h, _ = self._weights(z)
        return self.columns[i].T @ h / self.n_samples

    def sample_gradient_block(self, x, i, draw, pred=None):
        z = self.predictor(x) if pred is None else pred
        cols = self.columns[i]
        if isinstance(draw, tuple):
            _, counts, total = draw
            h, _ = self._weights(z)
            return cols.T @ (counts * h) / total
        zs = z[draw]
        phi = _sigmoid(zs)
        h = (phi - self.y[draw]) * phi * (1.0 - phi)
        return cols[draw].T @ h / len(draw)

    def misclassification(self, x):
        return float(np.mean((self.X @ x > 0) != (self.y > 0.5)))


class QuadraticProblem(Problem):
    """Separable strongly convex quadratic ``0.5 sum_j c_j (x_j - s_j)^2`` with sampled noise.

    Sample ``j`` contributes ``f(x, xi_j) = 0.5 sum c (x - s)^2 + z_j^T x`` where the noise
    rows ``z_j`` are centered, so the empirical mean is exactly the quadratic.
    """

    kind = "pl_quadratic"

    def __init__(self, curvature, center, noise, partition, regularizers, mu=None):
        c = np.asarray(curvature, dtype=float)
        s = np.asarray(center, dtype=float)
        Z = np.asarray(noise, dtype=float)
        if c.shape != (partition.dim,) or s.shape != c.shape or Z.ndim != 2 or Z.shape[1] != c.size:
            raise DimensionError("curvature, center and noise shapes do not match partition")
        if np.any(c <= 0):
            raise ValueError("curvatures must be positive")
        super().__init__(partition, regularizers, Z.shape[0])
        self.c = c
        self.s = s
        self.Z = Z
        self.noise_blocks = [np.ascontiguousarray(Z[:, sl]) for sl in self.slices]
        self.pl_mu = float(c.min()) if mu is None else float(mu)
        self.L = lipschitz_blocks(self)

    def smooth_value(self, x, pred=None):
        u = x - self.s
        return 0.5 * float(self.c @ (u * u))

    def full_gradient(self, x, pred=None):
        return self.c * (x - self.s)

    def full_gradient_block(self, x, i, pred=None):
        self._check_block(i)
        sl = self.slices[i]
        return self.c[sl] * (x[sl] - self.s[sl])

    def sample_gradient_block(self, x, i, draw, pred=None):
        sl = self.slices[i]
        Z = self.noise_blocks[i]
        if isinstance(draw, tuple):
            _, counts, total = draw
            noise = counts @ Z / total
        else:
            noise = Z[draw].sum(axis=0) / len(draw)
        return self.c[sl] * (x[sl] - self.s[sl]) + noise

    def global_lipschitz(self):
        return float(self.c.max())

    def exact_optimum(self):
        """Closed-form minimizer when every block carries ``zero`` or ``l1``."""
        x = self.s.copy()
        for r, sl in zip(self.regs, self.slices):
            if r.kind == "l1":
                x[sl] = regs.soft_threshold(self.s[sl], r.weight / self.c[sl])
            elif r.kind == "box":
                x[sl] = np.clip(self.s[sl], r.lower, r.upper)
        return x, self.objective(x)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid_curvature_bound(grid=None):
    """max over z and y in {0,1} of |d/dz[(phi(z) - y) phi'(z)]| evaluated on a grid."""
    z = np.linspace(-40, 40, 400_001) if grid is None else grid
    phi = _sigmoid(z)
    d1 = phi * (1 - phi)
    d2 = d1 * (1 - 2 * phi)
    return float(max(np.abs(d1 * d1 + (phi - y) * d2).max() for y in (0.0, 1.0)))


def lipschitz_blocks(problem, partition=None):
    """Per-block Lipschitz constants of the block gradients, floored at ``1e-12``."""
    part = problem.partition if partition is None else partition
    out = []
    for i in range(part.n):
        sl = part.slice(i)
        if problem.kind == "lasso":
            cols = problem.A[:, sl]
            N = problem.n_samples
            lam = power_iteration(lambda v: cols.T @ (cols @ v) / N, part.dims[i], seed=i)
        elif problem.kind == "sigmoid_ls":
            lam = SIGMOID_CURVATURE * float((problem.X[:, sl] ** 2).sum()) / problem.n_samples
        elif problem.kind == "pl_quadratic":
            lam = float(problem.c[sl].max())
        else:
            raise ValueError(f"no Lipschitz rule for problem kind {problem.kind!r}")
        out.append(max(lam, L_FLOOR))
    return np.array(out)


# generators ------------------------------------------------------------------


def _as_rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def gen_lasso(N, d, n_blocks=10, density=0.1, noise_sd=0.01, lam=0.1, block_variances=None,
              rng=None):
    """Synthetic sparse least squares with an l1 penalty on every block.

    ``ceil(density * d)`` entries of the planted solution are standard normal; features are
    standard normal, or have per-block variances ``block_variances`` when given.
    """
    if N < 1 or d < 1:
        raise ValueError(f"need N, d >= 1, got N={N}, d={d}")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if noise_sd < 0 or lam < 0:
        raise ValueError("noise_sd and lam must be nonnegative")
    rng = _as_rng(rng)
    part = even_partition(d, n_blocks)
    nnz = math.ceil(density * d - 1e-9)
    x_true = np.zeros(d)
    support = rng.choice(d, size=nnz, replace=False)
    x_true[support] = rng.standard_normal(nnz)
    A = rng.standard_normal((N, d))
    if block_variances is not None:
        v = np.asarray(block_variances, dtype=float)
        if v.shape != (part.n,) or np.any(v <= 0):
            raise ValueError(f"need {part.n} positive block variances")
        for sl, var in zip(part.slices(), v):
            A[:, sl] *= math.sqrt(var)
    b = A @ x_true + noise_sd * rng.standard_normal(N)
    return LeastSquaresProblem(A, b, part, [regs.l1(lam)] * part.n, x_true=x_true)



def gen_lasso_ratio(N, d, n_blocks=10, ratio=1.0, rng=None, **kwargs):
    """``gen_lasso`` with block variances ``exp(s j / (n-1))`` tuned so ``L_max / L_ave == ratio``.

    Scaling a block's features by ``sqrt(v)`` scales its Lipschitz constant by ``v``, so
    the search runs on the constants of the unscaled draw, which shares its data with the
    final instance.
    """
    if n_blocks < 2 and ratio != 1.0:
        raise ValueError("a single block always has L_max / L_ave == 1")
    if not 1.0 <= ratio < n_blocks:
        raise ValueError(f"ratio must lie in [1, {n_blocks}), got {ratio}")
    seed = rng if isinstance(rng, (int, np.integer)) else int(_as_rng(rng).integers(2 ** 63))
    L0 = gen_lasso(N, d, n_blocks, rng=seed, **kwargs).L
    t = np.arange(n_blocks) / max(n_blocks - 1, 1)

    def achieved(scale):
        L = L0 * np.exp(scale * t)
        return L.max() / L.mean()

    lo, hi = 0.0, 1.0
    while achieved(hi) < ratio:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if achieved(mid) < ratio:
            lo = mid
        else:
            hi = mid
    return gen_lasso(N, d, n_blocks, block_variances=np.exp(hi * t), rng=seed, **kwargs)

def load_libsvm(path, n_features=None):
    """Read ``label idx:val ...`` lines (1-based indices); labels are mapped to {0, 1}."""
    rows, labels = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(lineno, f"bad label {tokens[0]!r}") from None
            entries = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise ParseError(lineno, f"bad feature {tok!r}") from None
                if not sep or j < 1:
                    raise ParseError(lineno, f"bad feature {tok!r}")
                entries[j - 1] = v
                max_idx = max(max_idx, j)
            rows.append(entries)
            labels.append(label)
    if not rows:
        raise ParseError(0, f"{path} contains no data")
    d = max_idx if n_features is None else n_features
    X = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for j, v in entries.items():
            X[r, j] = v
    y = np.asarray(labels)
    values = set(np.unique(y))
    if values <= {0.0, 1.0}:
        pass
    elif values <= {-1.0, 1.0}:
        y = (y > 0).astype(float)
    else:
        raise ParseError(0, f"labels must be in {{0,1}} or {{-1,+1}}, got {sorted(values)}")
    return X, y


def gen_sigmoid_ls(X, y, n_blocks=10):
    d = X.shape[1]
    base = even_partition(d, min(n_blocks, d))
    # the bias joins the last block
    dims = list(base.dims)
    dims[-1] += 1
    return SigmoidLSProblem(X, y, BlockPartition(tuple(dims)))


def gen_sigmoid_data(N, d, rng=None, margin_noise=1.0):
    """Synthetic binary classification data for the sigmoid model."""
    rng = _as_rng(rng)
    w = rng.standard_normal(d) / math.sqrt(d)
    X = rng.standard_normal((N, d))
    y = (X @ w + margin_noise * 0.3 * rng.standard_normal(N) > 0).astype(float)
    return X, y


def gen_pl_quadratic(d, n_blocks, mu=1.0, L_spread=4.0, lam=0.0, rng=None, noise_sd=0.003,
                     n_samples=1000, center=None, curvature=None):
    """Separable quadratic satisfying the proximal PL condition with constant ``mu``.

    Curvatures are drawn in ``[mu, L_spread * mu]`` with the endpoints attained, so the
    smallest curvature is exactly ``mu``. ``center`` defaults to a standard normal draw.
    """
    rng = _as_rng(rng)
    if d < 1 or not mu > 0 or L_spread < 1 or lam < 0 or noise_sd < 0 or n_samples < 1:
        raise ValueError("invalid quadratic problem parameters")
    part = even_partition(d, n_blocks)
    if curvature is None:
        c = rng.uniform(mu, L_spread * mu, size=d)
        ends = rng.choice(d, size=min(d, 2), replace=False)
        c[ends[0]] = mu
        if d > 1:
            c[ends[1]] = L_spread * mu
    else:
        c = np.asarray(curvature, dtype=float)
        if c.shape != (d,) or c.min() < mu - 1e-15:
            raise ValueError("curvatures must have length d and be >= mu")
    s = rng.standard_normal(d) if center is None else np.asarray(center, dtype=float)
    Z = noise_sd * rng.standard_normal((n_samples, d))
    Z -= Z.mean(axis=0)
    reg = regs.l1(lam) if lam > 0 else regs.zero()
    return QuadraticProblem(c, s, Z, part, [reg] * part.n, mu=mu)

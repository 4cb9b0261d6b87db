"""Experiment configuration, multi-trajectory orchestration and CSV output.

A config is a flat ``key = value`` document. Optional ``[arm LABEL]`` sections hold
solver overrides; every arm runs on the same problem instance and seeds, and writes its
own CSV next to the main output path.
"""

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import problems as probs
from .errors import AsyncVRError, ConfigError, TrajectoryError
from .metrics import relative_error
from .schedules import BatchPolicy, geometric, parse_policy
from .solver import PL_STEP, SolverConfig, parse_budget, parse_steplength, reference_optimum, run

CSV_HEADER = "k,po_calls,sfo_calls_mean,gap_mean,gap_std,gmap_sq_mean,gmap_sq_std"
PROBLEM_KINDS = ("lasso", "sigmoid_ls", "pl_quadratic")

# keys an [arm] section may override; everything else defines the shared instance
ARM_KEYS = ("steplength", "schedule", "selection", "delay_max", "budget", "metrics_stride",
            "batch_cap", "batch_min", "cost_model", "sampling", "method")


@dataclass(frozen=True)
class Arm:
    label: str
    overrides: tuple = ()  # ((key, text), ...)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "lasso"
    N: int = 1000
    d: int = 100
    n_blocks: int = 10
    density: float = 0.1
    noise_sd: float = 0.01
    lam: float = 0.1
    block_variances: tuple = None
    lipschitz_ratio: float = None
    data_path: str = None
    pl_mu: float = 1.0
    l_spread: float = 4.0
    margin_noise: float = 1.0
    problem_seed: int = 0
    steplength: str = "quarter_inverse"
    schedule: str = "constant:1"
    selection: str = "uniform"
    delay_max: int = 0
    budget: str = "iterations:1000"
    method: str = "avr"
    batch_cap: str = "none"
    batch_min: int = 1
    cost_model: str = "sample"
    sampling: str = "with_replacement"
    metrics_stride: int = 0
    seed: int = 0
    trajectories: int = 50
    optimum_tol: float = 1e-9
    workers: int = 1
    out: str = "results.csv"
    arms: tuple = ()
    notes: tuple = ()

    def __post_init__(self):
        validate(self)


def _opt(conv):
    def parse(text):
        return None if text.lower() in ("none", "") else conv(text)
    return parse


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _show(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


PARSERS = {
    "problem": str, "N": int, "d": int, "n_blocks": int, "density": float, "noise_sd": float,
    "lam": float, "block_variances": _opt(_floats), "lipschitz_ratio": _opt(float),
    "data_path": _opt(str), "pl_mu": float, "l_spread": float, "margin_noise": float,
    "problem_seed": int, "steplength": str, "schedule": str, "selection": str, "delay_max": int,
    "budget": str, "method": str, "batch_cap": str, "batch_min": int, "cost_model": str,
    "sampling": str, "metrics_stride": int, "seed": int, "trajectories": int,
    "optimum_tol": float, "workers": int, "out": str,
}


def _check(key, ok, message):
    if not ok:
        raise ConfigError(key, message)


def _check_solver_keys(values):
    """Validate the solver-level entries of one arm (or the base config)."""
    for key, parse in (("steplength", parse_steplength), ("budget", parse_budget)):
        try:
            parse(values[key])
        except (ValueError, TypeError) as e:
            raise ConfigError(key, str(e)) from None
    sched = values["schedule"]
    if not sched.startswith("pl_geometric:"):
        try:
            parse_policy(sched)
        except (ValueError, TypeError) as e:
            raise ConfigError("schedule", str(e)) from None
    else:
        try:
            c = float(sched.partition(":")[2])
        except ValueError:
            raise ConfigError("schedule", f"bad pl_geometric factor in {sched!r}") from None
        _check("schedule", 0 < c < 1, "pl_geometric factor must lie in (0, 1)")
    _check("selection", values["selection"] in ("uniform", "lipschitz"),
           f"unknown selection {values['selection']!r}")
    _check("delay_max", values["delay_max"] >= 0, "must be nonnegative")
    _check("metrics_stride", values["metrics_stride"] >= 0, "must be nonnegative")
    _check("batch_min", values["batch_min"] >= 1, "must be at least 1")
    cap = values["batch_cap"]
    _check("batch_cap", cap in ("none", "dataset") or (cap.isdigit() and int(cap) >= 1),
           f"expected none, dataset or a positive integer, got {cap!r}")
    _check("cost_model", values["cost_model"] in ("sample", "block_fraction"),
           f"unknown cost model {values['cost_model']!r}")
    _check("sampling", values["sampling"] in ("with_replacement", "without_replacement"),
           f"unknown sampling mode {values['sampling']!r}")
    _check("sampling", values["sampling"] == "with_replacement" or cap != "none",
           "sampling without replacement needs a batch_cap")
    method = values["method"]
    if method != "avr":
        kind, _, m = method.partition(":")
        _check("method", kind == "bsg" and m.isdigit() and int(m) >= 1,
               f"expected avr or bsg:M, got {method!r}")
        rule = parse_steplength(values["steplength"])
        _check("steplength", rule.kind in ("fixed", "global_scaled"),
               "the bsg baseline needs one shared steplength (fixed or global_scaled)")


def validate(cfg):
    _check("problem", cfg.problem in PROBLEM_KINDS, f"unknown problem kind {cfg.problem!r}")
    for key in ("N", "d", "n_blocks"):
        _check(key, getattr(cfg, key) >= 1, "must be at least 1")
    _check("n_blocks", cfg.n_blocks <= cfg.d, "cannot exceed d")
    _check("density", 0 < cfg.density <= 1, "must lie in (0, 1]")
    _check("noise_sd", cfg.noise_sd >= 0, "must be nonnegative")
    _check("lam", cfg.lam >= 0, "must be nonnegative")
    if cfg.block_variances is not None:
        _check("block_variances", len(cfg.block_variances) == cfg.n_blocks,
               f"need {cfg.n_blocks} values")
        _check("block_variances", all(v > 0 for v in cfg.block_variances), "must be positive")
    if cfg.lipschitz_ratio is not None:
        _check("lipschitz_ratio", 1 <= cfg.lipschitz_ratio < cfg.n_blocks,
               f"must lie in [1, {cfg.n_blocks})")
        _check("lipschitz_ratio", cfg.block_variances is None,
               "conflicts with block_variances")
    _check("pl_mu", cfg.pl_mu > 0, "must be positive")
    _check("l_spread", cfg.l_spread >= 1, "must be at least 1")
    _check("trajectories", cfg.trajectories >= 1, "need at least one trajectory")
    _check("optimum_tol", cfg.optimum_tol > 0, "must be positive")
    _check("workers", cfg.workers >= 1, "must be at least 1")
    base = {k: getattr(cfg, k) for k in ARM_KEYS}
    _check_solver_keys(base)
    labels = set()
    for arm in cfg.arms:
        _check("arm", arm.label and all(c.isalnum() or c in "_-." for c in arm.label),
               f"bad arm label {arm.label!r}")
        _check("arm", arm.label not in labels, f"duplicate arm {arm.label!r}")
        labels.add(arm.label)
        values = dict(base)
        for key, text in arm.overrides:
            _check(key, key in ARM_KEYS, f"cannot be overridden in arm {arm.label!r}")
            values[key] = _convert(key, text)
        _check_solver_keys(values)


def _convert(key, text):
    if key not in PARSERS:
        raise ConfigError(key, "unknown key")
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    try:
        return PARSERS[key](text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None


def parse_config(text, overrides=None):
    """Parse a ``key = value`` document; ``overrides`` (a mapping) is applied on top."""
    values, arms, notes = {}, [], []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("# note:"):
            notes.append(line[len("# note:"):].strip())
            continue
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            _check("arm", line.endswith("]") and line[1:-1].split()[:1] == ["arm"],
                   f"line {lineno}: expected [arm LABEL], got {line!r}")
            label = line[1:-1].split(None, 1)[1].strip() if len(line[1:-1].split()) > 1 else ""
            current = [label, []]
            arms.append(current)
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or "?", f"line {lineno}: expected key = value")
        if current is not None:
            _check(key, key in PARSERS, "unknown key")
            _convert(key, value)
            current[1].append((key, value.strip().strip("\"'")))
        else:
            _check(key, key not in values, "given twice")
            values[key] = _convert(key, value)
    for key, value in (overrides or {}).items():
        values[key] = _convert(key, str(value))
    values["arms"] = tuple(Arm(label, tuple(ov)) for label, ov in arms)
    values["notes"] = tuple(notes)
    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError("?", str(e)) from None


def serialize(cfg):
    lines = [f"# note: {n}" for n in cfg.notes]
    for f in fields(cfg):
        if f.name in ("arms", "notes"):
            continue
        lines.append(f"{f.name} = {_show(getattr(cfg, f.name))}")
    for arm in cfg.arms:
        lines.append("")
        lines.append(f"[arm {arm.label}]")
        lines.extend(f"{k} = {v}" for k, v in arm.overrides)
    return "\n".join(lines) + "\n"


def arm_config(cfg, arm):
    """The experiment config an arm runs: the base with the arm's overrides applied."""
    ov = {k: _convert(k, v) for k, v in arm.overrides}
    return dataclasses.replace(cfg, arms=(), **ov)


# building blocks -------------------------------------------------------------


def build_problem(cfg):
    if cfg.problem == "lasso":
        kw = dict(density=cfg.density, noise_sd=cfg.noise_sd, lam=cfg.lam)
        if cfg.lipschitz_ratio is not None:
            return probs.gen_lasso_ratio(cfg.N, cfg.d, cfg.n_blocks, cfg.lipschitz_ratio,
                                         rng=cfg.problem_seed, **kw)
        return probs.gen_lasso(cfg.N, cfg.d, cfg.n_blocks, block_variances=cfg.block_variances,
                               rng=cfg.problem_seed, **kw)
    if cfg.problem == "sigmoid_ls":
        if cfg.data_path:
            X, y = probs.load_libsvm(cfg.data_path)
        else:
            X, y = probs.gen_sigmoid_data(cfg.N, cfg.d, cfg.problem_seed, cfg.margin_noise)
        return probs.gen_sigmoid_ls(X, y, cfg.n_blocks)
    return probs.gen_pl_quadratic(cfg.d, cfg.n_blocks, cfg.pl_mu, cfg.l_spread, cfg.lam,
                                  rng=cfg.problem_seed, noise_sd=cfg.noise_sd, n_samples=cfg.N)


def build_schedule(text, problem):
    """A batch policy, or one per block for ``pl_geometric:c`` (``b_i = 1 - c (2-sqrt3)^2 mu / L_i``)."""
    if not text.startswith("pl_geometric:"):
        return parse_policy(text)
    if problem.pl_mu is None:
        raise ConfigError("schedule", "pl_geometric needs a problem with a known PL constant")
    c = float(text.partition(":")[2])
    q = c * PL_STEP ** 2 * problem.pl_mu / np.asarray(problem.L)
    return tuple(geometric(1.0 - qi) for qi in q)


def solver_config(cfg, problem, seed):
    cap = cfg.batch_cap
    cap = None if cap == "none" else ("dataset" if cap == "dataset" else int(cap))
    if cfg.method == "avr":
        schedule = build_schedule(cfg.schedule, problem)
    else:
        schedule = BatchPolicy("constant", int(cfg.method.partition(":")[2]))
    return SolverConfig(
        steplength=parse_steplength(cfg.steplength), schedule=schedule, selection=cfg.selection,
        delay_max=cfg.delay_max, budget=parse_budget(cfg.budget), seed=seed, batch_cap=cap,
        batch_min=cfg.batch_min, cost_model=cfg.cost_model, sampling=cfg.sampling,
        metrics_stride=cfg.metrics_stride)


def optimum_value(problem, tol):
    """``(F*, certified)``: closed form for the quadratic, otherwise full proximal gradient."""
    if problem.kind == "pl_quadratic":
        return problem.exact_optimum()[1], True
    opt = reference_optimum(problem, tol=tol)
    return opt.F, opt.certified


# running ---------------------------------------------------------------------


@dataclass
class ArmResult:
    label: str
    rows: np.ndarray  # columns as in CSV_HEADER
    final_error: float
    po_calls: float
    sfo_calls: float
    wall: float
    csv_path: Path = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    F_star: float
    certified: bool
    arms: list = field(default_factory=list)


def _trajectory(args):
    problem, scfg, index, label = args
    try:
        r = run(problem, scfg)
    except AsyncVRError as e:
        raise TrajectoryError(index, label, e) from e
    return r.k, r.po_calls, r.sfo_calls, r.F, r.gmap_sq


def _pad(arrays, length):
    out = np.empty((len(arrays), length))
    for j, a in enumerate(arrays):
        out[j, :len(a)] = a
        out[j, len(a):] = a[-1]
    return out


def aggregate(traces, F_star):
    """Per-iteration means across trajectories; finished trajectories hold their last value."""
    length = max(len(t[0]) for t in traces)
    po = _pad([t[1] for t in traces], length)
    sfo = _pad([t[2] for t in traces], length)
    gap = relative_error(_pad([t[3] for t in traces], length), F_star)
    gm = _pad([t[4] for t in traces], length)
    rows = np.column_stack([
        np.arange(length, dtype=float), po.mean(axis=0), sfo.mean(axis=0),
        gap.mean(axis=0), gap.std(axis=0), gm.mean(axis=0), gm.std(axis=0)])
    return rows


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(v)


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def gnuplot_script(csv_paths, labels, png):
    """Companion script plotting the mean gap against prox evaluations and sampled gradients."""
    def plots(xcol):
        return ", \\\n     ".join(
            f"'{p.name}' using {xcol}:4 with lines title '{lab}'" for p, lab in zip(csv_paths, labels))
    return "\n".join([
        "set datafile separator ','",
        "set logscale y",
        "set ylabel 'mean relative error'",
        "set terminal pngcairo size 1200,500",
        f"set output '{png}'",
        "set multiplot layout 1,2",
        "set xlabel 'prox evaluations'",
        f"plot {plots(2)}",
        "set xlabel 'sampled gradients'",
        f"plot {plots(3)}",
        "unset multiplot",
        ""])


def _arm_paths(out, labels):
    out = Path(out)
    if labels == [None]:
        return [out]
    return [out.with_name(f"{out.stem}.{lab}{out.suffix or '.csv'}") for lab in labels]


def run_experiment(cfg, out=None, write=True, log=print):
    """Run every arm for ``cfg.trajectories`` seeds and write one CSV per arm.

    Trajectory ``j`` uses seed ``cfg.seed + j`` in every arm. Returns an ``ExperimentResult``.
    """
    out = Path(out or cfg.out)
    problem = build_problem(cfg)
    F_star, certified = optimum_value(problem, cfg.optimum_tol)
    arms = list(cfg.arms) or [None]
    labels = [None if a is None else a.label for a in arms]
    paths = _arm_paths(out, labels)
    result = ExperimentResult(cfg, F_star, certified)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for arm, path in zip(arms, paths):
            acfg = cfg if arm is None else arm_config(cfg, arm)
            label = None if arm is None else arm.label
            jobs = [(problem, solver_config(acfg, problem, cfg.seed + j), j, label)
                    for j in range(cfg.trajectories)]
            t0 = time.perf_counter()
            traces = list(pool.map(_trajectory, jobs)) if pool else [_trajectory(j) for j in jobs]
            wall = time.perf_counter() - t0
            rows = aggregate(traces, F_star)
            ar = ArmResult(label or "main", rows, float(rows[-1, 3]),
                           float(np.mean([t[1][-1] for t in traces])),
                           float(np.mean([t[2][-1] for t in traces])), wall)
            if write:
                path.parent.mkdir(parents=True, exist_ok=True)
                write_csv(path, rows)
                ar.csv_path = path
            result.arms.append(ar)
            if log:
                log(summary_line(ar, certified, F_star))
    finally:
        if pool:
            pool.shutdown()
    if write:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".cfg").write_text(serialize(dataclasses.replace(cfg, out=str(out))))
        gp = gnuplot_script([a.csv_path for a in result.arms], [a.label for a in result.arms],
                            out.with_suffix(".png").name)
        out.with_suffix(".gp").write_text(gp)
    return result


def summary_line(ar, certified=True, F_star=1.0):
    what = "relative error" if F_star != 0 else "gap (absolute, F* = 0)"
    tag = "" if certified else " (uncertified optimum)"
    return (f"{ar.label}: final mean {what} {ar.final_error:.4g}{tag}, "
            f"PO calls {ar.po_calls:.6g}, mean SFO calls {ar.sfo_calls:.6g}, "
            f"wall {ar.wall:.2f}s")


# presets ---------------------------------------------------------------------

_CAPPED = dict(batch_cap="dataset", cost_model="block_fraction", sampling="without_replacement")
_CAPPED_NOTES = (
    "batches are capped at the data set size and drawn without replacement",
    "one prox or sample on block i costs d_i/d, so counts are in full-vector units",
)


def _preset_table2():
    return ExperimentConfig(
        problem="lasso", N=1000, d=400, n_blocks=10, lam=0.1, problem_seed=1000,
        steplength="fixed:0.01", schedule="geometric:0.95", budget="epochs:50",
        trajectories=50, out="table2.csv", **_CAPPED,
        arms=(Arm("b0.95", (("schedule", "geometric:0.95"),)),
              Arm("b0.9", (("schedule", "geometric:0.9"),)),
              Arm("b0.85", (("schedule", "geometric:0.85"),))),
        notes=_CAPPED_NOTES + ("features standard normal, 10% of the planted solution nonzero",))


def _preset_table3(**kw):
    base = dict(
        problem="lasso", N=2000, d=200, n_blocks=10, lam=0.1, problem_seed=2000,
        steplength="fixed:0.02", schedule="geometric:0.98", budget="epochs:50",
        trajectories=50, out="table3.csv",
        arms=(Arm("avr-b0.95", (("schedule", "geometric:0.95"),)),
              Arm("avr-b0.98", (("schedule", "geometric:0.98"),)),
              Arm("bsg16", (("method", "bsg:16"),)),
              Arm("bsg64", (("method", "bsg:64"),))),
        notes=_CAPPED_NOTES + ("one shared steplength 0.02 for every arm; 1/L_i diverges on batch-1 draws",))
    base.update(_CAPPED)
    base.update(kw)
    return ExperimentConfig(**base)


def _preset_table5():
    return ExperimentConfig(
        problem="lasso", N=1000, d=200, n_blocks=10, lam=0.1, lipschitz_ratio=1.47,
        problem_seed=5000, steplength="inverse", schedule="geometric:0.95",
        selection="lipschitz", budget="epochs:100", batch_min=128, trajectories=50,
        out="table5.csv", **_CAPPED,
        arms=(Arm("identical", (("steplength", "global_scaled:1.28"),)),
              Arm("block_specific", (("steplength", "inverse"),)),
              Arm("block_specific_uniform", (("steplength", "inverse"), ("selection", "uniform")))),
        notes=_CAPPED_NOTES + (
            "block variances exp(s j/(n-1)) with s chosen to hit lipschitz_ratio",
            "batch floor 128 keeps 1/L_i steps stable on the first draws",
            "geometric b=0.95 taken from the best Table 2 row"))


def _preset_pl(arms, budget, schedule):
    return ExperimentConfig(
        problem="pl_quadratic", N=1000, d=20, n_blocks=4, lam=0.05, noise_sd=0.003,
        pl_mu=1.0, l_spread=4.0, problem_seed=0, steplength="pl_optimal", schedule=schedule,
        budget=budget, trajectories=30, out="pl.csv", arms=arms,
        notes=("separable quadratic, curvatures in [mu, 4 mu] with both ends attained",
               "sample noise sd 0.003 so the geometric phase is visible over 400 steps"))


def _preset_classification():
    N = 2000
    return ExperimentConfig(
        problem="sigmoid_ls", N=N, d=100, n_blocks=10, problem_seed=7, steplength="fixed:0.2",
        schedule="polynomial:1", budget="epochs:5", trajectories=10, out="classification.csv",
        arms=(Arm("const0.02N", (("schedule", f"constant:{int(0.02 * N)}"),)),
              Arm("const0.05N", (("schedule", f"constant:{int(0.05 * N)}"),)),
              Arm("linear", (("schedule", "polynomial:1"),)),
              Arm("quadratic", (("schedule", "power:1.0"),))),
        notes=("synthetic data unless data_path names a LIBSVM file",
               "linear and quadratic batches are (G+1) and (G+1)^2 for local clock G"))


PRESETS = {
    "table2": _preset_table2,
    "table3": _preset_table3,
    "table5": _preset_table5,
    "pl_geometric": lambda: dataclasses.replace(
        _preset_pl((), "iterations:400", "pl_geometric:0.5"), out="pl_geometric.csv"),
    "pl_polynomial": lambda: dataclasses.replace(
        _preset_pl((Arm("v1", (("schedule", "polynomial:1"),)),
                    Arm("v2", (("schedule", "polynomial:2"),))), "iterations:5000", "polynomial:1"),
        out="pl_polynomial.csv"),
    "delay": lambda: _preset_table3(
        out="delay.csv", delay_max=0,
        arms=tuple(Arm(f"delay{D}", (("delay_max", str(D)),)) for D in (0, 5, 20))),
    "classification": _preset_classification,
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg = PRESETS[name]()
    if overrides:
        cfg = parse_config(serialize(cfg), overrides)
    return cfg


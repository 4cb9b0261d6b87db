"""Command line entry point: ``asyncvr run | preset | rate-fit | optimum``."""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import AsyncVRError, ConfigError
from .metrics import fit_line


def _overrides(items):
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(item, "overrides are written key=value")
        out[key.strip()] = value.strip()
    return out


def _load(path, overrides=None):
    return harness.parse_config(Path(path).read_text(), overrides)


def cmd_run(args):
    ov = {}
    if args.seed is not None:
        ov["seed"] = args.seed
    cfg = _load(args.config, ov)
    harness.run_experiment(cfg, out=args.out)
    return 0


def cmd_preset(args):
    ov = _overrides(args.overrides)
    if args.out:
        ov["out"] = args.out
    cfg = harness.preset(args.name, **ov)
    if args.print_only:
        sys.stdout.write(harness.serialize(cfg))
        return 0
    harness.run_experiment(cfg)
    return 0


def cmd_rate_fit(args):
    header, data = harness.read_csv(args.file)
    for col in ("k", args.column):
        if col not in header:
            raise ConfigError("column", f"{col!r} not in {args.file} (have {', '.join(header)})")
    k = data[:, header.index("k")]
    values = data[:, header.index(args.column)]
    keep = np.isfinite(values)
    fit = fit_line(k[keep], values[keep], (args.k_from, args.k_to), args.scale)
    print(f"slope {fit.slope!r} intercept {fit.intercept!r} r2 {fit.r2!r} points {fit.points}")
    if args.scale == "semilog":
        print(f"contraction per iteration {float(np.exp(fit.slope))!r}")
    return 0


def cmd_optimum(args):
    cfg = _load(args.config)
    problem = harness.build_problem(cfg)
    if problem.kind == "pl_quadratic":
        F, certified = harness.optimum_value(problem, args.tol)
        print(f"F* {F!r} certified {certified} (closed form)")
        return 0
    opt = harness.reference_optimum(problem, tol=args.tol)
    print(f"F* {opt.F!r} certified {opt.certified} converged {opt.converged} "
          f"iterations {opt.iterations} |G| {opt.gmap_norm:.3g}")
    return 0 if opt.converged else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="asyncvr", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a named paper experiment")
    p.add_argument("name", choices=sorted(harness.PRESETS))
    p.add_argument("overrides", nargs="*", help="key=value settings applied on top")
    p.add_argument("--out")
    p.add_argument("--print", dest="print_only", action="store_true",
                   help="print the config instead of running it")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("rate-fit", help="fit log(value) against log(k) or k")
    p.add_argument("file")
    p.add_argument("--column", default="gap_mean")
    p.add_argument("--scale", choices=("loglog", "semilog"), default="loglog")
    p.add_argument("--from", dest="k_from", type=float, required=True)
    p.add_argument("--to", dest="k_to", type=float, required=True)
    p.set_defaults(func=cmd_rate_fit)

    p = sub.add_parser("optimum", help="compute the reference optimal value")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_optimum)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AsyncVRError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: sample, spectrum, smallball, rademacher, bounds, sweep, verify,
fit.  Global flags (--seed, --threads, --out, --format, --config) are accepted
by every subcommand.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys

import numpy as np

from . import bounds as bd
from . import distributions as dist
from . import experiments as ex
from . import rademacher as rad
from . import smallball as sb
from . import spectrum as sp
from .errors import ConfigError, LminlabError


def _global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    p.add_argument("--out", type=str, default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    p.add_argument("--config", type=str, default=None, help="config file path")


def _emit(pairs: dict, args) -> None:
    """Write a flat key->value record as csv rows or a json object."""
    if args.fmt == "json":
        text = json.dumps(pairs, indent=1) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return
    rows = [[k, v] for k, v in pairs.items()]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        w = csv.writer(sys.stdout)
        w.writerows(rows)


def _spec_from_args(args) -> dist.DistributionSpec:
    if args.config:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if not parser.read(args.config):
            raise ConfigError(f"cannot read config file {args.config}")
        if "distribution" not in parser:
            raise ConfigError("config lacks a [distribution] section")
        return dist.spec_from_config(dict(parser["distribution"]))
    if args.family is None or args.n is None:
        raise ConfigError("need --family and --n (or --config)")
    return dist.DistributionSpec(
        family=args.family,
        n=args.n,
        eta=args.eta,
        L=args.L,
        mixture_p=args.mixture_p,
    )


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=dist.FAMILIES, default=None)
    p.add_argument("--n", type=int, default=None, help="ambient dimension")
    p.add_argument("--eta", type=float, default=None, help="tail exponent surplus")
    p.add_argument("--L", type=float, default=None, help="declared tail constant")
    p.add_argument("--mixture-p", type=float, default=0.0, dest="mixture_p")


def cmd_sample(args) -> int:
    spec = _spec_from_args(args)
    if args.out is None:
        raise ConfigError("sample requires --out for the matrix file")
    seed = spec.seed if spec.seed is not None and args.seed == 0 else args.seed
    m = sp.assemble(spec, args.N, seed)
    m.save(args.out)
    print(f"wrote {args.N}x{spec.n} matrix to {args.out} (seed {seed})")
    return 0


def cmd_spectrum(args) -> int:
    m = sp.SampleMatrix.load(args.matrix)
    res = sp.lambda_extremes(m)
    out = {
        "N": m.N,
        "n": m.n,
        "lambda_min": res.lambda_min,
        "lambda_max": res.lambda_max,
        "method": res.method,
        "residual": res.residual,
    }
    if args.power:
        out["lambda_min_sq_power"] = sp.lambda_min_power(m)
    _emit(out, args)
    return 0


def cmd_smallball(args) -> int:
    spec = _spec_from_args(args)
    rng = np.random.default_rng(args.seed)
    samples = dist.sample_matrix(spec, args.samples, rng)
    u_grid = [float(tok) for tok in args.u_grid.replace(",", " ").split()]
    curve = sb.small_ball_curve(samples, u_grid, budget=args.budget, rng=rng)
    if args.out:
        curve.to_csv(args.out)
        print(f"wrote curve to {args.out}")
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["u", "q_upper", "q_lower", "dir_index", "stderr"])
        for u, qu, ql, di, se in zip(
            curve.u_grid, curve.upper, curve.lower, curve.dir_indices, curve.stderr()
        ):
            w.writerow([u, qu, ql, di, se])
    return 0


def cmd_rademacher(args) -> int:
    spec = _spec_from_args(args)
    rng = np.random.default_rng(args.seed)
    rows = dist.sample_matrix(spec, args.N, rng)
    est = rad.rademacher_linear(rows, draws=args.draws, rng=rng, method=args.method)
    _emit(
        {
            "value": est.value,
            "stderr": est.stderr,
            "draws": est.draws,
            "exact": est.exact,
            "upper_bound": rad.rademacher_upper(1.0, spec.n, args.N),
        },
        args,
    )
    return 0


def _constants_from_args(args) -> bd.ConstantSet:
    if args.config:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if parser.read(args.config) and "constants" in parser:
            return bd.ConstantSet.from_config(dict(parser["constants"]))
    return bd.ConstantSet()


def _require(args, names: tuple) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"--regime {args.regime} requires {', '.join(missing)}")


def cmd_bounds(args) -> int:
    k = _constants_from_args(args)
    if args.regime == "tail":
        _require(args, ("eta", "beta"))
        pred = bd.floor_regime(args.eta, args.L or 1.0, args.beta, k, args.N)
    elif args.regime == "basic":
        _require(args, ("tau", "q2tau", "rn"))
        pred = bd.basic_floor(args.tau, args.q2tau, args.rn, args.N)
    elif args.regime == "isomorphic":
        _require(args, ("n",))
        band = dist.CovarianceBand(a=args.a, A=args.A, B=args.B)
        pred = bd.isomorphic_floor(band, args.n, args.N, k)
    else:
        _require(args, ("tau", "q2tau", "n"))
        pred = bd.general_floor(args.tau, args.q2tau, args.A, args.n, args.N, k)
    d = pred.as_dict()
    d["constants"] = json.dumps(d["constants"])
    d["flags"] = ";".join(pred.flags)
    _emit(d, args)
    return 0


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep requires --config")
    cfg = ex.parse_config(args.config)
    result = ex.run_sweep(cfg, threads=args.threads)
    rows_path = cfg.outputs.rows or (args.out and args.out + ".rows.csv")
    summary_path = cfg.outputs.summary or (args.out and args.out + ".summary.csv")
    json_path = cfg.outputs.result or (args.out and args.out + ".json")
    if not any([rows_path, summary_path, json_path]):
        raise ConfigError("sweep needs output paths ([outputs] section or --out prefix)")
    if rows_path:
        result.rows_csv(rows_path)
        print(f"wrote {len(result.rows)} trial rows to {rows_path}")
    if summary_path:
        result.summary_csv(summary_path)
        print(f"wrote {len(result.summaries)} summaries to {summary_path}")
    if json_path:
        result.to_json(json_path)
        print(f"wrote result json to {json_path}")
    if result.failures:
        print(f"{len(result.failures)} trial(s) failed", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    report = ex.verify_suite(budget=args.budget)
    if args.fmt == "json":
        _emit(report.to_json_dict(), args)
    else:
        for c in report.checks:
            print(f"[{c.status.upper():7s}] {c.name}: {c.detail}")
        print(f"overall: {'PASS' if report.ok else 'FAIL'} (budget {report.budget})")
    return 0 if report.ok else 1


def cmd_fit(args) -> int:
    rows = []
    with open(args.rows, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "beta" not in cols or "deficit" not in cols:
            raise ConfigError(f"{args.rows} needs 'beta' and 'deficit' columns, has {cols}")
        for rec in reader:
            rows.append((float(rec["beta"]), float(rec["deficit"])))
    fit = ex.fit_exponent(rows, regime=args.regime)
    _emit(
        {
            "exponent": fit.exponent,
            "constant": fit.constant,
            "half_width": fit.half_width,
            "n_used": fit.n_used,
            "n_excluded": fit.n_excluded,
            "regime": fit.regime,
        },
        args,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lminlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a sample matrix and write the binary file")
    _add_spec_flags(p)
    p.add_argument("--N", type=int, required=True, help="row count")
    _global_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spectrum", help="extreme singular values of a matrix file")
    p.add_argument("--matrix", required=True, help="matrix file from 'sample'")
    p.add_argument("--power", action="store_true", help="also run the inverse-power path")
    _global_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("smallball", help="small-ball sandwich curve to CSV")
    _add_spec_flags(p)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--u-grid", default="0.1 0.2 0.4 0.8", dest="u_grid")
    p.add_argument("--budget", type=int, default=256)
    _global_flags(p)
    p.set_defaults(func=cmd_smallball)

    p = sub.add_parser("rademacher", help="Rademacher complexity of a fresh sample")
    _add_spec_flags(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--draws", type=int, default=rad.DEFAULT_DRAWS)
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    _global_flags(p)
    p.set_defaults(func=cmd_rademacher)

    p = sub.add_parser("bounds", help="evaluate a floor prediction from flags")
    p.add_argument("--regime", choices=("tail", "basic", "isomorphic", "general"), required=True)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--q2tau", type=float, default=None)
    p.add_argument("--rn", type=float, default=None)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--N", type=int, required=True)
    _global_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="run a beta sweep from a config file")
    _global_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle/invariant suite")
    p.add_argument("--budget", type=int, default=100)
    _global_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit a deficit scaling exponent from CSV rows")
    p.add_argument("--rows", required=True, help="CSV with beta and deficit columns")
    p.add_argument("--regime", choices=("eta-gt-2", "eta-eq-2", "eta-lt-2"), default="eta-gt-2")
    _global_flags(p)
    p.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LminlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line interface.

Subcommands: `analyze` (CSV of p-values and covariates -> weights,
decisions, diagnostics and plot data), `simulate` (power/FDR/FWER
campaigns to tidy CSV), `rankprob` (rank-probability tables), and
`validate` (desk-scale acceptance checks).

Exit codes: 0 success, 1 validation failure, 2 usage or input error.
All output files are byte-identical across runs with identical
configuration and seed; floats serialize with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fail_usage(msg):
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _prior_from_spec(spec):
    from .effects import Exponential, NormalPrior, PointMass, Uniform

    kind, _, rest = spec.partition(":")
    args = [float(v) for v in rest.split(",")] if rest else []
    try:
        if kind == "point":
            return PointMass(*args)
        if kind == "uniform":
            return Uniform(*args)
        if kind == "exp":
            return Exponential(*args)
        if kind == "normal":
            return NormalPrior(*args)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad prior spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown prior kind {kind!r}")


def cmd_analyze(args):
    from .pipeline import AnalysisOptions, TestCollection, run_analysis

    path = Path(args.input)
    if not path.exists():
        return _fail_usage(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in ("pvalue", "covariate") if c not in fields]
        if missing:
            return _fail_usage(f"missing required columns: {', '.join(missing)}")
        ids, pvals, covs = [], [], []
        bad_rows = []
        for i, row in enumerate(reader):
            try:
                p = float(row["pvalue"])
                c = float(row["covariate"])
            except ValueError:
                bad_rows.append(i + 2)
                continue
            if not 0.0 <= p <= 1.0:
                bad_rows.append(i + 2)
                continue
            pvals.append(p)
            covs.append(c)
            ids.append(row.get("id", str(i)))
    if bad_rows:
        shown = ", ".join(str(r) for r in bad_rows[:20])
        return _fail_usage(f"p-values outside [0,1] or unparsable at rows: {shown}")
    if not pvals:
        return _fail_usage("no data rows")

    collection = TestCollection(np.array(pvals), np.array(covs), tails=args.tails,
                                labels=ids)
    options = AnalysisOptions(
        seed=args.seed, mode=args.mode, mc_reps=args.mc_reps,
        use_boxcox=args.boxcox, n_groups=args.groups,
        bins_per_group=args.bins,
    )
    from .pipeline import METHODS

    if args.method not in METHODS:
        return _fail_usage(f"unknown method {args.method!r}")
    result = run_analysis(collection, args.method, args.alpha, options)

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    from .dcw import order_by_covariate

    perm = order_by_covariate(collection.pvalues, collection.covariates)
    rank_of = np.empty(collection.m, dtype=int)
    rank_of[perm] = np.arange(1, collection.m + 1)
    rows = [
        (ids[i], rank_of[i], result.weights.weights[i],
         result.adjusted_pvalues[i], int(result.rejected[i]))
        for i in range(collection.m)
    ]
    _write_csv(outdir / "weights.csv",
               ["id", "covariate_rank", "weight", "adjusted_p", "rejected"], rows)

    curve = result.diagnostics.pop("_rank_prob_curve", None)
    diag = {"schema_version": SCHEMA_VERSION}
    diag.update(_jsonable({k: v for k, v in result.diagnostics.items()
                           if not k.startswith("_")}))
    with open(outdir / "diagnostics.json", "w", encoding="utf-8") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=_fmt)
        fh.write("\n")

    order = np.argsort(rank_of)
    _write_csv(outdir / "plotdata_weights.csv", ["rank", "weight"],
               [(int(rank_of[i]), result.weights.weights[i]) for i in order])
    if curve is not None:
        _write_csv(outdir / "plotdata_rankprob.csv", ["rank", "probability"],
                   [(k + 1, curve[k]) for k in range(len(curve))])
    if args.format == "json":
        with open(outdir / "result.json", "w", encoding="utf-8") as fh:
            json.dump({
                "schema_version": SCHEMA_VERSION,
                "n_rejected": int(result.rejected.sum()),
                "method": result.method,
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"{result.method}: rejected {int(result.rejected.sum())} of "
          f"{collection.m} at alpha={args.alpha} ({args.mode})")
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def cmd_simulate(args):
    from .simulate import SimScenario, simulate_metrics

    if args.scenario:
        with open(args.scenario, encoding="utf-8") as fh:
            spec = json.load(fh)
    else:
        spec = {}
    spec.setdefault("m", args.m)
    spec.setdefault("pi0", args.pi0)
    spec.setdefault("effect_grid", args.effects)
    spec.setdefault("rho", args.rho)
    spec.setdefault("replications", args.replications)
    spec.setdefault("alpha", args.alpha)
    spec.setdefault("seed", args.seed)
    spec.setdefault("methods", args.methods)
    spec.setdefault("mode", args.mode)
    spec.setdefault("param_mode", args.param_mode)
    spec.setdefault("mc_reps", args.mc_reps)
    spec.setdefault("workers", args.threads)
    spec["effect_grid"] = tuple(spec["effect_grid"])
    spec["methods"] = tuple(spec["methods"])
    try:
        scenario = SimScenario(**spec)
    except (TypeError, ValueError) as exc:
        return _fail_usage(f"invalid scenario: {exc}")

    metrics = simulate_metrics(scenario)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    header = ["m", "pi0", "rho", "cv", "alpha", "mode", "effect", "method",
              "replications", "power", "power_se", "fdr", "fdr_se",
              "fwer", "fwer_se"]
    _write_csv(outdir / "metrics.csv", header,
               [[r[k] for k in header] for r in metrics.rows()])
    scenario_cols = ["m", "pi0", "rho", "cv", "alpha", "mode", "effect"]
    tidy_rows = [
        [r[c] for c in scenario_cols] + [r["method"], metric,
                                         r[metric], r[f"{metric}_se"]]
        for r in metrics.rows() for metric in ("power", "fdr", "fwer")
    ]
    _write_csv(outdir / "metrics_tidy.csv",
               scenario_cols + ["method", "metric", "value", "se"], tidy_rows)
    for metric in ("power", "fdr", "fwer"):
        rows = [
            (r["effect"], r["method"], r[metric], r[f"{metric}_se"])
            for r in metrics.rows()
        ]
        _write_csv(outdir / f"plotdata_{metric}.csv",
                   ["effect", "method", metric, "se"], rows)
    print(f"wrote {outdir / 'metrics.csv'} ({len(metrics.rows())} rows)")
    return 0


def cmd_rankprob(args):
    from .effects import TestPopulation
    from .rankprob import (
        McConfig,
        rank_prob_bruteforce,
        rank_prob_exact_mc,
        rank_prob_normal_approx,
    )

    try:
        prior = _prior_from_spec(args.prior) if args.m0 < args.m else None
    except ValueError as exc:
        return _fail_usage(str(exc))
    try:
        pop = TestPopulation(args.m, args.m0, args.m - args.m0, prior)
        mc = McConfig(args.mc_reps, args.seed)
        exact = rank_prob_exact_mc(pop, args.focal_effect, args.null_focal, mc)
        approx = rank_prob_normal_approx(pop, args.focal_effect, args.null_focal, mc)
        brute = None
        if args.bruteforce > 0:
            brute = rank_prob_bruteforce(
                pop, args.focal_effect, args.null_focal, args.bruteforce, args.seed
            )
    except ValueError as exc:
        return _fail_usage(str(exc))

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    header = ["k", "exact_mc", "exact_mc_se", "normal_approx", "normal_approx_se",
              "abs_deviation"]
    rows = []
    for i in range(args.m):
        row = [i + 1, exact.probabilities[i], exact.std_errors[i],
               approx.probabilities[i], approx.std_errors[i],
               abs(exact.probabilities[i] - approx.probabilities[i])]
        if brute is not None:
            row.append(brute.probabilities[i])
        rows.append(row)
    if brute is not None:
        header.append("bruteforce")
    _write_csv(outdir / "rankprob.csv", header, rows)
    print(f"wrote {outdir / 'rankprob.csv'}")
    return 0


def cmd_validate(args):
    from .validate import run_checks

    ok, _ = run_checks(seed=args.seed)
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="covweight",
        description="Covariate-informed p-value weighting for multiple testing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze a p-value/covariate CSV")
    pa.add_argument("--input", required=True)
    pa.add_argument("--output-dir", default="covweight_out")
    pa.add_argument("--method", default="crw-cont",
                    help="crw-cont, crw-bin, gcw, gcw2, dcw, bh, bonferroni, bw")
    pa.add_argument("--alpha", type=float, default=0.05)
    pa.add_argument("--tails", type=int, choices=(1, 2), default=1)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--mode", choices=("fdr", "fwer"), default="fdr")
    pa.add_argument("--threads", type=int, default=1)
    pa.add_argument("--mc-reps", type=int, default=10_000)
    pa.add_argument("--groups", type=int, default=None)
    pa.add_argument("--bins", type=int, default=20)
    pa.add_argument("--boxcox", action="store_true",
                    help="Box-Cox transform covariates in the effect regression")
    pa.add_argument("--format", choices=("csv", "json"), default="csv")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="run a simulation campaign")
    ps.add_argument("--scenario", help="JSON file with SimScenario fields")
    ps.add_argument("--output-dir", default="covweight_sim")
    ps.add_argument("--m", type=int, default=1000)
    ps.add_argument("--pi0", type=float, default=0.9)
    ps.add_argument("--effects", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ps.add_argument("--rho", type=float, default=0.0)
    ps.add_argument("--replications", type=int, default=200)
    ps.add_argument("--alpha", type=float, default=0.05)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--methods", nargs="+",
                    default=["crw-cont", "bh"])
    ps.add_argument("--mode", choices=("fdr", "fwer"), default="fdr")
    ps.add_argument("--param-mode", choices=("oracle", "estimated"),
                    default="oracle")
    ps.add_argument("--mc-reps", type=int, default=10_000)
    ps.add_argument("--threads", type=int, default=1)
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("rankprob", help="tabulate rank probabilities")
    pr.add_argument("--m", type=int, required=True)
    pr.add_argument("--m0", type=int, required=True)
    pr.add_argument("--prior", default="point:2.0",
                    help="point:eps | uniform:a,b | exp:rate | normal:mean,sd")
    pr.add_argument("--focal-effect", type=float, default=0.0)
    pr.add_argument("--null-focal", action="store_true")
    pr.add_argument("--mc-reps", type=int, default=100_000)
    pr.add_argument("--bruteforce", type=int, default=0,
                    help="add a brute-force column with this many samples")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--output-dir", default="covweight_rankprob")
    pr.set_defaults(func=cmd_rankprob)

    pv = sub.add_parser("validate", help="run the desk-scale acceptance checks")
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        return _fail_usage(str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface. Every command prints JSON (or CSV for tables) with a run manifest."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from crossscreen import __version__
from crossscreen.errors import InputError
from crossscreen.multitest import PROCEDURES, bonferroni
from crossscreen.pairdata import load_pairs
from crossscreen.power import (
    bonferroni_power,
    cross_screen_power,
    naive_selection_prob,
    ttest_pairs_required,
)
from crossscreen.scores import ScoreSpec, compute_scores, parse_stat, rank_score_table
from crossscreen.screening import ScreenConfig, cross_screen, nonrandom_cross_screen, single_screen
from crossscreen.sensbound import TAILS, expected_pvalue, pvalue_upper, sensitivity_value, size_bound
from crossscreen.simulation import DEFAULT_METHODS, SimConfig, simulate


def _sig(obj):
    """Round every float to 6 significant digits for emission."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.6g}")
    if isinstance(obj, (np.floating,)):
        return _sig(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sig(v) for v in obj]
    return obj


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    out = {"subcommand": args.command, "flags": flags, "version": __version__}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "data", None):
        out["input_digest"] = "sha256:" + _digest(args.data)
    return out


def _emit(args, result: dict, table: list[dict] | None = None, out=None):
    out = out if out is not None else sys.stdout
    if args.format == "csv":
        if table is None:
            raise InputError(f"{args.command} has no tabular output; use --format json")
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(_manifest(args), sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=list(table[0]) if table else [], lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow(_sig(row))
        out.write(buf.getvalue())
        return
    payload = {"manifest": _manifest(args), "result": _sig(result)}
    out.write(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def _stats(args) -> tuple[ScoreSpec, ...]:
    return tuple(parse_stat(s) for s in (args.stat or ["wilcoxon"]))


def _selection(text: str):
    if text == "ordered":
        return "ordered"
    name, _, k = text.partition(":")
    if name == "top":
        try:
            return int(k)
        except ValueError:
            pass
    raise InputError(f"--select must be 'ordered' or 'top:k', got {text!r}")


def _screen_config(args) -> ScreenConfig:
    return ScreenConfig(
        candidates=_stats(args),
        gamma=args.gamma,
        alpha=args.alpha,
        seed=args.seed,
        selection=_selection(args.select),
        procedure=args.mtp,
        method=args.method,
        planning_gamma=args.planning_gamma,
        rank_by=args.rank_by,
    )


def cmd_analyze(args):
    m = load_pairs(args.data)
    specs = _stats(args)
    K = m.n_outcomes
    factor = 2 * K * len(specs)
    rows = []
    for gamma in args.gamma:
        for k, name in enumerate(m.outcome_names):
            y = m.values[:, k]
            row = {"outcome": name, "gamma": gamma}
            best = 1.0
            for spec in specs:
                sv = compute_scores(np.abs(y), spec)
                for tail in TAILS:
                    p = pvalue_upper(y, spec, gamma, tail, args.method, scores=sv)
                    row[f"p_{tail}_{spec.label()}"] = p
                    best = min(best, p)
            row["adjusted_p"] = bonferroni([best], factor, args.alpha)[0].adjusted_p
            row["rejected"] = row["adjusted_p"] <= args.alpha
            rows.append(row)
    gstar = {}
    for k, name in enumerate(m.outcome_names):
        y = m.values[:, k]
        gstar[name] = max(
            sensitivity_value(y, spec, args.alpha / factor, tail, args.method) for spec in specs for tail in TAILS
        )
    _emit(args, {"bonferroni_factor": factor, "rows": rows, "gamma_star": gstar}, rows)


def cmd_cross_screen(args):
    m = load_pairs(args.data)
    config = _screen_config(args)
    if args.labels:
        labels = [ln.strip() for ln in Path(args.labels).read_text(encoding="utf-8").splitlines() if ln.strip()]
        res = nonrandom_cross_screen(m, labels, config)
    else:
        res = cross_screen(m, config)
    d = res.to_dict()
    table = [
        {"outcome": o, "adjusted_p": p, "in_r1": o in d["r1"], "in_r2": o in d["r2"]}
        for o, p in d["adjusted_p"].items()
    ]
    _emit(args, d, table)


def cmd_single_screen(args):
    m = load_pairs(args.data)
    res = single_screen(m, args.fraction, _screen_config(args))
    d = res.to_dict()
    table = [{"outcome": o, "adjusted_p": p, "rejected": o in d["rejected"]} for o, p in d["adjusted_p"].items()]
    _emit(args, d, table)


def cmd_simulate(args):
    config = SimConfig(
        K=args.k,
        I=args.i,
        tau1=args.tau1,
        tau2=args.tau2,
        error_dist=args.dist,
        gamma=args.gamma,
        alpha=args.alpha,
        replicates=args.replicates,
        master_seed=args.seed,
        methods=tuple(args.methods or DEFAULT_METHODS),
        planning_fraction=args.fraction,
        procedure=args.mtp,
    )
    res = simulate(config, workers=args.workers)
    table = [
        {"K": config.K, "I": config.I, "tau1": config.tau1, "tau2": config.tau2, "method": r.method,
         "statistic": r.statistic, "H1": r.h1, "H2": r.h2, "H12": r.h12, "se_H1": r.se_h1}
        for r in res.rows
    ]
    _emit(args, res.to_dict(), table)


def cmd_power(args):
    if args.kind == "asymptotic":
        rows = [
            {"ncp": ncp, "K": K, "bonferroni": bonferroni_power(ncp, K, args.alpha),
             "cross_screen": cross_screen_power(ncp, args.alpha)}
            for ncp in args.ncp
            for K in args.k
        ]
        _emit(args, {"rows": rows}, rows)
    elif args.kind == "ttest-size":
        cmd_ttest_size(args)
    else:
        rows = [
            {"tau": t, "K": K, "I": args.i, "probability": naive_selection_prob(t, K, args.i)}
            for t in args.tau
            for K in args.k
        ]
        _emit(args, {"rows": rows}, rows)


def cmd_ttest_size(args):
    rows = [
        {"tau": t, "K": K, "pairs": ttest_pairs_required(t, K, args.power, args.alpha, args.rule)}
        for t in args.tau
        for K in args.k
    ]
    _emit(args, {"rows": rows}, rows)


def cmd_epv(args):
    spec = parse_stat(args.stat)
    rows = []
    for n in args.i:
        q = rank_score_table(n, spec)
        s1, s2 = float(q.sum()), float(np.dot(q, q))
        rows.append({
            "gamma_true": args.gamma_true,
            "gamma": args.gamma,
            "I": n,
            "statistic": spec.label(),
            "size_bound": size_bound(args.gamma_true, args.gamma, s1, s2, args.alpha, args.spread),
            "epv": expected_pvalue(args.gamma_true, args.gamma, s1, s2),
        })
    _emit(args, {"rows": rows}, rows)


def _add_common(p, seed=False):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--alpha", type=float, default=0.05)
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _add_screen_flags(p):
    p.add_argument("data", help="CSV of pair differences")
    _add_common(p, seed=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--stat", action="append", help="repeat for several candidates (default wilcoxon)")
    p.add_argument("--select", default="ordered", help="ordered | top:k")
    p.add_argument("--mtp", choices=PROCEDURES, default="fixed")
    p.add_argument("--method", choices=("normal", "exact"), default="normal")
    p.add_argument("--planning-gamma", type=float, default=None)
    p.add_argument("--rank-by", choices=("gamma_star", "pvalue"), default="gamma_star")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossscreen", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="Bonferroni sensitivity analysis of every outcome on all pairs")
    p.add_argument("data")
    _add_common(p)
    p.add_argument("--gamma", type=float, action="append", default=None)
    p.add_argument("--stat", action="append")
    p.add_argument("--method", choices=("normal", "exact"), default="normal")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("cross-screen", help="random (or covariate) cross-screening")
    _add_screen_flags(p)
    p.add_argument("--labels", help="file with one binary pair label per line; splits by covariate")
    p.set_defaults(func=cmd_cross_screen)

    p = sub.add_parser("single-screen", help="plan on a small sample, test on the rest")
    _add_screen_flags(p)
    p.add_argument("--fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_single_screen)

    p = sub.add_parser("simulate", help="Monte Carlo power study")
    _add_common(p, seed=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--i", type=int, default=250)
    p.add_argument("--tau1", type=float, default=0.5)
    p.add_argument("--tau2", type=float, default=0.0)
    p.add_argument("--dist", default="normal", help="normal | t:df")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--methods", nargs="+", help="method:statistic, e.g. cross_screen:adaptive")
    p.add_argument("--fraction", type=float, default=0.2, help="single-screening planning fraction")
    p.add_argument("--mtp", choices=("fixed", "fallback", "recycle", "holm", "bonferroni"), default="fixed")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("power", help="analytic power calculations")
    psub = p.add_subparsers(dest="kind", required=True)
    q = psub.add_parser("asymptotic")
    _add_common(q)
    q.add_argument("--ncp", type=float, nargs="+", required=True)
    q.add_argument("--k", type=int, nargs="+", default=[1])
    q = psub.add_parser("ttest-size")
    _add_common(q)
    _add_ttest_flags(q)
    q = psub.add_parser("naive")
    _add_common(q)
    q.add_argument("--tau", type=float, nargs="+", required=True)
    q.add_argument("--k", type=int, nargs="+", required=True)
    q.add_argument("--i", type=int, required=True)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("epv", help="size bound and expected P-value when Gamma is set too high")
    _add_common(p)
    p.add_argument("--gamma-true", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--i", type=int, nargs="+", required=True)
    p.add_argument("--stat", default="wilcoxon")
    p.add_argument("--spread", choices=("assumed", "true"), default="assumed")
    p.set_defaults(func=cmd_epv)

    p = sub.add_parser("ttest-size", help="pairs for a Bonferroni-corrected t-test")
    _add_common(p)
    _add_ttest_flags(p)
    p.set_defaults(func=cmd_ttest_size)
    return parser


def _add_ttest_flags(p):
    p.add_argument("--tau", type=float, nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", default=[1])
    p.add_argument("--power", type=float, default=0.8)
    p.add_argument("--rule", choices=("ceil", "round"), default="ceil")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    if args.command == "analyze" and not args.gamma:
        args.gamma = [1.0]
    try:
        args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"crossscreen: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"crossscreen: internal error: {exc!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

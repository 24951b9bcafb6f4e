"""Command-line interface: calibrate, predict, evaluate, benchmark, synth, oracle-check."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .conformal import (
    CalibratedPredictor,
    ConformalConfig,
    METHODS,
    calibration_draws,
    calibrate,
    inference_draws,
    predict,
    required_rank,
)
from .evaluation import Dataset, MetricReport, MethodResult, average_complexity, average_size, coverage, generate_synthetic, oracle_check, run_benchmark
from .files import DataFileError, read_hierarchy, read_labels, read_prediction_lines, read_probs, write_hierarchy, write_labels, write_probs
from .hierarchy import HierarchyError
from .probmodel import ProbabilityError, views_from_matrix

DEFAULT_METHODS = "lac,nps,aps,ncrsvp,crsvp,ncrsvp-1,crsvp-1,ncrsvp-3,crsvp-3"


class CliError(Exception):
    codes = {"usage": 2, "data": 3, "numeric": 4, "oracle": 1}

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise CliError("usage", f"--{n.replace('_', '-')} is required for {args.command}")


def _config(args) -> ConformalConfig:
    try:
        return ConformalConfig(alpha=args.alpha, method=args.method, r=args.r, randomized=not args.naive,
                               allow_empty=not args.no_empty, seed=args.seed)
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc


def _write(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_calibrate(args) -> None:
    _need(args, "hierarchy", "probs", "labels")
    config = _config(args)
    h = read_hierarchy(args.hierarchy)
    probs = read_probs(args.probs, h)
    labels = read_labels(args.labels, h)
    if len(labels) != len(probs):
        raise CliError("data", f"{len(probs)} probability rows but {len(labels)} labels")
    views = views_from_matrix(h, probs)
    u = calibration_draws(config, len(views), args.fixed_u)
    pred = calibrate(h, views, labels, config, u)
    pred = CalibratedPredictor(pred.config, pred.tau_star, pred.n_cal, K=h.K)
    n = len(views)
    print(f"N={n} m={required_rank(n, config.alpha)} tau_star={'inf' if pred.tau_star == float('inf') else repr(pred.tau_star)}")
    _write(args.out, pred.to_json() + "\n")


def cmd_predict(args) -> None:
    _need(args, "hierarchy", "probs", "predictor")
    h = read_hierarchy(args.hierarchy)
    try:
        pred = CalibratedPredictor.from_json(Path(args.predictor).read_text())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError("data", f"cannot load predictor {args.predictor}: {exc}") from exc
    if pred.K is not None and pred.K != h.K:
        raise CliError("data", f"predictor was calibrated for K={pred.K}, hierarchy has K={h.K}")
    probs = read_probs(args.probs, h)
    views = views_from_matrix(h, probs)
    if args.seed is not None:
        config = ConformalConfig(**{**pred.config.__dict__, "seed": args.seed})
        pred = CalibratedPredictor(config, pred.tau_star, pred.n_cal, pred.K)
    u = inference_draws(pred.config, len(views), args.fixed_u)
    lines = []
    for p, ui in zip(views, u):
        out = predict(h, p, pred, float(ui))
        lines.append(json.dumps({
            "classes": [h.class_names[c] for c in out.classes],
            "nodes": [h.names[v] for v in out.cover],
            "size": out.size,
            "repr_complexity": out.complexity,
        }))
    _write(args.out, "".join(line + "\n" for line in lines))


def _report_files(report: MetricReport, out) -> None:
    if out is None:
        sys.stdout.write(report.to_csv())
        return
    out = Path(out)
    out.write_text(report.to_csv())
    out.with_suffix(".json").write_text(report.to_json() + "\n")


def cmd_evaluate(args) -> None:
    _need(args, "hierarchy", "predictions", "labels")
    h = read_hierarchy(args.hierarchy)
    preds = read_prediction_lines(args.predictions, h)
    labels = read_labels(args.labels, h)
    if len(preds) != len(labels):
        raise CliError("data", f"{len(preds)} predictions but {len(labels)} labels")
    res = MethodResult(args.name, [coverage(preds, labels)], [average_size(preds)], [average_complexity(h, preds)])
    _report_files(MetricReport({args.name: res}, 1, None, 0, len(labels)), args.out)


def cmd_benchmark(args) -> None:
    if args.hierarchy:
        _need(args, "probs", "labels")
        h = read_hierarchy(args.hierarchy)
        probs = read_probs(args.probs, h)
        labels = read_labels(args.labels, h)
        if len(labels) != len(probs):
            raise CliError("data", f"{len(probs)} probability rows but {len(labels)} labels")
        data = Dataset(h, probs, np.array(labels))
    else:
        data = generate_synthetic(args.K, args.arity, args.n, args.concentration, args.seed)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        report = run_benchmark(data, methods, args.alpha, args.resamples, args.seed, args.n_cal, not args.no_empty)
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc
    _report_files(report, args.out)


def cmd_synth(args) -> None:
    _need(args, "out")
    data = generate_synthetic(args.K, args.arity, args.n, args.concentration, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_hierarchy(data.hierarchy, out / "hierarchy.json")
    write_probs(data.probs, data.hierarchy, out / "probs.csv")
    write_labels(data.labels, data.hierarchy, out / "labels.txt")
    print(f"wrote {len(data)} instances over K={data.hierarchy.K} classes to {out}")


def cmd_oracle_check(args) -> None:
    rep = oracle_check(args.K, args.trials, args.r_max, args.seed)
    print(f"{rep.matches}/{rep.trials} exact matches ({rep.comparisons} comparisons)")
    if rep.mismatches:
        for m in rep.mismatches[:10]:
            print("mismatch trial={} r={} omega={} prune={} dp={} oracle={}".format(*m))
        raise CliError("oracle", f"{len(rep.mismatches)} mismatches between DP and brute force")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hiercp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, method=True):
        p.add_argument("--hierarchy")
        p.add_argument("--probs")
        p.add_argument("--labels")
        p.add_argument("--out")
        p.add_argument("--seed", type=int, default=0)
        if method:
            p.add_argument("--method", choices=METHODS, default="crsvp")
            p.add_argument("--alpha", type=float, default=0.1)
            p.add_argument("--r", type=int)
            p.add_argument("--naive", action="store_true", help="deterministic variant (no randomization)")
            p.add_argument("--no-empty", action="store_true", help="never return the empty set")
            p.add_argument("--fixed-u", type=float, help="use this u for every instance instead of seeded draws")

    p = sub.add_parser("calibrate", help="compute the conformal threshold")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="set-valued predictions from a saved predictor")
    p.add_argument("--hierarchy")
    p.add_argument("--probs")
    p.add_argument("--predictor")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--fixed-u", type=float)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="coverage, size and complexity of saved predictions")
    p.add_argument("--hierarchy")
    p.add_argument("--predictions")
    p.add_argument("--labels")
    p.add_argument("--name", default="predictions")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="resampled comparison of several methods")
    p.add_argument("--hierarchy")
    p.add_argument("--probs")
    p.add_argument("--labels")
    p.add_argument("--methods", default=DEFAULT_METHODS)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--resamples", type=int, default=20)
    p.add_argument("--n-cal", type=int)
    p.add_argument("--no-empty", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--concentration", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--concentration", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle-check", help="ancestor DP versus brute force on random trees")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--r-max", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except CliError as exc:
        print(f"error[{exc.kind}]: {exc}", file=sys.stderr)
        return CliError.codes[exc.kind]
    except ProbabilityError as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return 4
    except (HierarchyError, DataFileError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

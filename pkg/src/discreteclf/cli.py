"""Command-line interface.

Commands: ``train``, ``cv``, ``sweep``, ``reduce``, ``bounds`` and ``render``.
Exit codes: 0 success, 1 certification failure, 2 invalid configuration or
data, 3 infeasible program, 4 limit reached without any model.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bounds import (
    density_table,
    kth_margin_lambda,
    l0_hypothesis_count,
    occam_gap,
    write_density_csv,
)
from .models import RENDER_FORMATS, TrainedModel, render
from .reduction import ReductionConfig, epsilon_from_feasible, reduce, relaxation_optimum
from .training import (
    CertificationError,
    ConfigError,
    InfeasibleError,
    NoIncumbentError,
    _coef_set,
    _constraints,
    _penalty,
    _weights,
    cross_validate,
    load_config,
    load_raw,
    prepare_data,
    resolve_config,
    sweep_regularization,
    train,
    write_rows_csv,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NO_INCUMBENT = 4


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON run configuration")
    p.add_argument("--data", help="CSV data file (overrides the config)")
    p.add_argument("--schema", help="schema sidecar (overrides the config)")
    p.add_argument("--label", help="label column (overrides the schema)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--time-limit", type=float, help="solver time limit in seconds per solve")
    p.add_argument("--out-dir", default=".", help="directory for output files (default: current)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discreteclf", description="Train interpretable discrete linear classifiers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _shared(p)
    p.add_argument("--format", choices=RENDER_FORMATS, help="rendering written to model.txt")

    p = sub.add_parser("cv", help="stratified cross-validation plus a final model")
    _shared(p)
    p.add_argument("--folds", type=int, help="number of folds (overrides cv.folds)")

    p = sub.add_parser("sweep", help="train over a list of C0 values")
    _shared(p)
    p.add_argument("--c0", type=float, nargs="*", help="C0 values (overrides sweep.C0)")
    p.add_argument("--grid", type=int, help="use this many log-spaced C0 values over the meaningful range")

    p = sub.add_parser("reduce", help="report which examples can be removed before training")
    _shared(p)
    p.add_argument("--width", type=float, help="level-set width (default: derived from a heuristic model)")

    p = sub.add_parser("bounds", help="resolution, counting and generalization bounds")
    p.add_argument("what", choices=("resolution", "density", "occam", "l0-count"))
    p.add_argument("--data", help="CSV data file (resolution)")
    p.add_argument("--schema", help="schema sidecar (resolution)")
    p.add_argument("--label", help="label column (resolution)")
    p.add_argument("--rho", type=float, nargs="+", help="reference coefficients without intercept (resolution)")
    p.add_argument("--k", type=int, default=1, help="margin rank (resolution)")
    p.add_argument("--P", type=int, nargs="+", default=[1, 2, 3], help="dimensions (density, l0-count)")
    p.add_argument("--Lambda", type=int, nargs="+", default=[1, 2, 5, 10], help="coefficient bounds (density, l0-count)")
    p.add_argument("--N", type=int, default=1000, help="sample size (density, occam)")
    p.add_argument("--delta", type=float, default=0.01, help="confidence level (density, occam)")
    p.add_argument("--count", type=int, help="hypothesis count (occam)")
    p.add_argument("--C0", type=float, default=0.01, help="L0 price (l0-count)")
    p.add_argument("--out-dir", default=".", help="directory for output files (default: current)")

    p = sub.add_parser("render", help="render a saved model")
    p.add_argument("--model", required=True, help="model.json written by train")
    p.add_argument("--format", choices=RENDER_FORMATS, default="scoring-table")
    return parser


def _config(args: argparse.Namespace) -> dict[str, Any]:
    doc = load_config(args.config) if getattr(args, "config", None) else {}
    over: dict[str, Any] = {"data": args.data, "schema": args.schema, "label": args.label, "seed": args.seed}
    cfg = resolve_config(doc, **over)
    if args.time_limit is not None:
        cfg["solver"]["time_limit"] = float(args.time_limit)
    return cfg


def _out(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _default_format(model: TrainedModel) -> str:
    return "mofn-table" if model.family == "mofn" else "scoring-table"


def _metrics_csv(path: Path, model: TrainedModel) -> None:
    row = {**{k: v for k, v in model.metrics.items()}, **{f"solve_{k}": v for k, v in model.solve.items()}}
    write_rows_csv(path, [row])


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = _out(args)
    outcome = train(cfg)
    model = outcome.model
    model.save(out / "model.json")
    _metrics_csv(out / "metrics.csv", model)
    text = render(model, args.format or _default_format(model))
    (out / "model.txt").write_text(text)
    if outcome.benders is not None:
        outcome.benders.trace.to_csv(out / "benders_trace.csv")
    if outcome.reduction is not None:
        outcome.reduction.to_csv(out / "reduction_report.csv")
    sys.stdout.write(text)
    gap = model.solve.get("gap")
    sys.stdout.write(
        f"status: {model.solve.get('status')}  gap: {gap:.4g}  training error: {model.metrics['error']:.4f}  "
        f"size: {model.model_size}\n"
    )
    return EXIT_OK


def cmd_cv(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = _out(args)
    res = cross_validate(cfg, folds=args.folds)
    res.to_csv(out / "cv_folds.csv")
    (out / "cv_summary.json").write_text(json.dumps(res.summary, indent=2, sort_keys=True) + "\n")
    if res.final is not None:
        res.final.model.save(out / "model.json")
        (out / "model.txt").write_text(render(res.final.model, _default_format(res.final.model)))
    s = res.summary
    sys.stdout.write(
        f"test error {100 * s['test_error_mean']:.1f} ± {100 * s['test_error_std']:.1f}%  "
        f"train error {100 * s['train_error_mean']:.1f} ± {100 * s['train_error_std']:.1f}%  "
        f"model size median {s['model_size_median']:g} (min {s['model_size_min']}, max {s['model_size_max']})  "
        f"largest gap {s['max_gap']:.3g}\n"
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = _out(args)
    values = args.c0
    if args.grid:
        raw, _, _ = load_raw(cfg)
        design, _ = prepare_data(cfg, raw)
        lo, hi = 1.0 / (design.N * design.P), 1.0 - 1.0 / design.N
        values = list(np.geomspace(lo, hi, args.grid))
    rows = sweep_regularization(cfg, values)
    write_rows_csv(out / "path.csv", rows)
    for r in rows:
        sys.stdout.write(f"C0={r['C0']:.6g}  train={r['train_error']:.4f}  test={r['test_error']:.4f}  size={r['model_size']}\n")
    return EXIT_OK


def cmd_reduce(args: argparse.Namespace) -> int:
    from .formulation import build_program
    from .heuristics import local_search

    cfg = _config(args)
    out = _out(args)
    raw, _, _ = load_raw(cfg)
    design, _ = prepare_data(cfg, raw)
    L = _coef_set(cfg, design) if cfg["family"] != "mofn" else None
    ip = build_program(design, _penalty(cfg, design), L, _weights(cfg, design), _constraints(cfg, design), cfg.get("margin"))
    width = args.width
    if width is None:
        assert ip.problem is not None
        zero = np.array([ip.problem.L.nearest(j, 0.0) for j in range(ip.problem.n_coef)])
        _, f_hat = local_search(ip.problem, zero, time_limit=float(cfg["solver"]["time_limit"]))
        width = epsilon_from_feasible(f_hat, relaxation_optimum(ip))
    res = reduce(ip, design, ReductionConfig(float(width)))
    res.to_csv(out / "reduction_report.csv")
    sys.stdout.write(
        f"removed {res.removed.size} of {design.N} examples at width {width:.6g} "
        f"(proxy optimum {res.proxy_objective:.6g})\n"
    )
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    if args.what == "resolution":
        if not args.rho or not args.data:
            raise ConfigError("bounds resolution: --rho and --data are required")
        cfg = resolve_config({}, data=args.data, schema=args.schema, label=args.label)
        raw, _, _ = load_raw(cfg)
        r = kth_margin_lambda(args.rho, raw, args.k)
        if r.Lambda is None:
            why = "an example lies on the reference hyperplane" if r.zero_margin else "k leaves a single example"
            sys.stdout.write(f"no finite bound: {why}\n")
        else:
            sys.stdout.write(
                f"Lambda = {r.Lambda} (needs > {r.ratio:.6g}); rounding loses at most {r.max_extra_errors} "
                f"training examples. The bound covers feature coefficients only, not the intercept.\n"
            )
        return EXIT_OK
    if args.what == "density":
        out.mkdir(parents=True, exist_ok=True)
        rows = density_table(args.P, args.Lambda, args.N, args.delta)
        write_density_csv(out / "density.csv", rows)
        for r in rows:
            sys.stdout.write(f"P={r['P']} Lambda={r['Lambda']} count={r['count']} density={r['density']:.4f}\n")
        return EXIT_OK
    if args.what == "occam":
        if args.count is None:
            raise ConfigError("bounds occam: --count is required")
        sys.stdout.write(f"{occam_gap(args.count, args.N, args.delta):.6g}\n")
        return EXIT_OK
    for P in args.P:
        for lam in args.Lambda:
            sys.stdout.write(f"P={P} Lambda={lam} C0={args.C0:g} count={l0_hypothesis_count(P, lam, args.C0)}\n")
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    try:
        model = TrainedModel.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"model: cannot read {args.model}: {exc}") from exc
    sys.stdout.write(render(model, args.format))
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "reduce": cmd_reduce,
    "bounds": cmd_bounds,
    "render": cmd_render,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except NoIncumbentError as exc:
        sys.stderr.write(f"no model: {exc}\n")
        return EXIT_NO_INCUMBENT
    except CertificationError as exc:
        sys.stderr.write(f"certification failed: {exc}\n")
        return EXIT_FAILURE
    except ValueError as exc:
        # configuration, data, value-set, formulation and bound errors all derive from ValueError
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

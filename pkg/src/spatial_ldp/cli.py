"""Command-line entry point: ``spatial-ldp {generate,run,sweep,geometry}``.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import BBox, CsvFormatError, DatasetSpec, generate, write_points_csv
from .estimation import EmConfig
from .experiments import SWEEP_AXES, ConfigError, ExperimentConfig, run_experiment, run_sweep, write_sweep
from .geometry import closed_form_check

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _seeds(text):
    """``0,1,2`` or a range ``0-9``."""
    if "-" in text and "," not in text:
        lo, hi = (int(v) for v in text.split("-", 1))
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _bbox(text):
    if text is None:
        return None
    vals = _floats(text)
    if len(vals) != 4:
        raise ConfigError("--bbox needs x_min,y_min,x_max,y_max")
    return BBox(*vals)


def _dataset_args(p):
    p.add_argument("--dataset", default="normal", help="normal, szipf, mnormal or csv")
    p.add_argument("--n", type=int, default=50_000, help="number of points for synthetic data")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--path", help="input CSV for --dataset csv")
    p.add_argument("--bbox", help="x_min,y_min,x_max,y_max")
    p.add_argument("--centered-mnormal", action="store_true", help="put all MNormal blocks at the origin")


def _dataset(args) -> DatasetSpec:
    return DatasetSpec(
        kind=args.dataset,
        n=args.n,
        rho=args.rho,
        bbox=_bbox(args.bbox),
        path=args.path,
        centered_mnormal=args.centered_mnormal,
    )


def _experiment_args(p):
    _dataset_args(p)
    p.add_argument("--mechanism", default="dam", choices=["dam", "huem", "grr"])
    p.add_argument("--epsilon", type=float, default=3.5)
    p.add_argument("--d", type=int, default=5)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--b", type=float, help="disk radius in cells")
    group.add_argument("--b-mult", type=float, default=1.0, help="disk radius as a multiple of the optimal radius")
    p.add_argument("--seeds", default="0-9", help="comma list or inclusive range, e.g. 0-9")
    p.add_argument("--metric", default="exact-w2", choices=["exact-w2", "sinkhorn-w2", "sliced-w1"])
    p.add_argument("--em-smoothing", default="off", choices=["on", "off"])
    p.add_argument("--em-tolerance", type=float, default=1e-6)
    p.add_argument("--em-max-iterations", type=int, default=10_000)
    p.add_argument("--em-acceleration", default="none", choices=["none", "overrelaxed"])
    p.add_argument("--out", help="output path (JSON for run, CSV+JSON stem for sweep)")


def _config(args) -> ExperimentConfig:
    em = EmConfig(
        max_iterations=args.em_max_iterations,
        tolerance=args.em_tolerance,
        smoothing="binomial" if args.em_smoothing == "on" else "none",
        acceleration=args.em_acceleration,
    )
    return ExperimentConfig(
        dataset=_dataset(args),
        mechanism=args.mechanism,
        epsilon=args.epsilon,
        d=args.d,
        b=args.b,
        b_mult=args.b_mult if args.b is None else 1.0,
        seeds=_seeds(args.seeds),
        metric=args.metric,
        em=em,
    )


def cmd_generate(args) -> int:
    spec = _dataset(args)
    points = generate(spec, np.random.default_rng(args.seed))
    write_points_csv(points, args.out)
    print(f"wrote {len(points)} points to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    record = run_experiment(_config(args))
    text = json.dumps(record, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("empty sweep list")
    if args.axis != "mechanism":
        values = [float(v) for v in values]
    records = run_sweep(config, args.axis, values)
    out = args.out or f"sweep_{args.axis}"
    csv_path, json_path = write_sweep(records, out)
    for rec in records:
        print(f"{args.axis}={rec['value']}  median={rec['median']:.6g}  iqr={rec['iqr']:.3g}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_geometry(args) -> int:
    for b in range(1, args.max_b + 1):
        chk = closed_form_check(b)
        flag = "ok" if (chk.mixed_agrees and chk.pure_agrees and chk.low_agrees) else "MISMATCH"
        print(
            f"b={b:2d}  mixed enum={len(chk.mixed_enumerated):3d} closed={len(chk.mixed_closed_form):3d}  "
            f"pure enum={chk.pure_enumerated:4d} closed={chk.pure_closed_form:4d}  {flag}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatial-ldp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    _dataset_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the pipeline once per seed")
    _experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="vary one parameter and tabulate the distance")
    _experiment_args(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("geometry", help="compare cell-count closed forms with enumeration")
    p.add_argument("--max-b", type=int, default=12)
    p.set_defaults(func=cmd_geometry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

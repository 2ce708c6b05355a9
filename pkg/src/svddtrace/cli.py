"""Command-line interface.

Exit codes: 0 ok, 2 usage, 3 data, 4 numerical, 5 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen
from .errors import DataError, NonConvergence, NumericalError, SvddError, UsageError
from .evaluation import bounding_box, grid_scoring_2d, lattice
from .fileio import feature_header, fmt_float, load_model, read_csv, save_model, write_matrix_csv
from .landmarks import DEFAULT_R
from .studies import StudySpec, run_study
from .svdd import DEFAULT_F, Standardizer, TrainConfig, score_batch, train_svdd
from .trace import BandwidthSearchConfig, select_bandwidth_trace

logger = logging.getLogger("svddtrace")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_NONCONVERGENCE = 0, 2, 3, 4, 5


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=int, default=DEFAULT_R, help="number of landmarks (default 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--refine-tol", type=float, default=1e-4)
    p.add_argument("--standardize", action="store_true", help="z-score columns first")


def _search_config(args) -> BandwidthSearchConfig:
    return BandwidthSearchConfig(
        r=args.r, s_min=args.s_min, s_max=args.s_max, grid_size=args.grid_size,
        refine_tol=args.refine_tol, seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svddtrace", description="SVDD with trace-criterion bandwidth selection")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bandwidth", help="select a Gaussian bandwidth by the trace criterion")
    p.add_argument("input", type=Path)
    _add_search_flags(p)
    p.add_argument("--profile", type=Path, help="write the s,g,h profile CSV here")
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("profile", help="write the s,g,h profile of the trace criterion")
    p.add_argument("input", type=Path)
    _add_search_flags(p)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("train", help="fit an SVDD model and save it as JSON")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--s", type=float, default=None, help="bandwidth; trace criterion when omitted")
    p.add_argument("--f", type=float, default=DEFAULT_F, help="expected outlier fraction (default 0.01)")
    p.add_argument("--kkt-tol", type=float, default=1e-6)
    _add_search_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score rows with a saved model")
    p.add_argument("model", type=Path)
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("grid", help="score a 2-D model on a lattice over a bounding rectangle")
    p.add_argument("model", type=Path)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--bbox", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    g.add_argument("--bbox-from", type=Path, help="use the bounding rectangle of this CSV")
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("simulate", help="generate a seeded training/evaluation pair")
    p.add_argument("kind", choices=["sphere", "cube", "multi-sphere", "multi-cube", "polygon", "donuts"])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--n", type=int, default=1000, help="training rows (per shape for multi-*)")
    p.add_argument("--eval-n", type=int, default=2000, help="labeled rows (per shape for multi-*)")
    p.add_argument("--w", type=float, default=datagen.DEFAULT_SHELL_WIDTH, help="shell width fraction")
    p.add_argument("--shapes", type=int, default=5, help="shape count for multi-*")
    p.add_argument("--vertices", type=int, default=10, help="polygon vertex count")
    p.add_argument("--resolution", type=int, default=200, help="polygon truth lattice size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=Path, default=Path("train.csv"))
    p.add_argument("--eval", type=Path, default=Path("eval.csv"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run a simulation study described by a YAML/JSON file")
    p.add_argument("study", type=Path)
    p.add_argument("-o", "--output", type=Path, default=Path("report.csv"))
    p.add_argument("--summary", type=Path, default=None, help="JSON summary (default: next to the report)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--positive-class", choices=["inlier", "outlier"], default=None)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _load_training(path: Path, standardize: bool) -> tuple[np.ndarray, np.ndarray]:
    x = read_csv(path).x
    return x, (Standardizer.fit(x).apply(x) if standardize else x)


def cmd_bandwidth(args) -> int:
    _, xs = _load_training(args.input, args.standardize)
    s_star, profile = select_bandwidth_trace(xs, _search_config(args))
    if args.profile:
        profile.write_csv(args.profile)
    print(fmt_float(s_star))
    return EXIT_OK


def cmd_profile(args) -> int:
    _, xs = _load_training(args.input, args.standardize)
    s_star, profile = select_bandwidth_trace(xs, _search_config(args))
    profile.write_csv(args.output)
    print(fmt_float(s_star))
    return EXIT_OK


def cmd_train(args) -> int:
    x, xs = _load_training(args.input, args.standardize)
    s = args.s
    if s is None:
        s, _ = select_bandwidth_trace(xs, _search_config(args))
    model = train_svdd(x, s, TrainConfig(f=args.f, kkt_tol=args.kkt_tol, seed=args.seed), standardize=args.standardize)
    save_model(model, args.output)
    print(fmt_float(model.s))
    return EXIT_OK


def cmd_score(args) -> int:
    model = load_model(args.model)
    table = read_csv(args.input)
    if table.p != model.p:
        raise DataError(f"{args.input}: {table.p} feature columns, model expects {model.p}")
    d2, outlier = score_batch(model, table.x)
    header = list(table.header) if table.header is not None else feature_header(table.p)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header + ["dist2", "outlier"])
        for row, d, o in zip(table.rows, d2, outlier):
            w.writerow(row + [fmt_float(d), int(o)])
    finally:
        if args.output:
            out.close()
    return EXIT_OK


def cmd_grid(args) -> int:
    model = load_model(args.model)
    bbox = args.bbox if args.bbox else bounding_box(read_csv(args.bbox_from).x)
    grid_scoring_2d(model, bbox, args.resolution).write_csv(args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = args.seed
    if args.n < 1 or args.eval_n < 2:
        raise UsageError("--n must be >= 1 and --eval-n >= 2")
    if args.kind in ("sphere", "cube"):
        spec = datagen.ShapeSpec(args.kind, args.dim, 1.0, None, args.w)
        s_train, s_eval = np.random.SeedSequence(seed).spawn(2)
        write_matrix_csv(args.train, datagen.sample_shape_interior(spec, args.n, s_train))
        ev = datagen.make_labeled_eval_set(spec, args.eval_n, s_eval)
        write_matrix_csv(args.eval, ev.x, ev.inlier)
    elif args.kind in ("multi-sphere", "multi-cube"):
        ms = datagen.multi_shape(
            args.kind.split("-")[1], args.shapes, args.dim, seed,
            n_per_shape=args.n, eval_per_shape=args.eval_n, w=args.w,
        )
        write_matrix_csv(args.train, ms.train)
        write_matrix_csv(args.eval, ms.eval.x, ms.eval.inlier)
    elif args.kind == "polygon":
        s_poly, s_sample = np.random.SeedSequence(seed).spawn(2)
        verts = datagen.random_polygon(datagen.PolygonSpec(k=args.vertices, seed=int(s_poly.generate_state(1)[0])))
        write_matrix_csv(args.train, datagen.sample_polygon_interior(verts, args.n, s_sample))
        gx, gy = lattice(bounding_box(verts), args.resolution)
        pts = np.column_stack([gx, gy])
        write_matrix_csv(args.eval, pts, datagen.point_in_polygon(verts, pts))
    else:
        x, _ = datagen.two_donuts_circle(seed)
        write_matrix_csv(args.train, x)
    return EXIT_OK


def _load_study(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
    import yaml

    try:
        return yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: invalid YAML: {exc}") from None


def cmd_evaluate(args) -> int:
    raw = _load_study(args.study)
    if not isinstance(raw, dict):
        raise UsageError("study spec must be a mapping")
    if args.positive_class:
        raw = {**raw, "positive_class": args.positive_class}
    spec = StudySpec.from_mapping(raw)
    report = run_study(spec, jobs=max(1, args.jobs))
    args.output.write_text(report.to_csv())
    summary = args.summary or args.output.with_suffix(".json")
    summary.write_text(report.summary_json())
    n_fail = len(report.failures)
    if n_fail:
        logger.warning("%d of %d cells failed", n_fail, len(report.rows))
    if n_fail == len(report.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SvddError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())

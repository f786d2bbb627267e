"""``hyperfit`` command line: fit, generate, bench.

Exit codes: 0 success, 1 input error, 2 fit did not converge (the report
is still written).
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import compare_acceleration, load_grid, run_grid, to_csv
from .em import FitConfig, fit
from .errors import HyperfitError, NumericFailureError
from .geometry import EllipsoidModel, axis_ratio, to_geometric
from .synth import (
    AXIS_RANGE,
    CENTER_RANGE,
    ContaminationSpec,
    PointCloud,
    contaminate,
    random_ellipsoid,
    sample_surface,
)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2

#: Draws allowed when rejection-resampling toward an axis-ratio target.
AXIS_RATIO_TRIES = 10000


class InputError(HyperfitError):
    """Malformed input file or contradictory flags."""


def default_seed():
    """Seed from ``HYPERFIT_SEED``, else 0."""
    raw = os.environ.get("HYPERFIT_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"HYPERFIT_SEED must be an integer, got {raw!r}")


# ---------------------------------------------------------------- cloud files


def read_cloud(path, labels=False, dim=None):
    """Parse a cloud file: whitespace or comma delimited, ``#`` comments.

    With ``labels`` the last column is an integer label (0 inlier, 1
    outlier).  Ragged rows raise :class:`InputError` naming the line.
    """
    rows, labs = [], []
    width = None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        fields = body.replace(",", " ").split()
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise InputError(f"{path}:{lineno}: expected {width} columns, found {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric field")
        if labels:
            lab = vals.pop()
            if lab not in (0.0, 1.0):
                raise InputError(f"{path}:{lineno}: label must be 0 or 1, got {fields[-1]}")
            labs.append(int(lab))
        if not all(np.isfinite(vals)):
            raise InputError(f"{path}:{lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data lines")
    pts = np.array(rows, dtype=float)
    if pts.shape[1] == 0:
        raise InputError(f"{path}: no coordinate columns")
    if dim is not None and pts.shape[1] != dim:
        raise InputError(f"{path}: --dim {dim} but file has {pts.shape[1]} coordinate columns")
    return PointCloud(pts, np.array(labs, dtype=np.int8) if labels else None)


def write_cloud(path, cloud: PointCloud):
    """One point per line, 17 significant digits, trailing label column."""
    labels = cloud.labels if cloud.labels is not None else np.zeros(len(cloud), dtype=np.int8)
    lines = [
        " ".join(format(v, ".17g") for v in row) + f" {int(lab)}"
        for row, lab in zip(cloud.points, labels)
    ]
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------- reports


def _floats(a):
    # Python floats serialize with repr, the shortest string that round-trips
    return np.asarray(a, dtype=float).tolist()


def model_record(model: EllipsoidModel):
    geo = to_geometric(model)
    rec = {
        "dim": model.dim,
        "A": _floats(model.A),
        "t": _floats(model.t),
        "center": _floats(geo.center),
        "semi_axes": _floats(geo.semi_axes),
        "rotation": _floats(geo.rotation),
    }
    if geo.euler3d is not None:
        rec["euler3d"] = list(geo.euler3d)
    return rec


def load_model(path) -> EllipsoidModel:
    """Model ``(A, t)`` from a report or truth file."""
    try:
        data = json.loads(Path(path).read_text())
        return EllipsoidModel(np.array(data["A"], dtype=float), np.array(data["t"], dtype=float))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a model file ({exc})")


def fit_record(report, argv, input_path, seed):
    st = report.state
    rec = {"tool": "hyperfit", "version": __version__}
    rec.update(model_record(report.model))
    rec.update(
        s=float(st.s),
        w=float(st.w),
        sigma2=float(st.sigma2),
        iterations=int(report.iterations),
        converged=bool(report.converged),
        accelerated=bool(report.accelerated),
        nll_trace=_floats(report.nll_trace),
        init={"M": int(report.init.M), "w": float(report.init.w), "w0": float(report.init.state0.w)},
    )
    if report.metrics is not None:
        rec["E_c"] = float(report.metrics.E_c)
        rec["E_a"] = float(report.metrics.E_a)
    cfg = report.config
    rec["config"] = {
        "max_iters": cfg.max_iters,
        "tol": cfg.tol,
        "k": cfg.k,
        "M": cfg.M_override,
        "w": cfg.w_override,
        "accelerate": cfg.accelerate,
        "scheme": cfg.scheme,
    }
    rec["seed"] = int(seed)
    rec["input"] = str(input_path)
    rec["argv"] = list(argv)
    return rec


def _csv_value(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return " ".join(_csv_value(x) for x in np.ravel(np.array(v, dtype=object)))
    if v is None:
        return ""
    return str(v)


def record_to_csv(rec):
    """Flat ``key,value`` rows; arrays row-major and space separated."""
    flat = {}
    for k, v in rec.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                flat[f"{k}.{kk}"] = vv
        else:
            flat[k] = v
    return to_csv([{"key": k, "value": _csv_value(v)} for k, v in flat.items()])


# ---------------------------------------------------------------- commands


def cmd_fit(args, argv):
    seed = args.seed if args.seed is not None else default_seed()
    cloud = read_cloud(args.input, labels=args.labels, dim=args.dim)
    if args.truth:
        truth = load_model(args.truth)
        if truth.dim != cloud.dim:
            raise InputError(f"truth dimension {truth.dim} does not match cloud dimension {cloud.dim}")
        cloud = PointCloud(cloud.points, cloud.labels, truth)
    config = FitConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        k=args.k,
        M_override=args.M,
        w_override=args.w,
        accelerate=args.accelerate,
        seed=seed,
        scheme=args.scheme,
    )
    report = fit(cloud, config)
    rec = fit_record(report, argv, args.input, seed)
    text = json.dumps(rec, indent=2) + "\n" if args.format == "json" else record_to_csv(rec)
    _write_text(args.out, text)
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _parse_pair(text, name, cast=float):
    parts = text.replace(":", ",").split(",")
    if len(parts) != 2:
        raise InputError(f"{name}: expected two comma-separated values, got {text!r}")
    try:
        return cast(parts[0]), float(parts[1])
    except ValueError:
        raise InputError(f"{name}: cannot parse {text!r}")


def _ratio_truth(dim, center_range, axis_range, ratio, seed):
    """Truth whose longest semi-axis lies in ``axis_range`` and whose ratio is within 5%.

    The shortest axis is ``longest / ratio`` and may fall below the range.
    """
    if not ratio >= 1 or (dim < 2 and ratio != 1):
        raise InputError(f"--axis-ratio {ratio} is unreachable in dimension {dim}")
    rng = np.random.default_rng(seed)
    for _ in range(AXIS_RATIO_TRIES):
        m = random_ellipsoid(dim, center_range, axis_range, seed=int(rng.integers(2**63)), axis_ratio=ratio)
        if abs(axis_ratio(to_geometric(m)) - ratio) <= 0.05 * ratio:
            return m
    raise InputError(f"--axis-ratio {ratio}: no draw within 5% after {AXIS_RATIO_TRIES} tries")


def cmd_generate(args, argv):
    seed = args.seed if args.seed is not None else default_seed()
    center_range = _parse_pair(args.center_range, "--center-range")
    axis_range = _parse_pair(args.axis_range, "--axis-range")
    if axis_range[0] <= 0 or axis_range[0] > axis_range[1]:
        raise InputError(f"--axis-range must satisfy 0 < lo <= hi, got {args.axis_range}")
    if center_range[0] > center_range[1]:
        raise InputError(f"--center-range must satisfy lo <= hi, got {args.center_range}")
    if args.n_points < 1:
        raise InputError(f"--n-points must be >= 1, got {args.n_points}")
    ss = np.random.SeedSequence(seed)
    s_truth, s_surf, s_cont = (int(s) for s in ss.generate_state(3))
    if args.axis_ratio is not None:
        truth = _ratio_truth(args.dim, center_range, axis_range, args.axis_ratio, s_truth)
    else:
        truth = random_ellipsoid(args.dim, center_range, axis_range, seed=s_truth)
    plane = None
    if args.occlude:
        axis, t = _parse_pair(args.occlude, "--occlude", cast=int)
        if not 0 <= axis < args.dim:
            raise InputError(f"--occlude axis {axis} out of range for dim {args.dim}")
        plane = (axis, t)
    cloud = sample_surface(truth, args.n_points, seed=s_surf)
    cloud = contaminate(cloud, ContaminationSpec(args.noise, args.outliers, plane, s_cont))
    write_cloud(args.out, cloud)
    if args.truth_out:
        rec = {"tool": "hyperfit", "version": __version__}
        rec.update(model_record(truth))
        rec["generate"] = {
            "n_points": args.n_points,
            "noise": args.noise,
            "outliers": args.outliers,
            "occlude": args.occlude,
            "axis_range": list(axis_range),
            "center_range": list(center_range),
            "axis_ratio": args.axis_ratio,
        }
        rec["seed"] = int(seed)
        rec["argv"] = list(argv)
        Path(args.truth_out).write_text(json.dumps(rec, indent=2) + "\n")
    return EXIT_OK


def cmd_bench(args, argv):
    grid, mode = load_grid(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if mode == "acceleration":
        res = compare_acceleration(grid, jobs=args.jobs)
    else:
        res = run_grid(grid, jobs=args.jobs)
        # timings vary run to run; kept apart so the result CSVs stay byte-identical
        (out_dir / f"{grid.name}_timing.csv").write_text(to_csv(res.timing))
    (out_dir / f"{grid.name}.csv").write_text(to_csv(res.summary))
    (out_dir / f"{grid.name}_trials.csv").write_text(to_csv(res.rows))
    print(f"wrote {out_dir / (grid.name + '.csv')}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hyperfit", description="Robust ellipsoid fitting in R^n.")
    p.add_argument("--version", action="version", version=f"hyperfit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit an ellipsoid to a point cloud file")
    f.add_argument("input")
    f.add_argument("--dim", type=int, default=None, help="expected dimension (default: column count)")
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--max-iters", type=int, default=1000)
    f.add_argument("--k", type=int, default=11, help="neighbors for outlier scoring")
    f.add_argument("--M", type=int, default=None, help="override the number of model points")
    f.add_argument("--w", type=float, default=None, help="override the initial outlier weight")
    f.add_argument("--accelerate", action="store_true")
    f.add_argument("--seed", type=int, default=None, help="default: $HYPERFIT_SEED or 0")
    f.add_argument("--scheme", choices=["parametric", "gaussian-normalized"], default=None)
    f.add_argument("--truth", default=None, help="truth model file; enables E_c and E_a")
    f.add_argument("--labels", action="store_true", help="last column holds 0/1 labels")
    f.add_argument("--format", choices=["json", "csv"], default="json")
    f.add_argument("--out", default=None, help="report path (default: stdout)")

    g = sub.add_parser("generate", help="generate a synthetic contaminated cloud")
    g.add_argument("--dim", type=int, default=3)
    g.add_argument("--n-points", type=int, default=200)
    g.add_argument("--noise", type=float, default=0.0, help="noise variance sigma^2")
    g.add_argument("--outliers", type=float, default=0.0, help="outlier fraction of the final cloud")
    g.add_argument("--occlude", default=None, help="axis:t, keep points with x[axis] <= t")
    g.add_argument("--axis-range", default=f"{AXIS_RANGE[0]:g},{AXIS_RANGE[1]:g}")
    g.add_argument("--center-range", default=f"{CENTER_RANGE[0]:g},{CENTER_RANGE[1]:g}")
    g.add_argument("--axis-ratio", type=float, default=None)
    g.add_argument("--seed", type=int, default=None, help="default: $HYPERFIT_SEED or 0")
    g.add_argument("--out", default=None, help="cloud path (default: stdout)")
    g.add_argument("--truth-out", default=None)

    b = sub.add_parser("bench", help="run an experiment grid")
    b.add_argument("config", help="grid JSON file or bundled name (e.g. table2_desk)")
    b.add_argument("--out-dir", default=".")
    b.add_argument("--jobs", type=int, default=1)
    return p


COMMANDS = {"fit": cmd_fit, "generate": cmd_generate, "bench": cmd_bench}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for non-convergence here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args, argv)
    except NumericFailureError as exc:
        print(f"hyperfit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (HyperfitError, ValueError) as exc:
        print(f"hyperfit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

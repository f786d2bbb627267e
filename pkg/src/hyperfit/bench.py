"""Seeded experiment grids: generate, contaminate, fit, score.

Every trial draws its seeds from ``SeedSequence([grid.seed, cell, trial])``
so rows are reproducible one by one, independently of execution order.
"""

import csv
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import List, Optional

import numpy as np

from .em import FitConfig, fit, state_distance2
from .errors import HyperfitError, InvalidArgumentError
from .geometry import EllipsoidModel
from .metrics import fit_errors
from .synth import (
    AXIS_RANGE,
    CENTER_RANGE,
    ContaminationSpec,
    contaminate,
    random_ellipsoid,
    random_rotation,
    sample_surface,
)


@dataclass(frozen=True)
class ExperimentGrid:
    """Sweep definition; cells are the product of all sweep lists.

    ``axis_ratios`` entries of ``None`` draw unconstrained random axes;
    ``squared_axes`` fixes the truth shape (random rotation, centered at
    the origin) and overrides the random generator.  ``occlusions`` entries
    are ``None`` or a threshold on ``occlusion_axis``.
    """

    name: str = "grid"
    dim: int = 3
    trials: int = 20
    noise_levels: tuple = (0.0,)
    outlier_ratios: tuple = (0.0,)
    axis_ratios: tuple = (None,)
    occlusions: tuple = (None,)
    point_counts: tuple = (200,)
    seed: int = 0
    accelerate: bool = False
    occlusion_axis: int = 1
    squared_axes: Optional[tuple] = None
    center_range: tuple = CENTER_RANGE
    axis_range: tuple = AXIS_RANGE
    tol: float = 1e-8
    max_iters: int = 1000
    k: int = 11

    def __post_init__(self):
        for name in ("noise_levels", "outlier_ratios", "axis_ratios", "occlusions", "point_counts"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)) or len(val) == 0:
                raise InvalidArgumentError(f"{name}: must be a nonempty list")
            object.__setattr__(self, name, tuple(val))
        if int(self.trials) < 1:
            raise InvalidArgumentError(f"trials: must be >= 1, got {self.trials}")
        if int(self.dim) < 2:
            raise InvalidArgumentError(f"dim: must be >= 2, got {self.dim}")
        if self.squared_axes is not None:
            if len(self.squared_axes) != self.dim or min(self.squared_axes) <= 0:
                raise InvalidArgumentError(f"squared_axes: need {self.dim} positive values")
            object.__setattr__(self, "squared_axes", tuple(float(v) for v in self.squared_axes))
        for name in ("noise_levels",):
            if any(v < 0 for v in getattr(self, name)):
                raise InvalidArgumentError(f"{name}: values must be >= 0")
        if any(not 0 <= v < 1 for v in self.outlier_ratios):
            raise InvalidArgumentError("outlier_ratios: values must be in [0, 1)")
        if any(int(v) < self.dim + 2 for v in self.point_counts):
            raise InvalidArgumentError(f"point_counts: values must be >= {self.dim + 2}")
        if not 0 <= self.occlusion_axis < self.dim:
            raise InvalidArgumentError(f"occlusion_axis: out of range for dim {self.dim}")

    def cells(self):
        return list(
            itertools.product(
                self.noise_levels, self.outlier_ratios, self.axis_ratios, self.occlusions, self.point_counts
            )
        )

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"{sorted(unknown)[0]}: unknown grid field")
        return cls(**data)


CELL_KEYS = ("noise", "outliers", "axis_ratio", "occlusion", "n_points")


@dataclass
class ExperimentResult:
    grid: ExperimentGrid
    rows: List[dict]
    summary: List[dict]
    timing: List[dict] = field(default_factory=list)


def _trial_seeds(grid, cell_index, trial):
    ss = np.random.SeedSequence([int(grid.seed), int(cell_index), int(trial)])
    return [int(s) for s in ss.generate_state(4)]


def make_trial(grid: ExperimentGrid, cell_index, trial):
    """Truth model and contaminated cloud of one trial."""
    noise, eta, ratio, occ, npts = grid.cells()[cell_index]
    s_truth, s_surf, s_cont, s_fit = _trial_seeds(grid, cell_index, trial)
    if grid.squared_axes is not None:
        R = random_rotation(grid.dim, np.random.default_rng(s_truth))
        truth = EllipsoidModel(R * np.sqrt(grid.squared_axes)[None, :], np.zeros(grid.dim))
    else:
        truth = random_ellipsoid(
            grid.dim, grid.center_range, grid.axis_range, seed=s_truth, axis_ratio=ratio
        )
    plane = None
    if occ is not None:
        # threshold is relative to the true center along the cut axis
        plane = (grid.occlusion_axis, float(truth.center[grid.occlusion_axis] + occ))
    cloud = sample_surface(truth, int(npts), seed=s_surf)
    cloud = contaminate(cloud, ContaminationSpec(float(noise), float(eta), plane, s_cont))
    return truth, cloud, s_fit


def _fit_config(grid, seed, accelerate):
    return FitConfig(max_iters=grid.max_iters, tol=grid.tol, k=grid.k, accelerate=accelerate, seed=seed)


def _run_trial(args):
    grid, cell_index, trial = args
    cell = dict(zip(CELL_KEYS, grid.cells()[cell_index]))
    row = {"cell": cell_index, **cell, "trial": trial}
    try:
        truth, cloud, s_fit = make_trial(grid, cell_index, trial)
        t0 = time.perf_counter()
        report = fit(cloud, _fit_config(grid, s_fit, grid.accelerate))
        wall = time.perf_counter() - t0
        err = fit_errors(truth, (report.state.A, report.state.t))
        nll = np.asarray(report.nll_trace)
        row.update(
            E_c=err.E_c,
            E_a=err.E_a,
            is_ellipsoid=bool(err.is_ellipsoid and np.all(np.linalg.eigvalsh(report.model.B) > 0)),
            iterations=report.iterations,
            converged=report.converged,
            monotone_violations=int(np.sum(np.diff(nll) > 1e-7)),
            status="ok",
        )
    except (HyperfitError, np.linalg.LinAlgError) as exc:
        wall = float("nan")
        row.update(E_c=float("inf"), E_a=float("inf"), is_ellipsoid=False, iterations=0, converged=False,
                   monotone_violations=0, status=f"{type(exc).__name__}: {exc}")
    return row, wall


def _map(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def summarize(rows, n_cells, cells):
    out = []
    for ci in range(n_cells):
        cr = [r for r in rows if r["cell"] == ci]
        good = [r for r in cr if r["is_ellipsoid"]]
        ec = np.array([r["E_c"] for r in good])
        ea = np.array([r["E_a"] for r in good])
        its = np.array([r["iterations"] for r in cr], dtype=float)
        nan = float("nan")
        out.append(
            {
                "cell": ci,
                **dict(zip(CELL_KEYS, cells[ci])),
                "trials": len(cr),
                "mean_E_c": float(ec.mean()) if len(ec) else nan,
                "median_E_c": float(np.median(ec)) if len(ec) else nan,
                "mean_E_a": float(ea.mean()) if len(ea) else nan,
                "median_E_a": float(np.median(ea)) if len(ea) else nan,
                "failure_rate": 1.0 - len(good) / len(cr),
                "mean_iterations": float(its.mean()),
                "converged_rate": float(np.mean([r["converged"] for r in cr])),
            }
        )
    return out


def run_grid(grid: ExperimentGrid, jobs=1) -> ExperimentResult:
    """Run every trial of every cell; trial failures become rows, never exceptions."""
    cells = grid.cells()
    tasks = [(grid, ci, tr) for ci in range(len(cells)) for tr in range(grid.trials)]
    results = _map(_run_trial, tasks, jobs)
    rows = [r for r, _ in results]
    timing = []
    for ci in range(len(cells)):
        walls = [w for (r, w) in results if r["cell"] == ci and np.isfinite(w)]
        timing.append({"cell": ci, "median_wall_time_s": float(np.median(walls)) if walls else float("nan")})
    return ExperimentResult(grid, rows, summarize(rows, len(cells), cells), timing)


def _run_pair(args):
    grid, cell_index, trial = args
    cell = dict(zip(CELL_KEYS, grid.cells()[cell_index]))
    row = {"cell": cell_index, **cell, "trial": trial}
    try:
        truth, cloud, s_fit = make_trial(grid, cell_index, trial)
        plain = fit(cloud, _fit_config(grid, s_fit, False))
        acc = fit(cloud, _fit_config(grid, s_fit, True), init=plain.init)
        row.update(
            plain_iterations=plain.iterations,
            accelerated_iterations=acc.iterations,
            plain_converged=plain.converged,
            accelerated_converged=acc.converged,
            consensus=float(np.sqrt(state_distance2(plain.state, acc.state))),
            status="ok",
        )
    except HyperfitError as exc:
        row.update(plain_iterations=0, accelerated_iterations=0, plain_converged=False,
                   accelerated_converged=False, consensus=float("inf"), status=f"{type(exc).__name__}: {exc}")
    return row


def compare_acceleration(grid: ExperimentGrid, jobs=1, consensus_tol=1e-4):
    """Paired plain/accelerated runs sharing cloud and initialization."""
    cells = grid.cells()
    tasks = [(grid, ci, tr) for ci in range(len(cells)) for tr in range(grid.trials)]
    rows = _map(_run_pair, tasks, jobs)
    summary = []
    for ci in range(len(cells)):
        cr = [r for r in rows if r["cell"] == ci]
        summary.append(
            {
                "cell": ci,
                **dict(zip(CELL_KEYS, cells[ci])),
                "trials": len(cr),
                "median_plain_iterations": float(np.median([r["plain_iterations"] for r in cr])),
                "median_accelerated_iterations": float(np.median([r["accelerated_iterations"] for r in cr])),
                "consensus_rate": float(np.mean([r["consensus"] < consensus_tol for r in cr])),
                "median_consensus": float(np.median([r["consensus"] for r in cr])),
            }
        )
    return ExperimentResult(grid, rows, summary)


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def to_csv(records) -> str:
    """CSV text with a header row; floats at 17 significant digits."""
    buf = io.StringIO()
    if not records:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    keys = list(records[0])
    w.writerow(keys)
    for r in records:
        w.writerow([_fmt(r[k]) for k in keys])
    return buf.getvalue()


def load_grid(path_or_name):
    """Grid from a JSON file, or from a bundled config name such as ``table2_desk``."""
    from pathlib import Path
    from importlib import resources

    p = Path(path_or_name)
    if p.is_file():
        text = p.read_text()
    else:
        name = p.name if p.suffix == ".json" else p.name + ".json"
        res = resources.files("hyperfit") / "configs" / name
        if not res.is_file():
            raise InvalidArgumentError(f"no grid config file or bundled config named {path_or_name!r}")
        text = res.read_text()
    data = json.loads(text)
    mode = data.pop("mode", "grid")
    if mode not in ("grid", "acceleration"):
        raise InvalidArgumentError(f"mode: must be 'grid' or 'acceleration', got {mode!r}")
    return ExperimentGrid.from_dict(data), mode

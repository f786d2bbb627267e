"""Expectation-maximization for the Gaussian-uniform ellipsoid mixture.

Every observation is explained either by one of ``M`` model points
``A y_j + t`` (``y_j`` fixed on the unit sphere) blurred by isotropic
Gaussian noise of variance ``exp(s)``, or by a uniform density ``1/V`` over
the bounding box of the data.  The M-step has closed forms for all of
``(A, t, s, w)``, so each iteration can only lower the negative
log-likelihood; :func:`fit` checks that at runtime.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from . import kernels
from .errors import DegenerateSupportError, InvalidArgumentError, NumericFailureError
from .geometry import EllipsoidModel, SphereSamples
from .state import ModelState, clamp_w

log = logging.getLogger(__name__)

#: Allowed per-iteration increase of the negative log-likelihood.
MONOTONE_SLACK = 1e-7
#: Relative floor on bounding-box extents.
EXTENT_FLOOR = 1e-6
#: Gram matrices with a larger condition number get a ridge.
RIDGE_COND = 1e12
RIDGE_SCALE = 1e-10
#: Inlier posterior mass below this fraction of N counts as none at all.
NP_FLOOR = 1e-12
#: sigma^2 is kept above this times the squared bounding-box diagonal.
SIGMA2_FLOOR = 1e-14


@dataclass(frozen=True)
class PosteriorTable:
    """E-step responsibilities at the previous state.

    ``inlier`` is the ``(M, N)`` matrix ``p(y_m | x_i)``, ``outlier`` the
    uniform-component column.  ``nll`` is the negative log-likelihood of the
    state the table was computed from (it falls out of the same reduction).
    """

    inlier: np.ndarray
    outlier: np.ndarray
    Np: float
    No: float
    nll: float

    @property
    def M(self):
        return self.inlier.shape[0]

    @property
    def N(self):
        return self.inlier.shape[1]


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 1000
    tol: float = 1e-8
    k: int = 11
    M_override: Optional[int] = None
    w_override: Optional[float] = None
    M_cap: int = 2000
    accelerate: bool = False
    seed: int = 0
    scheme: Optional[str] = None
    check_monotone: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iters) < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class FitReport:
    state: ModelState
    model: EllipsoidModel
    nll_trace: list
    iterations: int
    converged: bool
    init: object
    config: FitConfig
    metrics: Optional[object] = None
    accelerated: bool = False
    em_state: Optional[ModelState] = None
    extra: dict = field(default_factory=dict)


def _points(cloud):
    return np.asarray(getattr(cloud, "points", cloud), dtype=float)


def _sphere(sphere):
    return sphere.points if isinstance(sphere, SphereSamples) else np.asarray(sphere, dtype=float)


def bounding_volume(cloud) -> float:
    """Volume of the axis-aligned bounding box, each extent floored relative to the largest."""
    X = _points(cloud)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidArgumentError("bounding volume needs at least 2 points")
    ext = X.max(axis=0) - X.min(axis=0)
    big = ext.max()
    if not big > 0:
        raise InvalidArgumentError("all points coincide; bounding volume is zero")
    ext = np.maximum(ext, EXTENT_FLOOR * big)
    return float(np.prod(ext))


def _log_uniform_ratio(n, s, w, M, V):
    # log((2 pi sigma^2)^(n/2) * w/(1-w) * M/V)
    return 0.5 * n * (math.log(2 * math.pi) + s) + math.log(w) - math.log1p(-w) + math.log(M) - math.log(V)


def e_step(cloud, sphere, state: ModelState, V) -> PosteriorTable:
    """Posterior of every model point and of the uniform component for every observation."""
    X = _points(cloud)
    Y = _sphere(sphere)
    if X.shape[1] != Y.shape[1] or X.shape[1] != state.dim:
        raise InvalidArgumentError("cloud, sphere and state dimensions disagree")
    N, n = X.shape
    M = Y.shape[0]
    w = state.w
    if not 0.0 < w < 1.0:
        raise InvalidArgumentError(f"e_step needs 0 < w < 1, got {w}")
    Z = Y @ state.A.T + state.t
    log_c = _log_uniform_ratio(n, state.s, w, M, V)
    P, outlier, lse = kernels.estep(X, Z, 0.5 * math.exp(-state.s), log_c)
    # -log((1-w)/M (2 pi sigma^2)^(-n/2) sum_m f + w/V), per point
    log_g = math.log1p(-w) - math.log(M) - 0.5 * n * (math.log(2 * math.pi) + state.s)
    nll = -float(np.sum(np.logaddexp(lse + log_g, math.log(w) - math.log(V))))
    if not (np.isfinite(nll) and np.all(np.isfinite(P)) and np.all(np.isfinite(outlier))):
        raise NumericFailureError(
            "non-finite posterior or likelihood",
            {"s": state.s, "w": w, "nll": nll, "max_lse": float(np.max(lse))},
        )
    inlier = P.T
    Np = float(P.sum())
    No = float(outlier.sum())
    return PosteriorTable(inlier=inlier, outlier=outlier, Np=Np, No=No, nll=nll)


def negative_log_likelihood(cloud, sphere, state: ModelState, V) -> float:
    """``-sum_i log((1-w)/M sum_j N(x_i | A y_j + t, sigma^2 I) + w/V)``."""
    X = _points(cloud)
    Y = _sphere(sphere)
    N, n = X.shape
    M = Y.shape[0]
    w, s = state.w, state.s
    if not V > 0:
        raise InvalidArgumentError(f"V must be > 0, got {V}")
    Z = Y @ state.A.T + state.t
    a = -0.5 * math.exp(-s) * kernels.sq_distances(X, Z)
    amax = a.max(axis=1)
    lse = amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))
    parts = [lse + math.log1p(-w) - math.log(M) - 0.5 * n * (math.log(2 * math.pi) + s)] if w < 1 else []
    if w > 0:
        parts.append(np.full(N, math.log(w) - math.log(V)))
    total = parts[0] if len(parts) == 1 else np.logaddexp(*parts)
    val = -float(np.sum(total))
    if not np.isfinite(val):
        raise NumericFailureError("non-finite negative log-likelihood", {"s": s, "w": w})
    return val


def _solve_affine(cross, gram):
    """``A = cross @ gram^{-1}`` through a Cholesky solve, ridged if ill-conditioned."""
    n = gram.shape[0]
    gram = 0.5 * (gram + gram.T)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > RIDGE_COND:
        lam = RIDGE_SCALE * np.trace(gram) / n
        log.debug("ridge %.3g on Gram matrix with condition %.3g", lam, cond)
        gram = gram + lam * np.eye(n)
    try:
        c = linalg.cho_factor(gram)
        return linalg.cho_solve(c, cross.T).T
    except linalg.LinAlgError as exc:
        raise DegenerateSupportError(f"model-point Gram matrix is singular: {exc}") from exc


def m_step(cloud, sphere, table: PosteriorTable, s_floor=None) -> ModelState:
    """Closed-form minimizer of the Jensen bound: ``A`` first, then ``t``, ``s``, ``w``."""
    X = _points(cloud)
    Y = _sphere(sphere)
    N, n = X.shape
    P = table.inlier
    Np = table.Np
    # any positive mass gives a well-posed update; the ridge covers a near-singular gram
    if not Np > NP_FLOOR * N:
        raise DegenerateSupportError(f"posterior inlier mass {Np:.3g} is numerically zero")
    P1 = P.sum(axis=1)
    Pt1 = P.sum(axis=0)
    mu_x = Pt1 @ X / Np
    mu_y = P1 @ Y / Np
    Xc = X - mu_x
    Yc = Y - mu_y
    cross = Xc.T @ (P.T @ Yc)
    gram = Yc.T @ (P1[:, None] * Yc)
    A = _solve_affine(cross, gram)
    t = mu_x - A @ mu_y
    # sum_ij p_ij |xc_i - A yc_j|^2, exact for any A (equals the two-trace form at the exact solve)
    resid = np.sum(Pt1 * np.sum(Xc * Xc, axis=1)) - 2.0 * np.sum(cross * A) + np.sum((A @ gram) * A)
    sigma2 = resid / (Np * n)
    if s_floor is None:
        ext = X.max(axis=0) - X.min(axis=0)
        s_floor = math.log(SIGMA2_FLOOR * max(float(ext @ ext), 1e-300))
    s = math.log(sigma2) if sigma2 > 0 else s_floor
    s = max(s, s_floor)
    w = clamp_w(table.No / (table.Np + table.No))
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(t)):
        raise NumericFailureError("non-finite affine update", {"Np": Np})
    return ModelState(A, t, s, w)


def q_bound(cloud, sphere, state: ModelState, prev_table: PosteriorTable) -> float:
    """Jensen upper bound ``Q(Omega, Omega_prev)`` with Omega-independent terms dropped."""
    X = _points(cloud)
    Y = _sphere(sphere)
    n = X.shape[1]
    P = prev_table.inlier
    Z = Y @ state.A.T + state.t
    d2 = kernels.sq_distances(Z, X)
    Np, No = prev_table.Np, prev_table.No
    val = 0.5 * math.exp(-state.s) * float(np.sum(P * d2)) + 0.5 * Np * n * state.s
    # 0 * log(0) terms vanish
    if No > 0:
        val -= math.log(state.w) * No
    if Np > 0:
        val -= math.log1p(-state.w) * Np
    if not np.isfinite(val):
        raise NumericFailureError("non-finite Q bound", {"s": state.s, "w": state.w})
    return val


def state_distance2(a: ModelState, b: ModelState) -> float:
    d = a.flatten() - b.flatten()
    return float(d @ d)


def em_iterations(X, Y, state, V, s_floor=None):
    """Yield ``(state, table)`` pairs of the plain EM sequence, starting at ``state``."""
    table = e_step(X, Y, state, V)
    yield state, table
    while True:
        state = m_step(X, Y, table, s_floor=s_floor)
        table = e_step(X, Y, state, V)
        yield state, table


def _check_cloud(X):
    N, n = X.shape
    if N < n + 2:
        raise DegenerateSupportError(f"need at least {n + 2} points in R^{n}, got {N}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("points must be finite")


def _check_monotone(trace, it):
    if trace[-1] > trace[-2] + MONOTONE_SLACK:
        raise NumericFailureError(
            f"negative log-likelihood increased by {trace[-1] - trace[-2]:.3e} at iteration {it}",
            {"nll_trace": list(trace)},
        )


def _finish(X, state, config, init, trace, iterations, converged, **kw):
    from .metrics import fit_errors  # local import: metrics depends on geometry only

    truth = kw.pop("truth", None)
    report = FitReport(
        state=state,
        model=state.model(),
        nll_trace=trace,
        iterations=iterations,
        converged=converged,
        init=init,
        config=config,
        **kw,
    )
    if truth is not None:
        report.metrics = fit_errors(truth, report.model)
    return report


def fit(cloud, config: FitConfig = None, init=None) -> FitReport:
    """Fit an ellipsoid by plain EM, or by the accelerated driver if ``config.accelerate``.

    Stops when the squared change of the flattened state falls below
    ``config.tol`` or after ``config.max_iters`` M-steps.  Non-convergence
    is reported through ``converged=False``.
    """
    config = config or FitConfig()
    if config.accelerate:
        from .accel import accelerated_fit

        return accelerated_fit(cloud, config, init=init)
    X = _points(cloud)
    _check_cloud(X)
    if init is None:
        init = _initialize(X, config)
    V = bounding_volume(X)
    Y = init.sphere.points
    trace = []
    prev = None
    converged = False
    it = 0
    for it, (state, table) in enumerate(em_iterations(X, Y, init.state0, V)):
        trace.append(table.nll)
        if config.check_monotone and it > 0:
            _check_monotone(trace, it)
        if prev is not None and state_distance2(state, prev) <= config.tol:
            converged = True
            break
        if it >= config.max_iters:
            break
        prev = state
    return _finish(X, state, config, init, trace, it, converged, truth=getattr(cloud, "truth", None))


def _initialize(X, config):
    from .rdos import initialize

    return initialize(
        X,
        k=config.k,
        M_cap=config.M_cap,
        scheme=config.scheme,
        seed=config.seed,
        M_override=config.M_override,
        w_override=config.w_override,
    )

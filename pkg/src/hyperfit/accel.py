"""Vector epsilon extrapolation of the EM state sequence.

The plain EM recursion is never restarted from the extrapolated point:
extrapolation only decides when to stop and supplies the answer, so the
underlying sequence keeps its monotone likelihood.
"""

import numpy as np

from .em import (
    FitConfig,
    _check_cloud,
    _check_monotone,
    _finish,
    _initialize,
    _points,
    bounding_volume,
    em_iterations,
)
from .errors import HyperfitError
from .state import ModelState, clamp_w

#: Relative stagnation guard: differences below ``ACC_EPS * (1 + |x|)`` are zero.
ACC_EPS = 1e-13


class Stagnation(HyperfitError):
    """A difference vector is too small to invert."""


def vector_inverse(v, eps=0.0):
    """Samelson inverse ``v / |v|^2``; raises :class:`Stagnation` when ``|v| <= eps``."""
    v = np.asarray(v, dtype=float)
    nrm2 = float(v @ v)
    if not nrm2 > eps * eps or not np.isfinite(nrm2):
        raise Stagnation(f"|v| = {np.sqrt(nrm2):.3e} <= {eps:.3e}")
    return v / nrm2


def epsilon_step(x0, x1, x2):
    """``x1 + ((x2 - x1)^{-1} - (x1 - x0)^{-1})^{-1}``, or ``x2`` on stagnation."""
    x0, x1, x2 = (np.asarray(x, dtype=float) for x in (x0, x1, x2))
    eps = ACC_EPS * (1.0 + float(np.linalg.norm(x2)))
    try:
        d = vector_inverse(vector_inverse(x2 - x1, eps) - vector_inverse(x1 - x0, eps), eps)
    except Stagnation:
        return x2.copy()
    out = x1 + d
    return out if np.all(np.isfinite(out)) else x2.copy()


def _as_state(vec, dim, fallback):
    """Project an extrapolated vector back to a valid state, else ``fallback``."""
    try:
        st = ModelState.unflatten(vec, dim)
    except HyperfitError:
        n2 = dim * dim
        try:
            st = ModelState(vec[:n2].reshape(dim, dim), vec[n2 : n2 + dim], vec[-2], clamp_w(vec[-1]))
        except HyperfitError:
            return fallback, False
    if not st.is_valid():
        return fallback, False
    return st, True


def accelerated_fit(cloud, config: FitConfig = None, init=None):
    """EM with vector-epsilon extrapolation used for stopping and for the answer.

    Stops when two successive extrapolated states differ by at most
    ``config.tol`` in squared norm.  ``report.extra`` records
    ``em_iterations`` and whether the final state is the extrapolated one.
    """
    config = config or FitConfig(accelerate=True)
    X = _points(cloud)
    _check_cloud(X)
    if init is None:
        init = _initialize(X, config)
    V = bounding_volume(X)
    Y = init.sphere.points
    dim = X.shape[1]
    trace = []
    hist = []
    acc_prev = None
    converged = False
    it = 0
    for it, (state, table) in enumerate(em_iterations(X, Y, init.state0, V)):
        trace.append(table.nll)
        if config.check_monotone and it > 0:
            _check_monotone(trace, it)
        hist = (hist + [state.flatten()])[-3:]
        if len(hist) == 3:
            acc = epsilon_step(*hist)
            if acc_prev is not None:
                d = acc - acc_prev
                if float(d @ d) <= config.tol:
                    converged = True
                    break
            acc_prev = acc
        if it >= config.max_iters:
            break
    final, used = state, False
    if len(hist) == 3:
        final, used = _as_state(epsilon_step(*hist), dim, state)
    return _finish(
        X,
        final,
        config,
        init,
        trace,
        it,
        converged,
        truth=getattr(cloud, "truth", None),
        accelerated=True,
        em_state=state,
        extra={"em_iterations": it, "extrapolated_final": used},
    )

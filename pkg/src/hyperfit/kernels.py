"""Hot inner loops of the EM iteration.

Every kernel exists twice: a numba ``@njit`` version (``*_numba``) and a
pure-numpy version (``*_numpy``).  The public names dispatch on
:data:`hyperfit._backend.BACKEND`; both variants stay importable so the
benchmark and the tests can compare them directly.

Layout convention: kernels work on the point-major ``(N, M)`` layout,
which is contiguous along the model-point axis that the log-sum-exp
reduces over.  Callers that want the ``(M, N)`` posterior view transpose.
"""

import numpy as np

from ._backend import BACKEND, HAS_NUMBA, njit

__all__ = ["estep", "sq_distances", "estep_numba", "estep_numpy", "BACKEND", "HAS_NUMBA"]


def estep_numpy(X, Z, half_prec, log_c):
    """Posterior responsibilities of ``Z`` and of the uniform component.

    Parameters
    ----------
    X : (N, n) array
        Observations.
    Z : (M, n) array
        Transformed model points ``A y_j + t``.
    half_prec : float
        ``exp(-s) / 2``.
    log_c : float
        Log of the uniform term expressed in units of the Gaussian sum,
        ``log((2 pi sigma^2)^(n/2) * w/(1-w) * M/V)``.

    Returns
    -------
    P : (N, M) array
        Inlier responsibilities, point-major.
    outlier : (N,) array
        Responsibility of the uniform component.
    lse : (N,) array
        ``log sum_m exp(-half_prec * |x_i - z_m|^2)``.
    """
    N, n = X.shape
    d2 = np.zeros((N, Z.shape[0]))
    for k in range(n):
        diff = X[:, k, None] - Z[None, :, k]
        d2 += diff * diff
    a = -half_prec * d2
    amax = a.max(axis=1)
    lse = amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))
    logden = np.logaddexp(lse, log_c)
    P = np.exp(a - logden[:, None])
    outlier = np.exp(log_c - logden)
    return P, outlier, lse


# reassociation lets LLVM vectorize the distance and exp loops; results
# stay deterministic for a given build
_FAST = {"reassoc", "contract", "arcp", "afn"}


@njit(cache=True, fastmath=_FAST)
def estep_numba(X, Z, half_prec, log_c):
    N, n = X.shape
    M = Z.shape[0]
    P = np.empty((N, M))
    outlier = np.empty(N)
    lse = np.empty(N)
    ZT = np.ascontiguousarray(Z.T)
    for i in range(N):
        row = P[i]
        row[:] = 0.0
        for k in range(n):
            xk = X[i, k]
            zk = ZT[k]
            for m in range(M):
                d = xk - zk[m]
                row[m] += d * d
        amax = -np.inf
        for m in range(M):
            a = -half_prec * row[m]
            row[m] = a
            amax = max(amax, a)
        acc = 0.0
        for m in range(M):
            e = np.exp(row[m] - amax)
            row[m] = e
            acc += e
        li = amax + np.log(acc)
        lse[i] = li
        hi = max(li, log_c)
        logden = hi + np.log(np.exp(li - hi) + np.exp(log_c - hi))
        scale = np.exp(amax - logden)
        for m in range(M):
            row[m] *= scale
        outlier[i] = np.exp(log_c - logden)
    return P, outlier, lse


def sq_distances_numpy(X, Y):
    """Squared Euclidean distances, ``(len(X), len(Y))``."""
    out = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = X[:, k, None] - Y[None, :, k]
        out += diff * diff
    return out


@njit(cache=True)
def sq_distances_numba(X, Y):
    N, n = X.shape
    M = Y.shape[0]
    out = np.empty((N, M))
    for i in range(N):
        for j in range(M):
            d2 = 0.0
            for k in range(n):
                diff = X[i, k] - Y[j, k]
                d2 += diff * diff
            out[i, j] = d2
    return out


if BACKEND == "numba":
    _estep, _sq_distances = estep_numba, sq_distances_numba
else:
    _estep, _sq_distances = estep_numpy, sq_distances_numpy


def estep(X, Z, half_prec, log_c):
    return _estep(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(Z, dtype=np.float64),
        float(half_prec),
        float(log_c),
    )


estep.__doc__ = estep_numpy.__doc__


def sq_distances(X, Y):
    """Squared Euclidean distances between rows of ``X`` and rows of ``Y``."""
    return _sq_distances(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
    )

"""Relative density-based outlier scores and the data-driven EM start.

A point's neighborhood is the union of its k nearest neighbors, its
reverse nearest neighbors and the points sharing at least one nearest
neighbor with it.  Its density is a Gaussian kernel estimate over that
neighborhood (itself included) and its score is the neighborhood's mean
density divided by its own: about 1 inside uniformly sampled structure,
well above 1 for isolated points.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import InvalidArgumentError
from .geometry import SphereSamples, default_scheme, sample_hypersphere
from .kernels import sq_distances
from .state import ModelState, clamp_w

DEFAULT_K = 11
DEFAULT_M_CAP = 2000


@dataclass(frozen=True)
class RdosScores:
    scores: np.ndarray
    k: int

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class InitResult:
    """Sample size ``M``, raw outlier weight ``w`` and the starting state.

    ``state0.w`` is ``w`` clamped into the range EM can work with.
    """

    M: int
    w: float
    state0: ModelState
    sphere: SphereSamples


def _points(cloud):
    return np.asarray(getattr(cloud, "points", cloud), dtype=float)


def rdos_scores(cloud, k=DEFAULT_K) -> RdosScores:
    X = _points(cloud)
    N = X.shape[0]
    k = int(k)
    if k < 1 or k >= N:
        raise InvalidArgumentError(f"need 1 <= k < N, got k={k}, N={N}")
    D2 = sq_distances(X, X)
    np.fill_diagonal(D2, np.inf)
    knn = np.argsort(D2, axis=1, kind="stable")[:, :k]
    kth = np.sqrt(D2[np.arange(N), knn[:, -1]])
    h = float(np.mean(kth))
    if not h > 0:
        # all neighborhoods collapse to a point; any bandwidth gives equal densities
        h = 1.0

    rows = np.repeat(np.arange(N), k)
    K = sparse.csr_matrix((np.ones(N * k), (rows, knn.reshape(-1))), shape=(N, N))
    shared = K @ K.T
    S = (K + K.T + shared).tocsr()
    S.setdiag(0)
    S.eliminate_zeros()
    S.sort_indices()
    ri, ci = S.nonzero()
    kern = np.exp(-D2[ri, ci] / (2.0 * h * h))
    size = np.diff(S.indptr).astype(float)
    # the point itself contributes K(0) = 1 to its own density
    kde = (1.0 + np.bincount(ri, weights=kern, minlength=N)) / (size + 1.0)
    neigh = np.bincount(ri, weights=kde[ci], minlength=N)
    scores = neigh / (size * kde)
    return RdosScores(scores=scores, k=k)


def initial_state(X, sphere: SphereSamples, w) -> ModelState:
    """Sphere of the data's median radius about its coordinate-wise median.

    ``s`` is the log of the median, over points, of each point's mean
    squared distance to the initial model points, divided by ``n``.  The
    median keeps a single far-away point from inflating the start.
    """
    X = _points(X)
    n = X.shape[1]
    t = np.median(X, axis=0)
    radius = float(np.median(np.linalg.norm(X - t, axis=1)))
    if not radius > 0:
        radius = 1.0
    A = radius * np.eye(n)
    Z = sphere.points @ A.T + t
    msd = float(np.median(np.mean(sq_distances(X, Z), axis=1)))
    return ModelState(A, t, np.log(msd / n), clamp_w(w))


def init_from_scores(cloud, scores: RdosScores, M_cap=DEFAULT_M_CAP, scheme=None, seed=0,
                     M_override=None, w_override=None) -> InitResult:
    """Hypersphere sample size from confident inliers, outlier weight from clear outliers."""
    X = _points(cloud)
    N, n = X.shape
    sc = np.asarray(scores.scores)
    if len(sc) != N:
        raise InvalidArgumentError(f"{len(sc)} scores for {N} points")
    if M_override is not None:
        M = int(M_override)
        if M < 1:
            raise InvalidArgumentError(f"M must be >= 1, got {M}")
    else:
        M = min(max(int(np.sum(sc <= 1.0)), n + 1), int(M_cap))
    w = float(w_override) if w_override is not None else float(np.sum(sc > 2.0)) / N
    if not 0.0 <= w <= 1.0:
        raise InvalidArgumentError(f"w must be in [0, 1], got {w}")
    sphere = sample_hypersphere(n, M, scheme=scheme or default_scheme(n), seed=seed)
    return InitResult(M=M, w=w, state0=initial_state(X, sphere, w), sphere=sphere)


def initialize(cloud, k=DEFAULT_K, **kwargs) -> InitResult:
    """Score the cloud and derive ``M``, ``w`` and the starting state.

    When both overrides are given the scores are not computed.
    """
    X = _points(cloud)
    if kwargs.get("M_override") is not None and kwargs.get("w_override") is not None:
        scores = RdosScores(np.ones(X.shape[0]), int(k))
    else:
        scores = rdos_scores(X, k=min(int(k), X.shape[0] - 1))
    return init_from_scores(X, scores, **kwargs)

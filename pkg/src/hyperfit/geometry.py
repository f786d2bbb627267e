"""Ellipsoids in R^n as affine images of the unit hypersphere.

An ellipsoid is stored as ``(A, t)``: the surface is ``{A y + t : |y| = 1}``
and its center form is ``(x - t)^T (A A^T)^{-1} (x - t) = 1``.  Because the
shape matrix ``B = A A^T`` of an invertible ``A`` is always positive
definite, any model built here is an ellipsoid and never another quadric.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, NotAnEllipsoidError

PARAMETRIC = "parametric"
GAUSSIAN = "gaussian-normalized"
SCHEMES = (PARAMETRIC, GAUSSIAN)

#: |det A| must exceed this times (geometric mean of row norms)^n.
DET_FLOOR = 1e-12


def default_scheme(dim):
    """Parametric grid up to R^3, gaussian-normalized above (grid size explodes)."""
    return PARAMETRIC if dim <= 3 else GAUSSIAN


def is_invertible(A):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    norms = np.linalg.norm(A, axis=1)
    if not np.all(np.isfinite(A)) or np.any(norms == 0):
        return False
    scale = np.exp(np.mean(np.log(norms))) ** n
    return abs(np.linalg.det(A)) > DET_FLOOR * scale


@dataclass(frozen=True)
class EllipsoidModel:
    """Affine parameterization ``theta = (A, t)`` of an ellipsoid."""

    A: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        t = np.array(self.t, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidArgumentError(f"A must be square, got shape {A.shape}")
        if t.shape[0] != A.shape[0]:
            raise InvalidArgumentError(f"t has length {t.shape[0]}, expected {A.shape[0]}")
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("t must be finite")
        if not is_invertible(A):
            raise NotAnEllipsoidError("A is singular; A A^T is not positive definite")
        A.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def B(self) -> np.ndarray:
        """Shape matrix ``A A^T``."""
        B = self.A @ self.A.T
        return 0.5 * (B + B.T)

    @property
    def center(self) -> np.ndarray:
        # the base sphere is centered at the origin, so c = t + A @ 0
        return self.t.copy()

    def residual(self, points):
        """Center-form residual ``(x - c)^T B^{-1} (x - c) - 1`` per point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        u = np.linalg.solve(self.A, (points - self.t).T)
        return np.sum(u * u, axis=0) - 1.0

    @classmethod
    def from_geometric(cls, params: "GeometricParams") -> "EllipsoidModel":
        Q = np.asarray(params.rotation)
        return cls(Q.T * np.asarray(params.semi_axes)[None, :], params.center)


@dataclass(frozen=True)
class GeometricParams:
    """Center, semi-axes (descending) and rotation ``Q`` with ``B = Q^T diag(a^2) Q``.

    Rows of ``Q`` are the principal directions.  ``euler3d`` holds
    ``(alpha, beta, gamma)`` for n = 3 only.
    """

    center: np.ndarray
    semi_axes: np.ndarray
    rotation: np.ndarray
    euler3d: Optional[tuple] = field(default=None)

    @property
    def dim(self) -> int:
        return len(self.semi_axes)

    def shape_matrix(self):
        Q = self.rotation
        return Q.T @ np.diag(np.asarray(self.semi_axes) ** 2) @ Q


@dataclass(frozen=True)
class SphereSamples:
    """Unit vectors ``y_j`` on the (dim-1)-sphere, one per row."""

    points: np.ndarray
    scheme: str

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def _balanced_rings(M):
    # polar rings at equal angular steps; ring populations proportional to sin(psi_1)
    r = max(1, int(round(np.sqrt(np.pi * M / 4.0))))
    r = min(r, M)
    polar = (np.arange(r) + 0.5) * np.pi / r
    share = np.sin(polar) / np.sin(polar).sum() * (M - r)
    counts = 1 + np.floor(share).astype(int)
    rem = M - counts.sum()
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    counts[order[:rem]] += 1
    psi = []
    for i, (p1, c) in enumerate(zip(polar, counts)):
        az = (np.arange(c) + 0.5 * (i % 2)) * 2 * np.pi / c
        psi.append(np.column_stack([np.full(c, p1), az]))
    return np.vstack(psi)


def _parametric_grid(dim, M):
    if dim == 2:
        psi = (np.arange(M) * 2 * np.pi / M)[:, None]
    elif dim == 3:
        psi = _balanced_rings(M)
    else:
        psi = _equal_step_grid(dim, M)
    pts = np.ones((psi.shape[0], dim))
    sin_prod = np.ones(psi.shape[0])
    for c in range(dim - 1):
        pts[:, c] = sin_prod * np.cos(psi[:, c])
        sin_prod = sin_prod * np.sin(psi[:, c])
    pts[:, dim - 1] = sin_prod
    return pts


def _equal_step_grid(dim, M):
    # k samples for each polar angle in [0, pi], 2k for the azimuth in [0, 2 pi)
    k = 1
    while k ** (dim - 2) * 2 * k < M:
        k += 1
    polar = (np.arange(k) + 0.5) * np.pi / k
    azimuth = np.arange(2 * k) * np.pi / k
    grids = np.meshgrid(*([polar] * (dim - 2) + [azimuth]), indexing="ij")
    psi = np.stack([g.reshape(-1) for g in grids], axis=1)
    G = psi.shape[0]
    if G > M:
        psi = psi[np.round(np.linspace(0, G - 1, M)).astype(int)]
    return psi


def sample_hypersphere(dim, M, scheme=None, seed=0) -> SphereSamples:
    """Draw ``M`` points on the unit (dim-1)-sphere.

    ``parametric`` evaluates the nested-angle parameterization on a
    deterministic angle grid: equally spaced on the circle; in R^3, polar
    rings at equal steps with ring populations proportional to the ring
    circumference; above R^3, an equal-step grid over every angle
    (midpoints for the polar angles) thinned to ``M`` evenly spaced
    entries.  ``gaussian-normalized`` normalizes standard normal
    draws from ``numpy.random.default_rng(seed)``.
    """
    if dim is None or int(dim) < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    if M is None or int(M) < 1:
        raise InvalidArgumentError(f"M must be >= 1, got {M}")
    dim, M = int(dim), int(M)
    scheme = scheme or default_scheme(dim)
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"unknown sampling scheme {scheme!r}")
    if scheme == PARAMETRIC and dim > 1:
        pts = _parametric_grid(dim, M)
    else:
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((M, dim))
        norms = np.linalg.norm(pts, axis=1)
        # a zero draw has probability zero but would poison the division
        while np.any(norms == 0):
            bad = norms == 0
            pts[bad] = rng.standard_normal((bad.sum(), dim))
            norms = np.linalg.norm(pts, axis=1)
        pts = pts / norms[:, None]
    pts.setflags(write=False)
    return SphereSamples(points=pts, scheme=scheme)


def _euler_zyx(Q):
    beta = np.arctan2(Q[1, 0], Q[0, 0])
    alpha = np.arctan2(-Q[2, 0], np.hypot(Q[0, 0], Q[1, 0]))
    gamma = np.arctan2(Q[2, 1], Q[2, 2])
    return float(alpha), float(beta), float(gamma)


def to_geometric(model: EllipsoidModel, tol=1e-12) -> GeometricParams:
    """Center, sorted semi-axes and rotation from the eigendecomposition of ``B``."""
    B = model.B
    lam, V = np.linalg.eigh(B)
    if lam[0] <= tol * max(abs(lam[-1]), np.finfo(float).tiny):
        raise NotAnEllipsoidError(f"shape matrix eigenvalues {lam} are not all positive")
    # eigh sorts ascending; stable sort on -lam gives descending with index tie-break
    order = np.argsort(-lam, kind="stable")
    lam, V = lam[order], V[:, order]
    if np.linalg.det(V) < 0:
        V[:, -1] = -V[:, -1]
    Q = V.T
    euler = _euler_zyx(Q) if model.dim == 3 else None
    return GeometricParams(center=model.center, semi_axes=np.sqrt(lam), rotation=Q, euler3d=euler)


def euler_to_rotation(alpha, beta, gamma):
    """Inverse of the Z-Y-X extraction used by :func:`to_geometric`."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    Rz = np.array([[cb, -sb, 0], [sb, cb, 0], [0, 0, 1]])
    Ry = np.array([[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]])
    Rx = np.array([[1, 0, 0], [0, cg, -sg], [0, sg, cg]])
    return Rz @ Ry @ Rx


def axis_ratio(params: GeometricParams) -> float:
    """Longest over shortest semi-axis."""
    a = np.asarray(params.semi_axes)
    return float(a.max() / a.min())


def specificity_threshold(dim) -> float:
    """Largest axis ratio ``sqrt((2n-2)/(n-2))`` for which classical constraints stay ellipsoid-specific."""
    if dim < 2:
        raise InvalidArgumentError(f"dim must be >= 2, got {dim}")
    if dim == 2:
        return float("inf")
    return float(np.sqrt((2.0 * dim - 2.0) / (dim - 2.0)))


def transform_sphere_points(model: EllipsoidModel, samples) -> np.ndarray:
    """Map unit-sphere samples onto the ellipsoid: ``y -> A y + t``."""
    Y = samples.points if isinstance(samples, SphereSamples) else np.asarray(samples, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != model.dim:
        raise InvalidArgumentError(f"samples of dimension {Y.shape[-1]} do not match model dimension {model.dim}")
    return Y @ model.A.T + model.t

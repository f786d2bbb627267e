"""Seeded synthetic ellipsoids and contaminated observations."""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .geometry import GAUSSIAN, EllipsoidModel, sample_hypersphere, transform_sphere_points

INLIER, OUTLIER = 0, 1

#: Default generation ranges, the 2D protocol ranges lifted to R^n.
CENTER_RANGE = (-30.0, 30.0)
AXIS_RANGE = (10.0, 30.0)


@dataclass(frozen=True)
class PointCloud:
    """Observations in R^n with optional labels (0 inlier, 1 outlier) and truth."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    truth: Optional[EllipsoidModel] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        if pts.ndim != 2:
            raise InvalidArgumentError(f"points must be 2-D, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
            if labels.shape[0] != pts.shape[0]:
                raise InvalidArgumentError(f"{labels.shape[0]} labels for {pts.shape[0]} points")
            if np.any((labels != INLIER) & (labels != OUTLIER)):
                raise InvalidArgumentError("labels must be 0 (inlier) or 1 (outlier)")
            object.__setattr__(self, "labels", labels)
        if self.truth is not None and self.truth.dim != pts.shape[1]:
            raise InvalidArgumentError("truth model dimension does not match the points")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class ContaminationSpec:
    """Noise variance, outlier fraction of the final cloud, optional half-space cut.

    ``occlusion_plane = (axis, t)`` keeps surface points whose coordinate
    ``axis`` is ``<= t``.
    """

    noise_sigma2: float = 0.0
    outlier_ratio: float = 0.0
    occlusion_plane: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma2 >= 0:
            raise InvalidArgumentError(f"noise_sigma2 must be >= 0, got {self.noise_sigma2}")
        if not 0 <= self.outlier_ratio < 1:
            raise InvalidArgumentError(f"outlier_ratio must be in [0, 1), got {self.outlier_ratio}")


def _check_range(name, rng_, positive=False):
    lo, hi = float(rng_[0]), float(rng_[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise InvalidArgumentError(f"{name} must be a finite interval lo <= hi, got {rng_}")
    if positive and lo <= 0:
        raise InvalidArgumentError(f"{name} lower bound must be > 0, got {lo}")
    return lo, hi


def random_rotation(dim, rng):
    """Haar-distributed rotation in SO(dim) from a sign-fixed QR."""
    G = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))[None, :]
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_ellipsoid(dim, center_range=CENTER_RANGE, axis_range=AXIS_RANGE, seed=0, axis_ratio=None):
    """Random ellipsoid with uniform center, semi-axes and rotation.

    With ``axis_ratio`` set, the longest semi-axis is drawn from
    ``axis_range``, the shortest is fixed at ``longest / axis_ratio`` and the
    remaining ones are uniform between the two.
    """
    if int(dim) < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    dim = int(dim)
    c_lo, c_hi = _check_range("center_range", center_range)
    a_lo, a_hi = _check_range("axis_range", axis_range, positive=True)
    rng = np.random.default_rng(seed)
    center = rng.uniform(c_lo, c_hi, size=dim)
    if axis_ratio is None:
        axes = rng.uniform(a_lo, a_hi, size=dim)
    else:
        if axis_ratio < 1:
            raise InvalidArgumentError(f"axis_ratio must be >= 1, got {axis_ratio}")
        longest = rng.uniform(a_lo, a_hi)
        shortest = longest / axis_ratio
        axes = np.concatenate([[longest, shortest], rng.uniform(shortest, longest, size=dim - 2)])[:dim]
        rng.shuffle(axes)
    R = random_rotation(dim, rng)
    return EllipsoidModel(R * axes[None, :], center)


def sample_surface(model: EllipsoidModel, M, scheme=GAUSSIAN, seed=0) -> PointCloud:
    """``M`` noiseless surface points, all labeled inlier, with ``truth=model``."""
    sphere = sample_hypersphere(model.dim, M, scheme=scheme, seed=seed)
    pts = transform_sphere_points(model, sphere)
    return PointCloud(pts, np.zeros(len(pts), dtype=np.int8), model)


def outlier_count(n_inliers, ratio):
    """Appended outliers so that ``ratio`` is their fraction in the final cloud."""
    return int(round(ratio * n_inliers / (1.0 - ratio)))


def contaminate(cloud: PointCloud, spec: ContaminationSpec) -> PointCloud:
    """Occlude, add isotropic Gaussian noise, then append uniform outliers.

    Outliers fill the axis-aligned box centered at the true center with
    half-width equal to the longest true semi-axis.
    """
    if spec.outlier_ratio > 0 and cloud.truth is None:
        raise InvalidArgumentError("outliers need the true model to place their box")
    labels = cloud.labels if cloud.labels is not None else np.zeros(len(cloud), dtype=np.int8)
    pts = cloud.points
    inl = labels == INLIER
    if spec.occlusion_plane is not None:
        axis, thresh = spec.occlusion_plane
        axis = int(axis)
        if not 0 <= axis < cloud.dim:
            raise InvalidArgumentError(f"occlusion axis {axis} out of range for dim {cloud.dim}")
        keep = ~inl | (pts[:, axis] <= thresh)
        pts, labels, inl = pts[keep], labels[keep], inl[keep]
    rng = np.random.default_rng(spec.seed)
    pts = pts.copy()
    if spec.noise_sigma2 > 0:
        pts[inl] += rng.normal(0.0, math.sqrt(spec.noise_sigma2), size=(int(inl.sum()), cloud.dim))
    n_out = outlier_count(int(inl.sum()), spec.outlier_ratio)
    if n_out:
        c = cloud.truth.center
        half = float(np.sqrt(np.linalg.eigvalsh(cloud.truth.B)[-1]))
        extra = rng.uniform(c - half, c + half, size=(n_out, cloud.dim))
        pts = np.vstack([pts, extra])
        labels = np.concatenate([labels, np.full(n_out, OUTLIER, dtype=np.int8)])
    return replace(cloud, points=pts, labels=labels)


def surface_uniform_samples(model: EllipsoidModel, count, seed=0, batch=65536):
    """Area-uniform surface points by rejection against the area element.

    For ``x = A u + t`` with ``u`` uniform on the sphere, the surface area
    element is proportional to ``|A^{-T} u|``; accepting with probability
    ``|A^{-T} u| * sigma_min(A)`` corrects the density.
    """
    rng = np.random.default_rng(seed)
    Ainv_T = np.linalg.inv(model.A).T
    bound = 1.0 / np.linalg.svd(model.A, compute_uv=False)[-1]
    out, have = [], 0
    while have < count:
        u = rng.standard_normal((batch, model.dim))
        u /= np.linalg.norm(u, axis=1)[:, None]
        weight = np.linalg.norm(u @ Ainv_T.T, axis=1) / bound
        acc = u[rng.random(batch) < weight]
        out.append(acc)
        have += len(acc)
    u = np.vstack(out)[:count]
    return u @ model.A.T + model.t


def occlusion_fraction(model: EllipsoidModel, axis, t, n_samples=200_000, seed=0, return_stderr=False):
    """Fraction of the surface area with coordinate ``axis`` greater than ``t``.

    Monte Carlo over area-uniform samples; with ``return_stderr`` the
    binomial standard error is returned alongside.
    """
    if model.dim != 3:
        raise InvalidArgumentError(f"occlusion_fraction is defined for R^3, got dim {model.dim}")
    axis = int(axis)
    if not 0 <= axis < 3:
        raise InvalidArgumentError(f"axis {axis} out of range")
    top = model.center[axis] + math.sqrt(model.B[axis, axis])
    if t >= top:
        frac = 0.0
    else:
        x = surface_uniform_samples(model, n_samples, seed=seed)
        frac = float(np.mean(x[:, axis] > t))
    if return_stderr:
        return frac, math.sqrt(frac * (1.0 - frac) / n_samples)
    return frac

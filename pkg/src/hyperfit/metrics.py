"""Error measures between a fitted and a ground-truth ellipsoid."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import EllipsoidModel, GeometricParams, is_invertible, to_geometric


@dataclass(frozen=True)
class FitErrors:
    """Offset bias ``E_c`` and shape deviation ``E_a``.

    Non-ellipsoidal fits carry ``is_ellipsoid=False`` and infinite errors.
    """

    E_c: float
    E_a: float
    is_ellipsoid: bool
    axis_ratio_fit: float


def spd_root(A):
    """Symmetric positive-definite representative of ``A`` (principal root of ``A A^T``)."""
    B = A @ A.T
    lam, V = np.linalg.eigh(0.5 * (B + B.T))
    return (V * np.sqrt(np.maximum(lam, 0.0))) @ V.T


def fit_errors(truth: EllipsoidModel, fitted) -> FitErrors:
    """``E_c = |c_t - c_fit|``, ``E_a = s_max / s_min - 1`` of ``A_fit^{-1} A_t``.

    ``fitted`` may be an :class:`EllipsoidModel` or a raw ``(A, t)`` pair
    that is allowed to be singular.
    """
    if isinstance(fitted, EllipsoidModel):
        A_f, t_f = fitted.A, fitted.t
    else:
        A_f, t_f = (np.asarray(v, dtype=float) for v in fitted)
    if A_f.shape != truth.A.shape:
        raise InvalidArgumentError(f"dimension mismatch: {A_f.shape} vs {truth.A.shape}")
    if not is_invertible(A_f):
        return FitErrors(math.inf, math.inf, False, math.inf)
    R = np.linalg.solve(spd_root(A_f), spd_root(truth.A))
    sv = np.linalg.svd(R, compute_uv=False)
    E_a = float(sv[0] / sv[-1] - 1.0)
    E_c = float(np.linalg.norm(truth.t - t_f))
    sa = np.sqrt(np.linalg.eigvalsh(A_f @ A_f.T))
    return FitErrors(E_c, max(E_a, 0.0), True, float(sa[-1] / sa[0]))


def ellipse_angle_deg(params: GeometricParams) -> float:
    """Major-axis orientation in degrees, folded into [0, 180)."""
    if params.dim != 2:
        raise InvalidArgumentError(f"expected a 2-D ellipse, got dim {params.dim}")
    q = np.asarray(params.rotation)[0]
    return float(np.degrees(np.arctan2(q[1], q[0])) % 180.0)


def angle_diff_deg(a, b):
    """Smallest difference between two axis orientations (period 180 degrees)."""
    d = (a - b) % 180.0
    return min(d, 180.0 - d)


def ellipse_params(center, semi_axes, angle_deg) -> GeometricParams:
    """2-D :class:`GeometricParams` from center, semi-axes and major-axis angle."""
    th = math.radians(angle_deg)
    c, s = math.cos(th), math.sin(th)
    Q = np.array([[c, s], [-s, c]])
    return GeometricParams(np.asarray(center, dtype=float), np.asarray(semi_axes, dtype=float), Q)


def param_mse_2d(truth_params, fitted_params):
    """Per-parameter mean squared errors over paired 2-D trials.

    Keys: ``center`` (squared Euclidean offset), ``a``, ``b``, ``angle``
    (degrees, 180-periodic) and ``area`` (difference of ``pi a b``).
    """
    if isinstance(truth_params, GeometricParams):
        truth_params, fitted_params = [truth_params], [fitted_params]
    truth_params, fitted_params = list(truth_params), list(fitted_params)
    if len(truth_params) != len(fitted_params) or not truth_params:
        raise InvalidArgumentError("need equally many, and at least one, truth and fitted entries")
    rows = []
    for tp, fp in zip(truth_params, fitted_params):
        if tp.dim != 2 or fp.dim != 2:
            raise InvalidArgumentError("param_mse_2d is defined for ellipses only")
        ta, fa = np.asarray(tp.semi_axes), np.asarray(fp.semi_axes)
        rows.append(
            (
                float(np.sum((np.asarray(tp.center) - np.asarray(fp.center)) ** 2)),
                (ta[0] - fa[0]) ** 2,
                (ta[1] - fa[1]) ** 2,
                angle_diff_deg(ellipse_angle_deg(tp), ellipse_angle_deg(fp)) ** 2,
                (math.pi * (ta[0] * ta[1] - fa[0] * fa[1])) ** 2,
            )
        )
    mse = np.mean(np.array(rows), axis=0)
    return dict(zip(("center", "a", "b", "angle", "area"), map(float, mse)))


def model_from_fit(model) -> GeometricParams:
    return to_geometric(model)

"""The EM unknowns ``Omega = (A, t, s, w)`` and their flat-vector form."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import EllipsoidModel, is_invertible

W_MIN = 1e-6
W_MAX = 0.999


def clamp_w(w):
    return float(min(max(w, W_MIN), W_MAX))


@dataclass(frozen=True)
class ModelState:
    """Affine model ``(A, t)``, log noise variance ``s`` and outlier weight ``w``."""

    A: np.ndarray
    t: np.ndarray
    s: float
    w: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        t = np.array(self.t, dtype=float).reshape(-1)
        if A.shape != (t.shape[0], t.shape[0]):
            raise InvalidArgumentError(f"A has shape {A.shape} for t of length {t.shape[0]}")
        if not np.isfinite(self.s):
            raise InvalidArgumentError(f"s must be finite, got {self.s}")
        if not W_MIN <= self.w <= W_MAX:
            raise InvalidArgumentError(f"w={self.w} outside [{W_MIN}, {W_MAX}]")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "w", float(self.w))

    @property
    def dim(self) -> int:
        return self.t.shape[0]

    @property
    def sigma2(self) -> float:
        return float(np.exp(self.s))

    def model(self) -> EllipsoidModel:
        return EllipsoidModel(self.A, self.t)

    def is_valid(self):
        return (
            is_invertible(self.A)
            and bool(np.all(np.isfinite(self.t)))
            and np.isfinite(self.s)
            and W_MIN <= self.w <= W_MAX
        )

    def flatten(self) -> np.ndarray:
        """Length ``n^2 + n + 2``: A row-major, then t, then s, then w."""
        return np.concatenate([self.A.reshape(-1), self.t, [self.s, self.w]])

    @classmethod
    def unflatten(cls, vec, dim=None) -> "ModelState":
        vec = np.asarray(vec, dtype=float)
        if dim is None:
            dim = int(round((-1 + np.sqrt(1 + 4 * (len(vec) - 2))) / 2))
        if len(vec) != dim * dim + dim + 2:
            raise InvalidArgumentError(f"vector of length {len(vec)} does not flatten a dim-{dim} state")
        n2 = dim * dim
        return cls(vec[:n2].reshape(dim, dim), vec[n2 : n2 + dim], vec[-2], vec[-1])

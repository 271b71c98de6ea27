"""Single elliptically symmetric densities in the eigen-parameterisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NotPSDError, ShapeError
from .generators import DensityGenerator, eval_log_g

__all__ = [
    "Scatter",
    "make_scatter",
    "scatter_from_eig",
    "eigenvalue_floor",
    "mahalanobis_sq",
    "esd_log_density",
    "density_upper_bound",
    "log_density_upper_bound",
]

SYMMETRY_RTOL = 1e-8
PSD_RTOL = 1e-8
FLOOR_RTOL = 1e-12


def eigenvalue_floor(lam_max: float) -> float:
    return FLOOR_RTOL * max(1.0, float(lam_max))


@dataclass(frozen=True, eq=False)
class Scatter:
    """Symmetric positive-definite scatter matrix with a cached eigendecomposition.

    ``eigvals`` is sorted ascending and ``eigvecs[:, j]`` belongs to
    ``eigvals[j]``. Instances are immutable; build them with
    :func:`make_scatter` or :func:`scatter_from_eig`.
    """

    matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    log_det: float

    @property
    def p(self) -> int:
        return self.eigvals.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigvals[-1])

    def __eq__(self, other):
        if not isinstance(other, Scatter):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self) -> str:
        return f"Scatter(p={self.p}, eigvals={np.array2string(self.eigvals, precision=4)})"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def scatter_from_eig(eigvals, eigvecs) -> Scatter:
    """Assemble a :class:`Scatter` from eigenvalues and orthonormal eigenvectors.

    Eigenvalues are re-sorted ascending; the matrix is rebuilt as
    ``V diag(lam) V^T`` and symmetrised.
    """
    lam = np.asarray(eigvals, dtype=float)
    vecs = np.asarray(eigvecs, dtype=float)
    if lam.ndim != 1 or vecs.shape != (lam.size, lam.size):
        raise ShapeError("eigvals must be (p,) and eigvecs (p, p)")
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise NotPSDError("eigenvalues must be finite and positive")
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vecs = vecs[:, order]
    mat = (vecs * lam) @ vecs.T
    mat = 0.5 * (mat + mat.T)
    return Scatter(_freeze(mat), _freeze(lam), _freeze(vecs), float(np.sum(np.log(lam))))


def make_scatter(matrix) -> Scatter:
    """Validate a symmetric PSD matrix and cache its eigendecomposition.

    Eigenvalues that are numerically zero (between ``-1e-8 ||A||`` and the
    floor ``1e-12 max(1, lambda_max)``) are raised to the floor.

    Raises
    ------
    ShapeError
        If the input is not square or not symmetric within ``1e-8`` relative.
    NotPSDError
        If an eigenvalue is below ``-1e-8 ||A||``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ShapeError(f"scatter must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPSDError("scatter matrix has non-finite entries")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * max(1.0, norm):
        raise ShapeError("scatter matrix is not symmetric")
    a = 0.5 * (a + a.T)

    lam, vecs = np.linalg.eigh(a)
    if lam[0] < -PSD_RTOL * norm:
        raise NotPSDError(f"scatter matrix has negative eigenvalue {lam[0]:.3g}")
    floor = eigenvalue_floor(lam[-1])
    if lam[0] < floor:
        lam = np.maximum(lam, floor)
        a = (vecs * lam) @ vecs.T
        a = 0.5 * (a + a.T)
    return Scatter(_freeze(a), _freeze(lam), _freeze(vecs), float(np.sum(np.log(lam))))


def mahalanobis_sq(x, mu, S: Scatter):
    """Squared Mahalanobis distance ``(x - mu)^T S^{-1} (x - mu)``.

    ``x`` may be a single ``p``-vector or an ``(n, p)`` array of rows.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    p = S.p
    if mu.shape != (p,) or x.shape[-1:] != (p,) or x.ndim > 2:
        raise ShapeError(f"dimension mismatch: x {x.shape}, mu {mu.shape}, scatter p={p}")
    proj = (x - mu) @ S.eigvecs
    d = (proj * proj) @ (1.0 / S.eigvals)
    if x.ndim == 1:
        return float(d)
    return d


def esd_log_density(x, mu, S: Scatter, gen: DensityGenerator):
    """Log density of ``ESD(mu, S)`` with generator ``gen`` at ``x`` (vector or rows)."""
    delta = mahalanobis_sq(x, mu, S)
    return -0.5 * S.log_det + eval_log_g(gen, delta, S.p)


def log_density_upper_bound(S: Scatter, gen: DensityGenerator, p: int | None = None) -> float:
    p = S.p if p is None else p
    if p != S.p:
        raise ShapeError(f"p={p} does not match scatter dimension {S.p}")
    return eval_log_g(gen, 0.0, p) - 0.5 * p * np.log(S.eigvals[0])


def density_upper_bound(S: Scatter, gen: DensityGenerator, p: int | None = None) -> float:
    """``g(0) lambda_min(S)^{-p/2}``, the global maximum of any density with scatter ``S``."""
    return float(np.exp(log_density_upper_bound(S, gen, p)))

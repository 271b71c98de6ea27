"""Eigen-ratio constraint on the scatter matrices of a mixture.

The constraint bounds the ratio of the largest to the smallest eigenvalue
taken over *all* components jointly::

    max_{k,j} lambda_j(Sigma_k) / min_{k,j} lambda_j(Sigma_k) <= gamma

Two projections are provided. :func:`feasibility_truncate` is the cheap
device that caps every eigenvalue at ``gamma * lambda_min``;
:func:`optimal_constrained_eigenvalues` solves the constrained eigenvalue
sub-problem of the M-step exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .esd import FLOOR_RTOL, Scatter, scatter_from_eig
from .exceptions import ConfigurationError, DegenerateScatterError, InputDomainError

__all__ = [
    "ErcConfig",
    "eigen_ratio",
    "satisfies_erc",
    "feasibility_truncate",
    "optimal_constrained_eigenvalues",
    "eigen_objective",
]


@dataclass(frozen=True)
class ErcConfig:
    """Eigen-ratio bound ``gamma >= 1`` (``gamma = 1`` forces equal spherical scatters)."""

    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 1:
            raise ConfigurationError(f"gamma must be >= 1, got {self.gamma!r}")


def _scatters_of(obj) -> Sequence[Scatter]:
    return obj.scatters if hasattr(obj, "scatters") else obj


def eigen_ratio(theta_or_scatters) -> float:
    """``lambda_max(theta) / lambda_min(theta)`` over all components."""
    lam = np.concatenate([s.eigvals for s in _scatters_of(theta_or_scatters)])
    return float(lam.max() / lam.min())


def satisfies_erc(theta_or_scatters, cfg: ErcConfig, tol: float = 0.0) -> bool:
    lam = np.concatenate([s.eigvals for s in _scatters_of(theta_or_scatters)])
    return bool(lam.max() <= cfg.gamma * (1.0 + tol) * lam.min())


def feasibility_truncate(scatters: Sequence[Scatter], cfg: ErcConfig) -> list[Scatter]:
    """Cap every eigenvalue at ``gamma * lambda_min(theta)``, keeping eigenvectors.

    Inputs that already satisfy the constraint are returned unchanged.
    """
    scatters = list(scatters)
    if not scatters:
        raise InputDomainError("need at least one scatter")
    lam_min = min(s.eigvals[0] for s in scatters)
    if not lam_min > 0:
        raise DegenerateScatterError("smallest eigenvalue must be positive")
    cap = cfg.gamma * lam_min
    out = []
    for s in scatters:
        if s.eigvals[-1] <= cap:
            out.append(s)
        else:
            out.append(scatter_from_eig(np.minimum(s.eigvals, cap), s.eigvecs))
    return out


def _clip(d: np.ndarray, m: float, gamma: float) -> np.ndarray:
    return np.minimum(np.maximum(d, m), gamma * m)


def eigen_objective(m: float, targets, weights, gamma: float) -> float:
    """``F(m) = sum_k w_k sum_j [log c_kj + d_kj / c_kj]`` with ``c = clip(d, m, gamma m)``."""
    total = 0.0
    for d, w in zip(targets, weights):
        d = np.asarray(d, dtype=float)
        c = _clip(d, m, gamma)
        total += w * float(np.sum(np.log(c) + d / c))
    return total


def optimal_constrained_eigenvalues(targets, weights, cfg: ErcConfig) -> list[np.ndarray]:
    """Solve the eigenvalue step of a constrained M-step.

    Minimises ``F(m)`` over the lower clipping level ``m`` and returns
    ``clip(d_kj, m*, gamma m*)``. On every interval between consecutive
    breakpoints ``{d_kj} U {d_kj / gamma}`` the sets of eigenvalues clipped
    from below and from above are fixed, and the stationary point is::

        m = (sum_{d<m} w d + sum_{d>gamma m} w d / gamma) / (sum_{d<m} w + sum_{d>gamma m} w)

    so the global optimum is found by checking each interval.

    Parameters
    ----------
    targets : sequence of array_like
        Unconstrained eigenvalues ``d_k`` for each component.
    weights : array_like
        Nonnegative component weights ``w_k`` (effective sizes).
    cfg : ErcConfig

    Returns
    -------
    list of ndarray
        Constrained eigenvalues, same shapes as ``targets``.
    """
    gamma = cfg.gamma
    d_list = [np.array(d, dtype=float).reshape(-1) for d in targets]
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(d_list) != w.size:
        raise InputDomainError("one weight per component is required")
    if np.any(w < 0) or not w.sum() > 0:
        raise InputDomainError("weights must be nonnegative with positive sum")
    if any(np.any(d < 0) for d in d_list):
        raise InputDomainError("eigenvalue targets must be nonnegative")
    d_max = max(float(d.max()) for d in d_list)
    if not d_max > 0:
        raise DegenerateScatterError("all eigenvalue targets are zero")

    floor = FLOOR_RTOL * max(1.0, d_max)
    d_list = [np.full_like(d, floor) if np.all(d < floor) else d for d in d_list]

    all_d = np.concatenate(d_list)
    all_w = np.concatenate([np.full(d.size, wk) for d, wk in zip(d_list, w)])
    pos = all_w > 0
    if not np.any(pos):
        raise InputDomainError("weights must be nonnegative with positive sum")
    dw, ww = all_d[pos], all_w[pos]

    breaks = np.unique(np.concatenate([dw, dw / gamma]))
    breaks = breaks[breaks > 0]
    lo_edge = breaks[0] / 2.0 if breaks.size else floor
    edges = np.concatenate([[lo_edge], breaks, [breaks[-1] * 2.0]])

    best_m, best_f = None, np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        below = dw < mid
        above = dw > gamma * mid
        denom = ww[below].sum() + ww[above].sum()
        if denom > 0:
            m = (np.dot(ww[below], dw[below]) + np.dot(ww[above], dw[above]) / gamma) / denom
            m = min(max(m, a), b)
        else:
            m = mid
        if not m > 0:
            continue
        f = float(np.sum(ww * (np.log(_clip(dw, m, gamma)) + dw / _clip(dw, m, gamma))))
        if f < best_f:
            best_f, best_m = f, m

    out = []
    for d in d_list:
        out.append(_clip(d, best_m, gamma))
    # clipping guarantees the ratio up to rounding; enforce it exactly
    lo = min(float(x.min()) for x in out)
    out = [np.minimum(x, gamma * lo) for x in out]
    return out

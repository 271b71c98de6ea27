"""Finite mixtures of elliptical densities: density, likelihood, posteriors, MAP rule.

Cluster labels returned by this module are 1-based (``1..K``), matching the
usual mixture-model notation; arrays of parameters are 0-based as always.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .esd import Scatter, esd_log_density, make_scatter
from .exceptions import InputDomainError, ShapeError
from .generators import DensityGenerator

__all__ = [
    "MixtureParams",
    "component_log_densities",
    "log_mixture_density",
    "sample_loglik",
    "posterior",
    "map_classify",
    "param_distance",
]

WEIGHT_ATOL = 1e-10
EXACT_MATCHING_MAX_K = 8


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Parameters ``theta = {(pi_k, mu_k, Sigma_k)}`` of a K-component mixture.

    Attributes
    ----------
    weights : ndarray, shape (K,)
    means : ndarray, shape (K, p)
    scatters : tuple of Scatter
    gen : DensityGenerator
    """

    weights: np.ndarray
    means: np.ndarray
    scatters: tuple
    gen: DensityGenerator

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.array(self.means, dtype=float)
        scat = tuple(self.scatters)
        if w.ndim != 1 or w.size == 0:
            raise ShapeError("weights must be a non-empty vector")
        if mu.ndim != 2 or mu.shape[0] != w.size:
            raise ShapeError(f"means must have shape (K, p) with K={w.size}, got {mu.shape}")
        if len(scat) != w.size or any(not isinstance(s, Scatter) for s in scat):
            raise ShapeError("need one Scatter per component")
        if any(s.p != mu.shape[1] for s in scat):
            raise ShapeError("all scatters must share the dimension of the means")
        if np.any(w < 0) or abs(w.sum() - 1.0) >= WEIGHT_ATOL:
            raise InputDomainError(f"weights must be nonnegative and sum to 1, got {w}")
        w.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "scatters", scat)

    @classmethod
    def from_arrays(cls, weights, means, covs, gen: DensityGenerator) -> "MixtureParams":
        """Build parameters from plain arrays; ``covs`` has shape ``(K, p, p)``."""
        return cls(weights, means, tuple(make_scatter(c) for c in covs), gen)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def covs(self) -> np.ndarray:
        return np.stack([s.matrix for s in self.scatters])

    def eigenvalues(self) -> np.ndarray:
        """All scatter eigenvalues, shape ``(K, p)``."""
        return np.stack([s.eigvals for s in self.scatters])

    def permuted(self, order: Sequence[int]) -> "MixtureParams":
        """Components reordered so that new component ``k`` is old ``order[k]``."""
        order = list(order)
        return MixtureParams(
            self.weights[order], self.means[order], tuple(self.scatters[j] for j in order), self.gen
        )

    def __repr__(self) -> str:
        return f"MixtureParams(K={self.K}, p={self.p}, weights={np.round(self.weights, 4)}, gen={self.gen!r})"


def _as_rows(x, p: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = x.reshape(1, -1) if single else x
    if rows.ndim != 2 or rows.shape[1] != p:
        raise ShapeError(f"expected points of dimension {p}, got array of shape {x.shape}")
    return rows, single


def component_log_densities(x, theta: MixtureParams) -> np.ndarray:
    """``log pi_k + log f(x_i; mu_k, Sigma_k)`` as an ``(n, K)`` array (``-inf`` where ``pi_k = 0``)."""
    rows, _ = _as_rows(x, theta.p)
    out = np.empty((rows.shape[0], theta.K))
    with np.errstate(divide="ignore"):
        log_w = np.log(theta.weights)
    for k in range(theta.K):
        out[:, k] = log_w[k] + esd_log_density(rows, theta.means[k], theta.scatters[k], theta.gen)
    return out


def log_mixture_density(x, theta: MixtureParams):
    """``log psi(x; theta)`` by log-sum-exp; scalar for a vector, ``(n,)`` for rows."""
    rows, single = _as_rows(x, theta.p)
    _, out = _normalise_log_rows(component_log_densities(rows, theta))
    return float(out[0]) if single else out


def sample_loglik(data, theta: MixtureParams) -> float:
    """Average log-likelihood ``(1/n) sum_i log psi(x_i; theta)``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InputDomainError("data must be a non-empty (n, p) array")
    return float(np.mean(log_mixture_density(data, theta)))


def _normalise_log_rows(log_joint: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # every row has a finite entry: some pi_k > 0 and all densities are positive.
    # Column-wise loops: row reductions over a handful of columns are slow in numpy.
    K = log_joint.shape[1]
    top = log_joint[:, 0].copy()
    for k in range(1, K):
        np.maximum(top, log_joint[:, k], out=top)
    tau = np.exp(log_joint - top[:, None])
    total = tau[:, 0].copy()
    for k in range(1, K):
        total += tau[:, k]
    tau /= total[:, None]
    return tau, np.log(total) + top


def posterior(x, theta: MixtureParams) -> np.ndarray:
    """Posterior membership probabilities ``tau_k(x; theta)``.

    Returns a ``(K,)`` vector for a single point or an ``(n, K)`` matrix whose
    rows sum to one.
    """
    rows, single = _as_rows(x, theta.p)
    tau, _ = _normalise_log_rows(component_log_densities(rows, theta))
    return tau[0] if single else tau


def map_classify(x, theta: MixtureParams):
    """MAP cluster label(s) in ``1..K``; ties go to the lowest index."""
    rows, single = _as_rows(x, theta.p)
    # argmax of the unnormalised log posterior; np.argmax picks the first maximum
    labels = np.argmax(component_log_densities(rows, theta), axis=1) + 1
    return int(labels[0]) if single else labels


def _cost_matrix(a: MixtureParams, b: MixtureParams) -> np.ndarray:
    dw = np.abs(a.weights[:, None] - b.weights[None, :])
    dmu = np.linalg.norm(a.means[:, None, :] - b.means[None, :, :], axis=2)
    ca, cb = a.covs, b.covs
    dsig = np.linalg.norm(ca[:, None] - cb[None, :], axis=(2, 3))
    return dw + dmu + dsig


def param_distance(a: MixtureParams, b: MixtureParams) -> float:
    """Label-switching invariant distance between two parameter vectors.

    Minimum over permutations ``s`` of
    ``sum_k |pi_a,k - pi_b,s(k)| + ||mu_a,k - mu_b,s(k)|| + ||Sigma_a,k - Sigma_b,s(k)||_F``.
    Permutations are enumerated exactly for ``K <= 8``; larger ``K`` uses the
    Hungarian algorithm, which solves the same separable assignment problem.
    """
    if a.K != b.K or a.p != b.p:
        raise ShapeError(f"cannot compare K={a.K}, p={a.p} with K={b.K}, p={b.p}")
    cost = _cost_matrix(a, b)
    K = a.K
    if K <= EXACT_MATCHING_MAX_K:
        rows = np.arange(K)
        perms = np.array(list(itertools.permutations(range(K))))
        totals = cost[rows, perms].sum(axis=1)
        return float(totals.min())
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())

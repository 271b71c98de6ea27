"""ECM fitting of eigen-ratio constrained Gaussian and Student-t mixtures.

Each iteration runs an E-step (posteriors, plus latent scale weights for the
Student-t model), closed-form updates for weights, means and raw scatter
matrices, and then one conditional step that replaces the eigenvalues of all
raw scatters jointly by the optimal eigen-ratio-feasible values while keeping
their eigenvectors. The Student-t model uses a fixed, user-supplied ``nu``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._rng import derive_seed
from .erc import ErcConfig, eigen_ratio, feasibility_truncate, optimal_constrained_eigenvalues
from .esd import make_scatter, mahalanobis_sq, scatter_from_eig
from .exceptions import (
    ConfigurationError,
    EmptyComponentError,
    FitFailedError,
    InputDomainError,
    PreconditionError,
)
from .generators import DensityGenerator, min_sample_size
from .mixture import MixtureParams, _normalise_log_rows, component_log_densities

__all__ = [
    "FitConfig",
    "FitResult",
    "ExistenceDiagnostics",
    "check_finite_sample_existence",
    "init_params",
    "e_step",
    "m_step_gaussian",
    "m_step_student_t",
    "fit",
]

log = logging.getLogger(__name__)

MAX_RETRIES = 3
INIT_RIDGE = 1e-6


@dataclass(frozen=True)
class FitConfig:
    """Search configuration for the constrained maximum-likelihood fit.

    ``model`` is ``"gaussian"`` or ``"t"``; ``nu`` is required for the latter.
    ``n_jobs`` only controls how many starts run concurrently; results do not
    depend on it.
    """

    K: int
    gamma: float = 100.0
    model: str = "gaussian"
    nu: Optional[float] = None
    n_starts: int = 10
    max_iter: int = 500
    rel_tol: float = 1e-8
    seed: int = 0
    min_weight: float = 1e-6
    n_jobs: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("K must be >= 1")
        ErcConfig(self.gamma)
        if self.model not in ("gaussian", "t"):
            raise ConfigurationError(f"model must be 'gaussian' or 't', got {self.model!r}")
        if self.model == "t" and (self.nu is None or not self.nu > 0):
            raise ConfigurationError("the Student-t model needs nu > 0")
        if self.n_starts < 1 or self.max_iter < 1 or self.n_jobs < 1:
            raise ConfigurationError("n_starts, max_iter and n_jobs must be positive")
        if not self.rel_tol > 0:
            raise ConfigurationError("rel_tol must be positive")
        if not 0 <= self.min_weight < 1.0 / self.K:
            raise ConfigurationError("min_weight must lie in [0, 1/K)")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def generator(self) -> DensityGenerator:
        if self.model == "t":
            return DensityGenerator.student_t(self.nu)
        return DensityGenerator.gaussian()

    @property
    def erc(self) -> ErcConfig:
        return ErcConfig(self.gamma)


@dataclass
class ExistenceDiagnostics:
    ok: bool
    reasons: list[str]
    n: int
    n_distinct: int
    min_n: Optional[int]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "reasons": list(self.reasons),
            "n": self.n,
            "n_distinct": self.n_distinct,
            "min_n": self.min_n,
        }


@dataclass
class FitResult:
    """Outcome of :func:`fit`. ``assignments`` holds 1-based MAP labels."""

    theta: MixtureParams
    loglik: float
    loglik_trace: np.ndarray
    posterior: np.ndarray
    assignments: np.ndarray
    n_iter: int
    converged: bool
    start_index: int
    diagnostics: ExistenceDiagnostics
    erc_ratio_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    start_logliks: list = field(default_factory=list)


def check_finite_sample_existence(data, cfg: FitConfig) -> ExistenceDiagnostics:
    """Check the finite-sample conditions under which the constrained MLE exists.

    Requires ``n > K``, at least ``K + 1`` distinct rows, and the generator's
    sample-size threshold (``n > K`` Gaussian, ``n > K (1 + p/nu)`` Student-t).
    Never raises; failed clauses are listed in ``reasons``.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]
    p = x.shape[1] if x.ndim == 2 else 0
    K = cfg.K
    reasons = []
    n_distinct = int(np.unique(x, axis=0).shape[0]) if n else 0
    if n <= K:
        reasons.append("n>K violated")
    if n_distinct < K + 1:
        reasons.append("fewer than K+1 distinct points")
    min_n = None
    if p >= 1:
        min_n = min_sample_size(cfg.generator, p, K)
        if cfg.model == "t" and n < min_n:
            reasons.append(f"n > K(1+p/nu) violated (need n >= {min_n})")
    else:
        reasons.append("data has no columns")
    return ExistenceDiagnostics(not reasons, reasons, n, n_distinct, min_n)


def _seed_centers(uniq: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    # D^2 weighting: each further row is drawn with probability proportional to its
    # squared distance from the centres chosen so far, so no row is drawn twice
    idx = [int(rng.integers(uniq.shape[0]))]
    d2 = np.sum((uniq - uniq[idx[0]]) ** 2, axis=1)
    for _ in range(1, K):
        j = int(rng.choice(uniq.shape[0], p=d2 / d2.sum()))
        idx.append(j)
        np.minimum(d2, np.sum((uniq - uniq[j]) ** 2, axis=1), out=d2)
    return uniq[idx]


def init_params(data, cfg: FitConfig, start_seed: int, distinct=None) -> MixtureParams:
    """Random-partition initialiser.

    Picks ``K`` distinct rows as centres (the first uniformly, the rest with
    probability proportional to squared distance from those already picked), assigns every point to its nearest
    centre, and uses cluster fractions (floored at ``1/(10K)``) and
    within-cluster covariances plus a small ridge as starting values. The
    scatters are made feasible by :func:`feasibility_truncate`. ``distinct``
    may carry the precomputed distinct rows of ``data``.
    """
    x = np.asarray(data, dtype=float)
    n, p = x.shape
    K = cfg.K
    rng = np.random.default_rng(start_seed)
    uniq = np.unique(x, axis=0) if distinct is None else distinct
    if uniq.shape[0] < K:
        raise InputDomainError(f"need at least K={K} distinct rows to initialise")
    centers = _seed_centers(uniq, K, rng)

    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    counts = np.bincount(labels, minlength=K).astype(float)
    weights = np.maximum(counts / n, 1.0 / (10 * K))
    weights /= weights.sum()

    total_cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
    ridge = INIT_RIDGE * max(np.trace(total_cov), np.finfo(float).tiny) / p
    scatters = []
    for k in range(K):
        members = x[labels == k]
        dev = members - members.mean(axis=0)
        cov = dev.T @ dev / members.shape[0]
        scatters.append(make_scatter(cov + ridge * np.eye(p)))
    scatters = feasibility_truncate(scatters, cfg.erc)
    return MixtureParams(weights, centers, tuple(scatters), cfg.generator)


def _e_step_with_loglik(x, theta: MixtureParams):
    tau, log_norm = _normalise_log_rows(component_log_densities(x, theta))
    return tau, float(np.mean(log_norm))


def e_step(data, theta: MixtureParams) -> np.ndarray:
    """Posterior matrix ``tau`` of shape ``(n, K)`` with rows summing to one."""
    x = np.asarray(data, dtype=float)
    return _e_step_with_loglik(x, theta)[0]


def _component_masses(tau: np.ndarray, min_weight: float) -> np.ndarray:
    n = tau.shape[0]
    nk = tau.sum(axis=0)
    for k, mass in enumerate(nk):
        if mass < min_weight * n or not mass > 0:
            raise EmptyComponentError(k, float(mass))
    return nk


def _constrained_update(weights, means, raw_covs, nk, cfg: FitConfig, gen) -> MixtureParams:
    eigs = [np.linalg.eigh(0.5 * (c + c.T)) for c in raw_covs]
    targets = [np.maximum(lam, 0.0) for lam, _ in eigs]
    lam_new = optimal_constrained_eigenvalues(targets, nk, cfg.erc)
    scatters = tuple(scatter_from_eig(lam, vecs) for lam, (_, vecs) in zip(lam_new, eigs))
    weights = weights / weights.sum()
    return MixtureParams(weights, means, scatters, gen)


def m_step_gaussian(data, tau, cfg: FitConfig) -> MixtureParams:
    """Weighted-moment updates followed by the joint eigen-ratio step.

    Raises
    ------
    EmptyComponentError
        If some column of ``tau`` sums to less than ``min_weight * n``.
    """
    x = np.asarray(data, dtype=float)
    tau = np.asarray(tau, dtype=float)
    nk = _component_masses(tau, cfg.min_weight)
    means = (tau.T @ x) / nk[:, None]
    covs = []
    for k in range(tau.shape[1]):
        dev = x - means[k]
        covs.append((tau[:, k, None] * dev).T @ dev / nk[k])
    return _constrained_update(nk / x.shape[0], means, covs, nk, cfg, DensityGenerator.gaussian())


def scale_weights(data, theta: MixtureParams, nu: float) -> np.ndarray:
    """Latent scale weights ``u_ik = (nu + p) / (nu + delta_ik)``, shape ``(n, K)``."""
    x = np.asarray(data, dtype=float)
    p = x.shape[1]
    delta = np.column_stack(
        [mahalanobis_sq(x, theta.means[k], theta.scatters[k]) for k in range(theta.K)]
    )
    return (nu + p) / (nu + delta)


def m_step_student_t(data, tau, cfg: FitConfig, theta: MixtureParams) -> MixtureParams:
    """Fixed-``nu`` Student-t conditional M-step.

    The scale weights are computed at ``theta``, the parameters that produced
    ``tau``.
    """
    if cfg.model != "t":
        raise ConfigurationError("m_step_student_t needs a Student-t FitConfig")
    x = np.asarray(data, dtype=float)
    tau = np.asarray(tau, dtype=float)
    nk = _component_masses(tau, cfg.min_weight)
    tu = tau * scale_weights(x, theta, cfg.nu)
    means = (tu.T @ x) / tu.sum(axis=0)[:, None]
    covs = []
    for k in range(tau.shape[1]):
        dev = x - means[k]
        covs.append((tu[:, k, None] * dev).T @ dev / nk[k])
    return _constrained_update(nk / x.shape[0], means, covs, nk, cfg, cfg.generator)


@dataclass
class _Chain:
    theta: MixtureParams
    trace: list
    ratios: list
    converged: bool
    tau: np.ndarray


def _run_chain(x, cfg: FitConfig, seed: int, distinct) -> _Chain:
    theta = init_params(x, cfg, seed, distinct)
    tau, ll = _e_step_with_loglik(x, theta)
    trace, ratios = [ll], [eigen_ratio(theta)]
    converged = False
    for _ in range(cfg.max_iter):
        if cfg.model == "t":
            theta = m_step_student_t(x, tau, cfg, theta)
        else:
            theta = m_step_gaussian(x, tau, cfg)
        ratios.append(eigen_ratio(theta))
        tau, ll_new = _e_step_with_loglik(x, theta)
        trace.append(ll_new)
        if abs(ll_new - ll) / (1.0 + abs(ll_new)) < cfg.rel_tol:
            converged = True
            break
        ll = ll_new
    return _Chain(theta, trace, ratios, converged, tau)


def _run_start(x, cfg: FitConfig, start_index: int, distinct):
    base = derive_seed(cfg.seed, start_index)
    for retry in range(MAX_RETRIES + 1):
        seed = base if retry == 0 else derive_seed(base, retry)
        try:
            return _run_chain(x, cfg, seed, distinct)
        except EmptyComponentError as err:
            log.debug("start %d retry %d abandoned: %s", start_index, retry, err)
    return None


def fit(data, cfg: FitConfig) -> FitResult:
    """Multi-start ECM approximation of the constrained MLE.

    Runs ``cfg.n_starts`` independent chains and keeps the one with the highest
    final average log-likelihood (ties go to the lowest start index). The
    outcome depends only on ``data`` and ``cfg`` (not on ``cfg.n_jobs``).

    Raises
    ------
    PreconditionError
        If :func:`check_finite_sample_existence` fails.
    FitFailedError
        If every start collapsed a component.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    diag = check_finite_sample_existence(x, cfg)
    if not diag.ok:
        raise PreconditionError(diag)

    distinct = np.unique(x, axis=0)
    starts = range(cfg.n_starts)
    if cfg.n_jobs > 1 and cfg.n_starts > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            chains = list(pool.map(lambda i: _run_start(x, cfg, i, distinct), starts))
    else:
        chains = [_run_start(x, cfg, i, distinct) for i in starts]

    start_ll = [None if c is None else c.trace[-1] for c in chains]
    best = None
    for i, c in enumerate(chains):
        if c is not None and (best is None or c.trace[-1] > chains[best].trace[-1]):
            best = i
    if best is None:
        raise FitFailedError(f"all {cfg.n_starts} starts collapsed a component")

    c = chains[best]
    assignments = np.argmax(component_log_densities(x, c.theta), axis=1) + 1
    return FitResult(
        theta=c.theta,
        loglik=c.trace[-1],
        loglik_trace=np.array(c.trace),
        posterior=c.tau,
        assignments=assignments,
        n_iter=len(c.trace) - 1,
        converged=c.converged,
        start_index=best,
        diagnostics=diag,
        erc_ratio_trace=np.array(c.ratios),
        start_logliks=start_ll,
    )

"""Density generators for elliptically symmetric distributions.

A density generator ``g`` is the radial profile of an elliptical density

.. math::
    f(x; \\mu, \\Sigma) = \\det(\\Sigma)^{-1/2} g((x-\\mu)^T \\Sigma^{-1} (x-\\mu)).

Two families are built in, both including their normalising constants so that
``f`` integrates to one:

* Gaussian: ``g(t) = (2 pi)^{-p/2} exp(-t/2)``
* Student-t with ``nu`` degrees of freedom:
  ``g(t) = Gamma((nu+p)/2) / (Gamma(nu/2) (nu pi)^{p/2}) (1 + t/nu)^{-(nu+p)/2}``

Custom generators can be supplied as a callable ``log_g(t, p)``. They carry no
tail metadata, so the existence thresholds below reject them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .exceptions import ConfigurationError, InputDomainError, UnsupportedGeneratorError

__all__ = [
    "DensityGenerator",
    "eval_log_g",
    "min_sample_size",
    "check_population_tail",
]

GAUSSIAN = "gaussian"
STUDENT_T = "student_t"
CUSTOM = "custom"
_KINDS = (GAUSSIAN, STUDENT_T, CUSTOM)


@dataclass(frozen=True)
class DensityGenerator:
    """Radial function ``g`` defining an elliptical family.

    Use the constructors :meth:`gaussian`, :meth:`student_t` and :meth:`custom`
    rather than the raw initialiser.
    """

    kind: str
    nu: Optional[float] = None
    custom_log_g: Optional[Callable[[np.ndarray, int], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        if self.kind == STUDENT_T:
            if self.nu is None or not np.isfinite(self.nu) or self.nu <= 0:
                raise ConfigurationError(f"Student-t generator needs nu > 0, got {self.nu!r}")
            object.__setattr__(self, "nu", float(self.nu))

    @classmethod
    def gaussian(cls) -> "DensityGenerator":
        return cls(GAUSSIAN)

    @classmethod
    def student_t(cls, nu: float) -> "DensityGenerator":
        return cls(STUDENT_T, nu=nu)

    @classmethod
    def custom(cls, log_g: Callable[[np.ndarray, int], np.ndarray]) -> "DensityGenerator":
        return cls(CUSTOM, custom_log_g=log_g)

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN

    @property
    def is_student_t(self) -> bool:
        return self.kind == STUDENT_T

    def log_g(self, t, p: int):
        return eval_log_g(self, t, p)

    def __repr__(self) -> str:
        if self.kind == STUDENT_T:
            return f"DensityGenerator(student_t, nu={self.nu:g})"
        return f"DensityGenerator({self.kind})"


def log_normalizer(gen: DensityGenerator, p: int) -> float:
    """Logarithm of ``g(0)`` for the built-in families."""
    if gen.kind == GAUSSIAN:
        return -0.5 * p * math.log(2.0 * math.pi)
    if gen.kind == STUDENT_T:
        nu = gen.nu
        return float(
            gammaln(0.5 * (nu + p)) - gammaln(0.5 * nu) - 0.5 * p * math.log(nu * math.pi)
        )
    raise UnsupportedGeneratorError("custom generators carry their own constant")


def eval_log_g(gen: DensityGenerator, t, p: int):
    """Evaluate ``log g(t)`` including the normalising constant.

    Parameters
    ----------
    gen : DensityGenerator
    t : float or array_like
        Squared Mahalanobis distances, all ``>= 0``.
    p : int
        Dimension of the sample space.

    Returns
    -------
    float or ndarray
        Same shape as ``t``.
    """
    if p < 1:
        raise InputDomainError(f"dimension p must be >= 1, got {p}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise InputDomainError("log_g is defined for t >= 0 only")

    if gen.kind == GAUSSIAN:
        out = log_normalizer(gen, p) - 0.5 * t_arr
    elif gen.kind == STUDENT_T:
        nu = gen.nu
        out = log_normalizer(gen, p) - 0.5 * (nu + p) * np.log1p(t_arr / nu)
    else:
        if gen.custom_log_g is None:
            raise ConfigurationError("custom generator has no log_g function")
        out = np.asarray(gen.custom_log_g(t_arr, p), dtype=float)

    if np.ndim(t) == 0:
        return float(out)
    return out


def min_sample_size(gen: DensityGenerator, p: int, K: int) -> int:
    """Smallest ``n`` for which the constrained MLE is guaranteed to exist.

    Gaussian: ``n > K``. Student-t: ``n > K (1 + p / nu)``. The comparison is
    done in exact rational arithmetic so integer thresholds are strict.
    """
    if p < 1 or K < 1:
        raise InputDomainError("p and K must be positive")
    if gen.kind == GAUSSIAN:
        return K + 1
    if gen.kind == STUDENT_T:
        bound = Fraction(K) * (1 + Fraction(p) / Fraction(gen.nu))
        return math.floor(bound) + 1
    raise UnsupportedGeneratorError(
        "no closed-form sample-size threshold for custom generators; "
        "verify the tail condition on g independently"
    )


def check_population_tail(gen: DensityGenerator, p: int) -> bool:
    """Whether ``g(beta / y) = o(y)`` as ``y -> 0`` (population-level tail condition).

    Always true for the Gaussian; true iff ``nu + p > 2`` for Student-t.
    """
    if gen.kind == GAUSSIAN:
        return True
    if gen.kind == STUDENT_T:
        return gen.nu + p > 2
    raise UnsupportedGeneratorError("tail condition is not known for custom generators")

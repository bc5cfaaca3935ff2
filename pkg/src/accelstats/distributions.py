"""Univariate probability models: generalized Pareto, normal, exponential.

The generalized Pareto family uses shape k and scale sigma with support
starting at 0; k = 0 degenerates to the exponential, k < 0 has bounded
support [0, -sigma/k].  Shapes with |k| below ``K_LIMIT_TOL`` are routed
to the exponential limit to avoid catastrophic cancellation in
(1 + k*x/sigma)**(-1/k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

K_LIMIT_TOL = 1e-8


@dataclass(frozen=True)
class GpdParams:
    """Generalized Pareto shape/scale pair."""

    k: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.k):
            raise ParameterError(f"GPD shape must be finite, got {self.k}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"GPD scale must be positive, got {self.sigma}")

    @property
    def upper(self) -> float:
        """Upper support endpoint: -sigma/k for k < 0, else +inf."""
        if self.k < -K_LIMIT_TOL:
            return -self.sigma / self.k
        return np.inf


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"normal scale must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ExpParams:
    mu: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ParameterError(f"exponential mean must be positive, got {self.mu}")


def _wrap(x, value):
    return float(value) if np.isscalar(x) or np.ndim(x) == 0 else value


def _check_support(x: np.ndarray, p: GpdParams) -> None:
    if np.any(x < 0) or np.any(x > p.upper):
        raise DomainError(f"x outside GPD support [0, {p.upper}]")


def gpd_pdf(x, p: GpdParams):
    """Density (1/sigma)(1 + k*x/sigma)^(-1-1/k); exponential limit for small |k|."""
    xa = np.asarray(x, dtype=float)
    _check_support(xa, p)
    if abs(p.k) < K_LIMIT_TOL:
        out = np.exp(-xa / p.sigma) / p.sigma
    else:
        with np.errstate(divide="ignore"):
            logterm = np.log1p(p.k * xa / p.sigma)
        out = np.exp((-1.0 - 1.0 / p.k) * logterm) / p.sigma
    return _wrap(x, out)


def gpd_cdf(x, p: GpdParams):
    """CDF 1 - (1 + k*x/sigma)^(-1/k); exponential limit for small |k|."""
    xa = np.asarray(x, dtype=float)
    _check_support(xa, p)
    if abs(p.k) < K_LIMIT_TOL:
        out = -np.expm1(-xa / p.sigma)
    else:
        with np.errstate(divide="ignore"):
            out = -np.expm1(np.log1p(p.k * xa / p.sigma) * (-1.0 / p.k))
    return _wrap(x, np.clip(out, 0.0, 1.0))


def _quantile_raw(prob, k, sigma):
    """Inverse CDF on raw arrays; sigma may vary per element."""
    if np.isscalar(k) and abs(k) < K_LIMIT_TOL:
        return -sigma * np.log1p(-prob)
    return (sigma / k) * np.expm1(-k * np.log1p(-prob))


def gpd_quantile(prob, p: GpdParams):
    """Quantile (sigma/k)((1-prob)^(-k) - 1) for prob in [0, 1)."""
    pa = np.asarray(prob, dtype=float)
    if np.any(pa < 0) or np.any(pa >= 1):
        raise DomainError("quantile probability must lie in [0, 1)")
    return _wrap(prob, _quantile_raw(pa, p.k, p.sigma))


def gpd_sample(n: int, p: GpdParams, seed) -> np.ndarray:
    """Inverse-CDF sampling; deterministic for a given seed."""
    if n < 1:
        raise DomainError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    return _quantile_raw(rng.random(n), p.k, p.sigma)


def gpd_logpdf(x, p: GpdParams):
    """Log density, stable far into the tail."""
    xa = np.asarray(x, dtype=float)
    _check_support(xa, p)
    if abs(p.k) < K_LIMIT_TOL:
        out = -xa / p.sigma - np.log(p.sigma)
    else:
        with np.errstate(divide="ignore"):
            out = (-1.0 - 1.0 / p.k) * np.log1p(p.k * xa / p.sigma) - np.log(p.sigma)
    return _wrap(x, out)


def normal_pdf(x, p: NormalParams):
    xa = np.asarray(x, dtype=float)
    z = (xa - p.mu) / p.sigma
    return _wrap(x, np.exp(-0.5 * z * z) / (p.sigma * np.sqrt(2.0 * np.pi)))


def normal_logpdf(x, p: NormalParams):
    xa = np.asarray(x, dtype=float)
    z = (xa - p.mu) / p.sigma
    return _wrap(x, -0.5 * z * z - np.log(p.sigma * np.sqrt(2.0 * np.pi)))


def exp_pdf(x, p: ExpParams):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("exponential density requires x >= 0")
    return _wrap(x, np.exp(-xa / p.mu) / p.mu)


def exp_logpdf(x, p: ExpParams):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("exponential density requires x >= 0")
    return _wrap(x, -xa / p.mu - np.log(p.mu))

"""Maximum-likelihood fitting of the three candidate models and AIC/BIC ranking.

The generalized Pareto fit reduces the two-parameter likelihood to a
one-dimensional profile over tau = k/sigma: for fixed tau the optimal shape
is k(tau) = mean(log1p(tau * x)) with sigma = k/tau, leaving
l(tau) = -n * (log(k/tau) + k + 1) to maximize.  The profile is searched by
golden sections over log-spaced segments on both sides of zero, with the
exponential boundary tau = 0 always evaluated as a candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (ExpParams, GpdParams, K_LIMIT_TOL, NormalParams,
                            exp_logpdf, gpd_logpdf, normal_logpdf)
from .errors import DegeneracyError, DomainError

MIN_GPD_SAMPLES = 30
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_TAU_EDGE_FRACTION = 1.0 - 1e-6


@dataclass(frozen=True)
class FitReport:
    model: str
    theta: dict
    logL: float
    r: int
    n: int
    aic: float
    bic: float
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {"model": self.model, "theta": dict(self.theta), "logL": self.logL,
                "r": self.r, "n": self.n, "aic": self.aic, "bic": self.bic}


@dataclass
class ModelRanking:
    reports: dict[str, FitReport]
    errors: dict[str, str]
    aic_order: list[str]
    bic_order: list[str]


def aic(r: int, logL: float) -> float:
    """Akaike information criterion 2r - 2*logL."""
    if r < 1:
        raise DomainError("parameter count must be >= 1")
    return 2.0 * r - 2.0 * logL


def bic(n: int, r: int, logL: float) -> float:
    """Bayesian information criterion ln(n)*r - 2*logL."""
    if n < 1 or r < 1:
        raise DomainError("sample and parameter counts must be >= 1")
    return math.log(n) * r - 2.0 * logL


def _report(model: str, theta: dict, logL: float, r: int, n: int, flags=()) -> FitReport:
    if not np.isfinite(logL):
        raise DegeneracyError(f"{model} fit produced a non-finite log-likelihood")
    return FitReport(model=model, theta=theta, logL=logL, r=r, n=n,
                     aic=aic(r, logL), bic=bic(n, r, logL), flags=tuple(flags))


def _as_fit_data(samples, minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise DomainError("fitting expects a 1-D series")
    if len(x) < minimum:
        raise DegeneracyError(f"need at least {minimum} samples, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    return x


def _profile_loglik(tau: float, x: np.ndarray, n: int):
    """Profile log-likelihood of tau; returns (l, k)."""
    if tau == 0.0:
        xbar = float(x.mean())
        return -n * (math.log(xbar) + 1.0), 0.0
    k = float(np.mean(np.log1p(tau * x)))
    if k == 0.0 or k / tau <= 0.0:
        return -np.inf, k
    return -n * (math.log(k / tau) + k + 1.0), k


def _golden_max(fun, a: float, b: float, rel_tol: float = 1e-10) -> float:
    """Golden-section maximizer of fun over [a, b]."""
    width = b - a
    c, d = b - _INVPHI * width, a + _INVPHI * width
    fc, fd = fun(c), fun(d)
    while (b - a) > rel_tol * width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return c if fc >= fd else d


def fit_gpd_mle(samples) -> FitReport:
    """Generalized Pareto MLE on nonnegative data via the tau profile."""
    x = _as_fit_data(samples, MIN_GPD_SAMPLES)
    if np.any(x < 0):
        raise DomainError("GPD fitting requires nonnegative samples")
    xmax = float(x.max())
    xbar = float(x.mean())
    if xmax == float(x.min()):
        raise DegeneracyError("all samples are equal; no GPD fit exists")

    n = len(x)
    tau_min = -_TAU_EDGE_FRACTION / xmax
    tau_hi = 1e3 / xbar

    def l_of(tau: float) -> float:
        return _profile_loglik(tau, x, n)[0]

    # Log-spaced multi-start segments on each side of the exponential boundary.
    pos_anchor = [1e-6 / xbar, 1e-3 / xbar, 1.0 / xbar, tau_hi]
    neg_anchor = [-s / xmax for s in (_TAU_EDGE_FRACTION, 1e-1, 1e-3, 1e-6)]
    candidates = [0.0]
    for anchors in (pos_anchor, neg_anchor):
        for a, b in zip(anchors[:-1], anchors[1:]):
            candidates.append(_golden_max(l_of, a, b))

    values = [l_of(t) for t in candidates]
    best = int(np.argmax(values))
    tau_star, l_star = candidates[best], values[best]

    flags: list[str] = []
    if not np.isfinite(l_star):
        tau_star = 0.0  # exponential-limit fallback
        flags.append("fallback_exponential")
    elif tau_star != 0.0 and (tau_star - tau_min < 1e-9 * abs(tau_min)
                              or tau_hi - tau_star < 1e-9 * tau_hi):
        flags.append("boundary")

    k_hat = _profile_loglik(tau_star, x, n)[1]
    if tau_star == 0.0 or abs(k_hat) < K_LIMIT_TOL:
        params = GpdParams(k=0.0, sigma=xbar)
    else:
        params = GpdParams(k=k_hat, sigma=k_hat / tau_star)
    logL = float(np.sum(gpd_logpdf(x, params)))
    return _report("gpd", {"k": params.k, "sigma": params.sigma}, logL, r=2, n=n, flags=flags)


def fit_normal(samples) -> FitReport:
    x = _as_fit_data(samples, 2)
    mu = float(x.mean())
    var = float(np.mean((x - mu) ** 2))
    if var == 0.0:
        raise DegeneracyError("zero variance; no normal fit exists")
    params = NormalParams(mu=mu, sigma=math.sqrt(var))
    logL = float(np.sum(normal_logpdf(x, params)))
    return _report("normal", {"mu": params.mu, "sigma": params.sigma}, logL, r=2, n=len(x))


def fit_exponential(samples) -> FitReport:
    x = _as_fit_data(samples, 1)
    if np.any(x < 0):
        raise DomainError("exponential fitting requires nonnegative samples")
    mu = float(x.mean())
    if mu == 0.0:
        raise DegeneracyError("zero mean; no exponential fit exists")
    params = ExpParams(mu=mu)
    logL = float(np.sum(exp_logpdf(x, params)))
    return _report("exponential", {"mu": params.mu}, logL, r=1, n=len(x))


_FITTERS = {"gpd": fit_gpd_mle, "normal": fit_normal, "exponential": fit_exponential}


def rank_models(samples) -> ModelRanking:
    """Fit all three models and rank them by ascending AIC and BIC."""
    x = _as_fit_data(samples, MIN_GPD_SAMPLES)
    if np.any(x < 0):
        raise DomainError("model ranking requires a nonnegative series")
    reports: dict[str, FitReport] = {}
    errors: dict[str, str] = {}
    for name, fitter in _FITTERS.items():
        try:
            reports[name] = fitter(x)
        except (DegeneracyError, DomainError) as exc:
            errors[name] = str(exc)
    if not reports:
        raise DegeneracyError("no model could be fitted: " + "; ".join(errors.values()))
    aic_order = sorted(reports, key=lambda nm: (reports[nm].aic, nm))
    bic_order = sorted(reports, key=lambda nm: (reports[nm].bic, nm))
    return ModelRanking(reports=reports, errors=errors, aic_order=aic_order, bic_order=bic_order)


def ranking_json(ranking: ModelRanking) -> dict:
    return {
        "reports": {name: rep.to_json_dict() for name, rep in sorted(ranking.reports.items())},
        "errors": dict(sorted(ranking.errors.items())),
        "aic_order": list(ranking.aic_order),
        "bic_order": list(ranking.bic_order),
    }

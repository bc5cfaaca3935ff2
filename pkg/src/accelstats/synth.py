"""Synthetic naturalistic-driving data generator.

Records are drawn IID at 10 Hz timestamps: velocity from a three-part
mixture (half-normal mass near zero, a uniform plateau, a linear taper to
zero), then quadrant-wise generalized Pareto accelerations whose scales are
modulated by a Gaussian hump in velocity and, for the lateral axis, by the
longitudinal magnitude.  With both modulations switched off the (ax, ay)
stream is an exact draw from the base bivariate Pareto model.

The IID construction carries no temporal autocorrelation; every analysis
this generator feeds is distributional, and independence keeps the
generator's distributional targets exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import ndtri

from .bivariate import BpdmParams
from .distributions import GpdParams, _quantile_raw
from .errors import ParameterError
from .series import SampleSeries, TripRecord


def default_bpdm_params() -> BpdmParams:
    """Symmetric-lateral base model with uniform quadrant weights."""
    return BpdmParams(
        brake=GpdParams(k=0.09, sigma=0.47),
        forward=GpdParams(k=-0.043, sigma=0.47),
        left=GpdParams(k=0.3, sigma=0.136),
        right=GpdParams(k=0.3, sigma=0.136),
    )


@dataclass(frozen=True)
class SynthConfig:
    base: BpdmParams = field(default_factory=default_bpdm_params)
    coupling_alpha: float = 0.5
    hump_beta: float = 0.6
    hump_center: float = 7.5  # m/s
    hump_width: float = 3.0  # m/s
    velocity_weights: tuple[float, float, float] = (0.15, 0.55, 0.30)
    nearzero_scale: float = 0.5  # m/s half-normal component
    plateau_end: float = 15.0
    taper_end: float = 35.0
    sample_rate_hz: float = 10.0
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.velocity_weights, dtype=float)
        if len(w) != 3 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("velocity weights must be 3 nonnegative values summing to 1")
        if self.coupling_alpha < 0 or self.hump_beta < 0:
            raise ParameterError("coupling and hump strengths must be nonnegative")
        if not (0.0 < self.plateau_end < self.taper_end):
            raise ParameterError("velocity cutoffs must satisfy 0 < plateau_end < taper_end")
        if self.hump_width <= 0 or self.nearzero_scale <= 0 or self.sample_rate_hz <= 0:
            raise ParameterError("scales and the sample rate must be positive")


def _draw_velocity(cfg: SynthConfig, u_comp: np.ndarray, u_val: np.ndarray) -> np.ndarray:
    edges = np.cumsum(cfg.velocity_weights)
    comp = np.searchsorted(edges, u_comp, side="right").clip(max=2)
    v = np.empty(len(u_comp))
    m = comp == 0
    v[m] = cfg.nearzero_scale * ndtri((1.0 + u_val[m]) / 2.0)
    m = comp == 1
    v[m] = cfg.plateau_end * u_val[m]
    m = comp == 2
    span = cfg.taper_end - cfg.plateau_end
    v[m] = cfg.taper_end - span * np.sqrt(1.0 - u_val[m])
    return v


def synth_series(cfg: SynthConfig, n: int) -> SampleSeries:
    """Generate n records as a column series; byte-deterministic per (cfg, n)."""
    if n < 1:
        raise ParameterError("record count must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    u_comp = rng.random(n)
    u_vval = rng.random(n)
    u_quad = rng.random(n)
    u_x = rng.random(n)
    u_y = rng.random(n)

    v = _draw_velocity(cfg, u_comp, u_vval)
    hump = 1.0 + cfg.hump_beta * np.exp(-((v - cfg.hump_center) ** 2) / (2.0 * cfg.hump_width**2))

    p = cfg.base
    quadrant = np.searchsorted(np.cumsum(p.weights), u_quad, side="right").clip(max=3)
    forward = quadrant >= 2
    right = (quadrant % 2) == 1

    ax_mag = np.empty(n)
    for is_fwd in (False, True):
        mask = forward == is_fwd
        prm = p.x_params(is_fwd)
        ax_mag[mask] = _quantile_raw(u_x[mask], prm.k, prm.sigma * hump[mask])
    lateral_scale = hump * (1.0 + cfg.coupling_alpha * ax_mag)
    ay_mag = np.empty(n)
    for is_rgt in (False, True):
        mask = right == is_rgt
        prm = p.y_params(is_rgt)
        ay_mag[mask] = _quantile_raw(u_y[mask], prm.k, prm.sigma * lateral_scale[mask])

    ax = np.where(forward, ax_mag, -ax_mag)
    ay = np.where(right, ay_mag, -ay_mag)
    t = np.arange(n, dtype=float) / cfg.sample_rate_hz
    return SampleSeries(t=t, ax=ax, ay=ay, vx=v)


def synth_generate(cfg: SynthConfig, n: int) -> Iterator[TripRecord]:
    """Stream records in timestamp order."""
    yield from synth_series(cfg, n)

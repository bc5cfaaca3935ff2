"""Empirical analyses: quadrant decomposition, relative-density contours,
conditional fit batteries, percentile-by-interval tables, velocity profiles.

Percentiles use the nearest-rank estimator (the smallest order statistic
whose empirical CDF reaches the requested probability): extreme levels such
as 99.99 make interpolation choices consequential, and nearest rank is
reproducible and conservative.  Conditioning bins with fewer samples than
``min_count`` are flagged absent, never reported as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bivariate import Polyline, levelset_numeric
from .errors import DegeneracyError, DomainError
from .fitselect import FitReport, ModelRanking, fit_gpd_mle, rank_models
from .kde import (
    BandwidthMatrix,
    DensityGrid,
    grid_spec_for,
    kde_evaluate,
    select_bandwidth_1d,
)
from .series import SampleSeries

DEFAULT_LEVELS = (90.0, 99.0, 99.9, 99.99)
DEFAULT_MIN_COUNT = 1000
TABLE_LEVELS = (1e-6, 1e-4, 1e-3, 1e-2, 0.1, 0.95)  # relative density contour set
QUADRANT_SECTIONS = ("brake", "forward", "left", "right")


@dataclass
class QuadrantDataset:
    """Sign-decomposed acceleration magnitudes; ties go to forward/right."""

    brake: np.ndarray
    forward: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def counts(self) -> dict[str, int]:
        return {s: len(getattr(self, s)) for s in QUADRANT_SECTIONS}

    def section(self, name: str) -> np.ndarray:
        if name == "lateral":
            return np.concatenate([self.left, self.right])
        if name in QUADRANT_SECTIONS:
            return getattr(self, name)
        raise ValueError(f"unknown section {name!r}")


@dataclass
class ContourLevelReport:
    relative_level: float
    absolute_level: float
    polylines: list[Polyline]
    n_inside: int
    mass_inside: float


@dataclass
class RelativeContourReport:
    rows: list[ContourLevelReport]
    n: int
    grid: DensityGrid
    peak: float


@dataclass
class PercentileTable:
    target_axis: str
    cond_axis: str
    edges: np.ndarray
    levels: tuple[float, ...]
    values: np.ndarray  # (n_bins, n_levels); NaN marks absent bins
    counts: np.ndarray
    min_count: int

    def to_csv(self) -> str:
        header = "bin_low,bin_high,count," + ",".join(_level_name(p) for p in self.levels)
        lines = [header]
        for i in range(len(self.counts)):
            cells = [f"{self.edges[i]:.9g}", f"{self.edges[i + 1]:.9g}", str(int(self.counts[i]))]
            for v in self.values[i]:
                cells.append("" if np.isnan(v) else f"{v:.9g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


@dataclass
class VelocityBin:
    lo: float
    hi: float
    count: int
    fits: dict[str, FitReport | None]
    percentiles: dict[str, np.ndarray | None]


@dataclass
class VelocityProfileReport:
    edges: np.ndarray
    levels: tuple[float, ...]
    bins: list[VelocityBin]
    velocity_density: DensityGrid
    out_of_range: int


def _level_name(p: float) -> str:
    return "p" + f"{p:g}".replace(".", "")


def _as_xy(samples) -> np.ndarray:
    if isinstance(samples, SampleSeries):
        return np.column_stack([samples.ax, samples.ay])
    xy = np.asarray(samples, dtype=float)
    if xy.ndim != 2 or xy.shape[1] < 2:
        raise DomainError("expected a SampleSeries or an (n, 2) array")
    return xy[:, :2]


def decompose_quadrants(samples) -> QuadrantDataset:
    """Split signed accelerations into per-side magnitude series."""
    xy = _as_xy(samples)
    if len(xy) == 0:
        raise DegeneracyError("cannot decompose an empty sample")
    ax, ay = xy[:, 0], xy[:, 1]
    return QuadrantDataset(
        brake=np.abs(ax[ax < 0]),
        forward=ax[ax >= 0].copy(),
        left=np.abs(ay[ay < 0]),
        right=ay[ay >= 0].copy(),
    )


def nearest_rank(sorted_values: np.ndarray, level: float) -> float:
    """Smallest order statistic whose empirical CDF reaches level percent."""
    if not (0.0 < level <= 100.0):
        raise DomainError("percentile level must lie in (0, 100]")
    n = len(sorted_values)
    idx = max(1, math.ceil(level / 100.0 * n))
    return float(sorted_values[idx - 1])


def points_inside_evenodd(points: np.ndarray, polylines: list[Polyline]) -> np.ndarray:
    """Even-odd (ray-crossing) point-in-region test over a set of polylines."""
    pts = np.asarray(points, dtype=float)
    inside = np.zeros(len(pts), dtype=bool)
    px, py = pts[:, 0], pts[:, 1]
    for pl in polylines:
        verts = pl.points
        if len(verts) < 3:
            continue
        ring = np.vstack([verts, verts[:1]])
        bx_lo, by_lo = ring.min(axis=0)
        bx_hi, by_hi = ring.max(axis=0)
        cand = np.flatnonzero((px >= bx_lo) & (px <= bx_hi) & (py >= by_lo) & (py <= by_hi))
        if cand.size == 0:
            continue
        cx, cy = px[cand], py[cand]
        crossings = np.zeros(cand.size, dtype=np.int64)
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            if y1 == y2:
                continue
            spans = (y1 > cy) != (y2 > cy)
            if not spans.any():
                continue
            x_int = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
            crossings += (spans & (cx < x_int)).astype(np.int64)
        inside[cand] ^= (crossings % 2).astype(bool)
    return inside


def _peak_estimate(grid: DensityGrid) -> float:
    """Peak density of a 2-D grid via a local quadratic fit at the argmax.

    The raw grid maximum of a noisy KDE field is biased upward (it selects
    the largest noise excursion), which distorts relative levels close to 1;
    fitting a quadratic over the surrounding window averages that noise out.
    Falls back to the raw maximum near the grid edge or when the fitted
    surface is not a proper maximum.
    """
    v = grid.values
    i, j = np.unravel_index(int(np.argmax(v)), v.shape)
    r = 4
    if not (r <= i < v.shape[0] - r and r <= j < v.shape[1] - r):
        return float(v[i, j])
    win = v[i - r:i + r + 1, j - r:j + r + 1]
    offsets = np.arange(-r, r + 1.0)
    X, Y = np.meshgrid(offsets, offsets, indexing="ij")
    design = np.column_stack([np.ones(win.size), X.ravel(), Y.ravel(),
                              X.ravel() ** 2, X.ravel() * Y.ravel(), Y.ravel() ** 2])
    a, b, c, d, e, f = np.linalg.lstsq(design, win.ravel(), rcond=None)[0]
    hess = np.array([[2 * d, e], [e, 2 * f]])
    if d >= 0 or np.linalg.det(hess) <= 0:
        return float(v[i, j])
    xy = np.linalg.solve(hess, [-b, -c])
    if np.any(np.abs(xy) > r):
        return float(v[i, j])
    peak = float(a + b * xy[0] + c * xy[1]
                 + d * xy[0] ** 2 + e * xy[0] * xy[1] + f * xy[1] ** 2)
    if not np.isfinite(peak) or peak <= 0:
        return float(v[i, j])
    return peak


def _zero_padded(grid: DensityGrid) -> DensityGrid:
    """Surround the grid with a ring of zero density so all level sets close."""
    ax0, ax1 = grid.axes
    s0, s1 = ax0[1] - ax0[0], ax1[1] - ax1[0]
    padded_axes = [
        np.concatenate([[ax0[0] - s0], ax0, [ax0[-1] + s0]]),
        np.concatenate([[ax1[0] - s1], ax1, [ax1[-1] + s1]]),
    ]
    values = np.zeros((len(padded_axes[0]), len(padded_axes[1])))
    values[1:-1, 1:-1] = grid.values
    return DensityGrid(axes=padded_axes, values=values, cell_volume=grid.cell_volume)


def relative_density_contours(samples, levels=TABLE_LEVELS, nodes=None) -> RelativeContourReport:
    """KDE-based relative density contours with sample-mass accounting."""
    xy = _as_xy(samples)
    n = len(xy)
    if n < 1000:
        raise DegeneracyError(f"contour analysis needs >= 1000 samples, got {n}")
    levels = sorted(float(c) for c in levels)
    if any(not (0.0 < c <= 1.0) for c in levels):
        raise DomainError("relative levels must lie in (0, 1]")

    hs = [select_bandwidth_1d(xy[:, j]) for j in range(2)]
    spec = grid_spec_for(xy, hs, nodes=nodes)
    grid = kde_evaluate(xy, BandwidthMatrix.from_bandwidths(hs), spec)
    peak = _peak_estimate(grid)
    padded = _zero_padded(grid)

    rows = []
    for c in levels:
        absolute = c * peak
        if c >= 1.0 or absolute >= float(grid.values.max()):
            polylines: list[Polyline] = []  # degenerate peak point
        else:
            polylines = [pl for pl in levelset_numeric(padded, absolute) if pl.closed]
        n_inside = int(points_inside_evenodd(xy, polylines).sum()) if polylines else 0
        rows.append(ContourLevelReport(relative_level=c, absolute_level=absolute,
                                       polylines=polylines, n_inside=n_inside,
                                       mass_inside=n_inside / n))
    return RelativeContourReport(rows=rows, n=n, grid=grid, peak=peak)


def _target_values(series: SampleSeries, target: str) -> tuple[np.ndarray, np.ndarray]:
    """Target magnitudes and the aligned row mask for sectioned targets."""
    if target == "ax":
        return np.abs(series.ax), np.ones(len(series), dtype=bool)
    if target == "ay":
        return np.abs(series.ay), np.ones(len(series), dtype=bool)
    if target == "ax_brake":
        mask = series.ax < 0
        return np.abs(series.ax[mask]), mask
    if target == "ax_forward":
        mask = series.ax >= 0
        return series.ax[mask].copy(), mask
    if target == "ay_left":
        mask = series.ay < 0
        return np.abs(series.ay[mask]), mask
    if target == "ay_right":
        mask = series.ay >= 0
        return series.ay[mask].copy(), mask
    raise ValueError(f"unknown target {target!r}")


def _condition_values(series: SampleSeries, cond: str) -> np.ndarray:
    if cond in ("ax", "ay"):
        return np.abs(series.signal(cond))
    if cond == "vx":
        return series.signal("vx")
    raise ValueError(f"unknown conditioning axis {cond!r}")


def percentile_by_interval(samples, target: str, condition: str, bin_edges,
                           levels=DEFAULT_LEVELS, min_count: int = DEFAULT_MIN_COUNT) -> PercentileTable:
    """Nearest-rank percentiles of target magnitudes per conditioning bin."""
    series = samples if isinstance(samples, SampleSeries) else _series_from_xy(samples)
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be strictly increasing")
    tvals, tmask = _target_values(series, target)
    cvals = _condition_values(series, condition)[tmask]

    nbins = len(edges) - 1
    values = np.full((nbins, len(levels)), np.nan)
    counts = np.zeros(nbins, dtype=int)
    which = np.digitize(cvals, edges) - 1
    for b in range(nbins):
        sel = tvals[which == b]
        counts[b] = len(sel)
        if counts[b] >= min_count:
            s = np.sort(sel)
            values[b] = [nearest_rank(s, p) for p in levels]
    return PercentileTable(target_axis=target, cond_axis=condition, edges=edges,
                           levels=tuple(levels), values=values, counts=counts,
                           min_count=min_count)


def _series_from_xy(samples) -> SampleSeries:
    xy = _as_xy(samples)
    return SampleSeries(t=np.arange(len(xy), dtype=float), ax=xy[:, 0], ay=xy[:, 1])


@dataclass
class BinRanking:
    lo: float
    hi: float
    count: int
    ranking: ModelRanking | None


def conditional_fit_battery(samples, condition: str, bin_edges,
                            min_count: int = DEFAULT_MIN_COUNT) -> list[BinRanking]:
    """Per-conditioning-bin model ranking of the other axis's magnitudes."""
    series = samples if isinstance(samples, SampleSeries) else _series_from_xy(samples)
    if condition not in ("ax", "ay"):
        raise ValueError("conditioning axis must be 'ax' or 'ay'")
    target = "ay" if condition == "ax" else "ax"
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be strictly increasing")
    cvals = _condition_values(series, condition)
    tvals = np.abs(series.signal(target))
    which = np.digitize(cvals, edges) - 1
    out: list[BinRanking] = []
    for b in range(len(edges) - 1):
        sel = tvals[which == b]
        if len(sel) >= min_count:
            out.append(BinRanking(lo=edges[b], hi=edges[b + 1], count=len(sel),
                                  ranking=rank_models(sel)))
        else:
            out.append(BinRanking(lo=edges[b], hi=edges[b + 1], count=len(sel), ranking=None))
    if all(rec.ranking is None for rec in out):
        raise DegeneracyError("every conditioning bin is below the minimum count")
    return out


def velocity_profile(samples: SampleSeries, bin_edges, levels=DEFAULT_LEVELS,
                     min_count: int = DEFAULT_MIN_COUNT) -> VelocityProfileReport:
    """Per-velocity-bin quadrant fits and percentiles, plus the velocity KDE."""
    if not isinstance(samples, SampleSeries) or samples.vx is None:
        raise DomainError("velocity profiling requires a SampleSeries with a vx column")
    if len(samples) == 0:
        raise DegeneracyError("empty velocity column")
    vx = samples.vx
    if np.any(vx < 0):
        raise DomainError("velocities must be nonnegative")
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be strictly increasing")

    h = select_bandwidth_1d(vx)
    vgrid = kde_evaluate(vx, BandwidthMatrix.from_bandwidths([h]), grid_spec_for(vx, [h]))

    which = np.digitize(vx, edges) - 1
    out_of_range = int(((which < 0) | (which >= len(edges) - 1)).sum())
    bins: list[VelocityBin] = []
    for b in range(len(edges) - 1):
        mask = which == b
        count = int(mask.sum())
        fits: dict[str, FitReport | None] = {}
        pcts: dict[str, np.ndarray | None] = {}
        if count >= min_count:
            quad = decompose_quadrants(np.column_stack([samples.ax[mask], samples.ay[mask]]))
            for section in QUADRANT_SECTIONS + ("lateral",):
                mags = quad.section(section)
                if section != "lateral":
                    try:
                        fits[section] = fit_gpd_mle(mags)
                    except (DegeneracyError, DomainError):
                        fits[section] = None
                if len(mags) >= min_count:
                    s = np.sort(mags)
                    pcts[section] = np.array([nearest_rank(s, p) for p in levels])
                else:
                    pcts[section] = None
        else:
            fits = {s: None for s in QUADRANT_SECTIONS}
            pcts = {s: None for s in QUADRANT_SECTIONS + ("lateral",)}
        bins.append(VelocityBin(lo=edges[b], hi=edges[b + 1], count=count,
                                fits=fits, percentiles=pcts))
    return VelocityProfileReport(edges=edges, levels=tuple(levels), bins=bins,
                                 velocity_density=vgrid, out_of_range=out_of_range)

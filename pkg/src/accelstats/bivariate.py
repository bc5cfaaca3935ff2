"""Bivariate acceleration models and density contour extraction.

Two model hypotheses are implemented.  The bivariate normal model has
density f(x, y) = exp(-x^2/sx^2 - y^2/sy^2) / (2*pi*sx*sy) with elliptical
level sets x^2/sx^2 + y^2/sy^2 = eta, eta = -ln(2*pi*sx*sy*C).  (The
exponent carries no 1/2 factors and the prefactor is kept as written in
the source model; the two are mutually consistent, which is what the
contour math relies on.)

The bivariate Pareto model assigns each sign quadrant a weight w_q and
models the magnitudes independently with generalized Pareto densities:
f(ax, ay) = w_q * g_x(|ax|) * g_y(|ay|), which integrates to one and, at
uniform weights, is the plain product of two-sided symmetric halves.  Its
per-quadrant level sets C = g_x(x) * g_y(y) have the closed form
y = (sigma_y/k_y) * (omega_y * (1 + k_x x / sigma_x)^gamma - 1) with
omega_y = (sigma_x sigma_y C)^(-k_y/(1+k_y)) and
gamma = -k_y (k_x + 1) / (k_x (k_y + 1)); the omega_y exponent sign is
fixed by requiring every emitted point to reproduce the level exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .distributions import GpdParams, K_LIMIT_TOL, gpd_pdf, _quantile_raw
from .errors import DomainError, ParameterError
from .kde import DensityGrid

CONTOUR_POINTS = 512
_WEIGHT_ORDER = ("brake_left", "brake_right", "forward_left", "forward_right")


@dataclass(frozen=True)
class BndmParams:
    """Bivariate normal scales; centers and correlation are fixed at zero."""

    sigma_nx: float
    sigma_ny: float

    def __post_init__(self):
        if self.sigma_nx <= 0 or self.sigma_ny <= 0:
            raise ParameterError("BNDM scales must be positive")


@dataclass(frozen=True)
class BpdmParams:
    """Quadrant-wise bivariate Pareto model.

    ``weights`` are the sign-quadrant probabilities in the order
    (brake&left, brake&right, forward&left, forward&right), where brake is
    ax < 0, forward ax >= 0, left ay < 0, right ay >= 0.
    """

    brake: GpdParams
    forward: GpdParams
    left: GpdParams
    right: GpdParams
    weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != 4 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("quadrant weights must be 4 nonnegative values summing to 1")

    def weight(self, x_side: str, y_side: str) -> float:
        return self.weights[_WEIGHT_ORDER.index(f"{x_side}_{y_side}")]

    def x_params(self, forward: bool) -> GpdParams:
        return self.forward if forward else self.brake

    def y_params(self, right: bool) -> GpdParams:
        return self.right if right else self.left


@dataclass(frozen=True)
class BndmContourSpec:
    level: float
    eta: float


@dataclass(frozen=True)
class BpdmContourSpec:
    level: float
    lam_x: float
    lam_y: float
    omega_y: float
    gamma: float


@dataclass
class Polyline:
    """Ordered 2-D points; a closed polyline implicitly joins last to first."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise DomainError("polyline coordinates must be finite")
        if self.closed and len(self.points) < 3:
            raise DomainError("a closed polyline needs at least 3 points")


def bndm_pdf(x, y, p: BndmParams):
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    out = np.exp(-(xa / p.sigma_nx) ** 2 - (ya / p.sigma_ny) ** 2) / (
        2.0 * np.pi * p.sigma_nx * p.sigma_ny)
    return float(out) if out.ndim == 0 else out


def bndm_peak(p: BndmParams) -> float:
    return 1.0 / (2.0 * np.pi * p.sigma_nx * p.sigma_ny)


def bndm_contour_spec(level: float, p: BndmParams) -> BndmContourSpec:
    peak = bndm_peak(p)
    if not (0.0 < level <= peak):
        raise DomainError(f"contour level must lie in (0, {peak:.6g}]")
    return BndmContourSpec(level=level, eta=-np.log(2.0 * np.pi * p.sigma_nx * p.sigma_ny * level))


def bndm_contour(level: float, p: BndmParams, n_points: int = CONTOUR_POINTS) -> Polyline:
    """Elliptical level set with semi-axes sigma * sqrt(eta)."""
    spec = bndm_contour_spec(level, p)
    if spec.eta == 0.0:
        return Polyline(points=np.zeros((1, 2)), closed=False)
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    root = np.sqrt(spec.eta)
    pts = np.column_stack([p.sigma_nx * root * np.cos(theta), p.sigma_ny * root * np.sin(theta)])
    return Polyline(points=pts, closed=True)


def bpdm_pdf(ax, ay, p: BpdmParams):
    """Quadrant-weighted product of magnitude densities; unit plane mass."""
    xa = np.atleast_1d(np.asarray(ax, dtype=float))
    ya = np.atleast_1d(np.asarray(ay, dtype=float))
    if xa.shape != ya.shape:
        raise DomainError("ax and ay must have matching shapes")
    out = np.empty(xa.shape, dtype=float)
    fwd, rgt = xa >= 0, ya >= 0
    for x_forward in (False, True):
        for y_right in (False, True):
            mask = (fwd == x_forward) & (rgt == y_right)
            if not mask.any():
                continue
            w = p.weight("forward" if x_forward else "brake", "right" if y_right else "left")
            gx = gpd_pdf(np.abs(xa[mask]), p.x_params(x_forward))
            gy = gpd_pdf(np.abs(ya[mask]), p.y_params(y_right))
            out[mask] = w * np.asarray(gx) * np.asarray(gy)
    return float(out[0]) if np.ndim(ax) == 0 and np.ndim(ay) == 0 else out


def bpdm_peak(p: BpdmParams) -> float:
    """Density at the origin quadrant maximum."""
    peaks = [p.weight(xs, ys) / (p.x_params(xs == "forward").sigma * p.y_params(ys == "right").sigma)
             for xs in ("brake", "forward") for ys in ("left", "right")]
    return max(peaks)


def quadrant_product_pdf(x, y, qx: GpdParams, qy: GpdParams):
    """Unweighted product density g_x(x) * g_y(y) of one quadrant's magnitudes."""
    return np.asarray(gpd_pdf(x, qx)) * np.asarray(gpd_pdf(y, qy))


def bpdm_contour_spec(level: float, qx: GpdParams, qy: GpdParams) -> BpdmContourSpec:
    peak = 1.0 / (qx.sigma * qy.sigma)
    if not (0.0 < level < peak):
        raise DomainError(f"contour level must lie in (0, {peak:.6g})")
    t = qx.sigma * qy.sigma * level
    lam_x = qx.k / qx.sigma
    lam_y = qy.k / qy.sigma
    omega_y = t ** (-qy.k / (1.0 + qy.k)) if abs(qy.k) >= K_LIMIT_TOL else np.nan
    if abs(qx.k) >= K_LIMIT_TOL and abs(qy.k) >= K_LIMIT_TOL:
        gamma = -qy.k * (qx.k + 1.0) / (qx.k * (qy.k + 1.0))
    else:
        gamma = np.nan
    return BpdmContourSpec(level=level, lam_x=lam_x, lam_y=lam_y, omega_y=omega_y, gamma=gamma)


def _contour_x_reach(level: float, qx: GpdParams, qy: GpdParams) -> float:
    """x where the quadrant contour meets the x axis: g_x(x) = sigma_y * level."""
    t = qx.sigma * qy.sigma * level
    if abs(qx.k) < K_LIMIT_TOL:
        return -qx.sigma * np.log(t)
    return (qx.sigma / qx.k) * (t ** (-qx.k / (1.0 + qx.k)) - 1.0)


def bpdm_contour_analytic(level: float, qx: GpdParams, qy: GpdParams,
                          n_points: int = CONTOUR_POINTS) -> Polyline:
    """One quadrant's level curve y(x) of the product density, over y >= 0."""
    spec = bpdm_contour_spec(level, qx, qy)
    t = qx.sigma * qy.sigma * level
    x = np.linspace(0.0, _contour_x_reach(level, qx, qy), n_points)
    kx_small, ky_small = abs(qx.k) < K_LIMIT_TOL, abs(qy.k) < K_LIMIT_TOL
    if kx_small and ky_small:
        y = -qy.sigma * (np.log(t) + x / qx.sigma)
    elif kx_small:
        decay = np.exp(-qy.k * x / ((1.0 + qy.k) * qx.sigma))
        y = (qy.sigma / qy.k) * (spec.omega_y * decay - 1.0)
    elif ky_small:
        y = -qy.sigma * (np.log(t) + (qx.k + 1.0) / qx.k * np.log1p(spec.lam_x * x))
    else:
        y = (1.0 / spec.lam_y) * (spec.omega_y * np.power(1.0 + spec.lam_x * x, spec.gamma) - 1.0)
    y = np.maximum(y, 0.0)
    return Polyline(points=np.column_stack([x, y]), closed=False)


def bpdm_sample(n: int, p: BpdmParams, seed) -> np.ndarray:
    """Sample (ax, ay) pairs: quadrant by weight, magnitudes by inverse CDF."""
    if n < 1:
        raise DomainError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    u_q = rng.random(n)
    u_x = rng.random(n)
    u_y = rng.random(n)
    edges = np.cumsum(p.weights)
    quadrant = np.searchsorted(edges, u_q, side="right").clip(max=3)
    forward = quadrant >= 2
    right = (quadrant % 2) == 1

    ax = np.empty(n)
    ay = np.empty(n)
    for is_fwd in (False, True):
        mask = forward == is_fwd
        prm = p.x_params(is_fwd)
        ax[mask] = _quantile_raw(u_x[mask], prm.k, prm.sigma)
    for is_rgt in (False, True):
        mask = right == is_rgt
        prm = p.y_params(is_rgt)
        ay[mask] = _quantile_raw(u_y[mask], prm.k, prm.sigma)
    ax[~forward] *= -1.0
    ay[~right] *= -1.0
    return np.column_stack([ax, ay])


def levelset_numeric(grid: DensityGrid, level: float) -> list[Polyline]:
    """Marching-squares level set of a 2-D grid, in data coordinates."""
    if grid.dim != 2:
        raise DomainError("level-set extraction requires a 2-D grid")
    vmax = float(grid.values.max())
    if not (0.0 < level <= vmax):
        raise DomainError(f"level must lie in (0, {vmax:.6g}]")
    x_axis, y_axis = grid.axes
    sx = x_axis[1] - x_axis[0]
    sy = y_axis[1] - y_axis[0]
    out: list[Polyline] = []
    for coords in measure.find_contours(grid.values, level):
        closed = bool(np.allclose(coords[0], coords[-1]))
        if closed:
            coords = coords[:-1]
        pts = np.column_stack([x_axis[0] + coords[:, 0] * sx, y_axis[0] + coords[:, 1] * sy])
        if closed and len(pts) < 3:
            closed = False
        if len(pts) >= 2 or closed:
            out.append(Polyline(points=pts, closed=closed))
    return out


def polyline_deviation(candidate: Polyline, reference: Polyline) -> float:
    """Max distance from candidate vertices to the reference polyline."""
    if reference.closed:
        seg_a = reference.points
        seg_b = np.roll(reference.points, -1, axis=0)
    else:
        seg_a = reference.points[:-1]
        seg_b = reference.points[1:]
    d = seg_b - seg_a
    lensq = np.maximum((d * d).sum(axis=1), 1e-300)
    rel = candidate.points[:, None, :] - seg_a[None, :, :]
    tproj = np.clip((rel * d[None, :, :]).sum(axis=2) / lensq[None, :], 0.0, 1.0)
    diff = rel - tproj[:, :, None] * d[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2)).min(axis=1)
    return float(dist.max())


def polylines_to_csv(polylines: list[Polyline]) -> str:
    """x,y rows per polyline, polylines separated by a blank line."""
    blocks = []
    for pl in polylines:
        blocks.append("\n".join(f"{x:.9g},{y:.9g}" for x, y in pl.points))
    return "\n\n".join(blocks) + "\n"


def polylines_to_svg(polylines: list[Polyline], stroke_width: float | None = None) -> str:
    """Minimal SVG: one path per polyline, viewBox in data units (y grows downward)."""
    pts = np.vstack([pl.points for pl in polylines]) if polylines else np.zeros((1, 2))
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    w, h = max(xmax - xmin, 1e-9), max(ymax - ymin, 1e-9)
    xmin -= 0.05 * w
    ymin -= 0.05 * h
    w *= 1.1
    h *= 1.1
    sw = stroke_width if stroke_width is not None else 0.004 * max(w, h)
    paths = []
    for pl in polylines:
        d = "M " + " L ".join(f"{x:.9g},{y:.9g}" for x, y in pl.points)
        if pl.closed:
            d += " Z"
        paths.append(f'<path d="{d}" fill="none" stroke="black" stroke-width="{sw:.9g}"/>')
    body = "\n  ".join(paths)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'viewBox="{xmin:.9g} {ymin:.9g} {w:.9g} {h:.9g}">\n  {body}\n</svg>\n')

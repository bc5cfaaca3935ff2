"""KL divergence between density grids and the data-sufficiency examination.

The examination consumes a stream in fixed-size chunks.  After each new
chunk it compares the kernel density estimate of the enlarged dataset
against the previous one and records their KL divergence.  The data
requirement gamma is the first chunk boundary from which every recorded
divergence to the end of the stream stays below the threshold; it is
certified only when at least ``stability_window`` divergences exist past
that point.  A stream that ends while the divergence criterion is met but
unconfirmed yields status "failed"; one whose final step is still above
the threshold yields "exhausted".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, GridError
from .kde import (
    BandwidthMatrix,
    DensityGrid,
    GridSpec,
    _isj_from_counts,
    _kernel_matrix,
    _nearest_node_counts,
    grid_spec_for,
    normal_reference_bandwidth,
    select_bandwidth_1d,
)

DENSITY_FLOOR = 1e-12
_KL_NEG_TOL = -1e-10
_ISJ_BINS = 2**14
# Bandwidths are floored at this multiple of the grid spacing so the binned
# evaluation stays smooth on the frozen examination grid.
_BANDWIDTH_FLOOR_SPACINGS = 0.75


@dataclass(frozen=True)
class ConvergenceConfig:
    chunk_size: int = 10**4
    epsilon: float = 1e-4
    stability_window: int = 20
    grid_spec: GridSpec | None = None
    nodes: tuple[int, ...] | None = None
    bandwidth_policy: str = "reselect"  # or "freeze"

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")
        if self.bandwidth_policy not in ("reselect", "freeze"):
            raise ValueError("bandwidth_policy must be 'reselect' or 'freeze'")


@dataclass
class ConvergenceResult:
    gamma: int | None
    kl_trace: list[float]
    status: str  # converged | failed | exhausted
    chunk_size: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def trace_rows(self) -> list[tuple[int, int, float]]:
        """(step, n, d_kl) rows; n is the size of the former dataset."""
        return [(k, k * self.chunk_size, d) for k, d in enumerate(self.kl_trace, start=1)]


def kl_trace_csv(result: ConvergenceResult) -> str:
    lines = ["step,n,d_kl"]
    lines += [f"{k},{n},{d:.17g}" for k, n, d in result.trace_rows()]
    return "\n".join(lines) + "\n"


def kl_divergence(f_new: DensityGrid, f_old: DensityGrid) -> float:
    """Riemann-sum KL divergence D[f_new || f_old] over a shared grid.

    Both grids are floored at 1e-12 before the log ratio and renormalized to
    exactly unit mass, which keeps the discrete Gibbs inequality intact; a
    result within negative numerical noise is clamped to 0.
    """
    if not f_new.same_axes(f_old):
        raise GridError("KL divergence requires grids with identical axes")
    for g, name in ((f_new, "f_new"), (f_old, "f_old")):
        m = g.mass()
        if not (0.99 <= m <= 1.01):
            raise GridError(f"{name} mass {m:.4f} is not within 1% of 1")
    vol = f_new.cell_volume
    p = np.maximum(f_new.values, DENSITY_FLOOR)
    q = np.maximum(f_old.values, DENSITY_FLOOR)
    p = p / (p.sum() * vol)
    q = q / (q.sum() * vol)
    kl = float(np.sum(p * np.log(p / q)) * vol)
    if kl < _KL_NEG_TOL:
        raise GridError(f"KL divergence {kl} below the negative-noise tolerance")
    return max(kl, 0.0)


def shuffled(data, seed) -> np.ndarray:
    """Seeded random permutation of a finite dataset, for pre-shuffling streams."""
    arr = np.asarray(data, dtype=float)
    rng = np.random.default_rng(seed)
    return arr[rng.permutation(len(arr))]


def _chunks(stream, m: int):
    if isinstance(stream, np.ndarray):
        for s in range(0, (len(stream) // m) * m, m):
            yield stream[s:s + m]
        return
    buf = []
    for obs in stream:
        buf.append(obs)
        if len(buf) == m:
            yield np.asarray(buf, dtype=float)
            buf = []


class _BinnedKde:
    """Incremental binned KDE state on a frozen grid."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.axes = spec.axes()
        self.spacings = spec.spacings()
        self.counts = np.zeros(spec.nodes[0] if spec.dim == 1 else spec.nodes, dtype=float)
        self.fine = [np.zeros(_ISJ_BINS) for _ in range(spec.dim)]
        self.n = 0
        self.n_dropped = 0

    def add(self, x: np.ndarray) -> None:
        if x.ndim == 1:
            x = x[:, None]
        inside = np.ones(len(x), dtype=bool)
        for j in range(self.spec.dim):
            inside &= (x[:, j] >= self.spec.lo[j]) & (x[:, j] <= self.spec.hi[j])
        self.n_dropped += int((~inside).sum())
        x = x[inside]
        self.n += len(x)
        self.counts += _nearest_node_counts(x, self.spec)
        for j in range(self.spec.dim):
            c, _ = np.histogram(x[:, j], bins=_ISJ_BINS, range=(self.spec.lo[j], self.spec.hi[j]))
            self.fine[j] += c

    def select_bandwidths(self) -> list[float]:
        hs = []
        for j in range(self.spec.dim):
            span = self.spec.hi[j] - self.spec.lo[j]
            try:
                h = _isj_from_counts(self.fine[j], self.n, span)
            except DegeneracyError:
                centers = self.spec.lo[j] + (np.arange(_ISJ_BINS) + 0.5) * span / _ISJ_BINS
                h = normal_reference_bandwidth(np.repeat(centers, self.fine[j].astype(int)))
            hs.append(max(h, _BANDWIDTH_FLOOR_SPACINGS * self.spacings[j]))
        return hs

    def density(self, bandwidths: list[float]) -> DensityGrid:
        H = BandwidthMatrix.from_bandwidths(bandwidths)
        mats = [_kernel_matrix(self.axes[j], H.diag[j], self.spacings[j])
                for j in range(self.spec.dim)]
        if self.spec.dim == 1:
            values = mats[0] @ self.counts
        else:
            values = mats[0] @ self.counts @ mats[1].T
        values = np.maximum(values / self.n, 0.0)
        return DensityGrid(axes=self.axes, values=values,
                           cell_volume=float(np.prod(self.spacings)))


def examine_convergence(stream, cfg: ConvergenceConfig) -> ConvergenceResult:
    """Run the chunked KL examination over a finite stream of observations."""
    m = cfg.chunk_size
    chunk_iter = _chunks(stream, m)
    try:
        first = next(chunk_iter)
        second = next(chunk_iter)
    except StopIteration:
        raise DegeneracyError(f"stream must yield at least two chunks of {m} observations")

    head = np.concatenate([np.atleast_2d(first.T).T, np.atleast_2d(second.T).T])
    dim = head.shape[1]
    if dim not in (1, 2):
        raise GridError("convergence examination supports 1- or 2-dimensional observations")

    if cfg.grid_spec is not None:
        spec = cfg.grid_spec
    else:
        hs0 = [select_bandwidth_1d(head[:, j]) for j in range(dim)]
        spec = grid_spec_for(head, hs0, nodes=cfg.nodes)

    state = _BinnedKde(spec)
    state.add(np.asarray(first, dtype=float))
    if state.n == 0:
        raise DegeneracyError("first chunk lies entirely outside the examination grid")

    bw_prev = state.select_bandwidths()
    frozen_bw = bw_prev if cfg.bandwidth_policy == "freeze" else None
    f_prev = state.density(bw_prev)

    trace: list[float] = []
    pending: np.ndarray | None = second
    while pending is not None:
        state.add(pending)
        bw_new = frozen_bw if frozen_bw is not None else state.select_bandwidths()
        f_new = state.density(bw_new)
        trace.append(kl_divergence(f_new, f_prev))
        f_prev = f_new
        pending = next(chunk_iter, None)

    return _certify(trace, m, cfg.epsilon, cfg.stability_window)


def _certify(trace: list[float], m: int, epsilon: float, window: int) -> ConvergenceResult:
    above = [k for k, d in enumerate(trace, start=1) if d >= epsilon]
    k_star = (above[-1] + 1) if above else 1
    tail = len(trace) - k_star + 1
    if tail >= window:
        return ConvergenceResult(gamma=k_star * m, kl_trace=trace, status="converged", chunk_size=m)
    status = "failed" if tail >= 1 else "exhausted"
    return ConvergenceResult(gamma=None, kl_trace=trace, status=status, chunk_size=m)

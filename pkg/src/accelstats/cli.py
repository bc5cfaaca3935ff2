"""Command-line front end: CSV ingestion, pipeline orchestration, report emission.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 analytic
non-convergence or failure.  Every JSON output embeds a run manifest
(command, configuration snapshot, input digests, seed, tool version,
timestamp); the manifest timestamp is the only field allowed to differ
between reruns, and all analytic content lives under "results".
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_MIN_COUNT,
    QUADRANT_SECTIONS,
    TABLE_LEVELS,
    PercentileTable,
    decompose_quadrants,
    percentile_by_interval,
    relative_density_contours,
    velocity_profile,
)
from .bivariate import (
    BndmParams,
    BpdmParams,
    Polyline,
    bndm_contour,
    bndm_pdf,
    bndm_peak,
    bpdm_contour_analytic,
    bpdm_peak,
    levelset_numeric,
    polyline_deviation,
    polylines_to_csv,
    polylines_to_svg,
    quadrant_product_pdf,
)
from .convergence import ConvergenceConfig, examine_convergence
from .distributions import GpdParams
from .errors import (
    DataFormatError,
    DegeneracyError,
    DomainError,
    GridError,
    ParameterError,
)
from .fitselect import MIN_GPD_SAMPLES, rank_models, ranking_json
from .kde import DensityGrid, density_grid_to_csv
from .series import SampleSeries, read_trips, write_trips
from .synth import SynthConfig, default_bpdm_params, synth_series

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ANALYTIC = 3

_DATA_ERRORS = (DataFormatError, DegeneracyError, DomainError, GridError,
                ParameterError, ValueError, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, doc: dict) -> None:
    _write_atomic(path, json.dumps(doc, indent=2, default=_json_default) + "\n")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(command: str, config: dict, inputs=(), seed=None) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": [{"path": str(p), "sha256": _sha256(p), "bytes": os.path.getsize(p)}
                   for p in inputs],
        "seed": seed,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def _parse_edges(spec: str) -> np.ndarray:
    if ":" in spec:
        lo, hi, step = (float(v) for v in spec.split(":"))
        if step <= 0 or hi <= lo:
            raise ParameterError(f"bad bin specification {spec!r}")
        return np.arange(lo, hi + step / 2.0, step)
    edges = np.array([float(v) for v in spec.split(",")])
    if len(edges) < 2:
        raise ParameterError("need at least two bin edges")
    return edges


def _parse_levels(spec: str) -> list[float]:
    return [float(v) for v in spec.split(",")]


def _gpd_from_dict(d: dict) -> GpdParams:
    return GpdParams(k=float(d["k"]), sigma=float(d["sigma"]))


def bpdm_params_from_dict(d: dict) -> BpdmParams:
    known = {"brake", "forward", "left", "right", "weights"}
    unknown = set(d) - known
    if unknown:
        raise ParameterError(f"unknown BPDM config key(s): {', '.join(sorted(unknown))}")
    base = default_bpdm_params()
    kwargs = {}
    for side in ("brake", "forward", "left", "right"):
        kwargs[side] = _gpd_from_dict(d[side]) if side in d else getattr(base, side)
    kwargs["weights"] = tuple(float(w) for w in d.get("weights", base.weights))
    return BpdmParams(**kwargs)


def synth_config_from_dict(d: dict) -> SynthConfig:
    fields = {"base", "coupling_alpha", "hump_beta", "hump_center", "hump_width",
              "velocity_weights", "nearzero_scale", "plateau_end", "taper_end",
              "sample_rate_hz", "seed"}
    unknown = set(d) - fields
    if unknown:
        raise ParameterError(f"unknown synth config key(s): {', '.join(sorted(unknown))}")
    kwargs = dict(d)
    if "base" in kwargs:
        kwargs["base"] = bpdm_params_from_dict(kwargs["base"])
    if "velocity_weights" in kwargs:
        kwargs["velocity_weights"] = tuple(float(w) for w in kwargs["velocity_weights"])
    return SynthConfig(**kwargs)


def _load_json_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ParameterError(f"config file {path} must contain a JSON object")
    return doc


# --- subcommand implementations -------------------------------------------


def cmd_synth(args) -> int:
    if args.n < 1:
        print("synth: error: --n must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    overrides = _load_json_config(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = synth_config_from_dict(overrides)
    series = synth_series(cfg, args.n)
    write_trips(args.out, series)
    print(f"wrote {args.n} records to {args.out}")
    return EXIT_OK


def _converge_one(series: SampleSeries, signal: str, cfg: ConvergenceConfig) -> dict:
    result = examine_convergence(series.signal(signal), cfg)
    return {
        "signal": signal,
        "status": result.status,
        "gamma": result.gamma,
        "chunk_size": cfg.chunk_size,
        "epsilon": cfg.epsilon,
        "window": cfg.stability_window,
        "kl_trace": [{"step": k, "n": n, "d_kl": d} for k, n, d in result.trace_rows()],
    }


def cmd_converge(args) -> int:
    series = read_trips(args.input)
    cfg = ConvergenceConfig(chunk_size=args.chunk, epsilon=args.epsilon,
                            stability_window=args.window,
                            bandwidth_policy=args.bandwidth_policy)
    results = _converge_one(series, args.signal, cfg)
    manifest = build_manifest("converge", {
        "signal": args.signal, "chunk": args.chunk, "epsilon": args.epsilon,
        "window": args.window, "bandwidth_policy": args.bandwidth_policy,
    }, inputs=[args.input])
    write_json(args.out, {"manifest": manifest, "results": results})
    if args.trace_csv:
        result = results["kl_trace"]
        rows = ["step,n,d_kl"] + [f'{r["step"]},{r["n"]},{r["d_kl"]:.17g}' for r in result]
        _write_atomic(args.trace_csv, "\n".join(rows) + "\n")
    print(f"signal {args.signal}: status={results['status']} gamma={results['gamma']}")
    return EXIT_OK if results["status"] == "converged" else EXIT_ANALYTIC


def cmd_fit(args) -> int:
    series = read_trips(args.input)
    quad = decompose_quadrants(series)
    mags = quad.section(args.section)
    if len(mags) < MIN_GPD_SAMPLES:
        raise DegeneracyError(
            f"section {args.section} has {len(mags)} samples; need >= {MIN_GPD_SAMPLES}")
    try:
        ranking = rank_models(mags)
    except DegeneracyError as exc:
        print(f"fit: no model could be fitted: {exc}", file=sys.stderr)
        return EXIT_ANALYTIC
    results = {"section": args.section, "n": len(mags), **ranking_json(ranking)}
    manifest = build_manifest("fit", {"section": args.section}, inputs=[args.input])
    write_json(args.out, {"manifest": manifest, "results": results})
    print(f"section {args.section}: AIC order {' < '.join(ranking.aic_order)}")
    return EXIT_OK


def _polyline_json(pl: Polyline) -> dict:
    return {"closed": pl.closed, "points": pl.points.tolist()}


def _empirical_contours(args) -> tuple[dict, list[Polyline], DensityGrid]:
    series = read_trips(args.input)
    xy = np.column_stack([series.ax, series.ay])
    nodes = (args.nodes, args.nodes) if args.nodes else None
    report = relative_density_contours(xy, levels=_parse_levels(args.levels), nodes=nodes)
    rows = [{
        "relative_level": row.relative_level,
        "absolute_level": row.absolute_level,
        "n_inside": row.n_inside,
        "mass_inside": row.mass_inside,
        "polylines": [_polyline_json(pl) for pl in row.polylines],
    } for row in report.rows]
    flat = [pl for row in report.rows for pl in row.polylines]
    return {"mode": "empirical", "n": report.n, "peak": report.peak, "levels": rows}, flat, report.grid


def _model_grid(pdf, lo, hi, nodes=256) -> DensityGrid:
    xs = np.linspace(lo[0], hi[0], nodes)
    ys = np.linspace(lo[1], hi[1], nodes)
    values = pdf(xs[:, None], ys[None, :])
    return DensityGrid(axes=[xs, ys], values=values,
                       cell_volume=float((xs[1] - xs[0]) * (ys[1] - ys[0])))


def _bndm_level(level: float, p: BndmParams) -> dict:
    C = level * bndm_peak(p)
    pl = bndm_contour(C, p)
    residual = float(np.max(np.abs(bndm_pdf(pl.points[:, 0], pl.points[:, 1], p) - C)) / C)
    reach_x = abs(pl.points[:, 0]).max() * 1.2 + 1e-6
    reach_y = abs(pl.points[:, 1]).max() * 1.2 + 1e-6
    grid = _model_grid(lambda x, y: bndm_pdf(x, y, p), (-reach_x, -reach_y), (reach_x, reach_y))
    numeric = levelset_numeric(grid, C)
    deviation = _deviation_fraction([pl], numeric)
    return {"relative_level": level, "absolute_level": C, "max_residual": residual,
            "max_deviation_frac": deviation, "polylines": [_polyline_json(pl)]}


def _deviation_fraction(analytic: list[Polyline], numeric: list[Polyline]) -> float | None:
    if not numeric or not analytic:
        return None
    pts = np.vstack([pl.points for pl in analytic])
    diag = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
    if diag == 0.0:
        return None
    worst = 0.0
    for pl in analytic:
        best = min(polyline_deviation(pl, ref) for ref in numeric)
        worst = max(worst, best)
    return worst / diag


def _bpdm_level(level: float, p: BpdmParams) -> dict:
    C = level * bpdm_peak(p)
    polylines = []
    residual = 0.0
    deviations = []
    for x_side, x_sign in (("brake", -1.0), ("forward", 1.0)):
        for y_side, y_sign in (("left", -1.0), ("right", 1.0)):
            w = p.weight(x_side, y_side)
            qx = p.x_params(x_side == "forward")
            qy = p.y_params(y_side == "right")
            if w == 0.0:
                continue
            Cq = C / w
            if Cq >= 1.0 / (qx.sigma * qy.sigma):
                continue  # level above this quadrant's peak: no curve here
            pl = bpdm_contour_analytic(Cq, qx, qy)
            dens = quadrant_product_pdf(pl.points[:, 0], pl.points[:, 1], qx, qy)
            residual = max(residual, float(np.max(np.abs(dens - Cq)) / Cq))
            x_reach = pl.points[:, 0].max()
            y_reach = pl.points[:, 1].max()
            grid = _model_grid(lambda x, y, a=qx, b=qy: quadrant_product_pdf(x, y, a, b),
                               (0.0, 0.0), (x_reach * 1.05 + 1e-9, y_reach * 1.05 + 1e-9))
            dev = _deviation_fraction([pl], levelset_numeric(grid, Cq))
            if dev is not None:
                deviations.append(dev)
            signed = pl.points * np.array([x_sign, y_sign])
            polylines.append(Polyline(points=signed, closed=False))
    return {"relative_level": level, "absolute_level": C, "max_residual": residual,
            "max_deviation_frac": max(deviations) if deviations else None,
            "polylines": [_polyline_json(pl) for pl in polylines]}, polylines


def cmd_contour(args) -> int:
    grid = None
    if args.input:
        results, flat, grid = _empirical_contours(args)
        config = {"mode": "empirical", "levels": args.levels, "nodes": args.nodes}
        inputs = [args.input]
    elif args.model == "bndm":
        p = BndmParams(sigma_nx=args.sigma_x, sigma_ny=args.sigma_y)
        rows = [_bndm_level(lv, p) for lv in _parse_levels(args.levels)]
        flat = [Polyline(points=np.asarray(pj["points"]), closed=pj["closed"])
                for row in rows for pj in row["polylines"]]
        results = {"mode": "bndm", "sigma_x": args.sigma_x, "sigma_y": args.sigma_y, "levels": rows}
        config = {"mode": "bndm", "levels": args.levels,
                  "sigma_x": args.sigma_x, "sigma_y": args.sigma_y}
        inputs = []
    elif args.model == "bpdm":
        p = bpdm_params_from_dict(_load_json_config(args.config)) if args.config \
            else default_bpdm_params()
        rows = []
        flat = []
        for lv in _parse_levels(args.levels):
            row, pls = _bpdm_level(lv, p)
            rows.append(row)
            flat.extend(pls)
        results = {"mode": "bpdm", "levels": rows}
        config = {"mode": "bpdm", "levels": args.levels, "params_file": args.config}
        inputs = []
    else:
        print("contour: error: give --input or --model", file=sys.stderr)
        return EXIT_USAGE

    manifest = build_manifest("contour", config, inputs=inputs)
    if args.out_format == "json":
        write_json(args.out, {"manifest": manifest, "results": results})
    elif args.out_format == "csv":
        _write_atomic(args.out, polylines_to_csv(flat))
    else:
        _write_atomic(args.out, polylines_to_svg(flat))
    if args.grid_csv and grid is not None:
        _write_atomic(args.grid_csv, density_grid_to_csv(grid))
    print(f"wrote {args.out_format} contours to {args.out}")
    return EXIT_OK


def percentile_table_json(table: PercentileTable) -> dict:
    return {
        "target": table.target_axis,
        "condition": table.cond_axis,
        "edges": table.edges.tolist(),
        "levels": list(table.levels),
        "counts": table.counts.tolist(),
        "min_count": table.min_count,
        "values": [[None if np.isnan(v) else float(v) for v in row] for row in table.values],
    }


def _default_bins_for(condition: str) -> str:
    return "0:35:2.5" if condition == "vx" else "0:5:0.5"


def cmd_percentiles(args) -> int:
    series = read_trips(args.input)
    bins = args.bins or _default_bins_for(args.condition)
    table = percentile_by_interval(series, target=args.target, condition=args.condition,
                                   bin_edges=_parse_edges(bins),
                                   levels=tuple(_parse_levels(args.levels)),
                                   min_count=args.min_count)
    manifest = build_manifest("percentiles", {
        "target": args.target, "condition": args.condition, "bins": bins,
        "levels": args.levels, "min_count": args.min_count,
    }, inputs=[args.input])
    write_json(args.out, {"manifest": manifest, "results": percentile_table_json(table)})
    if args.csv:
        _write_atomic(args.csv, table.to_csv())
    print(f"wrote percentile table to {args.out}")
    return EXIT_OK


def _fit_report_json(rep) -> dict | None:
    return rep.to_json_dict() if rep is not None else None


def _velocity_json(report) -> dict:
    return {
        "edges": report.edges.tolist(),
        "levels": list(report.levels),
        "out_of_range": report.out_of_range,
        "velocity_density": {
            "v": report.velocity_density.axes[0].tolist(),
            "density": report.velocity_density.values.tolist(),
        },
        "bins": [{
            "lo": b.lo, "hi": b.hi, "count": b.count,
            "fits": {k: _fit_report_json(v) for k, v in sorted(b.fits.items())},
            "percentiles": {k: (None if v is None else v.tolist())
                            for k, v in sorted(b.percentiles.items())},
        } for b in report.bins],
    }


def cmd_velocity(args) -> int:
    series = read_trips(args.input)
    report = velocity_profile(series, bin_edges=_parse_edges(args.bins),
                              levels=tuple(_parse_levels(args.levels)),
                              min_count=args.min_count)
    manifest = build_manifest("velocity", {
        "bins": args.bins, "levels": args.levels, "min_count": args.min_count,
    }, inputs=[args.input])
    write_json(args.out, {"manifest": manifest, "results": _velocity_json(report)})
    print(f"wrote velocity profile to {args.out}")
    return EXIT_OK


def _report_section(fn) -> dict:
    try:
        return {"status": "ok", "error": None, "data": fn()}
    except Exception as exc:  # per-section failures are recorded, not fatal
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}", "data": None}


def cmd_report(args) -> int:
    series = read_trips(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    cfg = ConvergenceConfig(chunk_size=args.chunk, epsilon=args.epsilon,
                            stability_window=args.window)

    def convergence_section():
        signals = ["axy", "ax", "ay"] + (["vx"] if series.vx is not None else [])
        data = {}
        for sig in signals:
            data[sig] = _converge_one(series, sig, cfg)
        if any(d["status"] != "converged" for d in data.values()):
            raise DegeneracyError("not all signals converged: " + ", ".join(
                f"{s}={d['status']}" for s, d in data.items()))
        return data

    def pattern_section():
        xy = np.column_stack([series.ax, series.ay])
        report = relative_density_contours(xy, levels=TABLE_LEVELS)
        return {
            "n": report.n,
            "peak": report.peak,
            "levels": [{
                "relative_level": r.relative_level,
                "absolute_level": r.absolute_level,
                "n_inside": r.n_inside,
                "mass_inside": r.mass_inside,
                "polylines": [_polyline_json(pl) for pl in r.polylines],
            } for r in report.rows],
        }

    def fits_section():
        quad = decompose_quadrants(series)
        return {s: ranking_json(rank_models(quad.section(s))) for s in QUADRANT_SECTIONS}

    def percentiles_section():
        tables = {
            "lateral_vs_ax": percentile_by_interval(series, "ay", "ax", _parse_edges("0:5:0.5")),
            "brake_vs_ay": percentile_by_interval(series, "ax_brake", "ay", _parse_edges("0:3:0.5")),
            "forward_vs_ay": percentile_by_interval(series, "ax_forward", "ay", _parse_edges("0:3:0.5")),
        }
        return {k: percentile_table_json(t) for k, t in tables.items()}

    def velocity_section():
        return _velocity_json(velocity_profile(series, _parse_edges("0:35:2.5")))

    sections = {
        "convergence": _report_section(convergence_section),
        "pattern": _report_section(pattern_section),
        "fits": _report_section(fits_section),
        "percentiles": _report_section(percentiles_section),
        "velocity": _report_section(velocity_section),
    }
    manifest = build_manifest("report", {
        "chunk": args.chunk, "epsilon": args.epsilon, "window": args.window,
    }, inputs=[args.input])
    out_path = os.path.join(args.out_dir, "report.json")
    write_json(out_path, {"manifest": manifest, "results": sections})
    failed = [name for name, sec in sections.items() if sec["status"] != "ok"]
    if failed:
        print(f"report: section(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ANALYTIC
    print(f"wrote report bundle to {out_path}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="accelstats",
                     description="Driver acceleration statistics toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic trip CSV")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON file with generator overrides")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("converge", help="run the KL data-sufficiency examination")
    p.add_argument("--input", required=True)
    p.add_argument("--signal", choices=["ax", "ay", "axy", "vx"], default="axy")
    p.add_argument("--chunk", type=int, default=10**4)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--bandwidth-policy", choices=["reselect", "freeze"], default="reselect")
    p.add_argument("--out", required=True)
    p.add_argument("--trace-csv")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("fit", help="rank the three models on a quadrant section")
    p.add_argument("--input", required=True)
    p.add_argument("--section", choices=list(QUADRANT_SECTIONS), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("contour", help="empirical or model density contours")
    p.add_argument("--input", help="trip CSV for empirical contours")
    p.add_argument("--model", choices=["bndm", "bpdm"])
    p.add_argument("--levels", default="1e-06,0.0001,0.001,0.01,0.1,0.95",
                   help="relative levels (fractions of the peak density)")
    p.add_argument("--sigma-x", type=float, default=1.0, help="BNDM x scale")
    p.add_argument("--sigma-y", type=float, default=1.0, help="BNDM y scale")
    p.add_argument("--config", help="JSON file with BPDM parameters")
    p.add_argument("--nodes", type=int, help="KDE grid nodes per axis (empirical mode)")
    p.add_argument("--out-format", choices=["json", "csv", "svg"], default="json")
    p.add_argument("--out", required=True)
    p.add_argument("--grid-csv", help="also dump the KDE grid as CSV (empirical mode)")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("percentiles", help="percentile-by-interval table")
    p.add_argument("--input", required=True)
    p.add_argument("--target", default="ay",
                   choices=["ax", "ay", "ax_brake", "ax_forward", "ay_left", "ay_right"])
    p.add_argument("--condition", default="ax", choices=["ax", "ay", "vx"])
    p.add_argument("--bins", help="comma edges or lo:hi:step")
    p.add_argument("--levels", default="90,99,99.9,99.99")
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_percentiles)

    p = sub.add_parser("velocity", help="velocity-binned acceleration profile")
    p.add_argument("--input", required=True)
    p.add_argument("--bins", default="0:35:2.5")
    p.add_argument("--levels", default="90,99,99.9,99.99")
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_velocity)

    p = sub.add_parser("report", help="full pipeline report bundle")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--chunk", type=int, default=10**4)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--window", type=int, default=20)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"accelstats {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

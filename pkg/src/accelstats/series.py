"""Sample containers and the trip CSV format.

A trip file is UTF-8 CSV with header ``t,ax,ay,vx`` and one record per
0.1 s tick: timestamp (s), longitudinal acceleration (m/s^2), lateral
acceleration (m/s^2), longitudinal velocity (m/s).  Extra columns are
ignored with a warning; numbers are written with 9 significant digits.
"""

from __future__ import annotations

import os
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
import pandas as pd

from .errors import DataFormatError

REQUIRED_COLUMNS = ("t", "ax", "ay")
OPTIONAL_COLUMNS = ("vx",)


class TripRecord(NamedTuple):
    t: float
    ax: float
    ay: float
    vx: float


@dataclass
class SampleSeries:
    """Column-oriented series of timestamped observations."""

    t: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    vx: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.ax = np.asarray(self.ax, dtype=float)
        self.ay = np.asarray(self.ay, dtype=float)
        if self.vx is not None:
            self.vx = np.asarray(self.vx, dtype=float)
        n = len(self.t)
        if len(self.ax) != n or len(self.ay) != n:
            raise DataFormatError("t, ax, ay must have equal length")
        if self.vx is not None and len(self.vx) != n:
            raise DataFormatError("vx must match the length of t")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[TripRecord]:
        vx = self.vx if self.vx is not None else np.full(len(self), np.nan)
        for row in zip(self.t, self.ax, self.ay, vx):
            yield TripRecord(*row)

    def signal(self, name: str) -> np.ndarray:
        """Return the named observational vector: ax, ay, vx, or axy (n x 2)."""
        if name == "ax":
            return self.ax
        if name == "ay":
            return self.ay
        if name == "axy":
            return np.column_stack([self.ax, self.ay])
        if name == "vx":
            if self.vx is None:
                raise DataFormatError("series has no vx column")
            return self.vx
        raise ValueError(f"unknown signal {name!r}; expected ax, ay, axy or vx")


def write_trips(path: str, series: SampleSeries) -> None:
    """Write a trip CSV atomically (temp file + rename)."""
    if series.vx is None:
        raise DataFormatError("trip files require a vx column")
    df = pd.DataFrame({"t": series.t, "ax": series.ax, "ay": series.ay, "vx": series.vx})
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            df.to_csv(fh, index=False, float_format="%.9g")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trips(path: str) -> SampleSeries:
    """Parse a trip CSV; raises DataFormatError with a row number on bad data."""
    try:
        df = pd.read_csv(path, dtype=float)
    except ValueError:
        _locate_bad_row(path)
        raise DataFormatError("unparseable trip CSV")  # pragma: no cover
    cols = list(df.columns)
    missing = [c for c in REQUIRED_COLUMNS if c not in cols]
    if missing:
        raise DataFormatError(f"trip CSV is missing required column(s): {', '.join(missing)}")
    known = set(REQUIRED_COLUMNS) | set(OPTIONAL_COLUMNS)
    extra = [c for c in cols if c not in known]
    if extra:
        warnings.warn(f"ignoring extra trip CSV column(s): {', '.join(extra)}")
    if df[list(REQUIRED_COLUMNS)].isna().any().any():
        bad = int(df[list(REQUIRED_COLUMNS)].isna().any(axis=1).idxmax()) + 2
        raise DataFormatError(f"missing value in trip CSV at row {bad}", row=bad)
    vx = df["vx"].to_numpy() if "vx" in cols else None
    if vx is not None and np.isnan(vx).any():
        bad = int(np.flatnonzero(np.isnan(vx))[0]) + 2
        raise DataFormatError(f"missing vx value in trip CSV at row {bad}", row=bad)
    return SampleSeries(t=df["t"].to_numpy(), ax=df["ax"].to_numpy(), ay=df["ay"].to_numpy(), vx=vx)


def _locate_bad_row(path: str) -> None:
    """Scan for the first non-numeric field and raise with its 1-based row number."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        ncol = len(header.rstrip("\n").split(","))
        for i, line in enumerate(fh, start=2):
            fields = line.rstrip("\n").split(",")
            if len(fields) != ncol and line.strip():
                raise DataFormatError(f"malformed trip CSV at row {i}: expected {ncol} fields", row=i)
            for f in fields:
                try:
                    float(f)
                except ValueError:
                    raise DataFormatError(f"non-numeric value {f!r} in trip CSV at row {i}", row=i)
    raise DataFormatError("unparseable trip CSV")

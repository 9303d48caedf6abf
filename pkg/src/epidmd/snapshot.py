"""Snapshot series, time-shifted snapshot matrices, record binning and CSV I/O.

A :class:`SnapshotSeries` stores data time-major (one row per time point, one
column per spatial node).  :func:`build_snapshot_pair` is the single place where
that layout is transposed into the column-per-snapshot matrices ``X`` and
``X'`` consumed by the decomposition.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    ParseError,
    SeriesTooShort,
    UnknownNode,
)

__all__ = [
    "SnapshotSeries",
    "SnapshotPair",
    "build_snapshot_pair",
    "aggregate",
    "read_series_csv",
    "write_series_csv",
    "format_float",
]


def format_float(value: float) -> str:
    """Shortest-exact text for a float (17 significant digits at most)."""
    v = float(value)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return format(v, ".17g")


@dataclass(frozen=True, eq=False)
class SnapshotSeries:
    """Time-ordered per-node values.

    Parameters
    ----------
    values : array_like, shape (T, D)
        Rows are time points, columns are spatial nodes.
    dt : float
        Time units per step (days by default).
    node_ids : sequence of str
        One unique label per column.
    t0 : int
        Integer index of the first row.
    nonnegative : bool
        Enforce non-negative entries.  Measured counts keep the default;
        forecasts may dip below zero and are built with ``False``.
    """

    values: np.ndarray
    dt: float = 1.0
    node_ids: tuple = ()
    t0: int = 0
    nonnegative: bool = field(default=True, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"values must be a non-empty T x D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.nonnegative and np.any(values < 0):
            raise ValueError("counts must be non-negative")
        node_ids = tuple(str(n) for n in self.node_ids) if self.node_ids else tuple(
            f"node_{j:03d}" for j in range(values.shape[1])
        )
        if len(node_ids) != values.shape[1]:
            raise ValueError(f"expected {values.shape[1]} node_ids, got {len(node_ids)}")
        if len(set(node_ids)) != len(node_ids):
            raise ValueError("node_ids must be unique")
        dt = float(self.dt)
        if not (dt > 0 and math.isfinite(dt)):
            raise ValueError("dt must be positive and finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "t0", int(self.t0))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.T

    def __eq__(self, other):
        if not isinstance(other, SnapshotSeries):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
            and self.dt == other.dt
            and self.node_ids == other.node_ids
            and self.t0 == other.t0
        )

    __hash__ = None

    def slice(self, start: int, stop: int | None = None) -> SnapshotSeries:
        """Rows ``start:stop`` as a new series with ``t0`` shifted accordingly."""
        start, stop, _ = slice(start, stop).indices(self.T)
        return SnapshotSeries(
            self.values[start:stop], self.dt, self.node_ids, self.t0 + start, self.nonnegative
        )


@dataclass(frozen=True, eq=False)
class SnapshotPair:
    """Column-major snapshot matrices: ``x`` holds x_1..x_{N-1}, ``x_prime`` holds x_2..x_N."""

    x: np.ndarray
    x_prime: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xp = np.asarray(self.x_prime, dtype=float)
        if x.ndim != 2 or x.shape != xp.shape:
            raise ValueError(f"x and x_prime must be congruent matrices, got {x.shape} and {xp.shape}")
        if x.shape[1] < 1:
            raise SeriesTooShort("need at least one snapshot transition")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)


def build_snapshot_pair(series: SnapshotSeries) -> SnapshotPair:
    if series.T < 2:
        raise SeriesTooShort(f"need at least 2 snapshots, got {series.T}")
    cols = np.ascontiguousarray(series.values.T)
    return SnapshotPair(cols[:, :-1].copy(), cols[:, 1:].copy(), series.dt)


def aggregate(
    records: Iterable[tuple[float, str, float]],
    bin_width: float = 1.0,
    nodes: Sequence[str] | None = None,
) -> SnapshotSeries:
    """Sum ``(timestamp, node_id, count)`` records into contiguous time bins.

    Bins sit on the absolute grid ``floor(t / bin_width)`` so the result does not
    depend on record order, and two aggregations over different record sets
    line up bin-for-bin.  Bins with no records are zero.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    records = list(records)
    if not records:
        raise EmptyInput("no records to aggregate")
    if nodes is None:
        nodes = sorted({str(r[1]) for r in records})
    nodes = [str(n) for n in nodes]
    column = {n: j for j, n in enumerate(nodes)}
    bins = np.empty(len(records), dtype=np.int64)
    cols = np.empty(len(records), dtype=np.int64)
    counts = np.empty(len(records), dtype=float)
    for k, (t, node, count) in enumerate(records):
        node = str(node)
        if node not in column:
            raise UnknownNode(f"record {k} references unknown node {node!r}")
        bins[k] = math.floor(float(t) / bin_width)
        cols[k] = column[node]
        counts[k] = float(count)
    if np.any(counts < 0):
        raise ValueError("record counts must be non-negative")
    first = int(bins.min())
    values = np.zeros((int(bins.max()) - first + 1, len(nodes)))
    np.add.at(values, (bins - first, cols), counts)
    return SnapshotSeries(values, dt=bin_width, node_ids=nodes, t0=first)


def _parse_meta(line: str, lineno: int) -> dict:
    meta = {}
    for token in line.lstrip("#").split():
        key, sep, val = token.partition("=")
        if not sep:
            raise ParseError(f"malformed metadata token {token!r}", row=lineno)
        meta[key.strip()] = val.strip()
    return meta


def read_series_csv(path, nonnegative: bool = True) -> SnapshotSeries:
    """Read the snapshot CSV format (``# dt=.. t0=..`` line, ``t,<node>...`` header)."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return parse_series_csv(text, nonnegative=nonnegative)


def parse_series_csv(text: str, nonnegative: bool = True) -> SnapshotSeries:
    meta: dict = {}
    header = None
    ts: list[int] = []
    rows: list[list[float]] = []
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        lineno = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].lstrip().startswith("#"):
            if header is None:
                meta.update(_parse_meta(",".join(row), lineno))
            continue
        if header is None:
            header = [h.strip() for h in row]
            if len(header) < 2 or header[0] != "t":
                raise ParseError("header must start with 't' followed by node ids", row=lineno, column=1)
            continue
        if len(row) != len(header):
            raise DimensionMismatch(
                f"expected {len(header)} fields, found {len(row)}", row=lineno, column=len(row)
            )
        try:
            ts.append(int(row[0]))
        except ValueError:
            raise ParseError(f"time index {row[0]!r} is not an integer", row=lineno, column=1) from None
        parsed = []
        for c, cell in enumerate(row[1:], start=2):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number", row=lineno, column=c) from None
        rows.append(parsed)
    if header is None:
        raise ParseError("missing header line")
    if not rows:
        raise EmptyInput("CSV contains no data rows")
    try:
        dt = float(meta.get("dt", 1.0))
        t0 = int(meta["t0"]) if "t0" in meta else ts[0]
    except ValueError as exc:
        raise ParseError(f"bad metadata value ({exc})", row=1) from None
    expected = list(range(t0, t0 + len(ts)))
    if ts != expected:
        bad = next(k for k, (a, b) in enumerate(zip(ts, expected)) if a != b)
        raise ParseError(f"time index {ts[bad]} breaks the contiguous sequence from t0={t0}", column=1)
    return SnapshotSeries(np.array(rows), dt=dt, node_ids=header[1:], t0=t0, nonnegative=nonnegative)


def format_series_csv(series: SnapshotSeries) -> str:
    buf = io.StringIO()
    buf.write(f"# dt={format_float(series.dt)} t0={series.t0}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *series.node_ids])
    for k, row in enumerate(series.values):
        writer.writerow([series.t0 + k, *(format_float(v) for v in row)])
    return buf.getvalue()


def write_series_csv(series: SnapshotSeries, path) -> None:
    path = os.fspath(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_series_csv(series))

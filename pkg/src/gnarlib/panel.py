"""Node-level time series panels and the preprocessing pipeline.

A panel is an N x T matrix of observations over labeled nodes and an ordered
date index, with NaN as the explicit missing marker.  The operations here
turn raw feeds into the stationary series the autoregressive model consumes:
pivoting long CSVs, aggregating daily cumulative counts to weekly incidence,
windowed smoothing over a declared interval, lag differencing, splitting into
named phases (gaps become all-missing columns so lagged regressors never
silently bridge them), and Box-Cox profile likelihood as a stationarity
check.

Panels are immutable; every operation returns a new panel and missing values
propagate (no operation invents a number where an input was missing).
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataIntegrityError, InvalidInputError


class DataCorrectionWarning(UserWarning):
    """A cumulative feed decreased; the value was kept as reported."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeriesPanel:
    """Immutable N x T panel of node-level observations.

    Attributes:
        labels: Ordered node identifiers (row order of ``values``).
        dates: Strictly increasing date index (column order of ``values``).
        values: Float array of shape (N, T); NaN marks missing cells.
    """

    labels: tuple[str, ...]
    dates: tuple[datetime.date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise InvalidInputError("panel labels must be unique")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidInputError("panel dates must be strictly increasing")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.labels), len(self.dates)):
            raise InvalidInputError(
                f"values shape {vals.shape} does not match "
                f"{len(self.labels)} labels x {len(self.dates)} dates")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_times(self) -> int:
        return len(self.dates)

    def row(self, label: str) -> np.ndarray:
        return self.values[self.labels.index(label)]

    def observed_mask(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class PhaseSpec:
    """Named list of closed date intervals, non-overlapping and increasing."""

    name: str
    intervals: tuple[tuple[datetime.date, datetime.date], ...]

    def __post_init__(self) -> None:
        for start, end in self.intervals:
            if end < start:
                raise InvalidInputError(f"interval {start}..{end} is reversed")
        for (_, e1), (s2, _) in zip(self.intervals, self.intervals[1:]):
            if s2 <= e1:
                raise InvalidInputError("phase intervals must be increasing and disjoint")

    def contains(self, d: datetime.date) -> bool:
        return any(s <= d <= e for s, e in self.intervals)

    @classmethod
    def from_json(cls, obj: dict) -> "PhaseSpec":
        intervals = tuple(
            (datetime.date.fromisoformat(s), datetime.date.fromisoformat(e))
            for s, e in obj["intervals"])
        return cls(name=obj["name"], intervals=intervals)

    def to_json(self) -> dict:
        return {"name": self.name,
                "intervals": [[s.isoformat(), e.isoformat()]
                              for s, e in self.intervals]}


@dataclass(frozen=True)
class BoxCoxProfile:
    """Profile log-likelihood of the Box-Cox transform over a lambda grid.

    ``shift`` is the constant added to the data before profiling (zero when
    the input was already strictly positive).
    """

    lambda_grid: tuple[float, ...]
    loglik: tuple[float, ...]
    lambda_hat: float
    shift: float


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------

def ingest_long_csv(stream) -> TimeSeriesPanel:
    """Pivot a long ``date,node,value`` CSV into a panel.

    Nodes are sorted lexicographically; absent (date, node) cells become
    missing.  A duplicate (date, node) pair with a conflicting value raises
    a data-integrity error naming the cell; exact duplicates are tolerated.
    Empty value fields are treated as missing.
    """
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, newline="") as fh:
            return ingest_long_csv(fh)
    reader = csv.DictReader(_skip_comments(stream))
    if reader.fieldnames is None or not {"date", "node", "value"}.issubset(reader.fieldnames):
        raise InvalidInputError("long CSV must have header date,node,value")
    cells: dict[tuple[datetime.date, str], float] = {}
    for row in reader:
        d = datetime.date.fromisoformat(row["date"])
        node = row["node"]
        raw = row["value"]
        value = math.nan if raw in (None, "") else float(raw)
        key = (d, node)
        if key in cells:
            old = cells[key]
            same = (old == value) or (math.isnan(old) and math.isnan(value))
            if not same:
                raise DataIntegrityError(
                    f"conflicting duplicate for node {node!r} on {d.isoformat()}: "
                    f"{old!r} vs {value!r}")
        cells[key] = value
    if not cells:
        raise InvalidInputError("no data rows in long CSV")
    dates = tuple(sorted({d for d, _ in cells}))
    labels = tuple(sorted({node for _, node in cells}))
    values = np.full((len(labels), len(dates)), np.nan)
    date_ix = {d: j for j, d in enumerate(dates)}
    node_ix = {n: i for i, n in enumerate(labels)}
    for (d, node), v in cells.items():
        values[node_ix[node], date_ix[d]] = v
    return TimeSeriesPanel(labels=labels, dates=dates, values=values)


# ---------------------------------------------------------------------------
# Weekly aggregation
# ---------------------------------------------------------------------------

def weekly_from_cumulative(daily: TimeSeriesPanel,
                           tolerance: float = 0.0) -> TimeSeriesPanel:
    """Weekly incidence from a daily cumulative panel.

    Weeks end on the weekday of the panel's first date: the week-end dates
    are first, first + 7d, first + 14d, ...  Incidence for the first week is
    the first observed value itself; afterwards it is the difference between
    consecutive week-end cumulative values.  A trailing partial week (no
    observation at its end date) is dropped.

    Real feeds contain downward corrections; a decrease beyond ``tolerance``
    emits a :class:`DataCorrectionWarning` per node and week, and the value
    is kept as reported.
    """
    date_ix = {d: j for j, d in enumerate(daily.dates)}
    first = daily.dates[0]
    week_ends = []
    d = first
    while d <= daily.dates[-1]:
        week_ends.append(d)
        d = d + datetime.timedelta(days=7)
    n = daily.n_nodes
    out = np.full((n, len(week_ends)), np.nan)
    for w, end in enumerate(week_ends):
        col = daily.values[:, date_ix[end]] if end in date_ix else np.full(n, np.nan)
        if w == 0:
            out[:, 0] = col
        else:
            prev_end = week_ends[w - 1]
            prev = (daily.values[:, date_ix[prev_end]]
                    if prev_end in date_ix else np.full(n, np.nan))
            out[:, w] = col - prev
        for i in range(n):
            if not math.isnan(out[i, w]) and out[i, w] < -tolerance:
                warnings.warn(
                    f"cumulative count for node {daily.labels[i]!r} decreased by "
                    f"{-out[i, w]:g} in week ending {end.isoformat()}; kept as-is",
                    DataCorrectionWarning, stacklevel=2)
    return TimeSeriesPanel(labels=daily.labels, dates=tuple(week_ends), values=out)


# ---------------------------------------------------------------------------
# Smoothing, differencing, phase splitting
# ---------------------------------------------------------------------------

def rolling_average(panel: TimeSeriesPanel, window: int,
                    interval: tuple[datetime.date, datetime.date]) -> TimeSeriesPanel:
    """Centered moving average inside a date interval; outside untouched.

    The window covers ``window // 2`` points to the left and
    ``(window - 1) // 2`` to the right, truncated at the interval edges.
    A missing value anywhere in the (truncated) window makes the output
    missing.  ``window=1`` is the identity.
    """
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    start, end = interval
    if end < start:
        raise InvalidInputError("interval is reversed")
    cols = [j for j, d in enumerate(panel.dates) if start <= d <= end]
    if not cols:
        raise InvalidInputError("interval does not intersect panel dates")
    if window > len(cols):
        raise InvalidInputError(
            f"window {window} exceeds interval length {len(cols)}")
    left, right = window // 2, (window - 1) // 2
    lo, hi = cols[0], cols[-1]
    out = panel.values.copy()
    for j in cols:
        a = max(lo, j - left)
        b = min(hi, j + right)
        out[:, j] = panel.values[:, a:b + 1].mean(axis=1)
    return TimeSeriesPanel(labels=panel.labels, dates=panel.dates, values=out)


def difference(panel: TimeSeriesPanel, lag: int = 1) -> TimeSeriesPanel:
    """Lag differencing: out[:, t] = values[:, t] - values[:, t - lag].

    Output has T - lag columns (the first ``lag`` dates are dropped) and a
    cell is missing whenever either operand is.
    """
    if lag < 1:
        raise InvalidInputError("lag must be >= 1")
    if lag >= panel.n_times:
        raise InvalidInputError(f"lag {lag} >= panel length {panel.n_times}")
    out = panel.values[:, lag:] - panel.values[:, :-lag]
    return TimeSeriesPanel(labels=panel.labels, dates=panel.dates[lag:], values=out)


def split_phases(panel: TimeSeriesPanel, spec: PhaseSpec) -> TimeSeriesPanel:
    """Restrict a panel to a phase spec, keeping gaps as missing columns.

    The output spans from the first to the last panel date inside the union
    of intervals, on the panel's own (uniform) date grid; grid dates absent
    from the panel are synthesized.  Dates inside an interval carry the
    observed values, dates in the gaps are fully missing.
    """
    inside = [d for d in panel.dates if spec.contains(d)]
    if not inside:
        raise InvalidInputError(
            f"phase spec {spec.name!r} does not intersect panel dates")
    step = _grid_step(panel.dates)
    grid = []
    d = inside[0]
    while d <= inside[-1]:
        grid.append(d)
        d = d + datetime.timedelta(days=step)
    date_ix = {d: j for j, d in enumerate(panel.dates)}
    out = np.full((panel.n_nodes, len(grid)), np.nan)
    for j, d in enumerate(grid):
        if spec.contains(d) and d in date_ix:
            out[:, j] = panel.values[:, date_ix[d]]
    return TimeSeriesPanel(labels=panel.labels, dates=tuple(grid), values=out)


def _grid_step(dates: Sequence[datetime.date]) -> int:
    """Most common day spacing of the index (the panel's native grid)."""
    if len(dates) < 2:
        return 7
    diffs = [(b - a).days for a, b in zip(dates, dates[1:])]
    return max(set(diffs), key=lambda s: (diffs.count(s), -s))


# ---------------------------------------------------------------------------
# Box-Cox stationarity profiling
# ---------------------------------------------------------------------------

def boxcox_profile(series: Sequence[float],
                   lambda_grid: Optional[Sequence[float]] = None) -> BoxCoxProfile:
    """Gaussian profile log-likelihood of the Box-Cox transform per lambda.

    Differenced incidence can be negative, so the data is shifted by
    (1 - min) whenever min <= 0; the shift is reported on the result.
    ``lambda_hat`` is the grid argmax.
    """
    from scipy import stats

    x = np.asarray([v for v in series if not math.isnan(v)], dtype=float)
    if x.size < 3:
        raise InvalidInputError("need at least 3 observed values to profile")
    if lambda_grid is None:
        lambda_grid = np.linspace(-2.0, 3.0, 101)
    grid = tuple(float(v) for v in lambda_grid)
    shift = 0.0
    if x.min() <= 0:
        shift = 1.0 - float(x.min())
        x = x + shift
    if x.min() <= 0:
        raise InvalidInputError("values not strictly positive after shift")
    loglik = tuple(float(stats.boxcox_llf(lmb, x)) for lmb in grid)
    lambda_hat = grid[int(np.argmax(loglik))]
    return BoxCoxProfile(lambda_grid=grid, loglik=loglik,
                         lambda_hat=lambda_hat, shift=shift)


# ---------------------------------------------------------------------------
# Wide CSV I/O
# ---------------------------------------------------------------------------

def write_wide_csv(panel: TimeSeriesPanel, path,
                   meta_lines: Iterable[str] = ()) -> None:
    """Write a panel as wide CSV: date column plus one column per node.

    Missing cells render as empty fields.  Optional metadata lines are
    written first, prefixed with ``#``.
    """
    with open(path, "w", newline="") as fh:
        for line in meta_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", *panel.labels])
        for j, d in enumerate(panel.dates):
            row = [d.isoformat()]
            for i in range(panel.n_nodes):
                v = panel.values[i, j]
                row.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(row)


def read_wide_csv(stream) -> TimeSeriesPanel:
    """Read a wide CSV written by :func:`write_wide_csv`."""
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, newline="") as fh:
            return read_wide_csv(fh)
    reader = csv.reader(_skip_comments(stream))
    header = next(reader, None)
    if not header or header[0] != "date" or len(header) < 2:
        raise InvalidInputError("wide CSV must have header date,<node>,...")
    labels = tuple(header[1:])
    dates, rows = [], []
    for row in reader:
        if not row:
            continue
        dates.append(datetime.date.fromisoformat(row[0]))
        rows.append([math.nan if cell == "" else float(cell) for cell in row[1:]])
    values = np.asarray(rows, dtype=float).T if rows else np.empty((len(labels), 0))
    return TimeSeriesPanel(labels=labels, dates=tuple(dates), values=values)


def read_phase_spec_json(path) -> PhaseSpec:
    with open(path) as fh:
        return PhaseSpec.from_json(json.load(fh))


def _skip_comments(stream) -> Iterable[str]:
    for line in stream:
        if not line.lstrip().startswith("#"):
            yield line

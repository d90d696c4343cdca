"""Hourly wind-speed series: CSV ingestion, splitting and synthetic fixtures.

CSV layout::

    timestamp,wind_speed
    2007-01-01T00:00:00Z,5.1300000000000008
    ...

Timestamps are ISO-8601 UTC. Speeds are written with 17 significant digits
so a write/read round trip is bit-exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InvalidInputError

HOUR = np.timedelta64(1, "h")
FILL_POLICIES = ("error", "forward-fill")
# Jan 1 - May 5, 2007 and Jan 1 - May 4, 2008 (leap year), hourly
DEFAULT_TRAIN_START = "2007-01-01T00:00:00"
DEFAULT_TEST_START = "2008-01-01T00:00:00"
DEFAULT_WINDOW_LENGTH = 3000


@dataclass(frozen=True, eq=False)
class WindSeries:
    turbine_id: str
    timestamps: np.ndarray  # datetime64[s], UTC, hourly
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        v = np.asarray(self.values, dtype=float)
        if ts.shape != v.shape or v.ndim != 1:
            raise InvalidInputError("timestamps and values must be 1-d and equally long")
        if v.size and (not np.all(np.isfinite(v)) or np.any(v < 0)):
            raise InvalidInputError("wind speeds must be finite and nonnegative")
        if ts.size > 1 and np.any(np.diff(ts) != HOUR):
            raise InvalidInputError("timestamps must be spaced exactly one hour apart")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def index_of(self, when) -> int:
        t = np.datetime64(_parse_time(when) if isinstance(when, str) else when, "s")
        hits = np.nonzero(self.timestamps == t)[0]
        if hits.size == 0:
            raise InvalidInputError(f"timestamp {when} not in series {self.turbine_id}")
        return int(hits[0])


@dataclass(frozen=True)
class SplitSpec:
    train_start: int
    train_len: int
    test_start: int
    test_len: int

    def __post_init__(self):
        if self.train_len < 4 or self.test_len < 4:
            raise InvalidInputError("train and test windows need at least 4 points")
        if self.train_start < 0 or self.test_start < 0:
            raise InvalidInputError("window starts must be nonnegative")
        if self.train_start + self.train_len > self.test_start:
            raise InvalidInputError("training window must end before the test window starts")


def _parse_time(text: str) -> np.datetime64:
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "s")


def _format_time(t: np.datetime64) -> str:
    return str(np.datetime64(t, "s")) + "Z"


def load_csv(path, turbine_id: str | None = None, time_col: str = "timestamp",
             value_col: str = "wind_speed", fill: str = "error") -> WindSeries:
    """Read an hourly series. Missing speeds or hours are an error unless
    ``fill="forward-fill"``, which repeats the previous value."""
    if fill not in FILL_POLICIES:
        raise InvalidInputError(f"fill policy must be one of {FILL_POLICIES}")
    path = Path(path)
    times: list[np.datetime64] = []
    vals: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if time_col not in header or value_col not in header:
            raise DataFormatError(f"{path}: header must contain {time_col!r} and {value_col!r}")
        ti, vi = header.index(time_col), header.index(value_col)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                t = _parse_time(row[ti])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad timestamp {row[ti]!r}") from None
            raw = row[vi].strip()
            if raw == "" or raw.lower() == "nan":
                if fill == "error" or not vals:
                    raise DataFormatError(f"{path}:{lineno}: missing wind speed at {_format_time(t)}")
                v = vals[-1]
            else:
                try:
                    v = float(raw)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad wind speed {raw!r}") from None
                if not np.isfinite(v):
                    raise DataFormatError(f"{path}:{lineno}: non-finite wind speed")
                if v < 0:
                    raise DataFormatError(f"{path}:{lineno}: negative wind speed {v}")
            if times:
                step = t - times[-1]
                if step <= np.timedelta64(0, "s") or step % HOUR:
                    raise DataFormatError(f"{path}:{lineno}: timestamp {_format_time(t)} is not on the hourly grid after {_format_time(times[-1])}")
                if step > HOUR:
                    if fill == "error":
                        raise DataFormatError(f"{path}:{lineno}: gap before {_format_time(t)} "
                                              f"(previous {_format_time(times[-1])})")
                    while times[-1] + HOUR < t:
                        times.append(times[-1] + HOUR)
                        vals.append(vals[-1])
            times.append(t)
            vals.append(v)
    if not vals:
        raise DataFormatError(f"{path}: no data rows")
    return WindSeries(turbine_id or path.stem, np.array(times, dtype="datetime64[s]"), np.array(vals))


def write_csv(series: WindSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "wind_speed"])
        for t, v in zip(series.timestamps, series.values):
            w.writerow([_format_time(t), format(float(v), ".17g")])


def slice_series(series: WindSeries, start: int, length: int) -> WindSeries:
    if start < 0 or length < 0 or start + length > len(series):
        raise InvalidInputError(f"window [{start}, {start + length}) outside series of length {len(series)}")
    sl = slice(start, start + length)
    return WindSeries(series.turbine_id, series.timestamps[sl].copy(), series.values[sl].copy())


def split(series: WindSeries, spec: SplitSpec) -> tuple[WindSeries, WindSeries]:
    """Non-overlapping training and test windows of exactly the requested lengths."""
    return (slice_series(series, spec.train_start, spec.train_len),
            slice_series(series, spec.test_start, spec.test_len))


def year_split(series: WindSeries) -> SplitSpec:
    """Index-based split for a multi-year series covering both 2007 and 2008."""
    return SplitSpec(series.index_of(DEFAULT_TRAIN_START), DEFAULT_WINDOW_LENGTH,
                     series.index_of(DEFAULT_TEST_START), DEFAULT_WINDOW_LENGTH)


@dataclass(frozen=True)
class GaussianHmmSpec:
    """Hidden chain with column-stochastic ``transition`` and Gaussian emissions."""

    transition: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    initial: np.ndarray | None = None

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=float)
        n = T.shape[0]
        if T.shape != (n, n) or np.any(T < 0) or np.any(np.abs(T.sum(axis=0) - 1) > 1e-12):
            raise InvalidInputError("transition must be a square column-stochastic matrix")
        mu = np.asarray(self.means, dtype=float)
        var = np.asarray(self.variances, dtype=float)
        if mu.shape != (n,) or var.shape != (n,) or np.any(var < 0):
            raise InvalidInputError("means/variances must have one nonnegative entry per state")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)
        if self.initial is not None:
            p0 = np.asarray(self.initial, dtype=float)
            if p0.shape != (n,) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
                raise InvalidInputError("initial must be a probability vector")
            object.__setattr__(self, "initial", p0)


def sample_hidden_chain(spec: GaussianHmmSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    from .spectral import stationary_distribution

    T = spec.transition
    n = T.shape[0]
    p0 = spec.initial if spec.initial is not None else stationary_distribution(T)
    cum = np.cumsum(T, axis=0)
    u = rng.random(length)
    states = np.empty(length, dtype=int)
    states[0] = min(int(np.searchsorted(np.cumsum(p0), u[0], side="right")), n - 1)
    for t in range(1, length):
        states[t] = min(int(np.searchsorted(cum[:, states[t - 1]], u[t], side="right")), n - 1)
    return states


def synth_hmm_series(spec: GaussianHmmSpec, length: int, seed: int, turbine_id: str = "synthetic",
                     start: str = DEFAULT_TRAIN_START) -> WindSeries:
    """Reproducible series from a Gaussian-emission HMM; negative draws clamp to 0."""
    if length < 1:
        raise InvalidInputError("length must be positive")
    rng = np.random.default_rng(seed)
    states = sample_hidden_chain(spec, length, rng)
    noise = rng.standard_normal(length)
    values = np.maximum(spec.means[states] + np.sqrt(spec.variances[states]) * noise, 0.0)
    t0 = _parse_time(start)
    ts = t0 + np.arange(length) * HOUR
    return WindSeries(turbine_id, ts.astype("datetime64[s]"), values)

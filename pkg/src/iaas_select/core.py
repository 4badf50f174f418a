"""Shared domain types, elementary time-series metrics and resampling.

Time is a uniform integer grid. In the reference experiment one timestamp is
one day and 360 timestamps make a year.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, Union

import numpy as np


class AlignmentError(ValueError):
    """Two series (or TSGs) do not share the same timestamps."""


class DegenerateRangeError(ValueError):
    """Normalisation requested against a constant reference series."""


class LoadError(ValueError):
    """Inputs violate a structural invariant at load time."""


class Polarity(str, enum.Enum):
    BENEFIT = "benefit"
    COST = "cost"


@dataclass(frozen=True)
class QosAttribute:
    name: str
    polarity: Polarity = Polarity.BENEFIT
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))

    def orient(self, values):
        """Map values so that larger always means better."""
        values = np.asarray(values, dtype=float)
        return values if self.polarity is Polarity.BENEFIT else -values


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.int64).reshape(-1)
        vs = np.array(self.values, dtype=float).reshape(-1)
        if ts.size == 0:
            raise ValueError("a time series needs at least one point")
        if ts.size != vs.size:
            raise ValueError(f"{ts.size} timestamps but {vs.size} values")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vs)):
            raise ValueError("time series values must be finite")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vs))

    @classmethod
    def from_values(cls, values, start: int = 0) -> "TimeSeries":
        values = np.asarray(values, dtype=float).reshape(-1)
        return cls(np.arange(start, start + values.size), values)

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return (f"TimeSeries(n={len(self)}, t=[{self.timestamps[0]}..{self.timestamps[-1]}], "
                f"mean={self.values.mean():.4g})")

    def window(self, start: int, length: int) -> "TimeSeries":
        """Sub-series over timestamps ``[start, start + length)``; must be fully covered."""
        mask = (self.timestamps >= start) & (self.timestamps < start + length)
        if mask.sum() != length:
            raise AlignmentError(f"series does not cover [{start}, {start + length})")
        return TimeSeries(self.timestamps[mask], self.values[mask])

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.timestamps, values)

    def shifted(self, offset: int) -> "TimeSeries":
        return TimeSeries(self.timestamps + offset, self.values)

    def same_grid(self, other: "TimeSeries") -> bool:
        return np.array_equal(self.timestamps, other.timestamps)


@dataclass(frozen=True, eq=False)
class TSG:
    """Time series group: one aligned series per QoS attribute."""

    attributes: tuple
    series: tuple

    def __post_init__(self):
        attrs = tuple(self.attributes)
        series = tuple(self.series)
        if not attrs:
            raise ValueError("a TSG needs at least one attribute")
        if len(attrs) != len(series):
            raise ValueError("one series per attribute required")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names in {names}")
        for s in series[1:]:
            if not s.same_grid(series[0]):
                raise AlignmentError("all series of a TSG must share timestamps")
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "series", series)

    @classmethod
    def from_matrix(cls, attributes: Sequence[QosAttribute], timestamps, matrix) -> "TSG":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        return cls(tuple(attributes),
                   tuple(TimeSeries(timestamps, matrix[:, i]) for i in range(matrix.shape[1])))

    @property
    def names(self) -> tuple:
        return tuple(a.name for a in self.attributes)

    @property
    def timestamps(self) -> np.ndarray:
        return self.series[0].timestamps

    def __len__(self) -> int:
        return len(self.series[0])

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __getitem__(self, name: str) -> TimeSeries:
        try:
            return self.series[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def attribute(self, name: str) -> QosAttribute:
        return self.attributes[self.names.index(name)]

    def as_matrix(self) -> np.ndarray:
        """(timestamps x attributes) matrix."""
        return np.column_stack([s.values for s in self.series])

    def select(self, names: Iterable[str]) -> "TSG":
        names = list(names)
        return TSG(tuple(self.attribute(n) for n in names), tuple(self[n] for n in names))

    def window(self, start: int, length: int) -> "TSG":
        return TSG(self.attributes, tuple(s.window(start, length) for s in self.series))

    def restrict(self, timestamps) -> "TSG":
        """Keep only the given timestamps, all of which must be present."""
        timestamps = np.asarray(timestamps, dtype=np.int64)
        mask = np.isin(self.timestamps, timestamps)
        if mask.sum() != timestamps.size:
            raise AlignmentError("TSG does not cover the requested timestamps")
        return TSG(self.attributes,
                   tuple(TimeSeries(s.timestamps[mask], s.values[mask]) for s in self.series))


@dataclass(frozen=True, eq=False)
class ConsumerRequest:
    """A new consumer: long-term workload, expected QoS and season layout.

    ``segments * segment_length * years == horizon``; ``years`` is derived.
    """

    horizon: int
    workload: TimeSeries
    expectation: TSG
    dominant: tuple = ()
    segments: int = 12
    segment_length: int = 30

    def __post_init__(self):
        object.__setattr__(self, "dominant", tuple(self.dominant))
        season_len = self.segments * self.segment_length
        if self.segments < 1 or self.segment_length < 1 or self.horizon % season_len:
            raise ValueError(f"S*M={season_len} does not divide horizon {self.horizon}")
        expected = np.arange(self.horizon)
        if not np.array_equal(self.workload.timestamps, expected):
            raise AlignmentError("workload must cover exactly timestamps 0..horizon-1")
        missing = set(self.dominant) - set(self.expectation.names)
        if missing:
            raise ValueError(f"dominant attributes {sorted(missing)} not in the QoS expectation")

    @property
    def years(self) -> int:
        return self.horizon // (self.segments * self.segment_length)


@dataclass(frozen=True, eq=False)
class Provider:
    id: str
    advertisement: TSG
    trial_start: int = 0
    trial_length: int = 30

    @property
    def trial_window(self) -> tuple:
        return (self.trial_start, self.trial_length)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One user's trial on one provider: replayed workload plus observed QoS."""

    user_id: str
    provider_id: str
    workload: TimeSeries
    observed: TSG = field(repr=False)

    def __post_init__(self):
        if not np.array_equal(self.workload.timestamps, self.observed.timestamps):
            raise AlignmentError("workload and observed QoS must share the trial timestamps")

    @property
    def window_start(self) -> int:
        return int(self.workload.timestamps[0])

    @property
    def window_length(self) -> int:
        return len(self.workload)


class PerformanceOracle(Protocol):
    """Anything that can say what QoS a provider delivers for a workload series."""

    def observe_tsg(self, provider_id: str, workload: TimeSeries) -> TSG: ...


def check_advertisement_width(consumer: ConsumerRequest, providers: Iterable[Provider]) -> None:
    """Advertisements must carry fewer QoS parameters than the consumer requires."""
    l = len(consumer.expectation.attributes)
    for p in providers:
        ik = len(p.advertisement.attributes)
        if ik >= l:
            raise LoadError(f"provider {p.id} advertises {ik} attributes, consumer requires {l}")
        if p.trial_length >= consumer.horizon:
            raise LoadError(f"provider {p.id} trial length {p.trial_length} not below horizon")


SeriesLike = Union[TimeSeries, Sequence[float], np.ndarray]


def _pair(a: SeriesLike, b: SeriesLike):
    if isinstance(a, TimeSeries) and isinstance(b, TimeSeries):
        if not a.same_grid(b):
            raise AlignmentError("series are not aligned on the same timestamps")
        return a.values, b.values
    av = a.values if isinstance(a, TimeSeries) else np.asarray(a, dtype=float)
    bv = b.values if isinstance(b, TimeSeries) else np.asarray(b, dtype=float)
    if av.shape != bv.shape:
        raise AlignmentError(f"length mismatch: {av.shape} vs {bv.shape}")
    return av, bv


def mae(a: SeriesLike, b: SeriesLike) -> float:
    av, bv = _pair(a, b)
    return float(np.mean(np.abs(av - bv)))


def rmse(a: SeriesLike, b: SeriesLike) -> float:
    av, bv = _pair(a, b)
    d = np.abs(av - bv)
    scale = d.max(initial=0.0)
    if scale == 0:
        return 0.0
    # scaled to avoid underflow/overflow when squaring
    return float(scale * np.sqrt(np.mean((d / scale) ** 2)))


def nrmse(actual: SeriesLike, predicted: SeriesLike, value_range: float | None = None) -> float:
    """RMSE divided by the range of ``actual`` (or an explicit reference range)."""
    av, _ = _pair(actual, predicted)
    if value_range is None:
        value_range = float(av.max() - av.min())
    if not value_range > 0:
        raise DegenerateRangeError("reference series has zero range")
    return rmse(actual, predicted) / value_range


def paa_resample(s: TimeSeries, target_len: int) -> TimeSeries:
    """Piecewise aggregate approximation onto exactly ``target_len`` points.

    Interval sizes differ by at most one point; with ``len(s) % target_len == 0``
    every interval has the same width and the global mean is preserved.
    The result is placed on the grid ``0..target_len-1`` offset by the first
    input timestamp.
    """
    n = len(s)
    if not 1 <= target_len <= n:
        raise ValueError(f"target length {target_len} outside [1, {n}]")
    if target_len == n:
        return s
    means = [chunk.mean() for chunk in np.array_split(s.values, target_len)]
    return TimeSeries(s.timestamps[0] + np.arange(target_len), means)

"""History-free prediction: squeeze the long-term workload into the trial window,
observe it, then stretch the observed QoS back over the horizon."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .clqp import PredictionResult
from .core import TSG, ConsumerRequest, PerformanceOracle, Provider, TimeSeries

log = logging.getLogger(__name__)


class CompressionMethod(str, enum.Enum):
    PUS = "pus"
    PAA = "paa"
    RS = "rs"


@dataclass(frozen=True, eq=False)
class TrialMapping:
    """Compressed workload points and where each came from on the horizon.

    ``source_index`` may be fractional (PAA points sit at interval midpoints).
    """

    compressed: TimeSeries
    source_index: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source_index, dtype=float)
        if src.size != len(self.compressed):
            raise ValueError("one source index per compressed point")
        if src.size > 1 and np.any(np.diff(src) <= 0):
            raise ValueError("source indices must be strictly increasing")
        src.flags.writeable = False
        object.__setattr__(self, "source_index", src)

    def __len__(self) -> int:
        return len(self.compressed)


@dataclass(frozen=True, eq=False)
class TrialGenerationModel:
    workload: TimeSeries
    method: CompressionMethod = CompressionMethod.PUS
    trial_length: int = 30
    k: int | None = None
    attributes: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", CompressionMethod(self.method))
        if self.k is None:
            object.__setattr__(self, "k", self.trial_length)
        if not 1 <= self.k <= self.trial_length:
            raise ValueError(f"k={self.k} must lie in [1, trial_length={self.trial_length}]")


def _check_k(w: TimeSeries, k: int):
    if not 1 <= k <= len(w):
        raise ValueError(f"k={k} outside [1, {len(w)}]")


def _identity(w: TimeSeries) -> TrialMapping:
    return TrialMapping(TimeSeries.from_values(w.values), np.arange(len(w), dtype=float))


def compress_pus(w: TimeSeries, k: int) -> TrialMapping:
    """Every ``ceil(n/k)``-th point starting with the first.

    Yields ``ceil(n / ceil(n/k))`` points, which is ``k`` whenever the stride
    tiles the series and can be fewer otherwise.
    """
    _check_k(w, k)
    n = len(w)
    if k == n:
        return _identity(w)
    idx = np.arange(0, n, math.ceil(n / k))[:k]
    return TrialMapping(TimeSeries.from_values(w.values[idx]), idx.astype(float))


def compress_paa(w: TimeSeries, k: int) -> TrialMapping:
    """Means over consecutive intervals of width ``ceil(n/k)``; the tail interval may be short."""
    _check_k(w, k)
    n = len(w)
    if k == n:
        return _identity(w)
    x = math.ceil(n / k)
    starts = np.arange(0, n, x)
    ends = np.minimum(starts + x, n)
    means = np.array([w.values[a:b].mean() for a, b in zip(starts, ends)])
    return TrialMapping(TimeSeries.from_values(means), (starts + ends - 1) / 2.0)


def compress_rs(w: TimeSeries, k: int, seed: int) -> TrialMapping:
    """``k`` distinct points drawn uniformly, replayed in time order."""
    _check_k(w, k)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(w), size=k, replace=False))
    return TrialMapping(TimeSeries.from_values(w.values[idx]), idx.astype(float))


def compress(model: TrialGenerationModel) -> TrialMapping:
    w = model.workload
    if len(w) <= model.k:
        return _identity(w)
    if model.method is CompressionMethod.PUS:
        return compress_pus(w, model.k)
    if model.method is CompressionMethod.PAA:
        return compress_paa(w, model.k)
    return compress_rs(w, model.k, model.seed)


def expand_qos(observed, mapping: TrialMapping, horizon_len: int) -> TimeSeries:
    """Place observed values at their source indices and fill the horizon.

    Gaps are linearly interpolated; the ends are extrapolated along the line
    through the two nearest mapped points.
    """
    y = np.asarray(getattr(observed, "values", observed), dtype=float)
    x = mapping.source_index
    if y.size != x.size:
        raise ValueError(f"{y.size} observations for {x.size} mapped points")
    t = np.arange(horizon_len, dtype=float)
    if y.size == 1:
        if horizon_len > 1:
            log.warning("single observed point; filling the horizon with a constant")
        return TimeSeries(t.astype(np.int64), np.full(horizon_len, y[0]))
    out = np.interp(t, x, y)
    lo, hi = t < x[0], t > x[-1]
    out[lo] = y[0] + (t[lo] - x[0]) * (y[1] - y[0]) / (x[1] - x[0])
    out[hi] = y[-1] + (t[hi] - x[-1]) * (y[-1] - y[-2]) / (x[-1] - x[-2])
    return TimeSeries(t.astype(np.int64), out)


def trial_timestamps(provider: Provider, k: int) -> np.ndarray:
    """Spread ``k`` replay points evenly over the provider's trial window."""
    return provider.trial_start + (np.arange(k) * provider.trial_length) // k


def lqp_short_predict(consumer: ConsumerRequest, provider: Provider, model: TrialGenerationModel,
                      oracle: PerformanceOracle) -> PredictionResult:
    """Compress, trial, expand. No history exists, so no confidence is reported."""
    mapping = compress(model)
    k = len(mapping)
    replay = TimeSeries(trial_timestamps(provider, k), mapping.compressed.values)
    observed = oracle.observe_tsg(provider.id, replay)
    names = model.attributes or observed.names
    attrs = [observed.attribute(n) for n in names]
    cols = [expand_qos(observed[n], mapping, consumer.horizon).values for n in names]
    predicted = TSG.from_matrix(attrs, np.arange(consumer.horizon), np.column_stack(cols))
    return PredictionResult(provider.id, predicted, None, {}, f"lqp-short:{model.method.value}")

"""Cooperative long-term QoS prediction from past trial users with similar workloads."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import (TSG, AlignmentError, ConsumerRequest, PerformanceOracle, Provider,
                   TimeSeries, TrialRecord, rmse)

log = logging.getLogger(__name__)

CONSUMER_ID = "consumer"


class CoverageError(ValueError):
    pass


class InsufficientHistory(LookupError):
    """No similar trial users for some segments; route them to LQP-short."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"no neighbours for segments {list(self.missing)}")


@dataclass(frozen=True)
class SegmentPlan:
    segments: int = 12
    length: int = 30
    years: int = 1

    def __post_init__(self):
        if self.segments < 1 or self.length < 1 or self.years < 1:
            raise ValueError("segments, length and years must be positive")

    @classmethod
    def for_consumer(cls, consumer: ConsumerRequest) -> "SegmentPlan":
        return cls(consumer.segments, consumer.segment_length, consumer.years)

    @property
    def season(self) -> int:
        return self.segments * self.length

    @property
    def horizon(self) -> int:
        return self.season * self.years

    def start(self, segment: int, year: int = 0) -> int:
        return year * self.season + segment * self.length

    def blocks(self):
        for year in range(self.years):
            for segment in range(self.segments):
                yield segment, year


@dataclass(frozen=True)
class SimilarityScore:
    user_id: str
    segment: int
    pcc: float | None
    rmse_distance: float
    weight: float
    source_start: int

    def to_json(self) -> dict:
        return {"user": self.user_id, "segment": self.segment, "pcc": self.pcc,
                "rmse": self.rmse_distance, "weight": self.weight,
                "source_start": self.source_start}


@dataclass(eq=False)
class PredictionResult:
    provider_id: str
    predicted: TSG
    confidence: dict | None = None
    neighbors: dict = field(default_factory=dict)
    method: str = "cooperative"
    missing_segments: tuple = ()

    @property
    def max_confidence(self) -> float | None:
        """Provider-level confidence distance: the most pessimistic attribute."""
        if not self.confidence:
            return None
        return max(self.confidence.values())

    def to_json(self) -> dict:
        return {
            "provider": self.provider_id,
            "method": self.method,
            "confidence": self.confidence,
            "missing_segments": [list(m) for m in self.missing_segments],
            "neighbors": {f"s{s}y{y}": [n.to_json() for n in ns]
                          for (s, y), ns in sorted(self.neighbors.items())},
            "predicted": {
                "timestamps": self.predicted.timestamps.tolist(),
                **{a.name: s.values.tolist()
                   for a, s in zip(self.predicted.attributes, self.predicted.series)},
            },
        }


def pcc_similarity(w, w2) -> float | None:
    """Pearson correlation of two aligned workload windows; ``None`` if either is flat."""
    a = np.asarray(getattr(w, "values", w), dtype=float)
    b = np.asarray(getattr(w2, "values", w2), dtype=float)
    if a.shape != b.shape:
        raise AlignmentError("workload windows differ in length")
    if a.size < 2:
        return None
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da ** 2).sum()) * np.sqrt((db ** 2).sum())
    if denom == 0:
        return None
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def similarity_weight(w, w2) -> float:
    return 1.0 / (1.0 + rmse(w, w2))


def _minmax(v: np.ndarray) -> np.ndarray:
    span = v.max() - v.min()
    return np.zeros_like(v) if span == 0 else (v - v.min()) / span


def select_neighbors(segment_workload, records, k: int, segment: int = 0,
                     min_weight: float = 0.0, normalize: bool = False) -> list:
    """Extended Top-K: at most ``k`` records whose workload resembles the segment.

    Records are matched positionally against ``segment_workload`` and must have
    the same length. Only weights above ``min_weight`` (and above zero) qualify.
    If some records match exactly, only exact matches are used. The result may
    be empty, which signals a fallback to LQP-short.
    """
    target = np.asarray(getattr(segment_workload, "values", segment_workload), dtype=float)
    if normalize:
        target = _minmax(target)
    scores = []
    for rec in records:
        cand = rec.workload.values
        if cand.size != target.size:
            raise AlignmentError(f"record of {rec.user_id} has {cand.size} points, "
                                 f"segment has {target.size}")
        pcc = pcc_similarity(target, cand)
        if normalize:
            cand = _minmax(cand)
        dist = rmse(target, cand)
        weight = 1.0 / (1.0 + dist)
        if weight > max(min_weight, 0.0):
            scores.append(SimilarityScore(rec.user_id, segment, pcc, dist, weight, rec.window_start))
    exact = [s for s in scores if s.rmse_distance == 0.0]
    if exact:
        scores = exact
    scores.sort(key=lambda s: (-s.weight, s.user_id, s.source_start))
    return scores[:k]


def _neighbor_window(neighbor: SimilarityScore, records, offsets: np.ndarray, attribute: str):
    ts = neighbor.source_start + offsets
    for rec in records:
        if rec.user_id != neighbor.user_id or attribute not in rec.observed:
            continue
        series = rec.observed[attribute]
        idx = np.searchsorted(series.timestamps, ts)
        ok = (idx < len(series)) & (series.timestamps[np.minimum(idx, len(series) - 1)] == ts)
        if ok.all():
            return series.values[idx]
    raise CoverageError(f"no record of {neighbor.user_id} covers timestamps "
                        f"{ts.tolist()} for {attribute}")


def predict_segment_qos(neighbors, records, attribute: str, timestamps=None,
                        weighted: bool = True) -> TimeSeries:
    """Similarity-weighted average of the neighbours' observed QoS per timestamp.

    With ``weighted=False`` every neighbour counts equally. ``timestamps`` is the
    consumer-side grid of the segment; neighbours are aligned by offset from the
    start of their own window.
    """
    if not neighbors:
        raise ValueError("need at least one neighbour")
    if timestamps is None:
        first = neighbors[0]
        rec = next(r for r in records
                   if r.user_id == first.user_id and r.window_start == first.source_start)
        timestamps = rec.workload.timestamps
    timestamps = np.asarray(timestamps, dtype=np.int64)
    offsets = timestamps - timestamps[0]
    obs = np.stack([_neighbor_window(n, records, offsets, attribute) for n in neighbors])
    w = np.array([n.weight if weighted else 1.0 for n in neighbors])
    return TimeSeries(timestamps, (w[:, None] * obs).sum(axis=0) / w.sum())


def replay_workload(consumer: ConsumerRequest, start: int, length: int) -> TimeSeries:
    """Consumer workload for a calendar window, averaged over all years."""
    season = consumer.segments * consumer.segment_length
    if start < 0 or length < 1 or start + length > season:
        raise ValueError(f"trial window [{start}, {start + length}) outside the first season")
    w = consumer.workload.values
    stacked = np.stack([w[y * season + start:y * season + start + length]
                        for y in range(consumer.years)])
    return TimeSeries(np.arange(start, start + length), stacked.mean(axis=0))


def workload_replay_trial(consumer: ConsumerRequest, provider: Provider,
                          oracle: PerformanceOracle, user_id: str = CONSUMER_ID) -> TrialRecord:
    """Run the consumer's own workload for the trial's calendar window."""
    workload = replay_workload(consumer, provider.trial_start, provider.trial_length)
    observed = oracle.observe_tsg(provider.id, workload)
    return TrialRecord(user_id, provider.id, workload, observed)


def confidence(trial: TrialRecord, predicted, attribute: str, scale: float = 1.0) -> float:
    """RMS distance between observed and predicted trial QoS; 0 is full confidence.

    ``scale`` divides the distance, e.g. to express it in units of the
    requirement's standard deviation.
    """
    observed = trial.observed[attribute]
    if isinstance(predicted, TimeSeries):
        if not observed.same_grid(predicted):
            raise AlignmentError("prediction is not aligned with the trial window")
        predicted = predicted.values
    predicted = np.asarray(predicted, dtype=float)
    if predicted.shape != observed.values.shape:
        raise AlignmentError("prediction length differs from the trial window")
    dist = np.sqrt(np.sum((observed.values - predicted) ** 2) / len(observed))
    return float(dist / scale)


def _histories(records, provider_id: str, names) -> dict:
    """Merge each user's records on one provider into one history per user."""
    by_user = defaultdict(list)
    for rec in records:
        if rec.provider_id == provider_id:
            by_user[rec.user_id].append(rec)
    out = {}
    for user, recs in by_user.items():
        ts = np.concatenate([r.workload.timestamps for r in recs])
        order = np.argsort(ts, kind="stable")
        ts, first = np.unique(ts[order], return_index=True)
        sel = order[first]
        wl = np.concatenate([r.workload.values for r in recs])[sel]
        obs = {a: np.concatenate([r.observed[a].values for r in recs])[sel] for a in names
               if all(a in r.observed for r in recs)}
        out[user] = (ts, wl, obs)
    return out


def segment_candidates(histories: dict, plan: SegmentPlan, segment: int, attributes) -> list:
    """One windowed record per (user, year) that fully covers ``segment`` of that year."""
    names = [a.name for a in attributes]
    cands = []
    for user in sorted(histories):
        ts, wl, obs = histories[user]
        if any(a not in obs for a in names):
            continue
        for year in range(int(ts[-1] // plan.season) + 1):
            start = plan.start(segment, year)
            lo = int(np.searchsorted(ts, start))
            hi = lo + plan.length
            if hi > ts.size or ts[lo] != start or ts[hi - 1] != start + plan.length - 1:
                continue
            wts = ts[lo:hi]
            observed = TSG.from_matrix(attributes, wts,
                                       np.column_stack([obs[a][lo:hi] for a in names]))
            cands.append(TrialRecord(user, "", TimeSeries(wts, wl[lo:hi]), observed))
    return cands


def clqp_predict(consumer: ConsumerRequest, provider: Provider, records, plan: SegmentPlan | None = None,
                 k: int = 5, trial: TrialRecord | None = None, oracle: PerformanceOracle | None = None,
                 fallback: "PredictionResult | None" = None, normalize: bool = False,
                 min_weight: float = 0.0, standardize_confidence: bool = True) -> PredictionResult:
    """Predict a provider's QoS over the whole horizon from similar trial users.

    The trial window is filled with the consumer's own observations; every other
    segment is the similarity-weighted neighbour average. Confidence compares
    the consumer's trial observations with the neighbour-based prediction for
    the trial window. When ``standardize_confidence`` is set the distance is
    divided by the per-attribute standard deviation of the consumer's
    expectation, which makes a threshold near 1 meaningful across units.

    Raises :class:`InsufficientHistory` if some segment has no neighbours and
    no ``fallback`` prediction is given to fill it.
    """
    plan = plan or SegmentPlan.for_consumer(consumer)
    if plan.horizon != consumer.horizon:
        raise ValueError(f"plan covers {plan.horizon} timestamps, horizon is {consumer.horizon}")
    if trial is None:
        if oracle is None:
            raise ValueError("need either the consumer's trial record or an oracle to run it")
        trial = workload_replay_trial(consumer, provider, oracle)
    attributes = list(trial.observed.names)
    hist = _histories(records, provider.id, attributes)
    attr_objs = trial.observed.attributes
    if not hist:
        raise InsufficientHistory(list(plan.blocks()))

    n = consumer.horizon
    pred = np.full((n, len(attributes)), np.nan)
    neighbors, missing = {}, []
    cands_by_segment = {s: segment_candidates(hist, plan, s, attr_objs) for s in range(plan.segments)}
    for segment, year in plan.blocks():
        start = plan.start(segment, year)
        ts = np.arange(start, start + plan.length)
        seg_w = consumer.workload.values[start:start + plan.length]
        cands = cands_by_segment[segment]
        chosen = select_neighbors(seg_w, cands, k, segment, min_weight, normalize) if cands else []
        neighbors[(segment, year)] = chosen
        if not chosen:
            missing.append((segment, year))
            continue
        for j, a in enumerate(attributes):
            pred[start:start + plan.length, j] = predict_segment_qos(chosen, cands, a, ts).values

    method = "cooperative"
    tw = slice(trial.window_start, trial.window_start + trial.window_length)
    neighbor_trial = pred[tw].copy()
    if missing:
        if fallback is None:
            raise InsufficientHistory(missing)
        fb = fallback.predicted
        for j, a in enumerate(attributes):
            gap = np.isnan(pred[:, j])
            pred[gap, j] = fb[a].values[gap]
        method = "cooperative+lqp-short"
        log.info("provider %s: %d segments filled by fallback", provider.id, len(missing))

    conf = None
    if not np.isnan(neighbor_trial).any():
        conf = {}
        for j, a in enumerate(attributes):
            scale = 1.0
            if standardize_confidence and a in consumer.expectation:
                sd = float(np.std(consumer.expectation[a].values))
                scale = sd if sd > 0 else 1.0
            conf[a] = confidence(trial, neighbor_trial[:, j], a, scale)

    pred[tw] = trial.observed.as_matrix()
    predicted = TSG.from_matrix(trial.observed.attributes, np.arange(n), pred)
    return PredictionResult(provider.id, predicted, conf, neighbors, method, tuple(missing))

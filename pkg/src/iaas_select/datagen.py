"""Synthetic workload-performance generation.

The :class:`Simulator` is the hidden ground truth. It answers "what QoS does
provider P deliver for workload w at time t" as

    baseline(w) * workload_map[bucket(w)] * seasonal_map[season(t)] * (1 + jitter)

with jitter uniform on [-noise, noise], drawn from a counter-based hash so that
each draw depends only on (seed, provider, attribute, t, w).
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import TSG, Polarity, Provider, QosAttribute, TimeSeries, TrialRecord

THROUGHPUT = QosAttribute("throughput", Polarity.BENEFIT, "op/s")
INSERT_RESPONSE = QosAttribute("insert_response", Polarity.COST, "ms")
READ_RESPONSE = QosAttribute("read_response", Polarity.COST, "ms")
PRICE = QosAttribute("price", Polarity.COST, "$/h")
AVAILABILITY = QosAttribute("availability", Polarity.BENEFIT, "fraction")
RESPONSE_TIME = QosAttribute("response_time", Polarity.COST, "ms")

PERFORMANCE_ATTRIBUTES = (THROUGHPUT, INSERT_RESPONSE, READ_RESPONSE)
AD_ATTRIBUTES = (PRICE, AVAILABILITY, THROUGHPUT, RESPONSE_TIME)
ATTRIBUTES = {a.name: a for a in PERFORMANCE_ATTRIBUTES + AD_ATTRIBUTES}

AD_RANGES = {
    "price": (0.05, 2.0),
    "availability": (0.95, 0.9999),
    "throughput": (1000.0, 10000.0),
    "response_time": (5.0, 200.0),
}
AD_SEASONAL_SPREAD = {"price": 0.05, "availability": 0.002, "throughput": 0.05,
                      "response_time": 0.05}
# seasonal wobble of the generated advertisement corpus, as a fraction of each
# attribute's range
AD_RANGE_SPREAD = 0.1

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def name_key(name: str) -> int:
    return zlib.crc32(name.encode())


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named component of the root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(name_key(name),)))


def _splitmix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def keyed_uniform(*keys) -> np.ndarray:
    """Uniform [0, 1) draws keyed by broadcastable uint64-compatible arrays."""
    h = np.zeros(np.broadcast(*[np.asarray(k) for k in keys]).shape, dtype=np.uint64)
    for k in keys:
        k = np.asarray(k)
        if k.dtype.kind == "f":
            k = np.ascontiguousarray(k, dtype=np.float64).view(np.uint64)
        h = _splitmix(h ^ k.astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True, eq=False)
class BaselineMap:
    """Sorted workload level -> baseline value table, interpolated linearly."""

    levels: np.ndarray
    values: dict

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        if levels.size < 2 or np.any(np.diff(levels) < 0):
            raise ValueError("baseline levels must be sorted with at least two rows")
        values = {k: np.asarray(v, dtype=float) for k, v in self.values.items()}
        for name, v in values.items():
            if v.shape != levels.shape:
                raise ValueError(f"{name}: one value per level required")
            step = np.diff(v)
            if ATTRIBUTES[name].polarity is Polarity.BENEFIT and np.any(step > 0):
                raise ValueError(f"{name} must not increase with resource consumption")
            if ATTRIBUTES[name].polarity is Polarity.COST and np.any(step < 0):
                raise ValueError(f"{name} must not decrease with resource consumption")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)

    def lookup(self, workload, attribute: str):
        return np.interp(workload, self.levels, self.values[attribute])

    @classmethod
    def synthetic(cls, rng: np.random.Generator, rows: int = 1500, max_level: float = 32.0):
        """Synthetic placeholder table: throughput 100-10000 op/s, response 1-200 ms."""
        levels = np.sort(np.concatenate([[0.0, max_level], rng.uniform(0, max_level, rows - 2)]))
        u = levels / max_level
        half = rng.uniform(0.3, 0.5)
        p = rng.uniform(1.5, 3.0)
        thr = 100 + 9900 / (1 + (u / half) ** p)
        ins = 1 + 199 * u ** rng.uniform(1.5, 2.5)
        rd = 1 + 99 * u ** rng.uniform(1.2, 2.0)
        noisy = lambda v: v * (1 + rng.normal(0, 0.02, v.size))
        thr = np.clip(np.minimum.accumulate(noisy(thr)), 100, 10000)
        ins = np.clip(np.maximum.accumulate(noisy(ins)), 1, 200)
        rd = np.clip(np.maximum.accumulate(noisy(rd)), 1, 200)
        return cls(levels, {"throughput": thr, "insert_response": ins, "read_response": rd})

    def to_csv(self, path):
        names = list(self.values)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["workload", *names])
            for i, lvl in enumerate(self.levels):
                w.writerow([repr(float(lvl)), *(repr(float(self.values[n][i])) for n in names)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        names = [k for k in rows[0] if k != "workload"]
        return cls(np.array([float(r["workload"]) for r in rows]),
                   {n: np.array([float(r[n]) for r in rows]) for n in names})


@dataclass(frozen=True, eq=False)
class QosProfile:
    """Hidden per-provider behaviour relative to the baseline."""

    provider_id: str
    workload_map: dict
    seasonal_map: dict
    noise: float = 0.0

    def __post_init__(self):
        wm = {k: np.asarray(v, dtype=float) for k, v in self.workload_map.items()}
        sm = {k: np.asarray(v, dtype=float) for k, v in self.seasonal_map.items()}
        if not 0 <= self.noise <= 0.5:
            raise ValueError("noise amplitude must lie in [0, 0.5]")
        for name, m in list(wm.items()) + list(sm.items()):
            if np.any(m <= 0):
                raise ValueError(f"{name}: multipliers must be positive")
        for name, m in wm.items():
            step = np.diff(m)
            bad = step > 0 if ATTRIBUTES[name].polarity is Polarity.BENEFIT else step < 0
            if np.any(bad):
                raise ValueError(f"{name}: workload map must not favour heavier workloads")
        object.__setattr__(self, "workload_map", wm)
        object.__setattr__(self, "seasonal_map", sm)

    def to_json(self) -> dict:
        return {"provider": self.provider_id, "noise": self.noise,
                "workload_map": {k: v.tolist() for k, v in self.workload_map.items()},
                "seasonal_map": {k: v.tolist() for k, v in self.seasonal_map.items()}}

    @classmethod
    def from_json(cls, d: dict) -> "QosProfile":
        return cls(d["provider"], d["workload_map"], d["seasonal_map"], d["noise"])


def random_profile(provider_id: str, rng: np.random.Generator, n_buckets: int = 5,
                   n_seasons: int = 12, noise_range=(0.02, 0.25)) -> QosProfile:
    """Random profile: a shared seasonal load drives all attributes coherently."""
    load = rng.uniform(-1, 1, n_seasons)
    swing = rng.uniform(0.1, 0.3)
    wmap, smap = {}, {}
    for a in PERFORMANCE_ATTRIBUTES:
        m = np.sort(rng.uniform(0.8, 1.2, n_buckets))
        sign = -1 if a.polarity is Polarity.BENEFIT else 1
        wmap[a.name] = m[::-1] if a.polarity is Polarity.BENEFIT else m
        smap[a.name] = np.clip(1 + sign * swing * load + rng.normal(0, 0.03, n_seasons), 0.3, None)
    lo, hi = noise_range
    return QosProfile(provider_id, wmap, smap, float(rng.uniform(lo, hi)) if hi > lo else float(lo))


@dataclass(eq=False)
class Simulator:
    baseline: BaselineMap
    profiles: dict
    bucket_edges: np.ndarray
    season_length: int = 30
    seed: int = 0
    attributes: tuple = PERFORMANCE_ATTRIBUTES

    def __post_init__(self):
        self.bucket_edges = np.asarray(self.bucket_edges, dtype=float)

    def bucket(self, workload):
        return np.searchsorted(self.bucket_edges, workload, side="right")

    def season(self, t, n_seasons: int):
        return (np.asarray(t) // self.season_length) % n_seasons

    def observe_values(self, provider_id: str, workloads, timestamps, attribute: str) -> np.ndarray:
        try:
            prof = self.profiles[provider_id]
        except KeyError:
            raise KeyError(f"unknown provider {provider_id!r}") from None
        w = np.asarray(workloads, dtype=float)
        t = np.asarray(timestamps, dtype=np.int64)
        seasonal = prof.seasonal_map[attribute]
        value = (self.baseline.lookup(w, attribute)
                 * prof.workload_map[attribute][self.bucket(w)]
                 * seasonal[self.season(t, seasonal.size)])
        if prof.noise > 0:
            u = keyed_uniform(self.seed, name_key(provider_id), name_key(attribute), t, w)
            value = value * (1 + prof.noise * (2 * u - 1))
        return value

    def observe(self, provider_id: str, workload: float, t: int, attribute: str) -> float:
        return float(self.observe_values(provider_id, [workload], [t], attribute)[0])

    def observe_tsg(self, provider_id: str, workload: TimeSeries) -> TSG:
        cols = [self.observe_values(provider_id, workload.values, workload.timestamps, a.name)
                for a in self.attributes]
        return TSG.from_matrix(self.attributes, workload.timestamps, np.column_stack(cols))


def bucket_edges(workloads, n_buckets: int = 5) -> np.ndarray:
    """Interior quantile edges of the pooled workload distribution."""
    pooled = np.concatenate([np.asarray(getattr(w, "values", w)) for w in workloads])
    return np.quantile(pooled, np.arange(1, n_buckets) / n_buckets)


def _seasonal_series(level, spread, horizon, season_length, rng):
    n_seasons = -(-horizon // season_length)
    factors = 1 + rng.uniform(-spread, spread, n_seasons)
    return np.repeat(level * factors, season_length)[:horizon]


def generate_advertisements(count: int, attributes=AD_ATTRIBUTES, horizon: int = 360,
                            seed: int = 0, season_length: int = 30, ranges=None,
                            trial_start: int = 0, trial_length: int = 30,
                            range_spread: float = AD_RANGE_SPREAD) -> list:
    """Random long-term advertisements, piecewise constant per season.

    Each provider draws one level per attribute uniformly from ``ranges`` and
    moves it per season by up to ``range_spread`` of that range, clipped to
    the range.
    """
    ranges = {**AD_RANGES, **(ranges or {})}
    rng = substream(seed, "advertisements")
    n_seasons = -(-horizon // season_length)
    out = []
    ts = np.arange(horizon)
    for i in range(count):
        cols = []
        for a in attributes:
            lo, hi = ranges[a.name]
            level = rng.uniform(lo, hi)
            wobble = rng.uniform(-range_spread, range_spread, n_seasons) * (hi - lo)
            cols.append(np.clip(np.repeat(level + wobble, season_length)[:horizon], lo, hi))
        ad = TSG.from_matrix(attributes, ts, np.column_stack(cols))
        out.append(Provider(f"P{i + 1:02d}", ad, trial_start, trial_length))
    return out


def generate_trial_corpus(users: dict, plan, provider_ids, simulator: Simulator) -> list:
    """One record per (user, provider, segment, year), observed through ``simulator``."""
    horizon = plan.horizon
    records = []
    for user in sorted(users):
        w = users[user]
        if len(w) < horizon:
            raise ValueError(f"workload of {user} has {len(w)} points, horizon is {horizon}")
        for pid in provider_ids:
            for segment, year in plan.blocks():
                window = w.window(plan.start(segment, year), plan.length)
                records.append(TrialRecord(user, pid, window, simulator.observe_tsg(pid, window)))
    return records


def ground_truth(simulator: Simulator, provider_ids, workload: TimeSeries) -> dict:
    """Each provider's QoS for the consumer's full workload."""
    return {pid: simulator.observe_tsg(pid, workload) for pid in provider_ids}


def consumer_expectation(baseline: BaselineMap, workload: TimeSeries, rng: np.random.Generator,
                         season_length: int = 30, extra=(PRICE, AVAILABILITY, RESPONSE_TIME)) -> TSG:
    """A plausible requirement: baseline performance for the consumer's own
    workload reshaped by a seasonal demand factor, plus flat-ish requirements on
    the non-measured attributes."""
    horizon = len(workload)
    n_seasons = -(-horizon // season_length)
    demand = rng.uniform(-1, 1, n_seasons)
    swing = rng.uniform(0.1, 0.25)
    attrs, cols = [], []
    season = np.arange(horizon) // season_length
    for a in PERFORMANCE_ATTRIBUTES:
        sign = 1 if a.polarity is Polarity.BENEFIT else -1
        factor = 1 + sign * swing * demand
        attrs.append(a)
        cols.append(baseline.lookup(workload.values, a.name) * factor[season])
    for a in extra:
        lo, hi = AD_RANGES[a.name]
        attrs.append(a)
        cols.append(np.clip(_seasonal_series(rng.uniform(lo, hi), AD_SEASONAL_SPREAD[a.name],
                                             horizon, season_length, rng), lo, hi))
    return TSG.from_matrix(attrs, workload.timestamps, np.column_stack(cols))


def provider_advertisement(profile: QosProfile, baseline: BaselineMap, reference_workload: float,
                           rng: np.random.Generator, horizon: int = 360, season_length: int = 30,
                           attributes=(PRICE, AVAILABILITY, THROUGHPUT)) -> TSG:
    """What a simulated provider claims: optimistic nominal throughput with an
    invented seasonal shape, plus price and availability."""
    cols = []
    for a in attributes:
        if a.name == "throughput":
            nominal = (baseline.lookup(reference_workload, "throughput")
                       * profile.workload_map["throughput"].mean()
                       * profile.seasonal_map["throughput"].mean()
                       * rng.uniform(1.0, 1.3))
            cols.append(_seasonal_series(nominal, 0.05, horizon, season_length, rng))
        else:
            lo, hi = AD_RANGES[a.name]
            cols.append(np.clip(_seasonal_series(rng.uniform(lo, hi), AD_SEASONAL_SPREAD[a.name],
                                                 horizon, season_length, rng), lo, hi))
    return TSG.from_matrix(attributes, np.arange(horizon), np.column_stack(cols))


def save_profiles(profiles: dict, path):
    Path(path).write_text(json.dumps([profiles[k].to_json() for k in sorted(profiles)], indent=1))


def load_profiles(path) -> dict:
    return {d["provider"]: QosProfile.from_json(d) for d in json.loads(Path(path).read_text())}

"""Candidate filtering: Top-K by distance, utility scores, and the MTS temporal skyline."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import AlignmentError, ConsumerRequest, Provider, mae, rmse

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class FilterMode(str, enum.Enum):
    SINGLE = "single"
    UTILITY = "utility"
    SKYLINE = "skyline"


@dataclass(frozen=True)
class FilterConfig:
    mode: FilterMode = FilterMode.SKYLINE
    k: int = 5
    weights: dict | None = None
    dominant: tuple = ()
    distance: str = "mae"
    cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", FilterMode(self.mode))
        object.__setattr__(self, "dominant", tuple(self.dominant))
        if self.distance not in DISTANCES:
            raise ConfigError(f"unknown distance {self.distance!r}")
        if self.mode is not FilterMode.SKYLINE and self.k < 1:
            raise ConfigError("k must be positive")
        if self.mode is FilterMode.UTILITY:
            w = self.weights or {}
            if any(v < 0 for v in w.values()) or not any(v > 0 for v in w.values()):
                raise ConfigError("utility weights must be non-negative with at least one positive")
        if self.mode is FilterMode.SKYLINE and not self.dominant:
            raise ConfigError("skyline mode needs at least one dominant attribute")
        if self.cap is not None and self.cap < 1:
            raise ConfigError("cap must be positive")


DISTANCES = {"mae": mae, "rmse": rmse}


@dataclass
class FilterResult:
    survivors: list
    mode: FilterMode
    params: dict
    excluded: list = field(default_factory=list)

    @property
    def ids(self) -> list:
        return [p.id for p in self.survivors]

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "params": self.params,
            "survivors": self.ids,
            "excluded": [{"provider": pid, "reason": why} for pid, why in self.excluded],
        }


def _distance(consumer, provider, name, metric):
    return metric(consumer.expectation[name], provider.advertisement[name])


def top_k_by_distance(consumer: ConsumerRequest, providers, k: int, distance: str = "mae",
                      excluded: list | None = None) -> list:
    """The ``k`` providers closest to a single-attribute requirement, ascending.

    Ties are broken by provider id. Providers that do not advertise the attribute
    are dropped and reported in ``excluded``.
    """
    if len(consumer.expectation.attributes) != 1:
        raise ConfigError("single-criterion filtering needs exactly one required attribute")
    (name,) = consumer.expectation.names
    metric = DISTANCES[distance]
    scored = []
    for p in providers:
        if name not in p.advertisement:
            log.warning("provider %s does not advertise %s; excluded", p.id, name)
            if excluded is not None:
                excluded.append((p.id, f"missing attribute {name}"))
            continue
        scored.append((_distance(consumer, p, name, metric), p.id, p))
    scored.sort(key=lambda s: (s[0], s[1]))
    return [p for _, _, p in scored[:k]]


def top_k_by_mae(consumer, providers, k, excluded=None):
    return top_k_by_distance(consumer, providers, k, "mae", excluded)


def utility_score(consumer: ConsumerRequest, provider: Provider, weights: dict,
                  distance: str = "mae") -> float:
    """Weighted sum of per-attribute distances; lower means a closer match."""
    shared = [n for n in consumer.expectation.names if n in provider.advertisement]
    if not shared:
        raise ConfigError(f"provider {provider.id} shares no attribute with the requirement")
    missing = [n for n in shared if n not in weights]
    if missing:
        raise ConfigError(f"no weight for attributes {missing}")
    metric = DISTANCES[distance]
    return float(sum(weights[n] * _distance(consumer, provider, n, metric) for n in shared))


def _oriented(provider: Provider, dominant) -> np.ndarray:
    """(T x |Q_D|) matrix where larger is better in every column."""
    ad = provider.advertisement
    return np.column_stack([ad.attribute(q).orient(ad[q].values) for q in dominant])


def _check_grid(providers, dominant):
    ref = providers[0].advertisement[dominant[0]]
    for p in providers:
        for q in dominant:
            if not p.advertisement[q].same_grid(ref):
                raise AlignmentError(f"provider {p.id} attribute {q} is not on the shared grid")


def dominates_mts(a: Provider, b: Provider, dominant) -> bool:
    """``a`` is at least as good as ``b`` at every timestamp on every dominant
    attribute, and strictly better somewhere."""
    dominant = tuple(dominant)
    _check_grid([a, b], dominant)
    xa, xb = _oriented(a, dominant), _oriented(b, dominant)
    return bool(np.all(xa >= xb) and np.any(xa > xb))


def _eligible(providers, dominant, excluded=None):
    keep = []
    for p in providers:
        lacking = [q for q in dominant if q not in p.advertisement]
        if lacking:
            log.warning("provider %s lacks dominant attributes %s; excluded", p.id, lacking)
            if excluded is not None:
                excluded.append((p.id, f"missing dominant attributes {lacking}"))
        else:
            keep.append(p)
    return keep


def mts_skyline(providers, dominant, excluded: list | None = None) -> list:
    """Nested-loop MTS skyline over the dominant attributes.

    Returns surviving providers in input order.
    """
    providers = list(providers)
    dominant = tuple(dominant)
    if not providers:
        raise ValueError("no providers to filter")
    if not dominant:
        raise ConfigError("at least one dominant attribute required")
    eligible = _eligible(providers, dominant, excluded)
    if not eligible:
        return []
    _check_grid(eligible, dominant)
    x = np.stack([_oriented(p, dominant) for p in eligible])
    alive = np.ones(len(eligible), dtype=bool)
    for i in range(len(eligible)):
        others = x[alive]
        ge = (others >= x[i]).all(axis=(1, 2))
        gt = (others > x[i]).any(axis=(1, 2))
        if np.any(ge & gt):
            alive[i] = False
    return [p for p, keep in zip(eligible, alive) if keep]


def temporal_skyline(providers, attribute: str, window: tuple | None = None) -> list:
    """Single-attribute temporal skyline, optionally restricted to ``(start, length)``."""
    if window is not None:
        start, length = window
        providers = [Provider(p.id, p.advertisement.window(start, length)) for p in providers]
    keep = {p.id for p in mts_skyline(providers, (attribute,))}
    return [p for p in providers if p.id in keep]


def temporal_skyline_intervals(providers, attribute: str) -> list:
    """Split the horizon into maximal intervals with a constant pointwise skyline.

    At each timestamp the skyline is the set of providers holding the best
    (polarity-oriented) value. Returns ``[((first_t, last_t), frozenset(ids)), ...]``.
    """
    providers = list(providers)
    if not providers:
        raise ValueError("no providers")
    _check_grid(providers, (attribute,))
    ids = np.array([p.id for p in providers], dtype=object)
    x = np.stack([_oriented(p, (attribute,))[:, 0] for p in providers])
    ts = providers[0].advertisement[attribute].timestamps
    best = x == x.max(axis=0)
    out = []
    for j, t in enumerate(ts):
        members = frozenset(ids[best[:, j]])
        if out and out[-1][1] == members:
            out[-1] = ((out[-1][0][0], int(t)), members)
        else:
            out.append(((int(t), int(t)), members))
    return out


def apply_filter(config: FilterConfig, providers, consumer: ConsumerRequest | None = None) -> FilterResult:
    providers = list(providers)
    excluded: list = []
    params = {"k": config.k, "distance": config.distance}
    if config.mode is FilterMode.SINGLE:
        if consumer is None:
            raise ConfigError("single-criterion filtering needs a consumer requirement")
        survivors = top_k_by_distance(consumer, providers, config.k, config.distance, excluded)
    elif config.mode is FilterMode.UTILITY:
        if consumer is None:
            raise ConfigError("utility filtering needs a consumer requirement")
        params["weights"] = dict(sorted(config.weights.items()))
        scored = []
        for p in providers:
            try:
                scored.append((utility_score(consumer, p, config.weights, config.distance), p.id, p))
            except ConfigError as exc:
                excluded.append((p.id, str(exc)))
        scored.sort(key=lambda s: (s[0], s[1]))
        survivors = [p for _, _, p in scored[:config.k]]
    else:
        params = {"dominant": list(config.dominant), "cap": config.cap}
        survivors = mts_skyline(providers, config.dominant, excluded)
        if config.cap is not None and len(survivors) > config.cap:
            if consumer is None:
                raise ConfigError("capping the skyline needs a consumer requirement")
            survivors = truncate_by_utility(consumer, survivors, config.cap)
    return FilterResult(survivors, config.mode, params, excluded)


def truncate_by_utility(consumer: ConsumerRequest, providers, cap: int) -> list:
    """Keep the ``cap`` providers with the lowest uniform-weight utility score."""
    weights = {n: 1.0 for n in consumer.expectation.names}
    scored = sorted(((utility_score(consumer, p, weights), p.id, p) for p in providers),
                    key=lambda s: (s[0], s[1]))
    return [p for _, _, p in scored[:cap]]

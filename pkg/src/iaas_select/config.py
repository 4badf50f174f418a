"""Run configuration: JSON file, then environment (output dir only), then flags."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .corpus import config_hash
from .experiments import CorpusConfig
from .filtering import ConfigError, FilterConfig, FilterMode
from .lqpshort import CompressionMethod

OUT_ENV = "IAAS_SELECT_OUT"


@dataclass(frozen=True)
class FilterSettings:
    mode: str = "skyline"
    k: int = 5
    weights: dict | None = None
    dominant: tuple = ("price", "availability")
    distance: str = "mae"
    cap: int | None = None

    def build(self) -> FilterConfig:
        try:
            mode = FilterMode(self.mode)
        except ValueError:
            raise ConfigError(f"unknown filter mode {self.mode!r}") from None
        return FilterConfig(mode, self.k, self.weights, tuple(self.dominant), self.distance, self.cap)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "out"
    # optional inputs; without them everything is generated from the seed
    trace: str | None = None
    advertisements: str | None = None
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    filter: FilterSettings = field(default_factory=FilterSettings)
    segments: int = 12
    method: str = "pus"
    k: int | None = None
    neighbors: int = 5
    cthres: float | None = 1.0
    pca: bool = True
    aggregate: str = "nrmse"
    # experiment sweeps run seeds seed .. seed + seeds - 1
    seeds: int = 5
    segment_sweep: tuple = (1, 2, 3, 4, 6, 12)
    provider_counts: tuple = (10, 20, 30, 40, 50, 60)

    def __post_init__(self):
        try:
            CompressionMethod(self.method)
        except ValueError:
            raise ConfigError(f"unknown compression method {self.method!r}") from None
        if self.corpus.horizon % self.segments:
            raise ConfigError(f"{self.segments} segments do not divide horizon {self.corpus.horizon}")
        if self.k is not None and not 1 <= self.k <= self.corpus.trial_length:
            raise ConfigError(f"k={self.k} must lie in [1, {self.corpus.trial_length}]")
        if self.neighbors < 1:
            raise ConfigError("need at least one neighbour")
        if self.cthres is not None and self.cthres < 0:
            raise ConfigError("cthres must be non-negative")
        if self.seeds < 1:
            raise ConfigError("seeds must be positive")
        if self.aggregate not in ("nrmse", "rmse", "euclidean"):
            raise ConfigError(f"unknown aggregate {self.aggregate!r}")
        for name in ("trace", "advertisements"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} file {path} does not exist")
        self.filter.build()

    @property
    def corpus_config(self) -> CorpusConfig:
        return replace(self.corpus, seed=self.seed)

    @property
    def seed_list(self) -> list:
        return [self.seed + i for i in range(self.seeds)]

    def to_json(self) -> dict:
        d = asdict(self)
        d["corpus"] = self.corpus_config.to_json()
        d.pop("out")  # where results go does not change them
        return json.loads(json.dumps(d, default=list))

    @property
    def hash(self) -> str:
        return config_hash(self.to_json())


def _nested(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys {sorted(unknown)}")
    return {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}


def from_dict(raw: dict) -> RunConfig:
    raw = dict(_nested(RunConfig, raw, "config"))
    if "corpus" in raw:
        raw["corpus"] = CorpusConfig(**_nested(CorpusConfig, raw["corpus"], "corpus"))
    if "filter" in raw:
        f = _nested(FilterSettings, raw["filter"], "filter")
        if isinstance(f.get("weights"), dict):
            f["weights"] = dict(f["weights"])
        raw["filter"] = FilterSettings(**f)
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: dict | None = None, env=None) -> RunConfig:
    """File values, then ``$IAAS_SELECT_OUT`` for the output dir, then non-None overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
    env = os.environ if env is None else env
    if env.get(OUT_ENV):
        raw["out"] = env[OUT_ENV]
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return from_dict(raw)

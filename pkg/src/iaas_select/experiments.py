"""Reference corpus construction and the experiment computations behind the CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import datagen
from .clqp import (InsufficientHistory, PredictionResult, SegmentPlan, clqp_predict,
                   workload_replay_trial)
from .core import TSG, ConsumerRequest, Provider, nrmse
from .filtering import mts_skyline
from .ingest import node_workload_series, synthesize_trace
from .lqpshort import CompressionMethod, TrialGenerationModel, lqp_short_predict
from .qlis import RankingMethod, RankingReport, rank_providers, spearman


@dataclass(frozen=True)
class CorpusConfig:
    seed: int = 0
    nodes: int = 31
    cores: int = 32
    raw_timestamps: int = 6486
    horizon: int = 360
    segments: int = 12
    segment_length: int = 30
    providers: int = 5
    advertisements: int = 60
    trial_start: int = 210
    trial_length: int = 30
    noise: tuple = (0.02, 0.25)
    dominant: tuple = ("price", "availability")
    # replace the first trial user's workload with the consumer's own
    clone_consumer: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["noise"] = list(self.noise)
        d["dominant"] = list(self.dominant)
        return d


@dataclass(eq=False)
class Corpus:
    config: CorpusConfig
    events: list
    users: dict
    consumer: ConsumerRequest
    providers: list
    simulator: datagen.Simulator
    records: list
    truth: dict
    advertisements: list = field(default_factory=list)

    @property
    def plan(self) -> SegmentPlan:
        return SegmentPlan.for_consumer(self.consumer)

    def provider(self, pid: str) -> Provider:
        return next(p for p in self.providers if p.id == pid)


def user_id(node: int) -> str:
    return f"node{node:02d}"


def build_corpus(cfg: CorpusConfig = CorpusConfig(), events=None) -> Corpus:
    """Generate the full seeded corpus; ``events`` replaces the synthesized trace."""
    seed = cfg.seed
    if events is None:
        events = synthesize_trace(datagen.substream(seed, "trace"), cfg.nodes, cfg.cores,
                                  cfg.raw_timestamps)
    nodes = range(1, cfg.nodes + 1)
    series = {n: node_workload_series(events, n, cfg.raw_timestamps, cfg.horizon, nodes)
              for n in nodes}
    consumer_node = cfg.nodes
    users = {user_id(n): series[n] for n in nodes if n != consumer_node}
    workload = series[consumer_node]
    if cfg.clone_consumer:
        users[user_id(1)] = workload

    baseline = datagen.BaselineMap.synthetic(datagen.substream(seed, "baseline"), max_level=cfg.cores)
    prof_rng = datagen.substream(seed, "profiles")
    n_seasons = cfg.horizon // cfg.segment_length
    pids = [f"S{i + 1}" for i in range(cfg.providers)]
    profiles = {pid: datagen.random_profile(pid, prof_rng, n_seasons=n_seasons, noise_range=cfg.noise)
                for pid in pids}
    edges = datagen.bucket_edges(list(series.values()))
    sim = datagen.Simulator(baseline, profiles, edges, cfg.segment_length,
                            seed=datagen.name_key("jitter") ^ seed)

    expectation = datagen.consumer_expectation(baseline, workload,
                                               datagen.substream(seed, "consumer"), cfg.segment_length)
    consumer = ConsumerRequest(cfg.horizon, workload, expectation, cfg.dominant,
                               cfg.segments, cfg.segment_length)
    ad_rng = datagen.substream(seed, "provider-ads")
    ref_w = float(np.median(workload.values))
    providers = [Provider(pid, datagen.provider_advertisement(profiles[pid], baseline, ref_w, ad_rng,
                                                              cfg.horizon, cfg.segment_length),
                          cfg.trial_start, cfg.trial_length) for pid in pids]
    records = datagen.generate_trial_corpus(users, SegmentPlan.for_consumer(consumer), pids, sim)
    truth = datagen.ground_truth(sim, pids, workload)
    ads = datagen.generate_advertisements(cfg.advertisements, horizon=cfg.horizon, seed=seed,
                                          season_length=cfg.segment_length,
                                          trial_start=cfg.trial_start, trial_length=cfg.trial_length)
    return Corpus(cfg, events, users, consumer, providers, sim, records, truth, ads)


def _with_plan(consumer: ConsumerRequest, plan: SegmentPlan) -> ConsumerRequest:
    return ConsumerRequest(consumer.horizon, consumer.workload, consumer.expectation,
                           consumer.dominant, plan.segments, plan.length)


def lqp_predictions(corpus: Corpus, method=CompressionMethod.PUS, seed: int = 0,
                    k: int | None = None) -> dict:
    out = {}
    for p in corpus.providers:
        model = TrialGenerationModel(corpus.consumer.workload, method, p.trial_length, k,
                                     seed=seed)
        out[p.id] = lqp_short_predict(corpus.consumer, p, model, corpus.simulator)
    return out


def clqp_predictions(corpus: Corpus, plan: SegmentPlan | None = None, k: int = 5,
                     normalize: bool = False) -> dict:
    """Cooperative predictions; segments without neighbours fall back to LQP-short (PUS)."""
    plan = plan or corpus.plan
    consumer = _with_plan(corpus.consumer, plan)
    out = {}
    for p in corpus.providers:
        trial = workload_replay_trial(consumer, p, corpus.simulator)
        try:
            out[p.id] = clqp_predict(consumer, p, corpus.records, plan, k, trial,
                                     normalize=normalize)
        except InsufficientHistory:
            model = TrialGenerationModel(consumer.workload, CompressionMethod.PUS, p.trial_length)
            fb = lqp_short_predict(consumer, p, model, corpus.simulator)
            out[p.id] = clqp_predict(consumer, p, corpus.records, plan, k, trial, fallback=fb,
                                     normalize=normalize)
    return out


def trial_predictions(corpus: Corpus) -> dict:
    """The consumer's raw trial observations, covering the trial window only."""
    out = {}
    for p in corpus.providers:
        trial = workload_replay_trial(corpus.consumer, p, corpus.simulator)
        out[p.id] = PredictionResult(p.id, trial.observed, None, {}, "trial-only")
    return out


def advertisement_predictions(corpus: Corpus) -> dict:
    return {p.id: PredictionResult(p.id, p.advertisement, None, {}, "advertisement-only")
            for p in corpus.providers}


def truth_predictions(corpus: Corpus) -> dict:
    return {pid: PredictionResult(pid, tsg, None, {}, "actual") for pid, tsg in corpus.truth.items()}


def nrmse_rows(corpus: Corpus, predictions: dict, method: str) -> list:
    rows = []
    for pid in sorted(predictions):
        pred = predictions[pid].predicted
        truth = corpus.truth[pid]
        for name in pred.names:
            rows.append({"provider": pid, "attribute": name, "method": method,
                         "nrmse": nrmse(truth[name], pred[name]), "seed": corpus.config.seed})
    return rows


@dataclass
class RankingSuite:
    """Rankings of the simulated providers keyed by method.

    ``cooperative_all`` is the cooperative ranking before confidence
    filtering; its order is what gets correlated with the actual ranking.
    """

    reports: dict
    cooperative_all: RankingReport
    predictions: dict = field(default_factory=dict)

    def spearman(self) -> dict:
        actual = self.reports[RankingMethod.ACTUAL].order
        out = {}
        for m, rep in self.reports.items():
            if m is RankingMethod.ACTUAL:
                continue
            order = self.cooperative_all.order if m is RankingMethod.COOPERATIVE else rep.order
            out[m] = spearman(order, actual)
        return out


def rankings(corpus: Corpus, c_thres: float | None = 1.0, lqp_method=CompressionMethod.PUS,
             use_pca: bool = True, aggregate: str = "nrmse") -> RankingSuite:
    """All five rankings of the simulated providers."""
    perf = [a.name for a in corpus.simulator.attributes]
    preds = {
        RankingMethod.ACTUAL: truth_predictions(corpus),
        RankingMethod.COOPERATIVE: clqp_predictions(corpus),
        RankingMethod.LQP_SHORT: lqp_predictions(corpus, lqp_method),
        RankingMethod.TRIAL_ONLY: trial_predictions(corpus),
        RankingMethod.ADVERTISEMENT_ONLY: advertisement_predictions(corpus),
    }
    reports = {}
    for m, p in preds.items():
        reports[m] = rank_providers(
            corpus.consumer, p.values(), c_thres if m is RankingMethod.COOPERATIVE else None,
            method=m, use_pca=use_pca, aggregate=aggregate,
            attributes=perf if m is RankingMethod.ADVERTISEMENT_ONLY else None)
    coop_all = rank_providers(corpus.consumer, preds[RankingMethod.COOPERATIVE].values(), None,
                              RankingMethod.COOPERATIVE, use_pca, aggregate=aggregate)
    return RankingSuite(reports, coop_all, preds)


def skyline_sweep(ads, counts=range(10, 61, 10), dominant_sets=None) -> list:
    """Skyline size per provider count for each dominant-attribute set."""
    dominant_sets = dominant_sets or {
        "dominant": ("price", "availability"),
        "all": tuple(ads[0].advertisement.names),
    }
    rows = []
    for n in counts:
        subset = ads[:n]
        for label, dom in dominant_sets.items():
            rows.append({"providers": n, "attributes": label, "dominant": "+".join(dom),
                         "skyline_size": len(mts_skyline(subset, dom))})
    return rows

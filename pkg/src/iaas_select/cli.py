"""Command-line pipeline: gen-data, filter, trial, predict, rank, experiment.

Exit codes: 0 success, 2 configuration or input error, 3 pipeline invariant violation.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import logging
import math
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .clqp import CoverageError, InsufficientHistory, SegmentPlan, workload_replay_trial
from .config import RunConfig, load_config
from .core import AlignmentError, DegenerateRangeError, LoadError, TimeSeries, check_advertisement_width
from .corpus import (Provenance, load_corpus, load_providers, save_corpus, write_csv, write_json)
from .experiments import (Corpus, build_corpus, clqp_predictions, lqp_predictions, nrmse_rows,
                          rankings, skyline_sweep)
from .filtering import ConfigError, apply_filter
from .ingest import TraceFormatError, parse_trace
from .lqpshort import CompressionMethod, TrialGenerationModel, compress, trial_timestamps
from .qlis import DegenerateInputError, RankingMethod

log = logging.getLogger("iaas_select")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InvariantViolation(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


INVARIANT_ERRORS = (InvariantViolation, AlignmentError, DegenerateRangeError, DegenerateInputError,
                    InsufficientHistory, CoverageError)
INPUT_ERRORS = (ConfigError, LoadError, TraceFormatError, OSError, ValueError, KeyError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, INVARIANT_ERRORS):
        return EXIT_INVARIANT
    if isinstance(exc, INPUT_ERRORS):
        return EXIT_INPUT
    raise exc


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except (INVARIANT_ERRORS + INPUT_ERRORS) as exc:
        raise StageError(name, exc) from exc


def _require(cond: bool, msg: str):
    if not cond:
        raise InvariantViolation(msg)


def _prov(cfg: RunConfig, corpus: Corpus | None = None) -> Provenance:
    """Provenance stamp; outputs derived from a saved corpus carry the corpus seed."""
    return Provenance(cfg.seed if corpus is None else corpus.config.seed, cfg.hash)


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _corpus_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out) / "corpus"


def _generate(cfg: RunConfig, seed: int) -> Corpus:
    events = parse_trace(cfg.trace, strict=False, max_cores=cfg.corpus.cores) if cfg.trace else None
    corpus = build_corpus(replace(cfg.corpus_config, seed=seed), events)
    check_advertisement_width(corpus.consumer, corpus.providers)
    return corpus


def _load(cfg: RunConfig) -> Corpus:
    d = _corpus_dir(cfg)
    if not (d / "corpus.json").exists():
        raise LoadError(f"no corpus under {d}; run gen-data first")
    return load_corpus(d)


def _plan(cfg: RunConfig, corpus: Corpus) -> SegmentPlan:
    h = corpus.consumer.horizon
    if h % cfg.segments:
        raise ConfigError(f"{cfg.segments} segments do not divide horizon {h}")
    return SegmentPlan(cfg.segments, h // cfg.segments)


# ---- gen-data ----------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> Corpus:
    corpus = _generate(cfg, cfg.seed)
    save_corpus(corpus, _corpus_dir(cfg), _prov(cfg))
    print(f"corpus: {len(corpus.users)} trial users, {len(corpus.providers)} providers, "
          f"{len(corpus.records)} trial records, {len(corpus.advertisements)} advertisements "
          f"-> {_corpus_dir(cfg)}")
    return corpus


# ---- filter ------------------------------------------------------------------

def _advertisements(cfg: RunConfig, corpus: Corpus | None):
    if cfg.advertisements:
        return load_providers(cfg.advertisements)
    if corpus is None:
        raise LoadError("no advertisement corpus: pass one in the config or run gen-data")
    return corpus.advertisements


def _sweep_rows(ads, cfg: RunConfig, seed: int) -> list:
    counts = [n for n in cfg.provider_counts if n <= len(ads)]
    dominant = tuple(cfg.filter.dominant)
    rows = skyline_sweep(ads, counts, {"dominant": dominant,
                                       "all": tuple(ads[0].advertisement.names)})
    for r in rows:
        r["seed"] = seed
    return rows


SWEEP_HEADER = ["providers", "attributes", "dominant", "skyline_size", "seed"]


def cmd_filter(cfg: RunConfig, corpus: Corpus | None = None) -> dict:
    if corpus is None and not cfg.advertisements:
        corpus = _load(cfg)
    ads = _advertisements(cfg, corpus)
    if not ads:
        raise LoadError("advertisement corpus is empty")
    consumer = corpus.consumer if corpus is not None else None
    result = apply_filter(cfg.filter.build(), ads, consumer)
    ids = {p.id for p in ads}
    _require(set(result.ids) <= ids, "filter returned providers outside its input")
    _require(bool(result.ids), "filter removed every provider")
    out = _out(cfg)
    payload = {**result.to_json(), "input_count": len(ads)}
    prov = _prov(cfg, corpus)
    write_json(out / "filter.json", payload, prov)
    rows = _sweep_rows(ads, cfg, prov.seed)
    write_csv(out / "skyline_sweep.csv", SWEEP_HEADER, rows, prov)
    print(f"filter ({result.mode.value}): {len(result.ids)} of {len(ads)} providers survive")
    return payload


# ---- trial -------------------------------------------------------------------

def cmd_trial(cfg: RunConfig, corpus: Corpus | None = None) -> list:
    corpus = corpus or _load(cfg)
    method = CompressionMethod(cfg.method)
    names = [a.name for a in corpus.simulator.attributes]
    header = ["provider", "kind", "t", "source_index", "workload", *names]
    rows = []
    for p in sorted(corpus.providers, key=lambda p: p.id):
        trial = workload_replay_trial(corpus.consumer, p, corpus.simulator)
        m = trial.observed.select(names).as_matrix()
        for i, t in enumerate(trial.workload.timestamps):
            rows.append([p.id, "replay", int(t), float(t), float(trial.workload.values[i]), *m[i]])
        model = TrialGenerationModel(corpus.consumer.workload, method, p.trial_length, cfg.k,
                                     seed=corpus.config.seed)
        mapping = compress(model)
        replay = TimeSeries(trial_timestamps(p, len(mapping)), mapping.compressed.values)
        obs = corpus.simulator.observe_tsg(p.id, replay).select(names).as_matrix()
        for i, t in enumerate(replay.timestamps):
            rows.append([p.id, method.value, int(t), float(mapping.source_index[i]),
                         float(replay.values[i]), *obs[i]])
    _require(all(math.isfinite(float(v)) for r in rows for v in r[4:]), "non-finite trial observation")
    write_csv(_out(cfg) / "trials.csv", header, rows, _prov(cfg, corpus))
    print(f"trial: {len(corpus.providers)} providers, replay and {method.value} trials")
    return rows


# ---- predict -----------------------------------------------------------------

NRMSE_HEADER = ["provider", "attribute", "method", "nrmse", "seed"]


def _predictions(cfg: RunConfig, corpus: Corpus, mode: str, method: str | None = None) -> dict:
    if mode == "clqp":
        return clqp_predictions(corpus, _plan(cfg, corpus), cfg.neighbors)
    m = CompressionMethod(method or cfg.method)
    return lqp_predictions(corpus, m, corpus.config.seed, cfg.k)


def _check_predictions(preds: dict, corpus: Corpus):
    _require(set(preds) == {p.id for p in corpus.providers}, "predictions do not cover every provider")
    for pid, r in preds.items():
        _require(bool(np.isfinite(r.predicted.as_matrix()).all()), f"non-finite prediction for {pid}")
        _require(len(r.predicted.timestamps) == corpus.consumer.horizon,
                 f"prediction for {pid} does not span the horizon")


def _check_rows(rows):
    for r in rows:
        _require(math.isfinite(r["nrmse"]) and r["nrmse"] >= 0,
                 f"bad NRMSE {r['nrmse']} for {r['provider']}/{r['attribute']}")


def cmd_predict(cfg: RunConfig, mode: str = "clqp", corpus: Corpus | None = None) -> list:
    if mode not in ("clqp", "lqpshort"):
        raise ConfigError(f"unknown prediction mode {mode!r}")
    corpus = corpus or _load(cfg)
    preds = _predictions(cfg, corpus, mode)
    _check_predictions(preds, corpus)
    label = "cooperative" if mode == "clqp" else f"lqp-short:{cfg.method}"
    rows = nrmse_rows(corpus, preds, label)
    _check_rows(rows)
    out = _out(cfg)
    prov = _prov(cfg, corpus)
    write_json(out / f"predictions_{mode}.json",
               {"mode": mode, "predictions": [preds[k].to_json() for k in sorted(preds)]}, prov)
    write_csv(out / f"nrmse_{mode}.csv", NRMSE_HEADER, rows, prov)
    print(f"predict ({label}): mean NRMSE {np.mean([r['nrmse'] for r in rows]):.4f}")
    return rows


# ---- rank --------------------------------------------------------------------

COLUMNS = [(RankingMethod.ACTUAL, "actual"), (RankingMethod.COOPERATIVE, "cooperative"),
           (RankingMethod.LQP_SHORT, "long-term"), (RankingMethod.TRIAL_ONLY, "trial"),
           (RankingMethod.ADVERTISEMENT_ONLY, "advertisement")]


def ranking_table(suite, prov: Provenance) -> str:
    """Plain-text rank table, one row per provider in actual-rank order."""
    actual = suite.reports[RankingMethod.ACTUAL]
    coop = suite.reports[RankingMethod.COOPERATIVE]
    conf = {e.provider_id: e.confidence for e in suite.cooperative_all.entries}
    head = ["provider"] + [c for _, c in COLUMNS] + ["confidence"]
    lines = [prov.comment(), "  ".join(f"{h:>13}" for h in head)]
    for pid in actual.order:
        cells = [pid]
        for m, _ in COLUMNS:
            r = suite.reports[m].rank_of(pid)
            cells.append("-" if r is None else str(r))
        c = conf.get(pid)
        cells.append("-" if c is None else f"{c:.3f}")
        lines.append("  ".join(f"{x:>13}" for x in cells))
    if coop.discarded:
        lines.append("discarded (confidence > threshold): "
                     + ", ".join(d["provider"] for d in coop.discarded))
    return "\n".join(lines) + "\n"


def _check_suite(suite, corpus: Corpus):
    ids = sorted(p.id for p in corpus.providers)
    for m, rep in suite.reports.items():
        kept = rep.order + [d["provider"] for d in rep.discarded]
        _require(sorted(kept) == ids, f"{m.value} ranking lost providers")


def _suite(cfg: RunConfig, corpus: Corpus):
    suite = rankings(corpus, cfg.cthres, CompressionMethod(cfg.method), cfg.pca, cfg.aggregate)
    _check_suite(suite, corpus)
    return suite


def cmd_rank(cfg: RunConfig, corpus: Corpus | None = None):
    corpus = corpus or _load(cfg)
    suite = _suite(cfg, corpus)
    rho = suite.spearman()
    out = _out(cfg)
    prov = _prov(cfg, corpus)
    write_json(out / "ranking.json", {
        "c_thres": cfg.cthres,
        "reports": {m.value: rep.to_json() for m, rep in suite.reports.items()},
        "cooperative_unthresholded": suite.cooperative_all.to_json(),
        "spearman": {m.value: v for m, v in rho.items()},
    }, prov)
    (out / "ranking.txt").write_text(ranking_table(suite, prov), encoding="utf-8")
    write_csv(out / "spearman.csv", ["method", "spearman", "seed"],
              [[m.value, v, prov.seed] for m, v in rho.items()], prov)
    sel = suite.reports[RankingMethod.COOPERATIVE].selected
    print(f"rank: cooperative selects {sel}; Spearman "
          + ", ".join(f"{m.value}={v:.2f}" for m, v in rho.items()))
    if sel is None:
        log.warning("every provider was discarded by the confidence threshold")
    return suite


# ---- experiment --------------------------------------------------------------

def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_experiment(cfg: RunConfig) -> dict:
    """Single-seed pipeline plus multi-seed sweeps, all written as tidy CSV."""
    out = _out(cfg)
    with stage("gen-data"):
        corpus = cmd_gen_data(cfg)
    with stage("filter"):
        cmd_filter(cfg, corpus)
    with stage("predict"):
        cmd_predict(cfg, "clqp", corpus)
        cmd_predict(cfg, "lqpshort", corpus)
    with stage("rank"):
        cmd_rank(cfg, corpus)

    sweep, nrmse_all, seg_rows, rho_rows = [], [], [], []
    for seed in cfg.seed_list:
        with stage(f"sweep seed {seed}"):
            c = corpus if seed == cfg.seed else _generate(cfg, seed)
            sweep += _sweep_rows(c.advertisements, cfg, seed)
            preds = _predictions(cfg, c, "clqp")
            _check_predictions(preds, c)
            nrmse_all += nrmse_rows(c, preds, "cooperative")
            for m in CompressionMethod:
                preds = _predictions(cfg, c, "lqpshort", m.value)
                _check_predictions(preds, c)
                nrmse_all += nrmse_rows(c, preds, f"lqp-short:{m.value}")
            for s in cfg.segment_sweep:
                if c.consumer.horizon % s:
                    continue
                preds = clqp_predictions(c, SegmentPlan(s, c.consumer.horizon // s), cfg.neighbors)
                for r in nrmse_rows(c, preds, "cooperative"):
                    seg_rows.append({**r, "segments": s})
            suite = _suite(cfg, c)
            rho_rows += [[m.value, v, seed] for m, v in suite.spearman().items()]
    _check_rows(nrmse_all)
    _check_rows(seg_rows)

    prov = _prov(cfg)
    write_csv(out / "fig6_skyline.csv", SWEEP_HEADER, sweep, prov)
    write_csv(out / "fig8_nrmse.csv", NRMSE_HEADER, nrmse_all, prov)
    write_csv(out / "fig9_segments.csv", ["provider", "attribute", "segments", "nrmse", "seed"],
              seg_rows, prov)
    write_csv(out / "table3_spearman.csv", ["method", "spearman", "seed"], rho_rows, prov)

    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "seeds": cfg.seed_list,
        "config": cfg.to_json(),
        "config_hash": cfg.hash,
        "versions": {"iaas_select": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "files": {p.name: _digest(p) for p in files},
    }
    write_json(out / "manifest.json", manifest, prov)
    print(f"experiment: {len(cfg.seed_list)} seeds, results in {out}")
    return manifest


# ---- entry point -------------------------------------------------------------

def _cthres(text: str):
    if text.lower() in ("none", "off"):
        return "none"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (overrides $IAAS_SELECT_OUT)")
    common.add_argument("--method", choices=[m.value for m in CompressionMethod],
                        help="trial workload compression")
    common.add_argument("--segments", type=int, help="seasonal segments S")
    common.add_argument("--k", type=int, help="compressed trial points")
    common.add_argument("--cthres", type=_cthres, help="confidence threshold, or 'none'")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="iaas-select", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate the seeded corpus")
    sub.add_parser("filter", parents=[common], help="filter advertisements, skyline sweep")
    sub.add_parser("trial", parents=[common], help="run replay and compressed trials")
    pr = sub.add_parser("predict", parents=[common], help="long-term QoS prediction + NRMSE")
    pr.add_argument("--mode", choices=["clqp", "lqpshort"], default="clqp")
    sub.add_parser("rank", parents=[common], help="five rankings and Spearman correlations")
    ex = sub.add_parser("experiment", parents=[common], help="full pipeline and sweeps")
    ex.add_argument("--seeds", type=int, help="number of seeds in the sweeps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed, "out": args.out, "method": args.method,
                 "segments": args.segments, "k": args.k, "seeds": getattr(args, "seeds", None)}
    try:
        cfg = load_config(args.config, overrides)
        if args.cthres is not None:
            cfg = replace(cfg, cthres=None if args.cthres == "none" else args.cthres)
        if args.command == "gen-data":
            cmd_gen_data(cfg)
        elif args.command == "filter":
            cmd_filter(cfg)
        elif args.command == "trial":
            cmd_trial(cfg)
        elif args.command == "predict":
            cmd_predict(cfg, args.mode)
        elif args.command == "rank":
            cmd_rank(cfg)
        else:
            cmd_experiment(cfg)
    except (INVARIANT_ERRORS + INPUT_ERRORS + (StageError,)) as exc:
        code = exit_code(exc)
        kind = "invariant violation" if code == EXIT_INVARIANT else "error"
        print(f"iaas-select: {kind}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

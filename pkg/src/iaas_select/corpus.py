"""On-disk corpus format: tidy CSV and JSON files, every one stamped with seed and config hash."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datagen
from .core import TSG, ConsumerRequest, LoadError, Polarity, Provider, QosAttribute, TimeSeries, TrialRecord
from .experiments import Corpus, CorpusConfig
from .ingest import load_trace_metadata, parse_trace, write_trace


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Provenance:
    seed: int
    config_hash: str

    def comment(self) -> str:
        return f"# seed={self.seed} config={self.config_hash}"

    def to_json(self) -> dict:
        return {"seed": self.seed, "config_hash": self.config_hash}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows, prov: Provenance):
    """Rows are dicts or sequences; the first line is a ``#`` provenance comment."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(prov.comment() + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            vals = [r[h] for h in header] if isinstance(r, dict) else r
            w.writerow([_fmt(v) for v in vals])


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path, obj, prov: Provenance):
    payload = {"provenance": prov.to_json(), **obj}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LoadError(f"missing file {path}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: {exc}") from None


def attr_json(a: QosAttribute) -> dict:
    return {"name": a.name, "polarity": a.polarity.value, "unit": a.unit}


def attr_from_json(d: dict) -> QosAttribute:
    return QosAttribute(d["name"], Polarity(d["polarity"]), d.get("unit", ""))


def tsg_to_json(tsg: TSG) -> dict:
    return {"attributes": [attr_json(a) for a in tsg.attributes],
            "timestamps": tsg.timestamps.tolist(),
            "values": {s_name: tsg[s_name].values.tolist() for s_name in tsg.names}}


def tsg_from_json(d: dict) -> TSG:
    attrs = [attr_from_json(a) for a in d["attributes"]]
    m = np.column_stack([np.asarray(d["values"][a.name], dtype=float) for a in attrs])
    return TSG.from_matrix(attrs, d["timestamps"], m)


def provider_to_json(p: Provider) -> dict:
    return {"id": p.id, "trial_start": p.trial_start, "trial_length": p.trial_length,
            "advertisement": tsg_to_json(p.advertisement)}


def provider_from_json(d: dict) -> Provider:
    return Provider(d["id"], tsg_from_json(d["advertisement"]), d["trial_start"], d["trial_length"])


def save_providers(providers, path, prov: Provenance):
    write_json(path, {"providers": [provider_to_json(p) for p in providers]}, prov)


def load_providers(path) -> list:
    try:
        return [provider_from_json(d) for d in read_json(path)["providers"]]
    except (KeyError, TypeError) as exc:
        raise LoadError(f"{path}: malformed provider entry ({exc})") from None


def _attr(name: str) -> QosAttribute:
    return datagen.ATTRIBUTES.get(name, QosAttribute(name))


def save_records(records, path, prov: Provenance):
    names = list(records[0].observed.names) if records else []
    header = ["user_id", "provider_id", "window_start", "window_length", "t", "workload", *names]
    rows = []
    for r in records:
        m = r.observed.as_matrix()
        for i, t in enumerate(r.workload.timestamps):
            rows.append([r.user_id, r.provider_id, r.window_start, r.window_length, int(t),
                         float(r.workload.values[i]), *(float(x) for x in m[i])])
    write_csv(path, header, rows, prov)


def load_records(path) -> list:
    """Trial records from the tidy CSV, one row per (record, timestamp)."""
    rows = read_csv(path)
    if not rows:
        return []
    fixed = {"user_id", "provider_id", "window_start", "window_length", "t", "workload"}
    missing = fixed - set(rows[0])
    if missing:
        raise LoadError(f"{path}: missing columns {sorted(missing)}")
    names = [k for k in rows[0] if k not in fixed]
    attrs = [_attr(n) for n in names]
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["user_id"], r["provider_id"], int(r["window_start"])), []).append(r)
    out = []
    for (u, pid, _), grp in groups.items():
        ts = [int(r["t"]) for r in grp]
        w = TimeSeries(ts, [float(r["workload"]) for r in grp])
        m = np.array([[float(r[n]) for n in names] for r in grp])
        out.append(TrialRecord(u, pid, w, TSG.from_matrix(attrs, ts, m)))
    return out


def _save_tsgs(tsgs: dict, path, prov: Provenance, key="provider"):
    rows = []
    for pid in sorted(tsgs):
        tsg = tsgs[pid]
        for name in tsg.names:
            s = tsg[name]
            rows.extend([pid, name, int(t), float(v)] for t, v in zip(s.timestamps, s.values))
    write_csv(path, [key, "attribute", "t", "value"], rows, prov)


def _load_tsgs(path, key="provider") -> dict:
    data: dict = {}
    for r in read_csv(path):
        data.setdefault(r[key], {}).setdefault(r["attribute"], []).append((int(r["t"]), float(r["value"])))
    out = {}
    for pid, by_attr in data.items():
        names = list(by_attr)
        ts = [t for t, _ in by_attr[names[0]]]
        m = np.column_stack([[v for _, v in by_attr[n]] for n in names])
        out[pid] = TSG.from_matrix([_attr(n) for n in names], ts, m)
    return out


FILES = ("corpus.json", "trace.csv", "users.csv", "consumer.json", "providers.json",
         "advertisements.json", "baseline.csv", "profiles.json", "simulator.json",
         "records.csv", "ground_truth.csv")


def save_corpus(corpus: Corpus, directory, prov: Provenance):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cfg = corpus.config
    write_json(d / "corpus.json", {"config": cfg.to_json()}, prov)
    write_trace(corpus.events, d / "trace.csv",
                {"time_unit": "abstract", "raw_timestamps": cfg.raw_timestamps,
                 "cores_per_node": cfg.cores, "nodes": cfg.nodes, **prov.to_json()})
    rows = []
    for u in sorted(corpus.users):
        s = corpus.users[u]
        rows.extend([u, int(t), float(v)] for t, v in zip(s.timestamps, s.values))
    write_csv(d / "users.csv", ["user_id", "t", "workload"], rows, prov)
    c = corpus.consumer
    write_json(d / "consumer.json", {
        "horizon": c.horizon, "segments": c.segments, "segment_length": c.segment_length,
        "dominant": list(c.dominant), "workload": c.workload.values.tolist(),
        "expectation": tsg_to_json(c.expectation)}, prov)
    save_providers(corpus.providers, d / "providers.json", prov)
    save_providers(corpus.advertisements, d / "advertisements.json", prov)
    sim = corpus.simulator
    base = sim.baseline
    names = list(base.values)
    write_csv(d / "baseline.csv", ["workload", *names],
              ([float(lvl), *(float(base.values[n][i]) for n in names)]
               for i, lvl in enumerate(base.levels)), prov)
    write_json(d / "profiles.json",
               {"profiles": [sim.profiles[k].to_json() for k in sorted(sim.profiles)]}, prov)
    write_json(d / "simulator.json", {
        "season_length": sim.season_length, "seed": int(sim.seed),
        "bucket_edges": sim.bucket_edges.tolist(),
        "attributes": [attr_json(a) for a in sim.attributes]}, prov)
    save_records(corpus.records, d / "records.csv", prov)
    _save_tsgs(corpus.truth, d / "ground_truth.csv", prov)


def load_corpus(directory) -> Corpus:
    d = Path(directory)
    missing = [f for f in FILES if not (d / f).exists()]
    if missing:
        raise LoadError(f"corpus at {d} is incomplete, missing {missing}")
    raw = read_json(d / "corpus.json")["config"]
    raw["noise"] = tuple(raw["noise"])
    raw["dominant"] = tuple(raw["dominant"])
    cfg = CorpusConfig(**raw)
    events = parse_trace(d / "trace.csv", max_cores=load_trace_metadata(d / "trace.csv").get("cores_per_node"))
    users: dict = {}
    for r in read_csv(d / "users.csv"):
        users.setdefault(r["user_id"], []).append((int(r["t"]), float(r["workload"])))
    users = {u: TimeSeries([t for t, _ in v], [x for _, x in v]) for u, v in users.items()}
    cj = read_json(d / "consumer.json")
    consumer = ConsumerRequest(cj["horizon"], TimeSeries.from_values(cj["workload"]),
                               tsg_from_json(cj["expectation"]), tuple(cj["dominant"]),
                               cj["segments"], cj["segment_length"])
    rows = read_csv(d / "baseline.csv")
    names = [k for k in rows[0] if k != "workload"]
    baseline = datagen.BaselineMap(np.array([float(r["workload"]) for r in rows]),
                                   {n: np.array([float(r[n]) for r in rows]) for n in names})
    profiles = {p["provider"]: datagen.QosProfile.from_json(p)
                for p in read_json(d / "profiles.json")["profiles"]}
    sj = read_json(d / "simulator.json")
    sim = datagen.Simulator(baseline, profiles, sj["bucket_edges"], sj["season_length"], sj["seed"],
                            tuple(attr_from_json(a) for a in sj["attributes"]))
    return Corpus(cfg, events, users, consumer, load_providers(d / "providers.json"), sim,
                  load_records(d / "records.csv"), _load_tsgs(d / "ground_truth.csv"),
                  load_providers(d / "advertisements.json"))


def corpus_provenance(directory) -> Provenance:
    p = read_json(Path(directory) / "corpus.json")["provenance"]
    return Provenance(p["seed"], p["config_hash"])


__all__ = ["Provenance", "config_hash", "write_csv", "read_csv", "write_json", "read_json",
           "save_corpus", "load_corpus", "load_records", "save_records", "load_providers",
           "save_providers", "tsg_to_json", "tsg_from_json", "corpus_provenance"]

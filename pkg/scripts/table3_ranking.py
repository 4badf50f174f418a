#!/usr/bin/env python3
"""Rank table for one corpus plus Spearman correlations with the actual ranking over seeds."""

import argparse
from pathlib import Path

import numpy as np

from iaas_select.cli import ranking_table
from iaas_select.corpus import Provenance, config_hash, write_csv
from iaas_select.experiments import CorpusConfig, build_corpus, rankings
from iaas_select.qlis import RankingMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--cthres", type=float, default=1.0)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    prov = Provenance(0, config_hash({"script": "table3", "seeds": args.seeds, "cthres": args.cthres}))
    rows = []
    for seed in range(args.seeds):
        suite = rankings(build_corpus(CorpusConfig(seed=seed)), args.cthres)
        if seed == 0:
            print(ranking_table(suite, prov))
        rows += [[m.value, v, seed] for m, v in suite.spearman().items()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "table3_spearman.csv", ["method", "spearman", "seed"], rows, prov)
    for m in RankingMethod:
        vals = [r[1] for r in rows if r[0] == m.value]
        if vals:
            print(f"{m.value:20s} median Spearman {np.median(vals):+.2f}")


if __name__ == "__main__":
    main()

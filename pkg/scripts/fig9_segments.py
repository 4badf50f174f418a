#!/usr/bin/env python3
"""Cooperative prediction accuracy as the number of seasonal segments grows."""

import argparse
from pathlib import Path

import numpy as np

from iaas_select.clqp import SegmentPlan
from iaas_select.corpus import Provenance, config_hash, write_csv
from iaas_select.experiments import CorpusConfig, build_corpus, clqp_predictions, nrmse_rows

SEGMENTS = (1, 2, 3, 4, 6, 12)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        corpus = build_corpus(CorpusConfig(seed=seed))
        for s in SEGMENTS:
            preds = clqp_predictions(corpus, SegmentPlan(s, 360 // s))
            rows += [{**r, "segments": s} for r in nrmse_rows(corpus, preds, "cooperative")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = Provenance(0, config_hash({"script": "fig9", "seeds": args.seeds}))
    write_csv(out / "fig9_segments.csv", ["provider", "attribute", "segments", "nrmse", "seed"],
              rows, prov)
    for s in SEGMENTS:
        print(f"S={s:2d}  median NRMSE {np.median([r['nrmse'] for r in rows if r['segments'] == s]):.4f}")


if __name__ == "__main__":
    main()

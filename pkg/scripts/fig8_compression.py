#!/usr/bin/env python3
"""LQP-short accuracy per trial compression method (PUS, PAA, RS) over seeds."""

import argparse
from pathlib import Path

import numpy as np
from scipy import stats

from iaas_select.corpus import Provenance, config_hash, write_csv
from iaas_select.experiments import CorpusConfig, build_corpus, lqp_predictions, nrmse_rows
from iaas_select.lqpshort import CompressionMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out", default="results")
    ap.add_argument("--attribute", default="throughput")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        corpus = build_corpus(CorpusConfig(seed=seed))
        for m in CompressionMethod:
            rows += nrmse_rows(corpus, lqp_predictions(corpus, m, seed), f"lqp-short:{m.value}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = Provenance(0, config_hash({"script": "fig8", "seeds": args.seeds}))
    write_csv(out / "fig8_nrmse.csv", ["provider", "attribute", "method", "nrmse", "seed"], rows, prov)

    per_seed = {}
    for m in CompressionMethod:
        label = f"lqp-short:{m.value}"
        per_seed[m] = np.array([np.mean([r["nrmse"] for r in rows if r["seed"] == s
                                         and r["method"] == label and r["attribute"] == args.attribute])
                                for s in range(args.seeds)])
        print(f"{m.value:4s} mean NRMSE ({args.attribute}) {per_seed[m].mean():.4f}")
    for other in (CompressionMethod.PAA, CompressionMethod.RS):
        wins = int(np.sum(per_seed[CompressionMethod.PUS] < per_seed[other]))
        p = stats.binomtest(wins, args.seeds, 0.5, alternative="greater").pvalue
        print(f"PUS below {other.value}: {wins}/{args.seeds} seeds, sign test p={p:.3g}")


if __name__ == "__main__":
    main()

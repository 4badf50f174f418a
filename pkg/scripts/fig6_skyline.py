#!/usr/bin/env python3
"""Skyline size against provider count, dominant pair vs all four attributes."""

import argparse
from collections import defaultdict
from pathlib import Path

import numpy as np

from iaas_select.corpus import Provenance, config_hash, write_csv
from iaas_select.datagen import generate_advertisements
from iaas_select.experiments import skyline_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        ads = generate_advertisements(60, seed=seed)
        for r in skyline_sweep(ads):
            rows.append({**r, "seed": seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = Provenance(0, config_hash({"script": "fig6", "seeds": args.seeds}))
    write_csv(out / "fig6_skyline.csv", ["providers", "attributes", "dominant", "skyline_size", "seed"],
              rows, prov)

    sizes = defaultdict(list)
    for r in rows:
        sizes[(r["providers"], r["attributes"])].append(r["skyline_size"])
    print("providers  dominant-pair  all-attributes")
    for n in sorted({k[0] for k in sizes}):
        print(f"{n:9d}  {np.mean(sizes[(n, 'dominant')]):13.1f}  {np.mean(sizes[(n, 'all')]):14.1f}")


if __name__ == "__main__":
    main()

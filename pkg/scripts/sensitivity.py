#!/usr/bin/env python3
"""Sweep one transfer knob (interval k, transfer total, or assisted-set size)
on the deception batch and report mean final best fitness per network."""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from mdeo.config import TransferConfig
from mdeo.experiments import deception_config, deception_networks
from mdeo.orchestrator import run_mdeo

KNOBS = {"k": "k", "total": "total", "assisted": "assisted_override"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("knob", choices=sorted(KNOBS))
    ap.add_argument("values", type=int, nargs="+")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--generations", type=int, default=200)
    ap.add_argument("--out", default="results/sensitivity.csv")
    args = ap.parse_args(argv)

    nets = deception_networks()
    graphs, names = list(nets.values()), list(nets)
    rows = []
    for value in args.values:
        transfer = TransferConfig(**{KNOBS[args.knob]: value})
        finals = []
        for seed in range(args.seeds):
            cfg = deception_config(seed=seed, generations=args.generations).with_(transfer=transfer)
            res = run_mdeo(graphs, cfg)
            finals.append([res.result(n).best_fitness for n in names])
        means = np.mean(finals, axis=0)
        rows.extend([args.knob, value, n, m] for n, m in zip(names, means))
        print(f"{args.knob}={value}: " + ", ".join(f"{n} {m:.4f}" for n, m in zip(names, means)))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["knob", "value", "network", "mean_best_fitness"])
        w.writerows(rows)


if __name__ == "__main__":
    main()

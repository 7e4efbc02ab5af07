#!/usr/bin/env python3
"""Desk-scale experiment batch: MDEO vs SDEO on the deception and influence
tasks, plus RAM/DICE baselines and structural reports for the best solutions.

Writes plot-ready CSVs into ``--out``:

* ``final_fitness.csv``   one row per (task, seed, method, network)
* ``curves.csv``          mean best-fitness curve per (task, method, network)
* ``timings.csv``         wall-clock per (task, seed, method)
* ``deception_effect.csv`` NMI/ARI of the best MDEO, RAM and DICE edit sets
* ``structure.csv``       structural report of the best MDEO edit sets
"""
from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from mdeo.community import get_detector
from mdeo.datasets import load_builtin
from mdeo.evo import dice_baseline
from mdeo.experiments import (DECEPTION_BUDGETS, best_run_solution, deception_config, deception_effect,
                              deception_networks, influence_config, run_batch, warm_up)
from mdeo.graph import apply_edits
from mdeo.metrics import ari, nmi, structural_report, write_report_csv
from mdeo.rng import substream


def _write(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _batch_rows(task, batch):
    finals, timings, curves = [], [], []
    for method, runs in (("mdeo", batch.mdeo), ("sdeo", batch.sdeo)):
        for seed, run in enumerate(runs):
            timings.append([task, seed, method, run.timings["total"], run.timings["prepare"]])
            for r in run.networks:
                finals.append([task, seed, method, r.name, r.best_fitness])
        for name in batch.names:
            curve = np.mean([run.result(name).history for run in runs], axis=0)
            curves.extend([task, method, name, gen, v] for gen, v in enumerate(curve))
    return finals, timings, curves


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/experiments")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--generations", type=int, default=200)
    ap.add_argument("--population", type=int, default=100)
    ap.add_argument("--skip-influence", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    nets = deception_networks()
    graphs = list(nets.values())
    base = deception_config(generations=args.generations, population=args.population)
    warm_up(graphs, base)
    dec = run_batch(graphs, base, range(args.seeds))
    finals, timings, curves = _batch_rows("deception", dec)

    if not args.skip_influence:
        icfg = influence_config(generations=args.generations, population=args.population)
        inf = run_batch([load_builtin(n.name) for n in icfg.networks], icfg, range(args.seeds))
        f2, t2, c2 = _batch_rows("influence", inf)
        finals += f2
        timings += t2
        curves += c2

    _write(out / "final_fitness.csv", ["task", "seed", "method", "network", "best_fitness"], finals)
    _write(out / "timings.csv", ["task", "seed", "method", "total_s", "prepare_s"], timings)
    _write(out / "curves.csv", ["task", "method", "network", "generation", "mean_best_fitness"], curves)

    detector = get_detector("greedy")
    effects, reports = [], {}
    for name, g in nets.items():
        beta = DECEPTION_BUDGETS[name]
        edits = best_run_solution(dec.mdeo, name).edit_set()
        eff = deception_effect(g, edits, beta)
        base_p = detector(g)
        dice = [detector(apply_edits(g, dice_baseline(g, base_p, beta, substream(s, "baseline-dice"))))
                for s in range(20)]
        effects.append([name, beta, eff.nmi, eff.ari, eff.ram_nmi, eff.ram_ari,
                        float(np.mean([nmi(base_p, p) for p in dice])), float(np.mean([ari(base_p, p) for p in dice])),
                        eff.modularity_before, eff.modularity_after])
        reports[name] = structural_report(g, edits, detector)
    _write(out / "deception_effect.csv",
           ["network", "beta", "mdeo_nmi", "mdeo_ari", "ram_nmi", "ram_ari", "dice_nmi", "dice_ari",
            "modularity_before", "modularity_after"], effects)
    write_report_csv(reports, out / "structure.csv")

    m, s = dec.final_best("mdeo").mean(axis=0), dec.final_best("sdeo").mean(axis=0)
    for name, a, b in zip(dec.names, m, s):
        print(f"{name:10s} MDEO {a:.4f}  SDEO {b:.4f}")
    print(f"time ratio MDEO/SDEO {dec.wall_clock('mdeo') / dec.wall_clock('sdeo'):.3f}")


if __name__ == "__main__":
    main()

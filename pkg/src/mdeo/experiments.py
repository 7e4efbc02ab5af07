"""Batch protocols shared by the acceptance suite and ``scripts/``.

A *batch* runs MDEO and SDEO over the same networks for several seeds,
interleaving the two so that machine load drifts affect both equally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .community import get_detector, modularity
from .config import NetworkConfig, RunConfig, TaskConfig, TransferConfig
from .datasets import load_builtin, planted_partition
from .evo import EAConfig, ram_baseline
from .graph import Graph, apply_edits
from .metrics import ari, nmi
from .orchestrator import RunResult, run_mdeo, run_sdeo
from .rng import substream

log = logging.getLogger(__name__)

DECEPTION_BUDGETS = {"karate": 10, "lesmis": 10, "davis": 10, "planted": 20}
INFLUENCE_NETWORKS = ("karate", "lesmis")


def deception_networks() -> dict[str, Graph]:
    """Three small real networks plus one planted-partition graph."""
    nets = {name: load_builtin(name) for name in ("karate", "lesmis", "davis")}
    nets["planted"], _ = planted_partition(4, 30, 0.25, 0.02, seed=3)
    return nets


def deception_config(seed: int = 0, generations: int = 200, population: int = 100) -> RunConfig:
    nets = tuple(NetworkConfig(name, beta=beta) for name, beta in DECEPTION_BUDGETS.items())
    return RunConfig(networks=nets, ea=EAConfig(population=population, generations=generations),
                     transfer=TransferConfig(), seed=seed)


def influence_config(seed: int = 0, generations: int = 200, population: int = 100, seed_count: int = 10) -> RunConfig:
    nets = tuple(NetworkConfig(name) for name in INFLUENCE_NETWORKS)
    return RunConfig(networks=nets, task=TaskConfig(kind="influence", seed_count=seed_count),
                     ea=EAConfig(population=population, generations=generations), seed=seed)


@dataclass
class BatchResult:
    names: list
    mdeo: list = field(default_factory=list)  # RunResult per seed
    sdeo: list = field(default_factory=list)

    def final_best(self, which: str) -> np.ndarray:
        """Array (seeds, networks) of final best fitness."""
        runs = self.mdeo if which == "mdeo" else self.sdeo
        return np.array([[r.result(n).best_fitness for n in self.names] for r in runs])

    def wall_clock(self, which: str) -> float:
        runs = self.mdeo if which == "mdeo" else self.sdeo
        return float(sum(r.timings["total"] for r in runs))


def run_batch(graphs: list[Graph], base: RunConfig, seeds, on_run=None) -> BatchResult:
    out = BatchResult([n.name for n in base.networks])
    for s in seeds:
        cfg = base.with_(seed=s)
        out.mdeo.append(run_mdeo(graphs, cfg))
        out.sdeo.append(run_sdeo(graphs, cfg))
        if on_run:
            on_run(s, out.mdeo[-1], out.sdeo[-1])
        log.info("seed %d: mdeo %.1fs sdeo %.1fs", s, out.mdeo[-1].timings["total"], out.sdeo[-1].timings["total"])
    return out


def warm_up(graphs: list[Graph], base: RunConfig) -> None:
    """Trigger JIT compilation so later timings measure steady-state cost."""
    run_mdeo(graphs, base.with_(ea=EAConfig(population=6, generations=12)))


@dataclass(frozen=True)
class DeceptionEffect:
    nmi: float
    ari: float
    ram_nmi: float
    ram_ari: float
    modularity_before: float
    modularity_after: float

    @property
    def beats_ram(self) -> bool:
        return self.nmi < 1 and self.ari < 1 and self.nmi < self.ram_nmi and self.ari < self.ram_ari


def deception_effect(g: Graph, edits, beta: int, detector: str = "greedy", ram_draws: int = 20,
                     seed: int = 0) -> DeceptionEffect:
    """Partition agreement after ``edits`` compared with random edits of the same budget."""
    det = get_detector(detector)
    base = det(g)
    after_graph = apply_edits(g, edits)
    after = det(after_graph)
    ram_scores = []
    for k in range(ram_draws):
        ram_graph = apply_edits(g, ram_baseline(g, beta, substream(seed, "baseline-ram", k)))
        p = det(ram_graph)
        ram_scores.append((nmi(base, p), ari(base, p)))
    ram_nmi, ram_ari = np.mean(ram_scores, axis=0)
    return DeceptionEffect(nmi(base, after), ari(base, after), float(ram_nmi), float(ram_ari),
                           modularity(g, base), modularity(after_graph, after))


def best_run_solution(runs: list[RunResult], name: str):
    """Best chromosome over all seeds (first seed wins ties)."""
    best = max(runs, key=lambda r: r.result(name).best_fitness)
    return best.result(name).best

"""Joint evolution of several networks with gated, similarity-weighted
solution transfer (MDEO), and the transfer-free single-domain loop (SDEO)."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import map_edge_solution, node_mapping, select_anchors, train_alignment
from .community import Partition, get_detector
from .config import RunConfig
from .embedding import train_gae
from .evo import (DeceptionTask, GuidedCandidates, InfluenceTask, Population, elite_count, evaluate,
                  evolve_generation, export_elites, init_population)
from .graph import Graph
from .rng import substream, substream_seed
from .similarity import CommunityProfile, SimilarityMatrix, init_similarity_and_assisted

log = logging.getLogger(__name__)


# --- transfer primitives ---------------------------------------------------

def transfer_condition(history: Sequence[float], k: int, gen: int) -> bool:
    """Transfer when the last k generations improved less than the k before."""
    if k < 1 or gen < 2 * k or gen % k != 0:
        return False
    if len(history) <= gen:
        raise ValueError(f"history has {len(history)} entries, generation {gen} requested")
    d_recent = abs(history[gen] - history[gen - k])
    d_before = abs(history[gen - k] - history[gen - 2 * k])
    return d_recent < d_before


def allocate_transfers(row: Sequence[float], total: int) -> list[int]:
    """Split ``total`` proportionally to ``row`` by largest remainder (ties
    to the lower index). An all-zero row is split uniformly."""
    w = np.asarray(row, dtype=float)
    if len(w) == 0:
        return []
    if (w < 0).any():
        raise ValueError("similarities must be non-negative")
    if w.sum() <= 0:
        w = np.ones(len(w))
    quota = w / w.sum() * total
    counts = np.floor(quota + 1e-12).astype(int)
    rem = quota - counts
    left = total - int(counts.sum())
    for idx in sorted(range(len(w)), key=lambda i: (-round(rem[i], 12), i))[:max(left, 0)]:
        counts[idx] += 1
    return counts.tolist()


def measure_contribution(elite_now: Sequence, elite_before: Sequence, transferred: Sequence) -> float:
    """Share of the current elite that is new since the last transfer and was
    itself one of the transferred genomes."""
    if not elite_now:
        return 0.0
    fresh = set(elite_now) - set(elite_before)
    return len(fresh & set(transferred)) / len(elite_now)


def update_similarity(values: np.ndarray, i: int, contributions: dict, assisted: Sequence[int]) -> np.ndarray:
    """Add contributions to row ``i`` and renormalise it over ``assisted``;
    entries outside the assisted set stay zero."""
    for j, c in contributions.items():
        if j not in assisted:
            raise ValueError(f"network {j} is not assisted for {i}")
        values[i, j] += c
    idx = list(assisted)
    total = values[i, idx].sum()
    if total > 0:
        values[i, idx] = values[i, idx] / total
    else:
        values[i, idx] = 1.0 / len(idx)
    return values


def candidate_pools(sets: dict, kind: str, swap: bool = False) -> dict:
    """Mutation pools per source. For deception the addition pool is the
    union of transferred deletion genes and vice versa (``swap`` flips it)."""
    pools = {}
    for j, chroms in sets.items():
        if kind == "influence":
            pools[j] = (tuple(sorted({s for c in chroms for s in c.seeds})), ())
            continue
        dels = tuple(sorted({e for c in chroms for e in c.deletions}))
        adds = tuple(sorted({e for c in chroms for e in c.additions}))
        pools[j] = (adds, dels) if swap else (dels, adds)
    return pools


# --- state -----------------------------------------------------------------

@dataclass
class TransferLedger:
    last_sets: dict = field(default_factory=dict)
    elite_snapshot: list = field(default_factory=list)
    generation: int | None = None
    guided: GuidedCandidates | None = None


@dataclass
class TransferEvent:
    generation: int
    target: int
    source: int
    count: int
    contribution: float
    similarity: float


@dataclass
class Domain:
    index: int
    name: str
    graph: Graph
    partition: Partition
    task: object
    rng: np.random.Generator
    population: Population | None = None
    history: list = field(default_factory=list)
    mean_history: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)
    transfer_in: list = field(default_factory=list)
    embeddings: np.ndarray | None = None
    mappings: dict = field(default_factory=dict)  # source j -> node map j -> self

    def record(self, inflow: str = "", count: int = 0):
        pop = self.population
        best = float(pop.fitness.max())
        if self.history and best < self.history[-1] - 1e-12:
            raise AssertionError(f"{self.name}: best fitness decreased")
        self.history.append(best)
        self.mean_history.append(float(pop.fitness.mean()))
        if self.task.kind == "deception":
            rho = np.array([c.rho for c in pop.individuals])
            self.rho_history.append((int(rho.min()), float(rho.mean()), int(rho.max())))
        self.transfer_in.append((count, inflow))


@dataclass
class NetworkResult:
    name: str
    best: object
    best_fitness: float
    history: list
    mean_history: list
    rho_history: list
    transfer_in: list
    evaluations: int


@dataclass
class RunResult:
    networks: list
    events: list
    similarity: SimilarityMatrix | None
    timings: dict

    def result(self, name: str) -> NetworkResult:
        return next(r for r in self.networks if r.name == name)


def _make_task(cfg: RunConfig, i: int, g: Graph, beta: int, partition: Partition):
    if cfg.task.kind == "influence":
        return InfluenceTask(g, cfg.task.seed_count, cfg.task.ic_prob, cfg.task.ic_samples,
                             seed=substream_seed(cfg.seed, "ic", i))
    return DeceptionTask(g, beta, get_detector(cfg.task.detector), partition)


def _check(graphs, cfg: RunConfig, names, need_two: bool):
    if len(graphs) != len(cfg.networks):
        raise ValueError(f"{len(graphs)} graphs given for {len(cfg.networks)} configured networks")
    if need_two and len(graphs) < 2:
        raise ValueError("transfer needs at least 2 networks")
    for g, n in zip(graphs, cfg.networks):
        if g.edge_count == 0:
            raise ValueError(f"network {n.name} has no edges")
        if cfg.task.kind == "deception" and n.beta > g.node_count * (g.node_count - 1) // 2:
            raise ValueError(f"network {n.name}: beta {n.beta} infeasible")
        if cfg.task.kind == "influence" and cfg.task.seed_count > g.node_count:
            raise ValueError(f"network {n.name}: {cfg.task.seed_count} seeds exceed {g.node_count} nodes")


def _domains(graphs, cfg: RunConfig, partitions=None) -> list[Domain]:
    detector = get_detector(cfg.task.detector)
    out = []
    for i, (g, n) in enumerate(zip(graphs, cfg.networks)):
        p = partitions[i] if partitions is not None else detector(g)
        out.append(Domain(i, n.name, g, p, _make_task(cfg, i, g, n.beta, p), substream(cfg.seed, "ea", i)))
    return out


def _finish(domains, events, sim, timings) -> RunResult:
    res = []
    for d in domains:
        best, f = d.population.best()
        res.append(NetworkResult(d.name, best, f, d.history, d.mean_history, d.rho_history,
                                 d.transfer_in, d.task.evaluations))
    return RunResult(res, events, sim, timings)


# --- learning phase --------------------------------------------------------

def prepare_transfer(domains: list[Domain], cfg: RunConfig) -> SimilarityMatrix:
    """Similarity + assisted sets, GAE embeddings and node mappings for every
    (source -> target) assisted pair."""
    profiles = [CommunityProfile.build(d.graph, d.partition) for d in domains]
    sim = init_similarity_and_assisted([d.graph for d in domains], cfg.transfer.assisted_override, profiles)
    for d in domains:
        _, d.embeddings = train_gae(d.graph, d.partition, cfg.learn.gae)
    trained = {}
    for i, d in enumerate(domains):
        for j in sim.assisted[i]:
            a, b = min(i, j), max(i, j)
            if (a, b) not in trained:
                da, db = domains[a], domains[b]
                anchors = select_anchors(sim.aligned[(a, b)], da.graph, db.graph, da.partition, db.partition,
                                         cfg.learn.align.anchor_ties)
                trained[(a, b)] = train_alignment(da.embeddings, db.embeddings, anchors, cfg.learn.align)
            ab, ba = trained[(a, b)]
            to_i = ab if j == a else ba  # map from j's space into i's
            d.mappings[j] = node_mapping(to_i, domains[j].embeddings, d.embeddings)
    return sim


# --- transfer phase --------------------------------------------------------

def perform_transfer(target: Domain, snapshot: list[Population], domains: list[Domain], ledger: TransferLedger,
                     sim: SimilarityMatrix, cfg: RunConfig, gen: int, rng) -> list[TransferEvent]:
    i = target.index
    assisted = sim.assisted[i]
    n_elite = elite_count(cfg.ea.population, cfg.ea.elite_fraction)
    elite_now = export_elites(snapshot[i], n_elite)
    contrib = {j: 0.0 for j in assisted}
    if ledger.generation is not None:
        contrib = {j: measure_contribution(elite_now, ledger.elite_snapshot, ledger.last_sets.get(j, ()))
                   for j in assisted}
        update_similarity(sim.values, i, contrib, assisted)
    counts = allocate_transfers([sim.values[i, j] for j in assisted], cfg.transfer.total)
    events, sets, injected = [], {}, []
    for j, c in zip(assisted, counts):
        sets[j] = []
        if c == 0:
            continue
        for chrom in export_elites(snapshot[j], c):
            raw = map_edge_solution(chrom, target.mappings[j])
            fixed = target.task.repair(raw, rng).with_origin(j)
            sets[j].append(fixed)
            injected.append(fixed)
        events.append(TransferEvent(gen, i, j, len(sets[j]), contrib[j], float(sim.values[i, j])))
    if injected:
        pop = target.population
        extra = np.array([target.task.fitness(c) for c in injected], dtype=float)
        target.population = Population(pop.individuals + injected, np.concatenate([pop.fitness, extra]))
    ledger.last_sets = sets
    ledger.elite_snapshot = elite_now
    ledger.generation = gen
    ledger.guided = GuidedCandidates(candidate_pools(sets, target.task.kind, cfg.transfer.swap_mutation_candidates),
                                     sim.row_probs(i))
    return events


# --- drivers ---------------------------------------------------------------

def _step(d: Domain, cfg: RunConfig, guided):
    d.population = evolve_generation(d.population, d.task, cfg.ea, d.rng, guided)


def run_mdeo(graphs: Sequence[Graph], cfg: RunConfig, partitions=None, threads: int = 1) -> RunResult:
    """Evolve all networks in lockstep. With ``cfg.transfer.enabled`` false the
    loop never touches the transfer machinery and equals :func:`run_sdeo`."""
    enabled = cfg.transfer.enabled
    _check(graphs, cfg, None, enabled)
    t0 = time.perf_counter()
    domains = _domains(graphs, cfg, partitions)
    sim = None
    if enabled:
        sim = prepare_transfer(domains, cfg)
    t_prep = time.perf_counter() - t0
    for d in domains:
        d.population = evaluate(d.task, init_population(d.task, cfg.ea.population, d.rng))
        d.record()
    ledgers = [TransferLedger() for _ in domains]
    trngs = [substream(cfg.seed, "transfer", d.index) for d in domains]
    events: list[TransferEvent] = []
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for gen in range(cfg.ea.generations):
            inflow = [("", 0)] * len(domains)
            if enabled:
                snapshot = [d.population for d in domains]
                for d in domains:
                    if transfer_condition(d.history, cfg.transfer.k, gen):
                        ev = perform_transfer(d, snapshot, domains, ledgers[d.index], sim, cfg, gen,
                                              trngs[d.index])
                        events.extend(ev)
                        inflow[d.index] = (";".join(f"{domains[e.source].name}:{e.count}" for e in ev),
                                           sum(e.count for e in ev))
                for d in domains:
                    cnt, src = inflow[d.index][1], inflow[d.index][0]
                    d.transfer_in[-1] = (cnt, src)
            guided = [ledgers[d.index].guided for d in domains]
            if pool is None:
                for d in domains:
                    _step(d, cfg, guided[d.index])
            else:
                list(pool.map(lambda d: _step(d, cfg, guided[d.index]), domains))
            for d in domains:
                d.record()
    finally:
        if pool is not None:
            pool.shutdown()
    total = time.perf_counter() - t0
    return _finish(domains, events, sim, {"prepare": t_prep, "total": total})


def run_sdeo(graphs: Sequence[Graph], cfg: RunConfig, partitions=None) -> RunResult:
    """Each network evolved on its own, start to finish, with no transfer."""
    _check(graphs, cfg, None, False)
    t0 = time.perf_counter()
    domains = _domains(graphs, cfg, partitions)
    for d in domains:
        d.population = evaluate(d.task, init_population(d.task, cfg.ea.population, d.rng))
        d.record()
        for _ in range(cfg.ea.generations):
            _step(d, cfg, None)
            d.record()
    return _finish(domains, [], None, {"prepare": 0.0, "total": time.perf_counter() - t0})


# --- outputs ---------------------------------------------------------------

GENERATION_HEADER = ["network", "generation", "best_fitness", "mean_fitness", "transfer_in_count", "sources"]
TRANSFER_HEADER = ["generation", "target", "source", "count", "contribution", "similarity"]
RHO_HEADER = ["network", "generation", "rho_min", "rho_mean", "rho_max"]


def write_outputs(result: RunResult, outdir, task_scripts: dict | None = None) -> list[Path]:
    """Write generations.csv, transfers.csv, rho.csv and one edit script per network."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "generations.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GENERATION_HEADER)
        for r in result.networks:
            for g, (b, m, (cnt, src)) in enumerate(zip(r.history, r.mean_history, r.transfer_in)):
                w.writerow([r.name, g, repr(b), repr(m), cnt, src])
    written.append(p)
    names = [r.name for r in result.networks]
    p = out / "transfers.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRANSFER_HEADER)
        for e in result.events:
            w.writerow([e.generation, names[e.target], names[e.source], e.count, repr(e.contribution),
                        repr(e.similarity)])
    written.append(p)
    p = out / "rho.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RHO_HEADER)
        for r in result.networks:
            for g, (lo, mean, hi) in enumerate(r.rho_history):
                w.writerow([r.name, g, lo, repr(mean), hi])
    written.append(p)
    sol = out / "solutions"
    sol.mkdir(exist_ok=True)
    for r in result.networks:
        p = sol / f"{r.name}.txt"
        p.write_text("".join(line + "\n" for line in solution_lines(r.best)))
        written.append(p)
    return written


def solution_lines(chrom) -> list[str]:
    if hasattr(chrom, "seeds"):
        return [f"seed {u}" for u in chrom.seeds]
    return [f"+ {u} {v}" for u, v in chrom.additions] + [f"- {u} {v}" for u, v in chrom.deletions]

"""Single-network evolutionary machinery for community deception and
influence maximisation, plus the RAM and DICE rewiring baselines."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .chromosome import (EdgeChromosome, RawEdgeSolution, RawSeedSolution, SeedChromosome)
from .community import CommunityDetector, GreedyModularity, Partition
from .graph import Edge, EditSet, Graph, canon
from .rng import genome_seed

log = logging.getLogger(__name__)


class RepairError(ValueError):
    pass


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class EAConfig:
    population: int = 100
    generations: int = 200
    crossover_prob: float = 0.5
    mutation_prob: float = 0.1
    elite_fraction: float = 0.1

    @property
    def elite_count(self) -> int:
        return elite_count(self.population, self.elite_fraction)


def elite_count(size: int, fraction: float = 0.1) -> int:
    return max(1, math.ceil(fraction * size - 1e-9)) if size > 0 else 0


@dataclass
class Population:
    individuals: list
    fitness: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.individuals)

    def order(self) -> np.ndarray:
        """Indices by decreasing fitness; ties keep insertion order."""
        return np.argsort(-self.fitness, kind="stable")

    def best(self):
        i = int(self.order()[0])
        return self.individuals[i], float(self.fitness[i])

    def copy(self) -> "Population":
        return Population(list(self.individuals), self.fitness.copy())


@dataclass
class GuidedCandidates:
    """Per-source replacement pools for knowledge-guided mutation.

    ``pools[j]`` is ``(addition_candidates, deletion_candidates)`` for
    deception or ``(seed_candidates, ())`` for influence maximisation;
    ``probs[j]`` is the probability of drawing from source ``j``.
    """

    pools: dict
    probs: dict

    def __post_init__(self):
        self._keys = sorted(self.pools)
        w = np.array([max(0.0, self.probs.get(j, 0.0)) for j in self._keys], dtype=float)
        if w.sum() <= 0:
            w = np.ones(len(self._keys))
        self._cdf = np.cumsum(w / w.sum())

    def empty(self) -> bool:
        return not any(a or d for a, d in self.pools.values())

    def pick(self, rng):
        """Draw a source network by its probability and return its pools."""
        idx = min(int(np.searchsorted(self._cdf, rng.random(), side="right")), len(self._keys) - 1)
        return self.pools[self._keys[idx]]


# --- sampling helpers ------------------------------------------------------

def _fresh_non_edge(g: Graph, used: set, rng: np.random.Generator) -> Edge | None:
    n = g.node_count
    total = n * (n - 1) // 2
    free = total - g.edge_count - sum(1 for e in used if e not in g.edges)
    if free <= 0:
        return None
    if free * 4 >= total:
        for _ in range(64):
            u, v = rng.integers(n, size=2)
            if u == v:
                continue
            e = canon(int(u), int(v))
            if e not in g.edges and e not in used:
                return e
    pool = [(u, v) for u in range(n) for v in range(u + 1, n)
            if (u, v) not in g.edges and (u, v) not in used]
    return pool[int(rng.integers(len(pool)))] if pool else None


def _fresh_edge(g: Graph, used: set, rng: np.random.Generator) -> Edge | None:
    edges = g.edge_list
    m = len(edges)
    taken = sum(1 for e in used if e in g.edges)
    if taken >= m:
        return None
    if (m - taken) * 4 >= m:
        for _ in range(64):
            e = edges[int(rng.integers(m))]
            if e not in used:
                return e
    pool = [e for e in edges if e not in used]
    return pool[int(rng.integers(len(pool)))] if pool else None


def _fresh_node(n: int, used: set, rng: np.random.Generator) -> int | None:
    if len(used) >= n:
        return None
    if (n - len(used)) * 4 >= n:
        for _ in range(64):
            u = int(rng.integers(n))
            if u not in used:
                return u
    pool = [u for u in range(n) if u not in used]
    return pool[int(rng.integers(len(pool)))]


def non_edge_count(g: Graph) -> int:
    n = g.node_count
    return n * (n - 1) // 2 - g.edge_count


# --- deception task --------------------------------------------------------

@njit(cache=True)
def _deception_score(base, new, n_base, n_new):
    n = base.shape[0]
    m = np.zeros((n_base, n_new), dtype=np.int64)
    for u in range(n):
        m[base[u], new[u]] += 1
    size_b = np.zeros(n_base, dtype=np.int64)
    size_n = np.zeros(n_new, dtype=np.int64)
    for i in range(n_base):
        for j in range(n_new):
            size_b[i] += m[i, j]
            size_n[j] += m[i, j]
    s = 0.0
    mmax = 0.0
    for i in range(n_base):
        for j in range(n_new):
            if m[i, j] > 0:
                r = m[i, j] / size_b[i]
                s += (size_b[i] / n) * r * np.log2(r)
                mp = m[i, j] / size_n[j] * np.log2(size_n[j])
                if mp > mmax:
                    mmax = mp
    return 0.0 - s * np.exp(-mmax)


def confusion_fitness(base: np.ndarray, new: np.ndarray) -> float:
    """Deception fitness from two label vectors over the same nodes."""
    base = np.asarray(base, dtype=np.int64)
    new = np.asarray(new, dtype=np.int64)
    return float(_deception_score(base, new, int(base.max()) + 1, int(new.max()) + 1))


def deception_fitness(g: Graph, base: Partition, chrom: EdgeChromosome,
                      detector: CommunityDetector | None = None) -> float:
    """Conditional-entropy style disagreement between the base partition and the
    attacker's partition of the edited graph, damped by exp(-max m')."""
    detector = detector or GreedyModularity()
    adj = np.array(g.adjacency, dtype=np.int64)
    for u, v in chrom.additions:
        if adj[u, v]:
            raise ValueError(f"addition {(u, v)} already an edge")
        adj[u, v] = adj[v, u] = 1
    for u, v in chrom.deletions:
        if not adj[u, v]:
            raise ValueError(f"deletion {(u, v)} is not an edge")
        adj[u, v] = adj[v, u] = 0
    new = detector.labels_from_adjacency(adj)
    return float(_deception_score(base.assignment, np.asarray(Partition(new).assignment),
                                  base.k, int(Partition(new).k)))


class DeceptionTask:
    """Edge-level task: ``beta`` rewirings on ``graph`` against ``detector``."""

    kind = "deception"

    def __init__(self, graph: Graph, beta: int, detector: CommunityDetector | None = None,
                 base: Partition | None = None):
        self.graph = graph
        self.beta = int(beta)
        self.detector = detector or GreedyModularity()
        self.base = base if base is not None else self.detector(graph)
        if self.beta > non_edge_count(graph) + graph.edge_count:
            raise BudgetError(f"beta={beta} exceeds the {non_edge_count(graph) + graph.edge_count} "
                              "available edge operations")
        self._adj = np.array(graph.adjacency, dtype=np.int64)
        self._cache: dict = {}
        self.evaluations = 0

    # fitness
    def fitness(self, chrom: EdgeChromosome) -> float:
        key = (chrom.additions, chrom.deletions)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        adj = self._adj.copy()
        for u, v in chrom.additions:
            adj[u, v] = adj[v, u] = 1
        for u, v in chrom.deletions:
            adj[u, v] = adj[v, u] = 0
        new = self.detector.labels_from_adjacency(adj)
        val = confusion_fitness(self.base.assignment, new)
        self._cache[key] = val
        self.evaluations += 1
        return val

    def random_chromosome(self, rng) -> EdgeChromosome:
        g = self.graph
        max_add = min(self.beta, non_edge_count(g))
        min_add = max(0, self.beta - g.edge_count)
        rho = int(rng.integers(min_add, max_add + 1))
        used: set = set()
        adds = []
        for _ in range(rho):
            e = _fresh_non_edge(g, used, rng)
            used.add(e)
            adds.append(e)
        dels = []
        for _ in range(self.beta - rho):
            e = _fresh_edge(g, used, rng)
            used.add(e)
            dels.append(e)
        return EdgeChromosome(adds, dels)

    def crossover(self, a, b, prob, rng):
        if rng.random() >= prob:
            return a, b
        a_add, b_add = _swap_segment(list(a.additions), list(b.additions), rng)
        a_del, b_del = _swap_segment(list(a.deletions), list(b.deletions), rng)
        c1 = self.repair(RawEdgeSolution(a_add, a_del), rng)
        c2 = self.repair(RawEdgeSolution(b_add, b_del), rng)
        return c1, c2

    def mutate(self, chrom, prob, rng, guided: GuidedCandidates | None = None):
        if chrom.beta == 0 or rng.random() >= prob:
            return chrom
        g = self.graph
        idx = int(rng.integers(chrom.beta))
        adds, dels = list(chrom.additions), list(chrom.deletions)
        is_add = idx < len(adds)
        used = set(adds) | set(dels)
        old = adds[idx] if is_add else dels[idx - len(adds)]
        used.discard(old)
        new = None
        if guided is not None and not guided.empty():
            pool = guided.pick(rng)[0 if is_add else 1]
            if pool:
                for _ in range(10):
                    e = pool[int(rng.integers(len(pool)))]
                    e = canon(*e)
                    if e[0] == e[1] or e in used:
                        continue
                    if (e in g.edges) != (not is_add):
                        continue
                    new = e
                    break
        if new is None:
            new = _fresh_non_edge(g, used, rng) if is_add else _fresh_edge(g, used, rng)
            if new is None:
                new = old
        if is_add:
            adds[idx] = new
        else:
            dels[idx - len(adds)] = new
        return self.repair(RawEdgeSolution(adds, dels), rng)

    def repair(self, chrom, rng, beta_target: int | None = None) -> EdgeChromosome:
        return repair_edges(chrom, self.graph, self.beta if beta_target is None else beta_target, rng)

    def to_edit_script(self, chrom: EdgeChromosome) -> list[str]:
        return [f"+ {u} {v}" for u, v in chrom.additions] + [f"- {u} {v}" for u, v in chrom.deletions]


def _swap_segment(x: list, y: list, rng):
    L = min(len(x), len(y))
    if L == 0:
        return x, y
    s = int(rng.integers(L))
    e = int(rng.integers(s + 1, L + 1))
    x2 = x[:s] + y[s:e] + x[e:]
    y2 = y[:s] + x[s:e] + y[e:]
    return x2, y2


def repair_edges(chrom, g: Graph, beta_target: int, rng) -> EdgeChromosome:
    """Make a (possibly invalid) edit genome valid on ``g`` with exactly
    ``beta_target`` genes: extra genes are dropped uniformly at random,
    collapsed, duplicate or wrong-part genes are resampled within their part,
    and missing genes are sampled as additions or deletions with equal odds."""
    origin = getattr(chrom, "origin", None)
    n = g.node_count
    if beta_target > non_edge_count(g) + g.edge_count:
        raise RepairError(f"graph cannot supply {beta_target} distinct edge operations")
    raw = [(canon(int(u), int(v)), True) for u, v in chrom.additions]
    raw += [(canon(int(u), int(v)), False) for u, v in chrom.deletions]
    if len(raw) > beta_target:
        keep = np.sort(rng.choice(len(raw), size=beta_target, replace=False))
        raw = [raw[i] for i in keep]
    used: set = set()
    ok = []
    for e, is_add in raw:
        valid = (e[0] != e[1] and 0 <= e[0] < n and 0 <= e[1] < n and e not in used
                 and ((e not in g.edges) if is_add else (e in g.edges)))
        ok.append(valid)
        if valid:
            used.add(e)
    genes = []
    for (e, is_add), valid in zip(raw, ok):
        if not valid:
            e = _fresh_non_edge(g, used, rng) if is_add else _fresh_edge(g, used, rng)
            if e is None:
                e = _fresh_edge(g, used, rng) if is_add else _fresh_non_edge(g, used, rng)
                is_add = not is_add
            if e is None:
                raise RepairError("graph too small to supply enough distinct genes")
            used.add(e)
        genes.append((e, is_add))
    while len(genes) < beta_target:
        want_add = bool(rng.random() < 0.5)
        e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
        if e is None:
            want_add = not want_add
            e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
        if e is None:
            raise RepairError("graph too small to supply enough distinct genes")
        used.add(e)
        genes.append((e, want_add))
    return EdgeChromosome([e for e, a in genes if a], [e for e, a in genes if not a], origin)


# --- influence maximisation task -------------------------------------------

@njit(cache=True, nogil=True)
def _ic_runs(indptr, indices, seeds, p, samples, seed):
    np.random.seed(seed)
    n = indptr.shape[0] - 1
    total = 0
    active = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    for _ in range(samples):
        active[:] = False
        head = 0
        tail = 0
        for s in seeds:
            if not active[s]:
                active[s] = True
                queue[tail] = s
                tail += 1
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if not active[v] and np.random.random() < p:
                    active[v] = True
                    queue[tail] = v
                    tail += 1
        total += tail
    return total / samples


def _csr(g: Graph):
    indptr = np.zeros(g.node_count + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(a) for a in g.neighbors])
    indices = np.fromiter((v for a in g.neighbors for v in a), dtype=np.int64, count=int(indptr[-1]))
    return indptr, indices


def ic_spread(g: Graph, seeds, p: float, samples: int, seed: int, _csr_cache=None) -> float:
    """Mean number of activated nodes over ``samples`` independent-cascade runs."""
    indptr, indices = _csr_cache if _csr_cache is not None else _csr(g)
    s = np.array(sorted(set(int(x) for x in seeds)), dtype=np.int64)
    if len(s) and (s.min() < 0 or s.max() >= g.node_count):
        raise ValueError("seed out of range")
    return float(_ic_runs(indptr, indices, s, float(p), int(samples), int(seed) & 0xFFFFFFFF))


class InfluenceTask:
    """Node-level task: choose ``k`` seeds maximising independent-cascade spread."""

    kind = "influence"

    def __init__(self, graph: Graph, k: int, p: float = 0.05, samples: int = 100, seed: int = 0):
        if k > graph.node_count:
            raise BudgetError(f"seed-set size {k} exceeds {graph.node_count} nodes")
        self.graph = graph
        self.beta = int(k)
        self.p = float(p)
        self.samples = int(samples)
        self.seed = int(seed)
        self._csr = _csr(graph)
        self._cache: dict = {}
        self.evaluations = 0

    def fitness(self, chrom: SeedChromosome) -> float:
        hit = self._cache.get(chrom.seeds)
        if hit is not None:
            return hit
        val = ic_spread(self.graph, chrom.seeds, self.p, self.samples,
                        genome_seed(self.seed, chrom.seeds), self._csr)
        self._cache[chrom.seeds] = val
        self.evaluations += 1
        return val

    def spread(self, chrom: SeedChromosome, samples: int, seed: int = 12345) -> float:
        return ic_spread(self.graph, chrom.seeds, self.p, samples, seed, self._csr)

    def random_chromosome(self, rng) -> SeedChromosome:
        return SeedChromosome(rng.choice(self.graph.node_count, size=self.beta, replace=False).tolist())

    def crossover(self, a, b, prob, rng):
        if rng.random() >= prob:
            return a, b
        x, y = list(a.seeds), list(b.seeds)
        L = min(len(x), len(y))
        swap = rng.random(L) < 0.5
        for i in np.flatnonzero(swap):
            x[i], y[i] = y[i], x[i]
        return (self.repair(RawSeedSolution(x), rng), self.repair(RawSeedSolution(y), rng))

    def mutate(self, chrom, prob, rng, guided: GuidedCandidates | None = None):
        if chrom.beta == 0 or rng.random() >= prob:
            return chrom
        seeds = list(chrom.seeds)
        idx = int(rng.integers(len(seeds)))
        used = set(seeds)
        new = None
        if guided is not None and not guided.empty():
            pool = guided.pick(rng)[0]
            if pool:
                for _ in range(10):
                    c = int(pool[int(rng.integers(len(pool)))])
                    if 0 <= c < self.graph.node_count and c not in used:
                        new = c
                        break
        if new is None:
            new = _fresh_node(self.graph.node_count, used, rng)
            if new is None:
                return chrom
        seeds[idx] = new
        return self.repair(RawSeedSolution(seeds), rng)

    def repair(self, chrom, rng, beta_target: int | None = None) -> SeedChromosome:
        return repair_seeds(chrom, self.graph.node_count, self.beta if beta_target is None else beta_target, rng)

    def to_edit_script(self, chrom: SeedChromosome) -> list[str]:
        return [f"seed {u}" for u in chrom.seeds]


def repair_seeds(chrom, n: int, k: int, rng) -> SeedChromosome:
    if k > n:
        raise RepairError(f"cannot pick {k} distinct seeds from {n} nodes")
    origin = getattr(chrom, "origin", None)
    seeds = [int(s) for s in chrom.seeds]
    used: set = set()
    valid = []
    for s in seeds:
        ok = 0 <= s < n and s not in used
        valid.append(ok)
        if ok:
            used.add(s)
    out = []
    for s, ok in zip(seeds, valid):
        if not ok:
            s = _fresh_node(n, used, rng)
            used.add(s)
        out.append(s)
    if len(out) > k:
        keep = np.sort(rng.choice(len(out), size=k, replace=False))
        out = [out[i] for i in keep]
    while len(out) < k:
        s = _fresh_node(n, used, rng)
        used.add(s)
        out.append(s)
    return SeedChromosome(out, origin)


# --- generic operators -----------------------------------------------------

def init_population(task, size: int, rng) -> Population:
    return Population([task.random_chromosome(rng) for _ in range(size)])


def evaluate(task, pop: Population) -> Population:
    pop.fitness = np.array([task.fitness(c) for c in pop.individuals], dtype=float)
    return pop


def crossover(task, a, b, prob: float, rng):
    return task.crossover(a, b, prob, rng)


def mutate(task, chrom, prob: float, rng, guided: GuidedCandidates | None = None):
    return task.mutate(chrom, prob, rng, guided)


def repair(task, chrom, rng, beta_target: int | None = None):
    return task.repair(chrom, rng, beta_target)


def evolve_generation(pop: Population, task, config: EAConfig, rng,
                      guided: GuidedCandidates | None = None) -> Population:
    """Elitist generation: the best ``ceil(elite_fraction * population)``
    individuals survive unchanged; the rest are offspring of uniformly drawn
    parent pairs. ``pop`` may be larger than the base size after a transfer."""
    size = config.population
    n_elite = min(elite_count(size, config.elite_fraction), len(pop))
    order = pop.order()
    nxt = [pop.individuals[i] for i in order[:n_elite]]
    fit = [float(pop.fitness[i]) for i in order[:n_elite]]
    children = []
    while len(children) < size - n_elite:
        i, j = rng.integers(len(pop), size=2)
        c1, c2 = task.crossover(pop.individuals[i], pop.individuals[j], config.crossover_prob, rng)
        children.append(task.mutate(c1, config.mutation_prob, rng, guided))
        if len(children) < size - n_elite:
            children.append(task.mutate(c2, config.mutation_prob, rng, guided))
    for c in children:
        fit.append(task.fitness(c))
    return Population(nxt + children, np.array(fit, dtype=float))


def export_elites(pop: Population, count: int) -> list:
    """The ``count`` best distinct genomes (ties by insertion order)."""
    if count > len(pop):
        log.warning("requested %d elites from a population of %d; clamping", count, len(pop))
        count = len(pop)
    out, seen = [], set()
    for i in pop.order():
        c = pop.individuals[i]
        if c in seen:
            continue
        seen.add(c)
        out.append(c)
        if len(out) >= count:
            break
    return out


# --- baselines -------------------------------------------------------------

def ram_baseline(g: Graph, beta: int, rng) -> EditSet:
    """Random rewiring: each operation is an addition or a deletion with equal odds."""
    if beta > non_edge_count(g) + g.edge_count:
        raise BudgetError("infeasible budget")
    used: set = set()
    adds, dels = [], []
    for _ in range(beta):
        want_add = bool(rng.random() < 0.5)
        e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
        if e is None:
            want_add = not want_add
            e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
        used.add(e)
        (adds if want_add else dels).append(e)
    return EditSet(tuple(adds), tuple(dels))


def dice_baseline(g: Graph, p: Partition, beta: int, rng) -> EditSet:
    """Delete ceil(beta/2) intra-community edges and add floor(beta/2)
    inter-community non-edges; exhausted pools fall back to random rewiring."""
    if beta > non_edge_count(g) + g.edge_count:
        raise BudgetError("infeasible budget")
    lab = p.assignment
    intra = [e for e in g.edge_list if lab[e[0]] == lab[e[1]]]
    n_del = (beta + 1) // 2
    n_add = beta // 2
    used: set = set()
    dels = []
    if intra:
        picks = rng.permutation(len(intra))[:n_del]
        dels = [intra[i] for i in sorted(picks)]
        used.update(dels)
    adds = []
    n = g.node_count
    inter_free = sum(1 for u in range(n) for v in range(u + 1, n)
                     if lab[u] != lab[v] and (u, v) not in g.edges)
    tries = 0
    while len(adds) < n_add and len(adds) < inter_free and tries < 100 * (n_add + 1):
        tries += 1
        u, v = rng.integers(n, size=2)
        e = canon(int(u), int(v))
        if u == v or lab[u] == lab[v] or e in g.edges or e in used:
            continue
        adds.append(e)
        used.add(e)
    short = beta - len(adds) - len(dels)
    if short:
        for _ in range(short):
            want_add = bool(rng.random() < 0.5)
            e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
            if e is None:
                want_add = not want_add
                e = _fresh_non_edge(g, used, rng) if want_add else _fresh_edge(g, used, rng)
            used.add(e)
            (adds if want_add else dels).append(e)
    return EditSet(tuple(adds), tuple(dels))


def edit_script_lines(edits: EditSet) -> list[str]:
    return [f"+ {u} {v}" for u, v in edits.additions] + [f"- {u} {v}" for u, v in edits.deletions]


def parse_edit_script(lines: Sequence[str]):
    """Parse ``+ u v`` / ``- u v`` / ``seed u`` lines into an EditSet or a seed list."""
    adds, dels, seeds = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if tok[0] == "+" and len(tok) == 3:
            adds.append((int(tok[1]), int(tok[2])))
        elif tok[0] == "-" and len(tok) == 3:
            dels.append((int(tok[1]), int(tok[2])))
        elif tok[0] == "seed" and len(tok) == 2:
            seeds.append(int(tok[1]))
        else:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")
    if seeds and (adds or dels):
        raise ValueError("edit script mixes seeds and edge edits")
    if seeds:
        return seeds
    return EditSet(tuple(adds), tuple(dels))


TASKS: dict[str, Callable] = {"deception": DeceptionTask, "influence": InfluenceTask}

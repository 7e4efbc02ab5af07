"""Partition agreement scores and before/after structural indices for an edit set."""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .community import CommunityDetector, GreedyModularity, Partition, modularity
from .graph import EditSet, Graph, apply_edits


def _labels(p) -> np.ndarray:
    return p.assignment if isinstance(p, Partition) else Partition(p).assignment


def contingency(p1, p2) -> np.ndarray:
    a, b = _labels(p1), _labels(p2)
    if len(a) != len(b):
        raise ValueError(f"partitions cover {len(a)} and {len(b)} nodes")
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(p1, p2) -> float:
    """Normalised mutual information, 2 I / (H1 + H2); two single-cluster
    partitions score 1."""
    t = contingency(p1, p2)
    n = t.sum()
    h1 = _entropy(t.sum(axis=1), n)
    h2 = _entropy(t.sum(axis=0), n)
    if h1 + h2 == 0:
        return 1.0
    rows, cols = np.nonzero(t)
    nij = t[rows, cols].astype(float)
    mi = np.sum(nij / n * np.log(nij * n / (t.sum(axis=1)[rows] * t.sum(axis=0)[cols])))
    return float(min(1.0, max(0.0, 2.0 * mi / (h1 + h2))))


def ari(p1, p2) -> float:
    t = contingency(p1, p2)
    n = int(t.sum())

    def pairs(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(x * (x - 1) / 2))

    index = pairs(t)
    a, b = pairs(t.sum(axis=1)), pairs(t.sum(axis=0))
    total = n * (n - 1) / 2
    expected = a * b / total if total else 0.0
    top = (a + b) / 2
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))


# --- structural indices ----------------------------------------------------

def local_clustering(g: Graph) -> np.ndarray:
    nbrs = [set(a) for a in g.neighbors]
    out = np.zeros(g.node_count)
    for u in range(g.node_count):
        k = len(nbrs[u])
        if k < 2:
            continue
        links = sum(len(nbrs[v] & nbrs[u]) for v in nbrs[u]) / 2
        out[u] = 2 * links / (k * (k - 1))
    return out


def mean_clustering(g: Graph) -> float:
    return float(local_clustering(g).mean()) if g.node_count else 0.0


def _sparse(g: Graph) -> csr_matrix:
    rows = [u for u, v in g.edge_list] + [v for u, v in g.edge_list]
    cols = [v for u, v in g.edge_list] + [u for u, v in g.edge_list]
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.node_count, g.node_count))


def largest_component(g: Graph) -> np.ndarray:
    _, lab = connected_components(_sparse(g), directed=False)
    sizes = np.bincount(lab)
    return np.flatnonzero(lab == int(np.argmax(sizes)))


def avg_shortest_distance(g: Graph) -> float:
    """Mean hop distance over ordered pairs of the largest connected component."""
    nodes = largest_component(g)
    if len(nodes) < 2:
        return 0.0
    sub = _sparse(g)[nodes][:, nodes]
    d = shortest_path(sub, directed=False, unweighted=True)
    return float(d.sum() / (len(nodes) * (len(nodes) - 1)))


def betweenness(g: Graph) -> np.ndarray:
    """Brandes' accumulation, undirected, unnormalised (each pair counted once)."""
    n = g.node_count
    bc = np.zeros(n)
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1
        dist = np.full(n, -1)
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for w in g.neighbors[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / 2


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Power iteration; dangling nodes spread their mass uniformly."""
    n = g.node_count
    if n == 0:
        return np.zeros(0)
    deg = g.degrees.astype(float)
    A = _sparse(g)
    x = np.full(n, 1.0 / n)
    dangling = deg == 0
    inv = np.divide(1.0, deg, out=np.zeros(n), where=~dangling)
    for _ in range(max_iter):
        nxt = damping * (A @ (x * inv)) + (damping * x[dangling].sum() + 1 - damping) / n
        nxt /= nxt.sum()
        if np.abs(nxt - x).sum() < tol:
            return nxt
        x = nxt
    return x


def top_fraction(scores: np.ndarray, fraction: float = 0.2) -> list[int]:
    """Indices of the ceil(fraction * n) highest scores, ties to the smaller id."""
    k = math.ceil(fraction * len(scores) - 1e-9)
    keyed = np.round(np.asarray(scores, dtype=float), 12)
    return sorted(range(len(scores)), key=lambda u: (-keyed[u], u))[:k]


def top_overlap(before: np.ndarray, after: np.ndarray, fraction: float = 0.2) -> float:
    a = top_fraction(before, fraction)
    if not a:
        return 1.0
    return len(set(a) & set(top_fraction(after, fraction))) / len(a)


@dataclass(frozen=True)
class StructuralReport:
    edits_count: int
    clustering_before: float
    clustering_after: float
    asd_before: float
    asd_after: float
    top20_betweenness_overlap: float
    top20_pagerank_overlap: float
    modularity_before: float
    modularity_after: float


REPORT_HEADER = ["network", *StructuralReport.__dataclass_fields__]


def structural_report(g: Graph, edits: EditSet, detector: CommunityDetector | None = None) -> StructuralReport:
    detector = detector or GreedyModularity()
    h = apply_edits(g, edits)
    return StructuralReport(
        edits_count=len(edits),
        clustering_before=mean_clustering(g),
        clustering_after=mean_clustering(h),
        asd_before=avg_shortest_distance(g),
        asd_after=avg_shortest_distance(h),
        top20_betweenness_overlap=top_overlap(betweenness(g), betweenness(h)),
        top20_pagerank_overlap=top_overlap(pagerank(g), pagerank(h)),
        modularity_before=modularity(g, detector(g)),
        modularity_after=modularity(h, detector(h)),
    )


def write_report_csv(rows: dict, path) -> None:
    """``rows`` maps network name to StructuralReport; one CSV row each."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for name, rep in rows.items():
            w.writerow([name, *(repr(v) if isinstance(v, float) else v for v in asdict(rep).values())])

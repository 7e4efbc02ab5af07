"""Community-level graph similarity from degree-interval histograms.

Each community is summarised by a 5-bin histogram of member degrees scaled by
the network's maximum degree, computed on the plain graph and on its triangle
motif graph. Communities of two networks are matched greedily by
``exp(-Diff) + exp(-Diff_motif)``; the graph similarity is the mean matched
value divided by two.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .community import Partition, detect_greedy_modularity
from .graph import Graph, motif_weighted_graph

N_BINS = 5
BIN_WIDTH = 0.2
KL_EPS = 1e-6


@dataclass(frozen=True)
class DegreeHistogram:
    bins: np.ndarray
    community_size: int


@dataclass(frozen=True)
class AlignedCommunities:
    pairs: list
    values: list


@dataclass
class SimilarityMatrix:
    """Pairwise network similarity plus each network's assisted set.

    ``raw`` keeps the symmetric, un-normalised similarities; ``values`` is the
    live matrix whose rows are masked to the assisted sets and normalised.
    """

    values: np.ndarray
    assisted: list
    raw: np.ndarray | None = None
    aligned: dict = field(default_factory=dict)

    def row_probs(self, i: int) -> dict[int, float]:
        return {j: float(self.values[i, j]) for j in self.assisted[i]}


def _histogram_from_values(x: np.ndarray) -> np.ndarray:
    idx = np.minimum(np.floor(x / BIN_WIDTH + 1e-12).astype(np.int64), N_BINS - 1)
    return np.bincount(idx, minlength=N_BINS).astype(float) / len(x)


def degree_interval_histogram(community, g: Graph, weighted: bool = False) -> DegreeHistogram:
    """Histogram of member degrees normalised by the network-wide maximum.

    With ``weighted=True`` the (motif) weighted degree is used. A graph whose
    maximum degree is 0 puts every member in bin 0.
    """
    members = np.fromiter(community, dtype=np.int64)
    if len(members) == 0:
        raise ValueError("empty community")
    deg = g.weighted_degrees if weighted else g.degrees.astype(float)
    dmax = float(deg.max()) if len(deg) else 0.0
    x = deg[members] / dmax if dmax > 0 else np.zeros(len(members))
    return DegreeHistogram(_histogram_from_values(x), len(members))


def _smooth(p: np.ndarray) -> np.ndarray:
    q = p + KL_EPS
    return q / q.sum()


def symmetric_kl(p: np.ndarray, q: np.ndarray) -> float:
    p, q = _smooth(np.asarray(p, float)), _smooth(np.asarray(q, float))
    kl_pq = float(np.sum(p * np.log(p / q)))
    kl_qp = float(np.sum(q * np.log(q / p)))
    return 0.5 * (kl_pq + kl_qp)


def community_diff(ha: DegreeHistogram, hb: DegreeHistogram) -> float:
    ratio = max(ha.community_size / hb.community_size, hb.community_size / ha.community_size)
    return symmetric_kl(ha.bins, hb.bins) * ratio


def community_similarity(ca, cb, ga: Graph, gb: Graph, ga_motif: Graph, gb_motif: Graph) -> float:
    diff = community_diff(degree_interval_histogram(ca, ga), degree_interval_histogram(cb, gb))
    diff_m = community_diff(degree_interval_histogram(ca, ga_motif, weighted=True),
                            degree_interval_histogram(cb, gb_motif, weighted=True))
    return math.exp(-diff) + math.exp(-diff_m)


def align_communities(S) -> AlignedCommunities:
    """Greedy one-to-one matching: repeatedly take the global maximum (ties to
    the smallest (row, col)), then blank its row and column."""
    S = np.array(S, dtype=float)
    if (S < 0).any():
        raise ValueError("similarities must be non-negative")
    k, kp = S.shape
    active = np.ones_like(S, dtype=bool)
    pairs, values = [], []
    for _ in range(min(k, kp)):
        masked = np.where(active, S, -np.inf)
        flat = int(np.argmax(masked))  # first occurrence = smallest (row, col)
        i, j = divmod(flat, kp)
        pairs.append((i, j))
        values.append(float(S[i, j]))
        active[i, :] = False
        active[:, j] = False
    return AlignedCommunities(pairs, values)


@dataclass
class CommunityProfile:
    """Cached per-network data needed for similarity and anchor selection."""

    graph: Graph
    partition: Partition
    hist: list
    hist_motif: list

    @classmethod
    def build(cls, g: Graph, p: Partition | None = None) -> "CommunityProfile":
        if p is None:
            p = detect_greedy_modularity(g)
        gm = motif_weighted_graph(g)
        comms = p.communities
        hist = [degree_interval_histogram(c, g) for c in comms]
        hist_m = [degree_interval_histogram(c, gm, weighted=True) for c in comms]
        return cls(g, p, hist, hist_m)


def community_similarity_matrix(a: CommunityProfile, b: CommunityProfile) -> np.ndarray:
    S = np.empty((len(a.hist), len(b.hist)))
    for i, (h, hm) in enumerate(zip(a.hist, a.hist_motif)):
        for j, (h2, hm2) in enumerate(zip(b.hist, b.hist_motif)):
            S[i, j] = math.exp(-community_diff(h, h2)) + math.exp(-community_diff(hm, hm2))
    return S


def profile_similarity(a: CommunityProfile, b: CommunityProfile) -> tuple[float, AlignedCommunities]:
    aligned = align_communities(community_similarity_matrix(a, b))
    return float(np.mean(aligned.values)) / 2.0, aligned


def graph_similarity(ga: Graph, gb: Graph) -> float:
    return profile_similarity(CommunityProfile.build(ga), CommunityProfile.build(gb))[0]


def assisted_set_size(n_graphs: int) -> int:
    return max(1, int(round(math.sqrt(n_graphs))))


def similarity_from_raw(raw: np.ndarray, assisted_size: int | None = None) -> SimilarityMatrix:
    """Pick each row's top similar networks, zero the rest, normalise rows."""
    n = raw.shape[0]
    if n < 2:
        raise ValueError("need at least 2 networks")
    size = assisted_set_size(n) if assisted_size is None else assisted_size
    size = min(max(1, size), n - 1)
    values = np.zeros_like(raw, dtype=float)
    assisted = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        # stable sort: equal similarities keep index order
        others.sort(key=lambda j: -raw[i, j])
        chosen = sorted(others[:size])
        assisted.append(chosen)
        row = np.array([raw[i, j] for j in chosen], dtype=float)
        total = row.sum()
        row = row / total if total > 0 else np.full(len(chosen), 1.0 / len(chosen))
        values[i, chosen] = row
    return SimilarityMatrix(values, assisted, raw.copy())


def init_similarity_and_assisted(graphs: Sequence[Graph], assisted_size: int | None = None,
                                 profiles: Sequence[CommunityProfile] | None = None) -> SimilarityMatrix:
    if len(graphs) < 2:
        raise ValueError("need at least 2 networks")
    if profiles is None:
        profiles = [CommunityProfile.build(g) for g in graphs]
    n = len(graphs)
    raw = np.zeros((n, n))
    aligned = {}
    for i in range(n):
        for j in range(i + 1, n):
            s, al = profile_similarity(profiles[i], profiles[j])
            raw[i, j] = raw[j, i] = s
            aligned[(i, j)] = al
            aligned[(j, i)] = AlignedCommunities([(b, a) for a, b in al.pairs], list(al.values))
    sm = similarity_from_raw(raw, assisted_size)
    sm.aligned = aligned
    return sm


def write_similarity_csv(matrix: np.ndarray, names: Sequence[str], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["network", *names])
        for name, row in zip(names, matrix):
            w.writerow([name, *(f"{x:.12g}" for x in row)])

"""Community partitions, greedy modularity (CNM) detection and Newman modularity."""
from __future__ import annotations

import csv
from functools import cached_property
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
from numba import njit

from .graph import Graph


class Partition:
    """Hard partition of ``0..n-1``; community ids are contiguous from 0 and
    numbered by first appearance in node order."""

    __slots__ = ("assignment", "__dict__")

    def __init__(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        remap: dict[int, int] = {}
        out = np.empty(len(labels), dtype=np.int64)
        for i, c in enumerate(labels.tolist()):
            if c not in remap:
                remap[c] = len(remap)
            out[i] = remap[c]
        out.setflags(write=False)
        self.assignment = out

    @classmethod
    def from_communities(cls, communities, n: int | None = None) -> "Partition":
        if n is None:
            n = sum(len(c) for c in communities)
        labels = np.full(n, -1, dtype=np.int64)
        for ci, members in enumerate(communities):
            for u in members:
                if labels[u] != -1:
                    raise ValueError(f"node {u} assigned twice")
                labels[u] = ci
        if (labels < 0).any():
            raise ValueError("partition does not cover every node")
        return cls(labels)

    @property
    def node_count(self) -> int:
        return len(self.assignment)

    @property
    def k(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @cached_property
    def communities(self) -> list[tuple[int, ...]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for u, c in enumerate(self.assignment.tolist()):
            out[c].append(u)
        return [tuple(c) for c in out]

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def __len__(self):
        return self.k

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.assignment.tobytes())

    def __repr__(self):
        return f"Partition(n={self.node_count}, k={self.k})"


def write_partition_csv(p: Partition, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "community_id"])
        for u, c in enumerate(p.assignment.tolist()):
            w.writerow([u, c])


def read_partition_csv(path) -> Partition:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    labels = np.empty(len(rows), dtype=np.int64)
    for r in rows:
        labels[int(r["node_id"])] = int(r["community_id"])
    return Partition(labels)


# --- greedy modularity -----------------------------------------------------

_U64 = np.uint64


@njit(cache=True)
def _mix(x):
    # splitmix64 finalizer
    z = x + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True)
def _wl_colors(adj, rounds):
    n = adj.shape[0]
    c = np.empty(n, dtype=np.uint64)
    for i in range(n):
        d = 0
        for j in range(n):
            d += adj[i, j]
        c[i] = _mix(_U64(d))
    for r in range(rounds):
        new = np.empty(n, dtype=np.uint64)
        for i in range(n):
            s = _U64(0)
            for j in range(n):
                if adj[i, j] != 0:
                    s += _mix(c[j])
            new[i] = _mix(c[i] ^ _mix(s + _U64(r + 1)))
        c = new
    return c


@njit(cache=True)
def _better(v1, i1, j1, v2, i2, j2, sig):
    # Order: larger gain, then smaller structural signature pair, then smaller ids.
    if v1 != v2:
        return v1 > v2
    a1, b1 = sig[i1], sig[j1]
    if a1 > b1:
        a1, b1 = b1, a1
    a2, b2 = sig[i2], sig[j2]
    if a2 > b2:
        a2, b2 = b2, a2
    if a1 != a2:
        return a1 < a2
    if b1 != b2:
        return b1 < b2
    lo1, hi1 = min(i1, j1), max(i1, j1)
    lo2, hi2 = min(i2, j2), max(i2, j2)
    if lo1 != lo2:
        return lo1 < lo2
    return hi1 < hi2


@njit(cache=True)
def _rescan(i, L, d, m2, alive, sig, bv, bj):
    n = L.shape[0]
    bj[i] = -1
    bv[i] = 0
    for j in range(n):
        if j == i or not alive[j] or L[i, j] == 0:
            continue
        dq = m2 * L[i, j] - d[i] * d[j]
        if bj[i] < 0 or _better(dq, i, j, bv[i], i, bj[i], sig):
            bv[i] = dq
            bj[i] = j


@njit(cache=True, nogil=True)
def _cnm_labels(adj, structural=True):
    """CNM agglomeration on a dense 0/1 adjacency. Gains are kept as exact
    integers 2m*l_ij - d_i*d_j (= 2m^2 * dQ) so ties are exact. With
    ``structural`` false, equal gains go straight to the smallest id pair."""
    n = adj.shape[0]
    L = np.zeros((n, n), dtype=np.int64)
    d = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if adj[i, j] != 0 and i != j:
                L[i, j] = 1
                d[i] += 1
    m2 = d.sum()
    sig = _wl_colors(adj, 3) if structural else np.zeros(n, dtype=np.uint64)
    comm = np.arange(n)
    alive = np.ones(n, dtype=np.bool_)
    bv = np.zeros(n, dtype=np.int64)
    bj = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        _rescan(i, L, d, m2, alive, sig, bv, bj)
    while True:
        gi = -1
        for i in range(n):
            if alive[i] and bj[i] >= 0:
                if gi < 0 or _better(bv[i], i, bj[i], bv[gi], gi, bj[gi], sig):
                    gi = i
        if gi < 0 or bv[gi] <= 0:
            break
        a = min(gi, bj[gi])
        b = max(gi, bj[gi])
        for k in range(n):
            if k != a and k != b:
                L[a, k] += L[b, k]
                L[k, a] = L[a, k]
            L[b, k] = 0
            L[k, b] = 0
        L[a, a] = 0
        d[a] += d[b]
        sig[a] = sig[a] + sig[b]
        alive[b] = False
        bj[b] = -1
        for u in range(n):
            if comm[u] == b:
                comm[u] = a
        _rescan(a, L, d, m2, alive, sig, bv, bj)
        for k in range(n):
            if k == a or not alive[k] or L[k, a] == 0:
                continue
            if bj[k] == a or bj[k] == b:
                _rescan(k, L, d, m2, alive, sig, bv, bj)
            else:
                dq = m2 * L[k, a] - d[k] * d[a]
                if bj[k] < 0 or _better(dq, k, a, bv[k], k, bj[k], sig):
                    bv[k] = dq
                    bj[k] = a
    return comm


class CommunityDetector(Protocol):
    name: str

    def __call__(self, g: Graph) -> Partition: ...

    def labels_from_adjacency(self, adj: np.ndarray) -> np.ndarray: ...


class GreedyModularity:
    """FastGreedy / CNM attacker. Deterministic: merges the pair with the
    largest modularity gain. With ``ties="structural"`` (default) equal gains
    are resolved by a relabeling-invariant node signature and then by smallest
    ids; ``ties="id"`` uses the smallest id pair alone, which can make the
    partition depend on node numbering when the graph has many exact ties."""

    def __init__(self, ties: str = "structural"):
        if ties not in ("structural", "id"):
            raise ValueError(f"ties must be 'structural' or 'id', got {ties!r}")
        self.ties = ties
        self.name = "greedy" if ties == "structural" else "greedy-id"

    def __call__(self, g: Graph) -> Partition:
        if g.edge_count == 0:
            raise ValueError("modularity is undefined on an edgeless graph")
        return Partition(self.labels_from_adjacency(np.ascontiguousarray(g.adjacency)))

    def labels_from_adjacency(self, adj: np.ndarray) -> np.ndarray:
        return _cnm_labels(adj, self.ties == "structural")


class WalkTrap:
    """Extension slot for a WalkTrap attacker; not implemented."""

    name = "walktrap"

    def __call__(self, g: Graph) -> Partition:
        raise NotImplementedError("WalkTrap detector is not available in this build")

    def labels_from_adjacency(self, adj):
        raise NotImplementedError("WalkTrap detector is not available in this build")


DETECTORS: dict[str, Callable[[], CommunityDetector]] = {
    "greedy": GreedyModularity,
    "greedy-id": lambda: GreedyModularity(ties="id"),
    "walktrap": WalkTrap,
}


def get_detector(name: str) -> CommunityDetector:
    try:
        return DETECTORS[name]()
    except KeyError:
        raise ValueError(f"unknown detector {name!r}; choose from {sorted(DETECTORS)}") from None


def structural_colors(g: Graph, rounds: int = 3) -> np.ndarray:
    """Relabeling-invariant node colours (Weisfeiler-Lehman refinement, hashed)."""
    return _wl_colors(np.ascontiguousarray(g.adjacency), rounds)


def detect_greedy_modularity(g: Graph) -> Partition:
    return GreedyModularity()(g)


def modularity(g: Graph, p: Partition) -> float:
    if p.node_count != g.node_count:
        raise ValueError("partition does not cover the graph")
    m = g.edge_count
    if m == 0:
        return 0.0
    lab = p.assignment
    k = p.k
    intra = np.zeros(k)
    for u, v in g.edges:
        if lab[u] == lab[v]:
            intra[lab[u]] += 1
    deg_c = np.bincount(lab, weights=g.degrees.astype(float), minlength=k)
    return float(np.sum(intra / m - (deg_c / (2.0 * m)) ** 2))

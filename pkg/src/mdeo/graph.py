"""Immutable undirected graphs, edge-list I/O, edit application and triangle motif weighting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Edge = tuple[int, int]


class EdgeListParseError(ValueError):
    pass


class InvalidEditError(ValueError):
    def __init__(self, bad_additions, bad_deletions):
        self.bad_additions = list(bad_additions)
        self.bad_deletions = list(bad_deletions)
        super().__init__(
            f"invalid edits: additions already present {self.bad_additions}, "
            f"deletions absent {self.bad_deletions}"
        )


def canon(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..node_count-1``.

    ``edges`` holds canonical ``(u, v)`` pairs with ``u < v``. ``weights`` is
    optional; missing entries count as 1.0. ``labels`` keeps the original node
    tokens when the graph was read from a file.
    """

    node_count: int
    edges: frozenset
    weights: dict | None = None
    labels: tuple | None = None

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]], weights=None, labels=None):
        canon_edges = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) outside 0..{node_count - 1}")
            canon_edges.add(canon(u, v))
        w = None
        if weights is not None:
            w = {canon(*e): float(x) for e, x in weights.items()}
        return cls(node_count, frozenset(canon_edges), w, tuple(labels) if labels is not None else None)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.node_count == other.node_count and self.edges == other.edges
                and (self.weights or {}) == (other.weights or {}))

    def __hash__(self):
        return hash((self.node_count, self.edges))

    def __repr__(self):
        return f"Graph(n={self.node_count}, m={len(self.edges)})"

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return canon(u, v) in self.edges

    def weight(self, u: int, v: int) -> float:
        if self.weights is None:
            return 1.0
        return self.weights.get(canon(u, v), 1.0)

    @cached_property
    def edge_list(self) -> list[Edge]:
        return sorted(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.node_count, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        d.setflags(write=False)
        return d

    @cached_property
    def weighted_degrees(self) -> np.ndarray:
        d = np.zeros(self.node_count, dtype=float)
        for u, v in self.edges:
            w = self.weight(u, v)
            d[u] += w
            d[v] += w
        d.setflags(write=False)
        return d

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (int64, read-only)."""
        a = np.zeros((self.node_count, self.node_count), dtype=np.int64)
        if self.edges:
            e = np.array(self.edge_list, dtype=np.int64)
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        a.setflags(write=False)
        return a

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``u`` renamed to ``perm[u]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.node_count)):
            raise ValueError("perm must be a permutation of the node ids")
        w = None
        if self.weights is not None:
            w = {canon(perm[u], perm[v]): x for (u, v), x in self.weights.items()}
        return Graph.from_edges(self.node_count, [(perm[u], perm[v]) for u, v in self.edges], w)


@dataclass(frozen=True)
class EditSet:
    """Edge additions (E+) and deletions (E-) as canonical pairs."""

    additions: tuple = ()
    deletions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "additions", tuple(canon(*e) for e in self.additions))
        object.__setattr__(self, "deletions", tuple(canon(*e) for e in self.deletions))

    def __len__(self):
        return len(self.additions) + len(self.deletions)

    def inverse(self) -> "EditSet":
        return EditSet(self.deletions, self.additions)


def apply_edits(g: Graph, ops: EditSet) -> Graph:
    bad_add = [e for e in ops.additions if e in g.edges or e[0] == e[1]]
    bad_del = [e for e in ops.deletions if e not in g.edges]
    if bad_add or bad_del:
        raise InvalidEditError(bad_add, bad_del)
    edges = (g.edges | set(ops.additions)) - set(ops.deletions)
    return Graph(g.node_count, frozenset(edges), None, g.labels)


@dataclass
class EdgeListStats:
    lines: int = 0
    self_loops: int = 0
    duplicates: int = 0
    labels: list = field(default_factory=list)


def _dense_ids(tokens: list[str]) -> dict[str, int] | None:
    """Identity mapping when the tokens are exactly the integers 0..n-1."""
    n = len(tokens)
    if all(t.isdigit() and (t == "0" or not t.startswith("0")) for t in tokens):
        ids = {t: int(t) for t in tokens}
        if set(ids.values()) == set(range(n)):
            return ids
    return None


def parse_edge_list(lines: Iterable[str]) -> tuple[Graph, EdgeListStats]:
    """Parse edge-list lines. Tokens that are exactly the integers 0..n-1 keep
    their value as node id; any other labelling is re-indexed densely in order
    of first appearance."""
    stats = EdgeListStats()
    pairs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != 2:
            raise EdgeListParseError(f"line {lineno}: expected 2 tokens, got {len(toks)}")
        stats.lines += 1
        pairs.append(toks)
    seen: dict[str, int] = {}
    for a, b in pairs:
        seen.setdefault(a, len(seen))
        seen.setdefault(b, len(seen))
    index = _dense_ids(list(seen)) or seen
    stats.labels = sorted(index, key=index.__getitem__)
    edges: set[Edge] = set()
    for a, b in pairs:
        u, v = index[a], index[b]
        if u == v:
            stats.self_loops += 1
            continue
        e = canon(u, v)
        if e in edges:
            stats.duplicates += 1
            continue
        edges.add(e)
    g = Graph(len(index), frozenset(edges), None, tuple(stats.labels))
    return g, stats


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list (see :func:`parse_edge_list`);
    original tokens are kept in ``Graph.labels``."""
    path = Path(path)
    with path.open() as fh:
        g, stats = parse_edge_list(fh)
    if stats.self_loops or stats.duplicates:
        log.warning("%s: dropped %d self-loops and %d duplicate edges",
                    path, stats.self_loops, stats.duplicates)
    return g


def write_node_labels(g: Graph, path) -> None:
    """CSV ``node_id,label`` linking dense ids back to the input tokens."""
    labels = g.labels if g.labels is not None else [str(u) for u in range(g.node_count)]
    with Path(path).open("w") as fh:
        fh.write("node_id,label\n")
        for u, lab in enumerate(labels):
            fh.write(f"{u},{lab}\n")


def has_identity_labels(g: Graph) -> bool:
    return g.labels is None or all(lab == str(u) for u, lab in enumerate(g.labels))


def write_edge_list(g: Graph, path, use_labels: bool = False) -> None:
    with Path(path).open("w") as fh:
        for u, v in g.edge_list:
            if use_labels and g.labels is not None:
                fh.write(f"{g.labels[u]} {g.labels[v]}\n")
            else:
                fh.write(f"{u} {v}\n")


def motif_weighted_graph(g: Graph) -> Graph:
    """Triangle-motif graph: each edge weighted by the number of triangles
    through it; edges on no triangle are dropped."""
    if not g.edges:
        return Graph(g.node_count, frozenset(), {}, g.labels)
    a = g.adjacency
    common = a @ a
    weights = {}
    for u, v in g.edge_list:
        c = int(common[u, v])
        if c > 0:
            weights[(u, v)] = float(c)
    return Graph(g.node_count, frozenset(weights), weights, g.labels)

"""Bundled small networks and a planted-partition generator."""
from __future__ import annotations

from importlib import resources

import numpy as np

from .graph import Graph, parse_edge_list

BUILTIN = ("karate", "lesmis", "davis", "florentine")


def builtin_path(name: str):
    if name not in BUILTIN:
        raise ValueError(f"unknown builtin network {name!r}; choose from {BUILTIN}")
    return resources.files("mdeo") / "data" / f"{name}.txt"


def load_builtin(name: str) -> Graph:
    with resources.as_file(builtin_path(name)) as p:
        return parse_edge_list(p.read_text().splitlines())[0]


def planted_partition(groups: int, size: int, p_in: float, p_out: float, seed: int = 0,
                      connect: bool = True) -> tuple[Graph, np.ndarray]:
    """Stochastic block model with ``groups`` equal blocks of ``size`` nodes.

    Returns the graph and its planted block labels. With ``connect`` set,
    isolated nodes get one edge to a random member of their own block so that
    every node carries structure.
    """
    if not (0 <= p_out <= 1 and 0 <= p_in <= 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if groups < 1 or size < 2:
        raise ValueError("need at least one group of two nodes")
    rng = np.random.default_rng(seed)
    n = groups * size
    labels = np.repeat(np.arange(groups), size)
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = set(zip(iu[keep].tolist(), ju[keep].tolist()))
    if connect:
        deg = np.zeros(n, dtype=int)
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        for u in np.flatnonzero(deg == 0).tolist():
            block = [w for w in range(labels[u] * size, (labels[u] + 1) * size) if w != u]
            v = int(rng.choice(block))
            edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, sorted(edges)), labels

"""Anchor selection, dual affine embedding maps and nearest-neighbour node mappings."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chromosome import EdgeChromosome, RawEdgeSolution, RawSeedSolution, SeedChromosome
from .community import Partition, structural_colors
from .embedding import GaeHyper, TrainingDivergedError, train_gae
from .graph import Graph
from .similarity import AlignedCommunities


@dataclass
class AffineMap:
    W: np.ndarray
    b: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim))

    def __call__(self, E: np.ndarray) -> np.ndarray:
        return E @ self.W.T + self.b

    def copy(self) -> "AffineMap":
        return AffineMap(self.W.copy(), self.b.copy())


@dataclass
class AnchorSet:
    large_pairs: list = field(default_factory=list)
    # ((u, nbrs_u), (v, nbrs_v)) with len(nbrs_u) == len(nbrs_v) == k_s
    small_groups: list = field(default_factory=list)


@dataclass(frozen=True)
class AlignHyper:
    epochs: int = 500
    lr: float = 0.01
    seed: int = 0
    automap_reduction: str = "mean"  # "mean" or "sum" over nodes for the automapping term
    anchor_ties: str = "id"  # "id" or "structural" ordering among equal-degree anchor candidates

    def __post_init__(self):
        if self.automap_reduction not in ("mean", "sum"):
            raise ValueError(f"automap_reduction must be 'mean' or 'sum', got {self.automap_reduction!r}")
        if self.anchor_ties not in ("id", "structural"):
            raise ValueError(f"anchor_ties must be 'id' or 'structural', got {self.anchor_ties!r}")


def floor_log2(x: int) -> int:
    return int(x).bit_length() - 1 if x >= 1 else 0


def _rank_keys(g: Graph, ties: str = "id"):
    """Degree, then (with ``ties="structural"``) label-free tie-breakers
    (neighbour degree sum, WL colour); node id settles whatever remains."""
    deg = g.degrees.tolist()
    if ties == "id":
        zeros = [0] * g.node_count
        return deg, zeros, zeros
    nsum = [sum(deg[w] for w in g.neighbors[u]) for u in range(g.node_count)]
    colors = structural_colors(g).tolist()
    return deg, nsum, colors


def _by_degree(nodes, keys, descending: bool):
    deg, nsum, colors = keys
    if descending:
        return sorted(nodes, key=lambda u: (-deg[u], -nsum[u], colors[u], u))
    return sorted(nodes, key=lambda u: (deg[u], nsum[u], colors[u], u))


def select_anchors(aligned: AlignedCommunities, ga: Graph, gb: Graph,
                   pa: Partition, pb: Partition, ties: str = "id") -> AnchorSet:
    """Pair the i-th highest-degree nodes of each aligned community pair
    (k_l = floor(min(log2|C|, log2|C'|)) pairs), then for each such pair
    group the k_s least-degree neighbours on both sides."""
    da, db = _rank_keys(ga, ties), _rank_keys(gb, ties)
    ca, cb = pa.communities, pb.communities
    out = AnchorSet()
    for i, j in aligned.pairs:
        c, cp = ca[i], cb[j]
        k_l = min(floor_log2(len(c)), floor_log2(len(cp)))
        top_a = _by_degree(c, da, True)[:k_l]
        top_b = _by_degree(cp, db, True)[:k_l]
        for u, v in zip(top_a, top_b):
            out.large_pairs.append((u, v))
            nu, nv = ga.neighbors[u], gb.neighbors[v]
            k_s = min(floor_log2(len(nu)), floor_log2(len(nv)))
            if k_s > 0:
                out.small_groups.append(((u, tuple(_by_degree(nu, da, False)[:k_s])),
                                         (v, tuple(_by_degree(nv, db, False)[:k_s]))))
    return out


def _supervised_pairs(anchors: AnchorSet):
    """Flatten anchors into (src, dst, weight): large pairs weigh 1, every
    small-group cross combination weighs 1/k_s."""
    src, dst, w = [], [], []
    for u, v in anchors.large_pairs:
        src.append(u)
        dst.append(v)
        w.append(1.0)
    for (_, nu), (_, nv) in anchors.small_groups:
        ks = len(nu)
        for a in nu:
            for b in nv:
                src.append(a)
                dst.append(b)
                w.append(1.0 / ks)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(w)


def _mse_rows(X, Y):
    return np.mean((X - Y) ** 2, axis=1)


def alignment_losses(phi_ab: AffineMap, phi_ba: AffineMap, EA: np.ndarray, EB: np.ndarray,
                     anchors: AnchorSet, automap_reduction: str = "mean") -> tuple[float, float, float]:
    l_large = 0.0
    for u, v in anchors.large_pairs:
        l_large += float(_mse_rows(phi_ab(EA[[u]]), EB[[v]])[0] + _mse_rows(phi_ba(EB[[v]]), EA[[u]])[0])
    l_small = 0.0
    for (_, nu), (_, nv) in anchors.small_groups:
        ks = len(nu)
        A, B = EA[list(nu)], EB[list(nv)]
        fwd = phi_ab(A)
        bwd = phi_ba(B)
        s = 0.0
        for x in range(ks):
            s += float(np.sum(_mse_rows(np.repeat(fwd[[x]], ks, axis=0), B)))
            s += float(np.sum(_mse_rows(bwd, np.repeat(A[[x]], ks, axis=0))))
        l_small += s / ks
    reduce = np.mean if automap_reduction == "mean" else np.sum
    l_us = float(reduce(_mse_rows(phi_ba(phi_ab(EA)), EA)) + reduce(_mse_rows(phi_ab(phi_ba(EB)), EB)))
    return l_large, l_small, l_us


def total_loss_and_grads(phi_ab: AffineMap, phi_ba: AffineMap, EA, EB, pairs, automap_reduction: str = "mean"):
    """Vectorised total loss L_large + L_small + L_us with analytic gradients.
    ``pairs`` is the output of ``_supervised_pairs``."""
    src, dst, w = pairs
    d = EA.shape[1]
    gWab = np.zeros_like(phi_ab.W)
    gbab = np.zeros_like(phi_ab.b)
    gWba = np.zeros_like(phi_ba.W)
    gbba = np.zeros_like(phi_ba.b)
    loss = 0.0
    if len(src):
        P, Q = EA[src], EB[dst]
        R = phi_ab(P) - Q
        loss += float(np.sum(w * np.sum(R * R, axis=1)) / d)
        dR = (2.0 / d) * w[:, None] * R
        gWab += dR.T @ P
        gbab += dR.sum(axis=0)
        R = phi_ba(Q) - P
        loss += float(np.sum(w * np.sum(R * R, axis=1)) / d)
        dR = (2.0 / d) * w[:, None] * R
        gWba += dR.T @ Q
        gbba += dR.sum(axis=0)
    for E, f, g, gWf, gbf, gWg, gbg in ((EA, phi_ab, phi_ba, gWab, gbab, gWba, gbba),
                                        (EB, phi_ba, phi_ab, gWba, gbba, gWab, gbab)):
        scale = d * len(E) if automap_reduction == "mean" else d
        U = f(E)
        R = g(U) - E
        loss += float(np.sum(R * R) / scale)
        dV = (2.0 / scale) * R
        gWg += dV.T @ U
        gbg += dV.sum(axis=0)
        dU = dV @ g.W
        gWf += dU.T @ E
        gbf += dU.sum(axis=0)
    return loss, (gWab, gbab, gWba, gbba)


def train_alignment(EA: np.ndarray, EB: np.ndarray, anchors: AnchorSet, hyper: AlignHyper = AlignHyper(),
                    return_history: bool = False):
    """Full-batch gradient descent on the total alignment loss, starting from
    identity maps. ``history[0]`` is the initial loss."""
    if EA.shape[1] != EB.shape[1]:
        raise ValueError("embedding dimensions differ")
    d = EA.shape[1]
    ab, ba = AffineMap.identity(d), AffineMap.identity(d)
    pairs = _supervised_pairs(anchors)
    params = [ab.W, ab.b, ba.W, ba.b]
    history = []
    for _ in range(hyper.epochs):
        loss, grads = total_loss_and_grads(ab, ba, EA, EB, pairs, hyper.automap_reduction)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"alignment loss became {loss}; use a smaller learning rate")
        history.append(loss)
        for p, gr in zip(params, grads):
            p -= hyper.lr * gr
    final, _ = total_loss_and_grads(ab, ba, EA, EB, pairs, hyper.automap_reduction)
    if not np.isfinite(final):
        raise TrainingDivergedError("alignment loss diverged; use a smaller learning rate")
    history.append(final)
    if return_history:
        return ab, ba, history
    return ab, ba


def node_mapping(phi_ab: AffineMap, EA: np.ndarray, EB: np.ndarray, chunk: int = 256) -> np.ndarray:
    """M(u) = argmin_v ||phi(EA[u]) - EB[v]||, ties to the smallest v."""
    Y = phi_ab(EA)
    out = np.empty(len(Y), dtype=np.int64)
    for s in range(0, len(Y), chunk):
        block = Y[s:s + chunk]
        dist = np.sum((block[:, None, :] - EB[None, :, :]) ** 2, axis=2)
        out[s:s + chunk] = np.argmin(dist, axis=1)
    return out


def map_edge_solution(chrom, mapping) -> RawEdgeSolution | RawSeedSolution:
    """Translate a genome node-by-node; collapsed edges / repeated seeds are
    flagged for repair."""
    m = np.asarray(mapping)
    if isinstance(chrom, SeedChromosome):
        seeds = [int(m[s]) for s in chrom.seeds]
        seen, dup = set(), []
        for s in seeds:
            dup.append(s in seen)
            seen.add(s)
        return RawSeedSolution(seeds, dup, chrom.origin)
    if not isinstance(chrom, EdgeChromosome):
        raise TypeError(f"unsupported chromosome {type(chrom).__name__}")
    adds = [(int(m[u]), int(m[w])) for u, w in chrom.additions]
    dels = [(int(m[u]), int(m[w])) for u, w in chrom.deletions]
    degenerate = [a == b for a, b in adds + dels]
    return RawEdgeSolution(adds, dels, degenerate, chrom.origin)


def write_mapping_csv(mapping, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source_id", "target_id"])
        for u, v in enumerate(np.asarray(mapping).tolist()):
            w.writerow([u, v])


def save_affine_maps(maps: dict, path) -> None:
    """Store named affine maps in one ``.npz`` archive (keys ``<name>_W``/``<name>_b``)."""
    arrays = {}
    for name, amap in maps.items():
        arrays[f"{name}_W"] = amap.W
        arrays[f"{name}_b"] = amap.b
    np.savez(path, **arrays)


def load_affine_maps(path) -> dict:
    data = np.load(path)
    names = {k.rsplit("_", 1)[0] for k in data.files}
    return {n: AffineMap(data[f"{n}_W"], data[f"{n}_b"]) for n in names}


def top_degree_nodes(g: Graph, fraction: float = 0.1) -> np.ndarray:
    k = max(1, int(np.ceil(fraction * g.node_count - 1e-9)))
    return np.argsort(-g.degrees, kind="stable")[:k]


def self_alignment_accuracy(g: Graph, gae: GaeHyper = GaeHyper(), hyper: AlignHyper = AlignHyper(),
                            perm_seed: int = 0) -> float:
    """Align ``g`` with a randomly relabelled copy of itself and return the
    share of top-decile-degree nodes mapped onto their own image."""
    from .similarity import CommunityProfile, profile_similarity

    perm = np.random.default_rng(perm_seed).permutation(g.node_count)
    h = g.relabel(perm)
    pa, pb = CommunityProfile.build(g), CommunityProfile.build(h)
    _, aligned = profile_similarity(pa, pb)
    _, EA = train_gae(g, pa.partition, gae)
    _, EB = train_gae(h, pb.partition, gae)
    anchors = select_anchors(aligned, g, h, pa.partition, pb.partition, hyper.anchor_ties)
    ab, _ = train_alignment(EA, EB, anchors, hyper)
    mapping = node_mapping(ab, EA, EB)
    top = top_degree_nodes(g)
    return float(np.mean(mapping[top] == perm[top]))

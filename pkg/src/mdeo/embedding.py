"""Two-layer GCN autoencoder with an inner-product decoder, trained with
hand-written gradients on dense matrices."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .community import Partition
from .graph import Graph

FEATURE_DIM = 4
_CLIP = 1e-7


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class GaeHyper:
    hidden: int = 32
    embed_dim: int = 16
    epochs: int = 300
    learning_rate: float = 0.01
    seed: int = 0
    optimizer: str = "gd"  # "gd" (plain gradient descent) or "adam" (Adam with step rejection)

    def __post_init__(self):
        if self.optimizer not in ("gd", "adam"):
            raise ValueError(f"optimizer must be 'gd' or 'adam', got {self.optimizer!r}")


@dataclass
class GcnParams:
    W0: np.ndarray
    W1: np.ndarray

    def copy(self) -> "GcnParams":
        return GcnParams(self.W0.copy(), self.W1.copy())


def closeness(g: Graph) -> np.ndarray:
    """(s-1) / sum of BFS distances inside the node's component of size s."""
    n = g.node_count
    if n == 0:
        return np.zeros(0)
    a = csr_matrix(g.adjacency.astype(float))
    dist = shortest_path(a, directed=False, unweighted=True)
    finite = np.isfinite(dist)
    total = np.where(finite, dist, 0.0).sum(axis=1)
    reach = finite.sum(axis=1) - 1
    out = np.zeros(n)
    ok = total > 0
    out[ok] = reach[ok] / total[ok]
    return out


def build_features(g: Graph, p: Partition) -> np.ndarray:
    """Columns: degree / max degree, closeness, community size / |V|,
    fraction of a node's edges that stay inside its community."""
    if p.node_count != g.node_count:
        raise ValueError("partition does not cover the graph")
    n = g.node_count
    deg = g.degrees.astype(float)
    dmax = deg.max() if n else 0.0
    X = np.zeros((n, FEATURE_DIM))
    if dmax > 0:
        X[:, 0] = deg / dmax
    X[:, 1] = closeness(g)
    lab = p.assignment
    X[:, 2] = p.sizes[lab] / n
    intra = np.zeros(n)
    for u, v in g.edges:
        if lab[u] == lab[v]:
            intra[u] += 1
            intra[v] += 1
    nz = deg > 0
    X[nz, 3] = intra[nz] / deg[nz]
    return X


def normalized_adjacency(g: Graph) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2."""
    a = g.adjacency.astype(float) + np.eye(g.node_count)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def init_params(feature_dim: int, hidden: int, embed_dim: int, rng: np.random.Generator) -> GcnParams:
    b0 = 1.0 / np.sqrt(feature_dim)
    b1 = 1.0 / np.sqrt(hidden)
    return GcnParams(rng.uniform(-b0, b0, (feature_dim, hidden)),
                     rng.uniform(-b1, b1, (hidden, embed_dim)))


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def gae_forward(params: GcnParams, X: np.ndarray, A_norm: np.ndarray):
    """Return (Z, A_hat) with Z = A ReLU(A X W0) W1 and A_hat = sigmoid(Z Z^T)."""
    n = A_norm.shape[0]
    if A_norm.shape != (n, n) or X.shape[0] != n:
        raise ValueError(f"shape mismatch: A {A_norm.shape}, X {X.shape}")
    if params.W0.shape[0] != X.shape[1] or params.W1.shape[0] != params.W0.shape[1]:
        raise ValueError(f"shape mismatch: X {X.shape}, W0 {params.W0.shape}, W1 {params.W1.shape}")
    H = np.maximum(A_norm @ X @ params.W0, 0.0)
    Z = A_norm @ H @ params.W1
    return Z, _sigmoid(Z @ Z.T)


def positive_weight(A: np.ndarray) -> float:
    pos = float(A.sum())
    return (A.size - pos) / pos if pos > 0 else 1.0


def reconstruction_loss(A_hat: np.ndarray, A: np.ndarray) -> float:
    """Mean weighted binary cross-entropy over every entry; positive entries
    carry weight (N^2 - |pos|) / |pos|."""
    if A_hat.shape != A.shape:
        raise ValueError("shape mismatch")
    w = positive_weight(A)
    p = np.clip(A_hat, _CLIP, 1.0 - _CLIP)
    return float(np.mean(-(w * A * np.log(p) + (1.0 - A) * np.log(1.0 - p))))


def training_target(g: Graph) -> np.ndarray:
    return g.adjacency.astype(float) + np.eye(g.node_count)


def loss_and_grads(params: GcnParams, X, A_norm, A_target):
    """Loss computed from logits (numerically stable) and its exact gradient."""
    AX = A_norm @ X
    H0 = AX @ params.W0
    H = np.maximum(H0, 0.0)
    AH = A_norm @ H
    Z = AH @ params.W1
    S = Z @ Z.T
    w = positive_weight(A_target)
    N2 = S.size
    # -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s)
    loss = float(np.sum(w * A_target * np.logaddexp(0.0, -S) + (1.0 - A_target) * np.logaddexp(0.0, S)) / N2)
    sig = _sigmoid(S)
    G = (-w * A_target * (1.0 - sig) + (1.0 - A_target) * sig) / N2
    dZ = (G + G.T) @ Z
    dW1 = AH.T @ dZ
    dH = A_norm.T @ dZ @ params.W1.T
    dH0 = dH * (H0 > 0)
    dW0 = AX.T @ dH0
    return loss, GcnParams(dW0, dW1)


def train_gae(g: Graph, p: Partition, hyper: GaeHyper = GaeHyper(), X: np.ndarray | None = None,
              return_history: bool = False):
    """Full-batch training on the reconstruction loss.

    ``hyper.optimizer="gd"`` takes plain gradient steps. ``"adam"`` uses Adam;
    a step that raises the loss is undone and the step size halved, so its
    recorded loss never increases. Returns (params, Z) and, optionally, the
    per-epoch loss history (entry 0 = initial loss)."""
    if g.node_count == 0:
        raise ValueError("empty graph")
    rng = np.random.default_rng(hyper.seed)
    if X is None:
        X = build_features(g, p)
    A_norm = normalized_adjacency(g)
    target = training_target(g)
    params = init_params(X.shape[1], hyper.hidden, hyper.embed_dim, rng)
    m = GcnParams(np.zeros_like(params.W0), np.zeros_like(params.W1))
    v = GcnParams(np.zeros_like(params.W0), np.zeros_like(params.W1))
    b1, b2, eps = 0.9, 0.999, 1e-8
    lr = hyper.learning_rate
    history = []
    prev = None  # (loss, params, m, v) before the last accepted step
    t = 0
    for epoch in range(hyper.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = loss_and_grads(params, X, A_norm, target)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"GAE loss became {loss} at epoch {epoch}; use a smaller learning rate")
        if hyper.optimizer == "gd":
            history.append(loss)
            params = GcnParams(params.W0 - lr * grads.W0, params.W1 - lr * grads.W1)
            continue
        if prev is not None and loss > prev[0]:
            # reject the step that increased the loss and retry with half the step size
            loss, params, m, v = prev[0], prev[1].copy(), prev[2].copy(), prev[3].copy()
            grads = prev[4]
            lr *= 0.5
        history.append(loss)
        prev = (loss, params.copy(), m.copy(), v.copy(), grads)
        t += 1
        for name in ("W0", "W1"):
            gr = getattr(grads, name)
            mm = b1 * getattr(m, name) + (1 - b1) * gr
            vv = b2 * getattr(v, name) + (1 - b2) * gr * gr
            setattr(m, name, mm)
            setattr(v, name, vv)
            step = lr * (mm / (1 - b1 ** t)) / (np.sqrt(vv / (1 - b2 ** t)) + eps)
            setattr(params, name, getattr(params, name) - step)
    final_loss, _ = loss_and_grads(params, X, A_norm, target)
    if not np.isfinite(final_loss):
        raise TrainingDivergedError("GAE loss diverged; use a smaller learning rate")
    if prev is not None and final_loss > prev[0]:
        params, final_loss = prev[1], prev[0]
    history.append(final_loss)
    Z, _ = gae_forward(params, X, A_norm)
    if return_history:
        return params, Z, history
    return params, Z


def write_embeddings_csv(Z: np.ndarray, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", *(f"e_{i + 1}" for i in range(Z.shape[1]))])
        for u, row in enumerate(Z):
            w.writerow([u, *(repr(float(x)) for x in row)])


def read_embeddings_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    Z = np.zeros((len(rows), len(rows[0]) - 1))
    for r in rows:
        Z[int(r[0])] = [float(x) for x in r[1:]]
    return Z


_PARAM_MAGIC = "mdeo-gae-params v1"


def save_params(params: GcnParams, path) -> None:
    f, h = params.W0.shape
    e = params.W1.shape[1]
    with Path(path).open("w") as fh:
        fh.write(f"# {_PARAM_MAGIC} feature_dim={f} hidden={h} embed_dim={e}\n")
        np.savetxt(fh, params.W0, fmt="%.17g")
        np.savetxt(fh, params.W1, fmt="%.17g")


def load_params(path) -> GcnParams:
    with Path(path).open() as fh:
        header = fh.readline()
        if _PARAM_MAGIC not in header:
            raise ValueError(f"{path}: not a GAE parameter file")
        dims = dict(tok.split("=") for tok in header.split()[3:])
        f, h, e = int(dims["feature_dim"]), int(dims["hidden"]), int(dims["embed_dim"])
        rows = [[float(x) for x in line.split()] for line in fh if line.strip()]
    if len(rows) != f + h:
        raise ValueError(f"{path}: expected {f + h} rows, found {len(rows)}")
    return GcnParams(np.array(rows[:f]).reshape(f, h), np.array(rows[f:]).reshape(h, e))

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, random_graph
from mdeo.community import Partition, detect_greedy_modularity
from mdeo.embedding import (GaeHyper, GcnParams, TrainingDivergedError, build_features, closeness, gae_forward,
                            init_params, load_params, loss_and_grads, normalized_adjacency, positive_weight,
                            read_embeddings_csv, reconstruction_loss, save_params, train_gae, training_target,
                            write_embeddings_csv)
from mdeo.graph import Graph

STAR = Graph.from_edges(5, [(0, i) for i in range(1, 5)])
TWO_TRIANGLES = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def test_star_hub_degree_feature():
    X = build_features(STAR, Partition([0] * 5))
    assert X[0, 0] == 1.0 and X[1, 0] == 0.25


def test_intra_fraction_one_when_all_neighbours_inside():
    X = build_features(TWO_TRIANGLES, Partition([0, 0, 0, 1, 1, 1]))
    assert (X[:, 3] == 1.0).all()
    assert (X[:, 2] == 0.5).all()


def test_path_centre_closeness():
    path = Graph.from_edges(3, [(0, 1), (1, 2)])
    c = closeness(path)
    assert c[1] == 1.0  # 2 / (1 + 1)
    assert c[0] == pytest.approx(2 / 3)


def test_closeness_isolated_zero():
    assert closeness(Graph.from_edges(3, [(0, 1)]))[2] == 0.0


@given(graphs(max_nodes=25))
def test_features_in_unit_interval(g):
    X = build_features(g, Partition(np.arange(g.node_count) % 2))
    assert X.shape == (g.node_count, 4) and np.isfinite(X).all()
    assert (X >= 0).all() and (X <= 1).all()


def test_normalized_adjacency_single_edge():
    assert normalized_adjacency(Graph.from_edges(2, [(0, 1)])) == pytest.approx(np.full((2, 2), 0.5))


def test_isolated_node_diagonal_one():
    assert normalized_adjacency(Graph.from_edges(3, [(0, 1)]))[2, 2] == 1.0


@given(graphs(max_nodes=20))
def test_normalized_adjacency_symmetric(g):
    A = normalized_adjacency(g)
    assert np.array_equal(A, A.T) and np.isfinite(A).all()


def test_zero_weights_give_half():
    X = build_features(TWO_TRIANGLES, detect_greedy_modularity(TWO_TRIANGLES))
    Z, A_hat = gae_forward(GcnParams(np.zeros((4, 8)), np.zeros((8, 16))), X, normalized_adjacency(TWO_TRIANGLES))
    assert (Z == 0).all() and (A_hat == 0.5).all()


def test_forward_shape():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    p = init_params(4, 8, 16, np.random.default_rng(0))
    Z, A_hat = gae_forward(p, build_features(g, Partition([0, 0, 0])), normalized_adjacency(g))
    assert Z.shape == (3, 16) and A_hat.shape == (3, 3)
    assert ((A_hat > 0) & (A_hat < 1)).all()


def test_forward_shape_mismatch():
    with pytest.raises(ValueError):
        gae_forward(init_params(3, 8, 16, np.random.default_rng(0)), np.zeros((3, 4)), np.eye(3))


def test_forward_straight_line_oracle():
    rng = np.random.default_rng(5)
    X, W0, W1 = rng.random((6, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 3))
    g = random_graph(6, 0.5, 2)
    A = normalized_adjacency(g)
    # written out with explicit loops
    AX = [[sum(A[i, k] * X[k, j] for k in range(6)) for j in range(4)] for i in range(6)]
    H = [[max(0.0, sum(AX[i][k] * W0[k, j] for k in range(4))) for j in range(5)] for i in range(6)]
    AH = [[sum(A[i, k] * H[k][j] for k in range(6)) for j in range(5)] for i in range(6)]
    Z = np.array([[sum(AH[i][k] * W1[k, j] for k in range(5)) for j in range(3)] for i in range(6)])
    S = Z @ Z.T
    Z2, A_hat = gae_forward(GcnParams(W0, W1), X, A)
    assert np.abs(Z2 - Z).max() < 1e-12
    assert np.abs(A_hat - 1 / (1 + np.exp(-S))).max() < 1e-12


def test_perfect_reconstruction_near_zero():
    A = training_target(TWO_TRIANGLES)
    assert reconstruction_loss(A.copy(), A) < 1e-5


def test_half_prediction_closed_form():
    A = training_target(TWO_TRIANGLES)
    w = positive_weight(A)
    expected = math.log(2) * float(np.mean(w * A + (1 - A)))
    assert reconstruction_loss(np.full(A.shape, 0.5), A) == pytest.approx(expected, rel=1e-12)


@given(st.integers(0, 10_000))
def test_loss_non_negative(seed):
    rng = np.random.default_rng(seed)
    A = (rng.random((7, 7)) < 0.3).astype(float)
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 1)
    assert reconstruction_loss(rng.random((7, 7)), A) >= 0


def _fd_grads(params, X, A_norm, target, h=1e-5):
    out = []
    for name in ("W0", "W1"):
        W = getattr(params, name)
        G = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            old = W[idx]
            W[idx] = old + h
            lp, _ = loss_and_grads(params, X, A_norm, target)
            W[idx] = old - h
            lm, _ = loss_and_grads(params, X, A_norm, target)
            W[idx] = old
            G[idx] = (lp - lm) / (2 * h)
        out.append(G)
    return out


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    g = random_graph(n, 0.45, seed)
    X = build_features(g, Partition(rng.integers(0, 2, n)))
    A_norm = normalized_adjacency(g)
    params = init_params(4, 6, 5, rng)
    _, grads = loss_and_grads(params, X, A_norm, training_target(g))
    fd0, fd1 = _fd_grads(params, X, A_norm, training_target(g))
    assert _rel(grads.W0, fd0) < 1e-4
    assert _rel(grads.W1, fd1) < 1e-4


def test_logit_loss_agrees_with_probability_loss(karate):
    p = detect_greedy_modularity(karate)
    params = init_params(4, 32, 16, np.random.default_rng(0))
    X, A = build_features(karate, p), normalized_adjacency(karate)
    loss, _ = loss_and_grads(params, X, A, training_target(karate))
    assert loss == pytest.approx(reconstruction_loss(gae_forward(params, X, A)[1], training_target(karate)), rel=1e-6)


def test_training_two_triangles_decreases():
    p = detect_greedy_modularity(TWO_TRIANGLES)
    _, _, hist = train_gae(TWO_TRIANGLES, p, GaeHyper(epochs=200, learning_rate=0.01), return_history=True)
    assert hist[-1] < hist[0]


def test_training_windowed_mean_decreases(karate):
    _, _, hist = train_gae(karate, detect_greedy_modularity(karate), GaeHyper(), return_history=True)
    windows = [np.mean(hist[i:i + 10]) for i in range(0, 300, 10)]
    assert all(b <= a + 1e-12 for a, b in zip(windows, windows[1:]))


@pytest.mark.parametrize("name", ["lesmis", "davis"])
def test_plain_descent_monotone_on_real_networks(name):
    from mdeo.datasets import load_builtin
    g = load_builtin(name)
    _, _, hist = train_gae(g, detect_greedy_modularity(g), GaeHyper(), return_history=True)
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_adam_option_never_records_an_increase(karate):
    hyper = GaeHyper(optimizer="adam", epochs=200)
    _, Z1, hist = train_gae(karate, detect_greedy_modularity(karate), hyper, return_history=True)
    assert all(b <= a for a, b in zip(hist, hist[1:])) and hist[-1] < hist[0]
    _, Z2 = train_gae(karate, detect_greedy_modularity(karate), hyper)
    assert Z1.tobytes() == Z2.tobytes()
    with pytest.raises(ValueError):
        GaeHyper(optimizer="sgd-momentum")


def test_training_deterministic(karate):
    p = detect_greedy_modularity(karate)
    _, Z1 = train_gae(karate, p, GaeHyper(epochs=50, seed=3))
    _, Z2 = train_gae(karate, p, GaeHyper(epochs=50, seed=3))
    assert Z1.tobytes() == Z2.tobytes()


def test_divergence_reported(karate):
    with pytest.raises(TrainingDivergedError, match="learning rate"):
        train_gae(karate, detect_greedy_modularity(karate), GaeHyper(epochs=50, learning_rate=1e300))


def test_star_leaves_cluster_together():
    star = Graph.from_edges(7, [(0, i) for i in range(1, 7)])
    p = Partition([0] * 7)
    ok = 0
    for seed in range(10):
        _, Z = train_gae(star, p, GaeHyper(seed=seed))
        leaves = Z[1:]
        d_leaf = max(np.linalg.norm(a - b) for a in leaves for b in leaves)
        d_hub = min(np.linalg.norm(a - Z[0]) for a in leaves)
        ok += d_leaf < d_hub
    assert ok >= 9


def test_embedding_and_param_io(tmp_path, karate):
    params, Z = train_gae(karate, detect_greedy_modularity(karate), GaeHyper(epochs=5))
    write_embeddings_csv(Z, tmp_path / "z.csv")
    assert (tmp_path / "z.csv").read_text().startswith("node_id,e_1,")
    assert np.array_equal(read_embeddings_csv(tmp_path / "z.csv"), Z)
    save_params(params, tmp_path / "p.txt")
    back = load_params(tmp_path / "p.txt")
    assert np.array_equal(back.W0, params.W0) and np.array_equal(back.W1, params.W1)
    (tmp_path / "bad.txt").write_text("hello\n")
    with pytest.raises(ValueError):
        load_params(tmp_path / "bad.txt")

"""End-to-end acceptance checks. Each test prints one PASS/FAIL line.

The deception and influence batches are run once per module and shared.
Expect several minutes of runtime; deselect with ``-m "not slow"``.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

import mdeo.orchestrator as orch
from conftest import random_graph, record_criterion
from mdeo.alignment import AnchorSet, node_mapping, self_alignment_accuracy, total_loss_and_grads
from mdeo.chromosome import RawEdgeSolution, RawSeedSolution
from mdeo.community import Partition
from mdeo.embedding import (GaeHyper, build_features, init_params, loss_and_grads, normalized_adjacency, train_gae,
                            training_target)
from mdeo.evo import GuidedCandidates, InfluenceTask, DeceptionTask
from mdeo.experiments import (DECEPTION_BUDGETS, best_run_solution, deception_config, deception_effect,
                              deception_networks, influence_config, run_batch, warm_up)
from mdeo.datasets import load_builtin
from mdeo.graph import Graph, motif_weighted_graph
from mdeo.metrics import ari, nmi
from mdeo.similarity import (align_communities, degree_interval_histogram, graph_similarity,
                             init_similarity_and_assisted, symmetric_kl)

pytestmark = pytest.mark.slow

SEEDS = range(10)


@pytest.fixture(scope="module")
def deception():
    nets = deception_networks()
    graphs = list(nets.values())
    base = deception_config()
    warm_up(graphs, base)
    watch = {"row_sums": [], "transferred": 0, "invalid_transferred": 0}

    real_update = orch.update_similarity
    real_transfer = orch.perform_transfer

    def update(values, i, contributions, assisted):
        out = real_update(values, i, contributions, assisted)
        watch["row_sums"].append(float(values[i, list(assisted)].sum()))
        return out

    def transfer(target, snapshot, *args, **kwargs):
        before = len(target.population)
        events = real_transfer(target, snapshot, *args, **kwargs)
        fresh = target.population.individuals[before:]
        watch["transferred"] += len(fresh)
        watch["invalid_transferred"] += sum(not c.is_valid(target.graph, target.task.beta) for c in fresh)
        return events

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(orch, "update_similarity", update)
        mp.setattr(orch, "perform_transfer", transfer)
        batch = run_batch(graphs, base, SEEDS)
    return nets, base, batch, watch


@pytest.fixture(scope="module")
def influence():
    base = influence_config()
    graphs = [load_builtin(n.name) for n in base.networks]
    return base, run_batch(graphs, base, SEEDS)


def _fmt(values):
    return "/".join(f"{v:.4f}" for v in values)


def test_criterion_1_mdeo_not_worse_than_sdeo(deception):
    _, _, batch, _ = deception
    m, s = batch.final_best("mdeo").mean(axis=0), batch.final_best("sdeo").mean(axis=0)
    ge, gt = int(np.sum(m >= s)), int(np.sum(m > s))
    ok = ge >= 3 and gt >= 2
    record_criterion(1, ok, f"networks {'/'.join(batch.names)}; MDEO mean {_fmt(m)}; SDEO mean {_fmt(s)}; "
                            f">= on {ge}/4 (need 3), > on {gt}/4 (need 2)")
    assert ok


def test_criterion_2_transfer_overhead(deception):
    _, _, batch, _ = deception
    tm, ts = batch.wall_clock("mdeo"), batch.wall_clock("sdeo")
    ratio = tm / ts
    record_criterion(2, ratio <= 1.3, f"MDEO {tm:.1f}s vs SDEO {ts:.1f}s over {len(SEEDS)} seeds; "
                                      f"ratio {ratio:.3f} (limit 1.3)")
    assert ratio <= 1.3


def test_criterion_3_deception_direction(deception):
    nets, _, batch, _ = deception
    beats, drops, parts = 0, 0, []
    for name, g in nets.items():
        best = best_run_solution(batch.mdeo, name)
        eff = deception_effect(g, best.edit_set(), DECEPTION_BUDGETS[name])
        beats += eff.beats_ram
        drops += eff.modularity_after < eff.modularity_before
        parts.append(f"{name}: NMI {eff.nmi:.3f} (RAM {eff.ram_nmi:.3f}) ARI {eff.ari:.3f} (RAM {eff.ram_ari:.3f}) "
                     f"Q {eff.modularity_before:.3f}->{eff.modularity_after:.3f}")
    ok = beats >= 3 and drops == len(nets)
    record_criterion(3, ok, f"below RAM on {beats}/4 (need 3), modularity down on {drops}/4; " + "; ".join(parts))
    assert ok


def test_criterion_4_influence_non_inferior(influence):
    _, batch = influence
    m, s = batch.final_best("mdeo").mean(axis=0), batch.final_best("sdeo").mean(axis=0)
    ok = bool(np.all(m >= s - 1.0))
    record_criterion(4, ok, f"networks {'/'.join(batch.names)}, k=10; MDEO spread {_fmt(m)}; SDEO spread {_fmt(s)}; "
                            "tolerance 1 node")
    assert ok


# --- criterion 5: oracle suites -------------------------------------------

def _hand_histogram(community, degrees):
    top = max(degrees)
    counts = [0] * 5
    for u in community:
        frac = Fraction(int(degrees[u]), int(top)) if top else Fraction(0)
        counts[min(4, math.floor(frac * 5))] += 1
    return [c / len(community) for c in counts]


def _scripted_kl(p, q, eps=1e-6):
    p = [x + eps for x in p]
    q = [x + eps for x in q]
    p = [x / sum(p) for x in p]
    q = [x / sum(q) for x in q]
    return 0.5 * (sum(a * math.log(a / b) for a, b in zip(p, q)) + sum(b * math.log(b / a) for a, b in zip(p, q)))


def _scripted_greedy(S):
    rows, cols, out = set(range(len(S))), set(range(len(S[0]))), []
    while rows and cols:
        _, i, j = max((S[i][j], -i, -j) for i in rows for j in cols)
        out.append((-i, -j))
        rows.discard(-i)
        cols.discard(-j)
    return out


def _table_nmi_ari(a, b):
    n = len(a)
    la, lb = sorted(set(a)), sorted(set(b))
    table = [[sum(1 for x, y in zip(a, b) if x == r and y == c) for c in lb] for r in la]
    rows, cols = [sum(r) for r in table], [sum(c) for c in zip(*table)]
    h = lambda counts: -sum(c / n * math.log(c / n) for c in counts if c)  # noqa: E731
    mi = sum(t / n * math.log(t * n / (rows[r] * cols[c]))
             for r, row in enumerate(table) for c, t in enumerate(row) if t)
    nmi_val = 1.0 if h(rows) + h(cols) == 0 else 2 * mi / (h(rows) + h(cols))
    comb = lambda x: x * (x - 1) / 2  # noqa: E731
    idx = sum(comb(t) for row in table for t in row)
    ea, eb = sum(map(comb, rows)), sum(map(comb, cols))
    exp = ea * eb / comb(n)
    ari_val = 1.0 if (ea + eb) / 2 == exp else (idx - exp) / ((ea + eb) / 2 - exp)
    return nmi_val, ari_val


def test_criterion_5_oracle_suites():
    rng = np.random.default_rng(2024)
    failures = {}

    def fail(name):
        failures[name] = failures.get(name, 0) + 1

    for t in range(200):
        g = random_graph(int(rng.integers(5, 30)), float(rng.uniform(0.1, 0.6)), t)
        if g.edge_count == 0:
            continue
        comm = sorted(rng.choice(g.node_count, int(rng.integers(1, g.node_count + 1)), replace=False).tolist())
        if degree_interval_histogram(comm, g).bins.tolist() != _hand_histogram(comm, g.degrees):
            fail("histogram")
        p, q = rng.random(5) * (rng.random(5) < 0.7), rng.random(5)
        if p.sum() > 0:
            p, q = p / p.sum(), q / q.sum()
            if abs(symmetric_kl(p, q) - _scripted_kl(p, q)) > 1e-9:
                fail("symmetric KL")
        S = rng.choice([0.0, 0.5, 1.0, 1.5, rng.random()], size=tuple(rng.integers(1, 7, 2)))
        if align_communities(S).pairs != _scripted_greedy(S.tolist()):
            fail("community alignment")
        n = int(rng.integers(2, 40))
        a, b = rng.integers(0, 5, n).tolist(), rng.integers(0, 5, n).tolist()
        want = _table_nmi_ari(a, b)
        if abs(nmi(a, b) - want[0]) > 1e-9 or abs(ari(a, b) - want[1]) > 1e-9:
            fail("NMI/ARI")
        EA, EB = rng.integers(-3, 4, (n, 3)).astype(float), rng.integers(-3, 4, (int(rng.integers(1, 30)), 3)).astype(float)
        from mdeo.alignment import AffineMap
        amap = AffineMap(rng.integers(-1, 2, (3, 3)).astype(float), rng.integers(-1, 2, 3).astype(float))
        mapped = EA @ amap.W.T + amap.b
        scan = [min(range(len(EB)), key=lambda v: (float(np.sum((y - EB[v]) ** 2)), v)) for y in mapped]
        if node_mapping(amap, EA, EB, chunk=5).tolist() != scan:
            fail("nearest neighbour")
        m = motif_weighted_graph(g)
        nb = [set(x) for x in g.neighbors]
        for u, v in g.edge_list:
            c = len(nb[u] & nb[v])
            if (m.weight(u, v) if m.has_edge(u, v) else 0) != c:
                fail("motif weights")
    names = ["histogram", "symmetric KL", "community alignment", "NMI/ARI", "nearest neighbour", "motif weights"]
    ok = not failures
    record_criterion(5, ok, "200 random instances each: " +
                     ", ".join(f"{k} {'ok' if k not in failures else str(failures[k]) + ' mismatches'}" for k in names))
    assert ok


# --- criterion 6: numerical checks ----------------------------------------

def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def _central_diff(loss, arrays, h=1e-5):
    out = []
    for P in arrays:
        G = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + h
            lp = loss()
            P[idx] = old - h
            lm = loss()
            P[idx] = old
            G[idx] = (lp - lm) / (2 * h)
        out.append(G)
    return out


def _gae_gradient_error(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 10))
    g = random_graph(n, 0.45, 500 + seed)
    X = build_features(g, Partition(rng.integers(0, 2, n)))
    A_norm, target = normalized_adjacency(g), training_target(g)
    params = init_params(4, 6, 5, rng)
    _, grads = loss_and_grads(params, X, A_norm, target)
    fd = _central_diff(lambda: loss_and_grads(params, X, A_norm, target)[0], [params.W0, params.W1])
    return max(_rel(grads.W0, fd[0]), _rel(grads.W1, fd[1]))


def _alignment_gradient_error(seed):
    from mdeo.alignment import AffineMap, _supervised_pairs
    rng = np.random.default_rng(seed)
    d, na, nb = 4, int(rng.integers(6, 12)), int(rng.integers(6, 12))
    EA, EB = rng.normal(size=(na, d)), rng.normal(size=(nb, d))
    anchors = AnchorSet([(int(rng.integers(na)), int(rng.integers(nb))) for _ in range(3)],
                        [((0, (0, 1)), (0, (2, 3)))])
    ab = AffineMap(np.eye(d) + 0.3 * rng.normal(size=(d, d)), 0.2 * rng.normal(size=d))
    ba = AffineMap(np.eye(d) + 0.3 * rng.normal(size=(d, d)), 0.2 * rng.normal(size=d))
    pairs = _supervised_pairs(anchors)
    _, grads = total_loss_and_grads(ab, ba, EA, EB, pairs)
    fd = _central_diff(lambda: total_loss_and_grads(ab, ba, EA, EB, pairs)[0], [ab.W, ab.b, ba.W, ba.b])
    return max(_rel(gr, f) for gr, f in zip(grads, fd))


def test_criterion_6_numerical_checks():
    gae_err = max(_gae_gradient_error(s) for s in range(25))
    align_err = max(_alignment_gradient_error(s) for s in range(25))
    decreases = []
    for name, g in deception_networks().items():
        from mdeo.community import detect_greedy_modularity
        _, _, hist = train_gae(g, detect_greedy_modularity(g), GaeHyper(), return_history=True)
        decreases.append(hist[-1] < hist[0] and all(b <= a for a, b in zip(hist, hist[1:])))
    accuracy = {name: float(np.mean([self_alignment_accuracy(g, GaeHyper(seed=s), perm_seed=s) for s in range(5)]))
                for name, g in deception_networks().items()}
    ok = gae_err < 1e-4 and align_err < 1e-4 and all(decreases) and min(accuracy.values()) >= 0.8
    record_criterion(6, ok, f"max rel. gradient error GAE {gae_err:.2e}, alignment {align_err:.2e} (25 instances each, "
                            f"limit 1e-4); GAE loss decreasing on {sum(decreases)}/4; self-alignment "
                            + ", ".join(f"{k} {v:.3f}" for k, v in accuracy.items()) + " (limit 0.8)")
    assert ok


# --- criterion 7: structural invariants -----------------------------------

def _fuzz_operators(cases: int, seed: int = 7):
    """Cross, mutate (plain and guided, with hostile pools) and repair random
    genomes; return (checked, violations)."""
    rng = np.random.default_rng(seed)
    tasks = []
    for name, g in deception_networks().items():
        p = Partition(np.zeros(g.node_count, dtype=int))
        tasks.append(DeceptionTask(g, DECEPTION_BUDGETS[name], base=p))
    tasks.append(DeceptionTask(Graph.from_edges(5, [(0, 1), (1, 2), (2, 3)]), 6, base=Partition([0] * 5)))
    tasks.append(InfluenceTask(load_builtin("karate"), 10))
    checked = violations = 0
    while checked < cases:
        task = tasks[int(rng.integers(len(tasks)))]
        g, n = task.graph, task.graph.node_count
        a, b = task.random_chromosome(rng), task.random_chromosome(rng)
        if task.kind == "deception":
            junk = [tuple(int(x) for x in rng.integers(0, n, 2)) for _ in range(6)]
            guided = GuidedCandidates({0: (junk[:3] + list(a.deletions), junk[3:] + list(b.additions))}, {0: 1.0})
            raw = RawEdgeSolution(junk[:4], junk[2:] + list(a.deletions), [False] * 6)
            beta = task.beta
        else:
            guided = GuidedCandidates({0: (rng.integers(0, n, 5).tolist(), ())}, {0: 1.0})
            raw = RawSeedSolution(rng.integers(0, n, 12).tolist(), [False] * 12)
            beta = task.beta
        outputs = [*task.crossover(a, b, 1.0, rng), task.mutate(a, 1.0, rng), task.mutate(b, 1.0, rng, guided),
                   task.repair(raw, rng)]
        for c in outputs:
            checked += 1
            violations += not c.is_valid(g, beta)
    return checked, violations


def test_criterion_7_structural_invariants(deception):
    nets, _, batch, watch = deception
    graphs = list(nets.values())
    self_sim = max(abs(graph_similarity(g, g) - 1) for g in graphs)
    raw = init_similarity_and_assisted(graphs).raw
    asym = float(np.max(np.abs(raw - raw.T)))
    row_dev = max((abs(s - 1) for s in watch["row_sums"]), default=0.0)
    monotone = all(all(b >= a for a, b in zip(r.history, r.history[1:]))
                   for run in batch.mdeo + batch.sdeo for r in run.networks)
    checked, violations = _fuzz_operators(100_000)
    ok = (self_sim <= 1e-9 and asym <= 1e-9 and row_dev <= 1e-9 and monotone and violations == 0
          and watch["invalid_transferred"] == 0 and len(watch["row_sums"]) > 0)
    record_criterion(7, ok, f"|sim(g,g)-1| {self_sim:.1e}; asymmetry {asym:.1e}; {len(watch['row_sums'])} similarity "
                            f"updates, max |row sum-1| {row_dev:.1e}; elitism monotone {monotone}; "
                            f"{watch['transferred']} transferred genomes, {watch['invalid_transferred']} invalid; "
                            f"operator fuzz {checked} cases, {violations} violations")
    assert ok


def test_criterion_8_sdeo_equivalence(deception, tmp_path):
    nets, base, batch, _ = deception
    graphs = list(nets.values())
    cfg = base.with_(seed=SEEDS[0], transfer=base.transfer.__class__(enabled=False))
    orch.write_outputs(orch.run_mdeo(graphs, cfg), tmp_path / "mdeo_off")
    orch.write_outputs(batch.sdeo[0], tmp_path / "sdeo")
    files = sorted(p.relative_to(tmp_path / "sdeo") for p in (tmp_path / "sdeo").rglob("*") if p.is_file())
    same = [(tmp_path / "mdeo_off" / f).read_bytes() == (tmp_path / "sdeo" / f).read_bytes() for f in files]
    ok = all(same) and len(files) >= 3
    record_criterion(8, ok, f"{sum(same)}/{len(files)} output files byte-identical (seed {SEEDS[0]}, 200 generations)")
    assert ok

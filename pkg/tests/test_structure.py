import itertools
import json
import math
from collections import Counter

import numpy as np
import pydot
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causaldelay.errors import EstimationError, GraphError
from causaldelay.structure import (
    Dag,
    FamilyScorer,
    Move,
    Pdag,
    SepSets,
    TabuList,
    apply_orientation_rules,
    bic_score,
    discretize,
    export_dot,
    fisher_z_test,
    from_codes,
    graph_from_record,
    graph_record,
    hill_climb,
    k2_score,
    markov_equivalent,
    neighbor_moves,
    neighbors,
    orient_v_structures,
    parameter_count,
    partial_correlation,
    pc,
    pc_skeleton,
    tabu_search,
)
from causaldelay.synthgen import default_maritime_scm, generate
from conftest import CHAIN_COLLIDER, CHAIN_COLLIDER_ORDER, chain_collider_data, linear_gaussian_sem

NAMES3 = ("A", "B", "C")


# ---------------------------------------------------------------- oracles


def count_scores(dag, codes, names):
    """K2 and BIC by explicit counting over observed parent configurations."""
    n = codes.shape[0]
    col = {v: codes[:, i] for i, v in enumerate(names)}
    k2 = bic = 0.0
    for v in dag.nodes:
        ps = sorted(dag.parents(v))
        r = len(np.unique(col[v]))
        q = math.prod(len(np.unique(col[p])) for p in ps)
        table = Counter()
        totals = Counter()
        for row in range(n):
            cfg = tuple(int(col[p][row]) for p in ps)
            table[cfg, int(col[v][row])] += 1
            totals[cfg] += 1
        for cfg, n_j in totals.items():
            k2 += math.lgamma(r) - math.lgamma(n_j + r)
        for (cfg, _), n_jk in table.items():
            k2 += math.lgamma(n_jk + 1)
            bic += n_jk * math.log(n_jk / totals[cfg])
        bic -= 0.5 * (r - 1) * q * math.log(n)
    return k2, bic


def brute_moves(dag, max_parents):
    out = set()
    for a, b in itertools.permutations(dag.nodes, 2):
        for kind in ("add", "remove", "reverse"):
            try:
                g = dag.apply(Move(kind, (a, b)))
            except GraphError:
                continue
            if g.is_acyclic() and all(len(g.parents(v)) <= max_parents for v in g.nodes):
                out.add(Move(kind, (a, b)))
    return out


def all_dags(nodes):
    pairs = list(itertools.combinations(nodes, 2))
    for choice in itertools.product((None, 0, 1), repeat=len(pairs)):
        edges = [(a, b) if c == 0 else (b, a) for (a, b), c in zip(pairs, choice) if c is not None]
        try:
            yield Dag(nodes, edges)
        except GraphError:
            continue


@st.composite
def random_dags(draw, max_nodes=5):
    k = draw(st.integers(2, max_nodes))
    nodes = tuple(f"v{i}" for i in range(k))
    order = draw(st.permutations(nodes))
    edges = [(order[i], order[j]) for i in range(k) for j in range(i + 1, k) if draw(st.booleans())]
    dag = Dag(nodes)
    for a, b in edges:
        if len(dag.parents(b)) < 3:
            dag.add_edge(a, b)
    return dag


def random_discrete(nodes, n, seed, levels=3):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, levels, size=(n, len(nodes)))
    # a little dependence so scores differ between graphs
    codes[:, -1] = (codes[:, 0] + rng.integers(0, 2, n)) % levels
    return from_codes(codes, nodes)


def two_binary(n, seed, copy):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n)
    y = x.copy() if copy else rng.integers(0, 2, n)
    return from_codes(np.column_stack([x, y]), ("X", "Y"))


# ---------------------------------------------------------------- graph types


def test_dag_rejects_self_loops_and_cycles():
    g = Dag(NAMES3, [("A", "B"), ("B", "C")])
    with pytest.raises(GraphError):
        g.add_edge("A", "A")
    with pytest.raises(GraphError):
        g.add_edge("C", "A")
    assert g.edges() == [("A", "B"), ("B", "C")]


def test_pdag_edge_cannot_be_both_kinds():
    p = Pdag(NAMES3, directed=[("A", "B")])
    with pytest.raises(GraphError):
        p.add_undirected("A", "B")
    p.add_undirected("B", "C")
    with pytest.raises(GraphError):
        p.add_directed("B", "C")


def test_sepsets_exclude_endpoints():
    s = SepSets()
    with pytest.raises(GraphError):
        s.record("A", "B", ["A"])
    s.record("A", "C", ["B"])
    assert s["C", "A"] == {"B"}


def test_tabu_list_evicts_oldest():
    t = TabuList(2)
    moves = [Move("add", ("A", "B")), Move("add", ("B", "C")), Move("remove", ("A", "B"))]
    for m in moves:
        t.push(m)
    assert len(t) == 2 and list(t) == moves[1:]
    assert t.forbids(Move("remove", ("B", "C")))
    # the first move was evicted, so undoing it is allowed again
    assert not t.forbids(Move("remove", ("A", "B")))


@settings(max_examples=60, deadline=None)
@given(random_dags(), st.data())
def test_move_then_inverse_restores(dag, data):
    moves = neighbor_moves(dag)
    move = data.draw(st.sampled_from(moves))
    assert dag.apply(move).apply(move.inverse()) == dag


# ---------------------------------------------------------------- scores


def test_k2_prefers_empty_graph_for_independent_binaries():
    d = two_binary(2000, 0, copy=False)
    assert k2_score(Dag(("X", "Y")), d) > k2_score(Dag(("X", "Y"), [("X", "Y")]), d)


def test_k2_prefers_edge_for_copy():
    d = two_binary(2000, 0, copy=True)
    assert k2_score(Dag(("X", "Y"), [("X", "Y")]), d) > k2_score(Dag(("X", "Y")), d)


def test_bic_penalty_and_copy():
    indep = two_binary(2000, 1, copy=False)
    copy = two_binary(2000, 1, copy=True)
    empty, edge = Dag(("X", "Y")), Dag(("X", "Y"), [("X", "Y")])
    assert bic_score(edge, indep) < bic_score(empty, indep)
    assert bic_score(edge, copy) > bic_score(empty, copy)


def test_parameter_count_binary_child_two_binary_parents():
    assert parameter_count(2, 4) == 4


@settings(max_examples=30, deadline=None)
@given(random_dags(max_nodes=4), st.integers(0, 1000))
def test_scores_match_counting_oracle(dag, seed):
    data = random_discrete(dag.nodes, 150, seed)
    k2, bic = count_scores(dag, data.codes, data.names)
    assert k2_score(dag, data) == pytest.approx(k2, rel=1e-10)
    assert bic_score(dag, data) == pytest.approx(bic, rel=1e-10)


def test_score_is_sum_of_families():
    data = random_discrete(("a", "b", "c", "d"), 300, 3)
    dag = Dag(data.names, [("a", "b"), ("b", "c"), ("a", "d"), ("c", "d")])
    for kind in ("k2", "bic"):
        s = FamilyScorer(data, kind)
        fresh = FamilyScorer(data, kind)
        assert s.total(dag) == pytest.approx(sum(fresh.family(v, dag.parents(v)) for v in dag.nodes), abs=1e-9)


def test_too_many_parents_rejected():
    data = random_discrete(tuple("abcdef"), 100, 0)
    dag = Dag(data.names, [(p, "f") for p in "abcde"])
    with pytest.raises(GraphError):
        k2_score(dag, data)


@settings(max_examples=60, deadline=None)
@given(random_dags(), st.integers(0, 1000), st.sampled_from(["k2", "bic"]), st.data())
def test_incremental_rescoring_equals_full(dag, seed, kind, data):
    disc = random_discrete(dag.nodes, 200, seed)
    move = data.draw(st.sampled_from(neighbor_moves(dag)))
    s = FamilyScorer(disc, kind)
    full = FamilyScorer(disc, kind)
    assert s.total(dag) + s.delta(dag, move) == pytest.approx(full.total(dag.apply(move)), abs=1e-9)


def test_discretize_equal_frequency():
    x = np.arange(100, dtype=float)
    d = discretize(x[:, None], ["x"])
    assert d.cardinality == (4,)
    assert np.bincount(d.codes[:, 0]).tolist() == [25, 25, 25, 25]


# ---------------------------------------------------------------- neighbours


def test_empty_three_node_neighbours():
    kinds = Counter(m.kind for m, _ in neighbors(Dag(NAMES3)))
    assert kinds == {"add": 6}


def test_chain_neighbours_match_brute_force():
    chain = Dag(NAMES3, [("A", "B"), ("B", "C")])
    got = set(neighbor_moves(chain))
    assert got == brute_moves(chain, 4)
    kinds = Counter(m.kind for m in got)
    assert kinds["remove"] == 2 and kinds["reverse"] == 2
    assert Move("add", ("C", "A")) not in got


@settings(max_examples=60, deadline=None)
@given(random_dags(), st.integers(1, 3))
def test_neighbours_match_brute_force(dag, max_parents):
    if any(len(dag.parents(v)) > max_parents for v in dag.nodes):
        return
    moves = neighbor_moves(dag, max_parents)
    assert len(moves) == len(set(moves))
    assert set(moves) == brute_moves(dag, max_parents)
    for _, g in neighbors(dag, max_parents):
        assert g.is_acyclic()


# ---------------------------------------------------------------- searches


def discrete_sem(edges, weights, order, n, seed):
    return discretize(linear_gaussian_sem(edges, weights, n, seed, order), order)


def test_hill_climb_recovers_chain_class():
    data = discrete_sem((("A", "B"), ("B", "C")), (1.0, 1.0), NAMES3, 5000, 0)
    res = hill_climb(data)
    assert markov_equivalent(res.dag, Dag(NAMES3, [("A", "B"), ("B", "C")]))


@pytest.mark.parametrize("kind", ["k2", "bic"])
def test_hill_climb_trajectory_and_local_optimum(kind):
    data = discrete_sem(CHAIN_COLLIDER, (0.8,) * 4, CHAIN_COLLIDER_ORDER, 3000, 1)
    res = hill_climb(data, score=kind)
    assert all(b > a for a, b in zip(res.trajectory, res.trajectory[1:]))
    assert res.score >= res.init_score
    scorer = FamilyScorer(data, kind)
    assert all(scorer.delta(res.dag, m) <= 1e-9 * abs(res.score) for m in neighbor_moves(res.dag))


def test_hill_climb_from_local_optimum_returns_unchanged():
    data = discrete_sem((("A", "B"), ("B", "C")), (1.0, 1.0), NAMES3, 2000, 2)
    first = hill_climb(data)
    again = hill_climb(data, init=first.dag)
    assert again.iterations == 1 and again.dag == first.dag and again.moves == []


def test_searches_reject_cyclic_or_foreign_init():
    data = random_discrete(NAMES3, 100, 0)
    with pytest.raises(GraphError):
        hill_climb(data, init=Dag(("A", "Z")))


@pytest.mark.parametrize("seed", range(3))
def test_tabu_at_least_init_and_capacity(seed):
    data = discrete_sem(CHAIN_COLLIDER, (0.8,) * 4, CHAIN_COLLIDER_ORDER, 2000, seed)
    init = Dag(CHAIN_COLLIDER_ORDER, [("A", "E")])
    res = tabu_search(data, init=init, tabu_capacity=3, patience=8)
    assert res.score >= res.init_score
    assert res.diagnostics["tabu_length"] <= 3
    assert res.dag.is_acyclic()


def test_tabu_recovers_collider_against_exhaustive_scoring():
    names = ("A", "B", "C")
    data = discrete_sem((("A", "C"), ("B", "C")), (1.0, 1.0), names, 5000, 0)
    res = tabu_search(data)
    assert res.dag.skeleton() == {frozenset("AC"), frozenset("BC")}
    assert res.dag.v_structures() == {("A", "C", "B")}
    scores = {g: bic_score(g, data) for g in all_dags(names)}
    assert len(scores) == 25
    best_single = max(s for g, s in scores.items() if g.n_edges() == 1)
    assert res.score >= best_single
    assert res.score == pytest.approx(max(scores.values()))


# ---------------------------------------------------------------- Fisher z


def recursive_partial(i, j, cond, corr):
    if not cond:
        return corr[i, j]
    k, rest = cond[0], cond[1:]
    rij = recursive_partial(i, j, rest, corr)
    rik = recursive_partial(i, k, rest, corr)
    rjk = recursive_partial(j, k, rest, corr)
    return (rij - rik * rjk) / math.sqrt((1 - rik**2) * (1 - rjk**2))


def precision_partial(i, j, cond, corr):
    idx = [i, j, *cond]
    P = np.linalg.inv(corr[np.ix_(idx, idx)])
    return -P[0, 1] / math.sqrt(P[0, 0] * P[1, 1])


def test_fisher_z_closed_form():
    corr = np.array([[1.0, 0.5], [0.5, 1.0]])
    z, indep = fisher_z_test(0, 1, (), corr, 103, 0.01)
    assert z == pytest.approx(5.493, abs=1e-3) and not indep
    z0, indep0 = fisher_z_test(0, 1, (), np.eye(2), 103, 1e-9)
    assert z0 == 0 and indep0


def test_fisher_z_perfect_correlation_and_singular_block():
    corr = np.ones((2, 2))
    z, indep = fisher_z_test(0, 1, (), corr, 50)
    assert z == math.inf and not indep
    sing = np.array([[1, 0.2, 0.3, 0.3], [0.2, 1, 0.1, 0.1], [0.3, 0.1, 1, 1], [0.3, 0.1, 1, 1]])
    with pytest.raises(EstimationError):
        fisher_z_test(0, 1, (2, 3), sing, 50)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3))
def test_partial_correlation_three_ways(seed, k):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(40, 6))
    corr = np.corrcoef(A @ rng.normal(size=(6, 6)), rowvar=False)
    cond = list(range(2, 2 + k))
    r = partial_correlation(0, 1, cond, corr)
    assert r == pytest.approx(recursive_partial(0, 1, cond, corr), abs=1e-10)
    assert r == pytest.approx(precision_partial(0, 1, cond, corr), abs=1e-10)


# ---------------------------------------------------------------- PC


def test_pc_chain_skeleton_and_sepset():
    X = linear_gaussian_sem((("A", "B"), ("B", "C")), (0.8, 0.8), 5000, 0, NAMES3)
    skel, sep = pc_skeleton(X, names=NAMES3)
    assert skel.skeleton() == {frozenset("AB"), frozenset("BC")}
    assert sep["A", "C"] == {"B"}
    res = pc(X, names=NAMES3)
    assert res.pdag.directed_edges() == []


def test_pc_independent_variables_empty():
    X = np.random.default_rng(1).normal(size=(5000, 3))
    skel, _ = pc_skeleton(X, alpha=0.01)
    assert skel.skeleton() == frozenset()


def test_pc_tests_size_zero_before_size_one():
    X = chain_collider_data(2000, 0)
    log = []
    pc_skeleton(X, names=CHAIN_COLLIDER_ORDER, test_log=log)
    sizes = [len(t[2]) for t in log]
    assert sizes == sorted(sizes)
    assert sizes.count(0) == 10


def test_pc_recovers_chain_collider():
    res = pc(chain_collider_data(10000, 3), names=CHAIN_COLLIDER_ORDER)
    assert res.pdag.skeleton() == {frozenset(e) for e in CHAIN_COLLIDER}
    assert set(res.pdag.directed_edges()) == {("C", "E"), ("D", "E")}


@pytest.mark.parametrize("seed", range(3))
def test_pc_order_invariant(seed):
    X = chain_collider_data(10000, seed)
    base = pc(X, names=CHAIN_COLLIDER_ORDER)
    perm = np.random.default_rng(seed).permutation(5)
    other = pc(X[:, perm], names=[CHAIN_COLLIDER_ORDER[k] for k in perm])
    assert base.pdag.skeleton() == other.pdag.skeleton()
    assert set(base.pdag.directed_edges()) == set(other.pdag.directed_edges())


def test_pc_workers_do_not_change_result():
    X = chain_collider_data(3000, 4)
    a = pc(X, names=CHAIN_COLLIDER_ORDER)
    b = pc(X, names=CHAIN_COLLIDER_ORDER, workers=4)
    assert a.pdag == b.pdag and a.tests == b.tests


def test_pc_recovers_most_of_default_model():
    spec = default_maritime_scm()
    truth = {frozenset(e) for e in spec.edges()}
    for seed in range(2):
        got = set(pc(generate(spec, 20000, seed), alpha=0.01).pdag.skeleton())
        assert len(got & truth) / len(truth) >= 0.8
        assert len(got - truth) / len(got) <= 0.2


# ---------------------------------------------------------------- orientation


def test_collider_oriented():
    skel = Pdag(NAMES3, undirected=[("A", "C"), ("B", "C")])
    sep = SepSets()
    sep.record("A", "B", [])
    out = orient_v_structures(skel, sep)
    assert set(out.directed_edges()) == {("A", "C"), ("B", "C")}


def test_chain_not_oriented():
    skel = Pdag(NAMES3, undirected=[("A", "B"), ("B", "C")])
    sep = SepSets()
    sep.record("A", "C", ["B"])
    assert orient_v_structures(skel, sep) == skel


def test_shielded_triple_left_alone():
    skel = Pdag(NAMES3, undirected=[("A", "B"), ("B", "C"), ("A", "C")])
    assert orient_v_structures(skel, SepSets()) == skel


def test_conflicting_orientations_stay_undirected():
    skel = Pdag("ABCD", undirected=[("A", "B"), ("B", "C"), ("C", "D")])
    sep = SepSets()
    sep.record("A", "C", [])
    sep.record("B", "D", [])
    out = orient_v_structures(skel, sep)
    assert out.is_undirected("B", "C")
    assert ("B", "C") in out.conflicts
    assert set(out.directed_edges()) == {("A", "B"), ("D", "C")}


def test_rule_one():
    p = Pdag(NAMES3, directed=[("A", "B")], undirected=[("B", "C")])
    out = apply_orientation_rules(p)
    assert out.is_directed("B", "C")


def test_rule_two():
    p = Pdag(("A", "B", "K"), directed=[("A", "K"), ("K", "B")], undirected=[("A", "B")])
    out = apply_orientation_rules(p)
    assert out.is_directed("A", "B")


@st.composite
def dag_patterns(draw):
    """A random DAG and its pattern: the skeleton with only collider edges directed."""
    dag = draw(random_dags(max_nodes=6))
    collider_edges = {(a, c) for a, c, b in dag.v_structures()} | {(b, c) for a, c, b in dag.v_structures()}
    undirected = [e for e in dag.edges() if e not in collider_edges]
    return dag, Pdag(dag.nodes, sorted(collider_edges), undirected)


@settings(max_examples=100, deadline=None)
@given(dag_patterns())
def test_rules_idempotent_and_sound(case):
    dag, p = case
    once = apply_orientation_rules(p)
    assert apply_orientation_rules(once) == once
    assert once.skeleton() == p.skeleton()
    # every propagated orientation agrees with the generating graph
    assert set(once.directed_edges()) <= set(dag.edges())
    colliders = {
        (a, c, b)
        for c in once.nodes
        for a, b in itertools.combinations(sorted(once.parents(c)), 2)
        if not once.adjacent(a, b)
    }
    assert colliders == dag.v_structures()


# ---------------------------------------------------------------- export


def test_dot_single_edge_and_empty():
    assert "A -> B;" in export_dot(Dag(("A", "B"), [("A", "B")]))
    text = export_dot(Dag(("B", "A")))
    assert "->" not in text and text.index("A;") < text.index("B;")


def test_dot_parses_and_marks_undirected():
    p = Pdag(("Supplier", "Multi", "Delay", "node"), directed=[("Supplier", "Multi")],
             undirected=[("Multi", "Delay"), ("Delay", "node")])
    text = export_dot(p)
    (graph,) = pydot.graph_from_dot_data(text)
    edges = {(e.get_source().strip('"'), e.get_destination().strip('"')): e.get("dir") for e in graph.get_edges()}
    assert edges[("Supplier", "Multi")] is None
    assert edges[("Delay", "Multi")] == "none"
    assert sorted(n.get_name().strip('"') for n in graph.get_nodes()) == sorted(p.nodes)


def test_graph_record_round_trip():
    p = Pdag(NAMES3, directed=[("A", "B")], undirected=[("B", "C")])
    rec = json.loads(json.dumps(graph_record(p, "pc", alpha=0.01)))
    assert rec["algorithm"] == "pc" and rec["alpha"] == 0.01
    assert graph_from_record(rec) == p
    d = Dag(NAMES3, [("A", "C")])
    assert graph_from_record(graph_record(d, "hc", score=-1.0)) == d

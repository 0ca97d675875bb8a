"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary (see
``conftest.py``), so ``pytest tests/test_acceptance.py`` ends with a
criterion-by-criterion table.
"""

import itertools
import json
import re
import time

import numpy as np
import pytest

from causaldelay.cate import estimate_cate
from causaldelay.cli import main
from causaldelay.dataset import encode, summary_stats
from causaldelay.dml import (
    DmlConfig,
    NuisancePredictions,
    estimate_ate,
    fwl_direct,
    fwl_threestep,
    inference,
    irm_score,
    naive_difference,
    solve_theta,
)
from causaldelay.policy import constant_policy, evaluate_policy, fit_policy_tree
from causaldelay.structure import (
    Dag,
    FamilyScorer,
    discretize,
    fisher_z_test,
    hill_climb,
    neighbor_moves,
    pc,
    tabu_search,
)
from causaldelay.synthgen import (
    default_maritime_scm,
    generate,
    oracle_outcome,
    oracle_propensity,
    quantity_step_scm,
    sign_flip_scm,
)
from conftest import CHAIN_COLLIDER, CHAIN_COLLIDER_ORDER, chain_collider_data, linear_gaussian_sem

TRUE_MULTI = 15.0
RESULTS: dict[str, tuple[bool, str]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[criterion] = (bool(ok), detail)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1


def test_criterion_01_fwl():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        Z = rng.normal(size=(500, 5))
        D = Z @ rng.normal(size=5) + rng.normal(size=500)
        Y = 1.5 * D + Z @ rng.normal(size=5) + rng.normal(size=500)
        worst = max(worst, abs(fwl_direct(Y, D, Z) - fwl_threestep(Y, D, Z)))
    elapsed = time.perf_counter() - start
    record("1", worst < 1e-8 and elapsed < 5.0, f"max |direct - threestep| = {worst:.2e}, {elapsed:.2f} s")


# ---------------------------------------------------------------- 2 and 3


@pytest.fixture(scope="module")
def maritime_runs():
    spec = default_maritime_scm()
    start = time.perf_counter()
    rows = []
    for seed in range(100):
        table = generate(spec, 5000, seed)
        est = estimate_ate(encode(table), "Multi", "Delay", DmlConfig(k_folds=5, seed=seed))
        rows.append((est.theta, est.std_error, est.ci_low, est.ci_high,
                     naive_difference(table["Delay"], table["Multi"])))
    return np.array(rows), time.perf_counter() - start


def test_criterion_02_ate_recovery(maritime_runs):
    runs, elapsed = maritime_runs
    theta, se, lo, hi = runs[:, 0], runs[:, 1], runs[:, 2], runs[:, 3]
    within = int(np.sum(np.abs(theta - TRUE_MULTI) <= 3 * se))
    coverage = float(np.mean((lo <= TRUE_MULTI) & (TRUE_MULTI <= hi)))
    ok = within >= 95 and 0.90 <= coverage <= 0.99 and elapsed < 600
    record("2", ok, f"{within}/100 within 3 se, 95% CI coverage {coverage:.2f}, "
                    f"mean estimate {theta.mean():.2f}, {elapsed:.0f} s")


def test_criterion_03_debiasing(maritime_runs):
    runs, _ = maritime_runs
    naive_err = float(np.mean(np.abs(runs[:, 4] - TRUE_MULTI)))
    dml_err = float(np.mean(np.abs(runs[:, 0] - TRUE_MULTI)))
    record("3", naive_err > 5 * dml_err,
           f"mean |naive - 15| = {naive_err:.2f}, mean |DML - 15| = {dml_err:.2f}, ratio {naive_err / dml_err:.1f}")


# ---------------------------------------------------------------- 4


def test_criterion_04_double_robustness():
    spec = default_maritime_scm()
    table = generate(spec, 5000, 404)
    Y, D = table["Delay"], table["Multi"]
    g0 = oracle_outcome(spec, table, "Multi", 0)
    g1 = oracle_outcome(spec, table, "Multi", 1)
    m = oracle_propensity(spec, table, "Multi")
    n = len(Y)
    cases = {
        "oracle outcome, m=0.5": NuisancePredictions(g0, g1, np.full(n, 0.5)),
        "oracle propensity, constant outcome": NuisancePredictions(np.full(n, Y.mean()), np.full(n, Y.mean()), m),
    }
    parts, ok = [], True
    for name, nuis in cases.items():
        scores = irm_score(Y, D, nuis)
        est = inference(scores, solve_theta(scores))
        dev = abs(est.theta - TRUE_MULTI) / est.std_error
        ok &= dev <= 3
        parts.append(f"{name}: {est.theta:.2f} ({dev:.2f} se)")
    record("4", ok, "; ".join(parts))


# ---------------------------------------------------------------- 5


def test_criterion_05_orthogonality():
    """Shift both nuisances by eps and compare the score estimate with the plug-in one.

    Outcome regressions move by ``eps * sd(Y) * (1 + u)`` in opposite
    directions for the two arms (u ~ U(-1, 1)), so the plug-in estimate moves
    by about ``2 eps sd(Y)``; propensities move by ``eps * u'`` within the
    trimming bounds.
    """
    spec = default_maritime_scm()
    ratios = {}
    for eps in (0.05, 0.1):
        dml_shift, plug_shift = [], []
        for seed in range(50):
            table = generate(spec, 5000, 500 + seed)
            Y, D = table["Delay"], table["Multi"]
            g0 = oracle_outcome(spec, table, "Multi", 0)
            g1 = oracle_outcome(spec, table, "Multi", 1)
            m = oracle_propensity(spec, table, "Multi")
            rng = np.random.default_rng(seed)
            n = len(Y)
            scale = eps * Y.std()
            g1e = g1 + scale * (1 + rng.uniform(-1, 1, n))
            g0e = g0 - scale * (1 + rng.uniform(-1, 1, n))
            me = np.clip(m + eps * rng.uniform(-1, 1, n), 0.01, 0.99)
            base = solve_theta(irm_score(Y, D, NuisancePredictions(g0, g1, m)))
            moved = solve_theta(irm_score(Y, D, NuisancePredictions(g0e, g1e, me)))
            dml_shift.append(abs(moved - base))
            plug_shift.append(abs(np.mean(g1e - g0e) - np.mean(g1 - g0)))
        ratios[eps] = float(np.mean(dml_shift) / np.mean(plug_shift))
    ok = all(r < 0.1 for r in ratios.values())
    record("5", ok, ", ".join(f"eps={e}: score shift / plug-in shift = {r:.3f}" for e, r in ratios.items()))


# ---------------------------------------------------------------- 6


def cate_curve_for(spec, n, seed):
    table = generate(spec, n, seed)
    est = estimate_ate(encode(table), "Multi", "Delay", DmlConfig(seed=seed))
    return estimate_cate(est.mean_psi_b(), table["Quantity"], df=5)


def test_criterion_06_cate():
    step = cate_curve_for(quantity_step_scm(), 10000, 6)
    low = step.estimate[step.grid < 0.4]
    high = step.estimate[step.grid > 0.6]
    shape_ok = bool(np.all(low < 7.5) and np.all(high > 12.5))
    flat = cate_curve_for(quantity_step_scm(low=10.0, high=10.0), 10000, 6)
    covered = float(np.mean((flat.band_low <= 10.0) & (10.0 <= flat.band_high)))
    record("6", shape_ok and covered >= 0.90,
           f"step curve max below 0.4 = {low.max():.2f}, min above 0.6 = {high.min():.2f}; "
           f"constant-effect band covers truth at {covered:.0%} of grid points")


# ---------------------------------------------------------------- 7


def brute_depth1(X, psi):
    best = max(psi.sum(), -psi.sum())
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals[:-1], vals[1:]):
            left = X[:, j] <= (lo + hi) / 2
            for a, b in itertools.product((-1, 1), repeat=2):
                best = max(best, a * psi[left].sum() + b * psi[~left].sum())
    return best


def test_criterion_07_policy_trees():
    mismatches, dominated = 0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 201))
        X = np.column_stack([rng.normal(size=n), rng.integers(0, 2, n), rng.integers(0, 4, n)]).astype(float)
        psi = rng.normal(size=n) + X[:, 0]
        value = evaluate_policy(fit_policy_tree(X, psi, 1), X, psi).value
        mismatches += not np.isclose(value, brute_depth1(X, psi), rtol=1e-9, atol=1e-9)
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 150))
        X = rng.normal(size=(n, 3))
        psi = rng.normal(size=n) + rng.normal() * X[:, 1]
        value = evaluate_policy(fit_policy_tree(X, psi, 2), X, psi).value
        consts = [evaluate_policy(constant_policy(a, 3), X, psi).value for a in (0, 1)]
        dominated += value < max(consts) - 1e-9
    spec = sign_flip_scm()
    hits = 0
    for seed in range(100):
        table = generate(spec, 2000, seed)
        design = encode(table)
        est = estimate_ate(design, "Multi", "Delay", DmlConfig(seed=seed))
        feats = [f for f in design.feature_names if f not in ("Multi", "Delay")]
        tree = fit_policy_tree(design.subset(feats).values, est.mean_psi_b(), 2, feats)
        hits += "Express" in {tree.name(j) for j in tree.split_features()}
    ok = mismatches == 0 and dominated == 0 and hits >= 95
    record("7", ok, f"(a) {50 - mismatches}/50 depth-1 trees match enumeration; "
                    f"(b) {100 - dominated}/100 depth-2 trees beat both constants; "
                    f"(c) {hits}/100 trees split on the sign-flip feature")


# ---------------------------------------------------------------- 8


def random_generator(seed, k=6):
    rng = np.random.default_rng(seed)
    names = tuple(f"x{i}" for i in range(k))
    edges, weights = [], []
    for i, j in itertools.combinations(range(k), 2):
        if rng.uniform() < 0.35:
            edges.append((names[i], names[j]))
            weights.append(rng.choice([-1, 1]) * rng.uniform(0.5, 1.2))
    X = linear_gaussian_sem(tuple(edges), tuple(weights), 2000, seed, names)
    return discretize(X, names)


def test_criterion_08_structure_learning():
    truth = {frozenset(e) for e in CHAIN_COLLIDER}
    recovered = 0
    for seed in range(100):
        res = pc(chain_collider_data(10000, seed), alpha=0.01, names=CHAIN_COLLIDER_ORDER)
        collider = {("C", "E"), ("D", "E")} <= set(res.pdag.directed_edges())
        recovered += res.pdag.skeleton() == truth and collider

    monotone = local_opt = tabu_ge_init = tabu_ge_hc = 0
    worst_gap = 0.0
    for seed in range(50):
        data = random_generator(seed)
        hc = hill_climb(data, score="bic")
        monotone += all(b > a for a, b in zip(hc.trajectory, hc.trajectory[1:]))
        scorer = FamilyScorer(data, "bic")
        local_opt += all(scorer.delta(hc.dag, mv) <= 1e-9 * abs(hc.score) for mv in neighbor_moves(hc.dag))
        tabu = tabu_search(data, score="bic")
        tabu_ge_init += tabu.score >= tabu.init_score
        tabu_ge_hc += tabu.score >= hc.score - 1e-9 * abs(hc.score)
        # incremental against full rescoring along the hill-climb path
        dag = Dag(data.names)
        for mv in hc.moves:
            fresh = FamilyScorer(data, "bic")
            inc = scorer.total(dag) + scorer.delta(dag, mv)
            dag = dag.apply(mv)
            worst_gap = max(worst_gap, abs(inc - fresh.total(dag)))
        for kind in ("k2", "bic"):
            s = FamilyScorer(data, kind)
            for mv in neighbor_moves(hc.dag):
                fresh = FamilyScorer(data, kind)
                worst_gap = max(worst_gap, abs(s.total(hc.dag) + s.delta(hc.dag, mv) - fresh.total(hc.dag.apply(mv))))

    soft = f"(c, logged) tabu >= hill climb on {tabu_ge_hc}/50"
    print(soft + (" - meets the 50% mark" if tabu_ge_hc >= 25 else " - below the 50% mark"))
    ok = recovered >= 90 and monotone == 50 and local_opt == 50 and tabu_ge_init == 50 and worst_gap <= 1e-9
    record("8", ok, f"(a) PC exact skeleton and collider {recovered}/100; (b) monotone {monotone}/50, "
                    f"local optimum {local_opt}/50; (c) tabu >= init {tabu_ge_init}/50, {soft}; "
                    f"(d) max incremental error {worst_gap:.1e}")


# ---------------------------------------------------------------- 9


def test_criterion_09_fisher_z():
    z, indep = fisher_z_test(0, 1, (), np.array([[1.0, 0.5], [0.5, 1.0]]), 103, 0.01)
    z0, indep0 = fisher_z_test(0, 1, (), np.eye(2), 103, 0.01)
    record("9", abs(z - 5.493) <= 1e-3 and not indep and z0 == 0 and indep0, f"z(0.5) = {z:.4f}, z(0) = {z0}")


# ---------------------------------------------------------------- 10


def test_criterion_10_calibration():
    s = summary_stats(generate(default_maritime_scm(), 20000, 2024)["Delay"])
    ratio = s.std_delay / s.mean_delay
    ok = abs(s.delayed_rate - 0.56) <= 0.05 and ratio > 1.1
    record("10", ok, f"delayed rate {s.delayed_rate:.3f}, std/mean of delayed orders {ratio:.2f} "
                     f"(all orders {s.std_delay_all / s.mean_delay_all:.2f})")


# ---------------------------------------------------------------- 11 and 12

PIPELINE = {
    "data": {"synthetic": {"family": "maritime", "n": 2000}},
    "treatments": ["Multi", "Season_Q1", "Season_Q2", "Season_Q3", "Season_Q4"],
    "learners": {
        "outcome": {"n_trees": 60, "max_depth": 3, "learning_rate": 0.1, "min_leaf": 5},
        "propensity": {"n_trees": 60, "max_depth": 3, "learning_rate": 0.1, "min_leaf": 5},
    },
    "cate": {"covariate": "Quantity"},
    "seed": 12,
}


def run_pipeline(root, capsys=None):
    cfg = root / "run.json"
    root.mkdir(parents=True, exist_ok=True)
    cfg.write_text(json.dumps(PIPELINE), encoding="utf-8")
    codes = []
    for command, extra in (("simulate", []), ("ingest", []), ("dag", ["--algo", "hc"]), ("dag", ["--algo", "pc"]),
                           ("ate", []), ("cate", []), ("policy", [])):
        codes.append(main([command, "--config", str(cfg), "--out", str(root / "out"), *extra]))
    return codes


def test_criterion_11_report_format(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({**PIPELINE, "data": {"synthetic": {"family": "maritime", "n": 1500}}}), encoding="utf-8")
    code = main(["ate", "--config", str(cfg), "--out", str(tmp_path / "out")])
    header_txt = capsys.readouterr().out.splitlines()[0]
    header_csv = (tmp_path / "out" / "ate.csv").read_text(encoding="utf-8").splitlines()[0]
    expected = "Treatment,Coef,t-statistics,P-value,Std error"
    ok = code == 0 and header_csv == expected and re.split(r"\s{2,}", header_txt) == expected.split(",")
    record("11", ok, f"csv header {header_csv!r}")


def test_criterion_12_determinism(tmp_path):
    codes_a = run_pipeline(tmp_path / "a")
    codes_b = run_pipeline(tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a" / "out") for p in (tmp_path / "a" / "out").iterdir())
    same = [(tmp_path / "a" / "out" / f).read_bytes() == (tmp_path / "b" / "out" / f).read_bytes() for f in files]
    ok = codes_a == codes_b == [0] * 7 and all(same) and len(files) > 10
    record("12", ok, f"{sum(same)}/{len(files)} report files byte-identical across two runs")

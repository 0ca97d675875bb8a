import numpy as np
import pytest

from causaldelay.dataset import encode
from causaldelay.learners import Hyperparams
from causaldelay.synthgen import generate

# small ensembles keep unit tests quick; estimators accept any hyperparameters
FAST = Hyperparams(n_trees=40, max_depth=2, learning_rate=0.2, min_leaf=10)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def confounded_arrays(n, seed, effect=2.0):
    """x0 drives both treatment odds and the outcome; the true effect is ``effect``."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    m = sigmoid(1.2 * X[:, 0])
    D = (rng.uniform(size=n) < m).astype(float)
    Y = effect * D + 3.0 * X[:, 0] + X[:, 1] ** 2 + rng.normal(size=n)
    return X, Y, D, m


def linear_gaussian_sem(edges, weights, n, seed, order):
    """Samples from x_v = sum_p w_pv x_p + N(0, 1), nodes evaluated in ``order``."""
    rng = np.random.default_rng(seed)
    cols = {}
    for v in order:
        x = rng.normal(size=n)
        for (a, b), w in zip(edges, weights):
            if b == v:
                x = x + w * cols[a]
        cols[v] = x
    return np.column_stack([cols[v] for v in order])


CHAIN_COLLIDER = (("A", "B"), ("B", "C"), ("C", "E"), ("D", "E"))
CHAIN_COLLIDER_ORDER = ("A", "B", "C", "D", "E")


def chain_collider_data(n, seed):
    return linear_gaussian_sem(CHAIN_COLLIDER, (0.8, 0.8, 0.8, 0.8), n, seed, CHAIN_COLLIDER_ORDER)


def scm_design(spec, n, seed):
    table = generate(spec, n, seed)
    return table, encode(table)


@pytest.fixture
def fast():
    return FAST


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

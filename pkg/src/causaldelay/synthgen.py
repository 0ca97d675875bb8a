"""Structural causal model simulator for order tables.

An :class:`ScmSpec` is a list of nodes in topological order. Each node owns
an independent exogenous noise draw and a structural equation mapping its
parents' values and its noise to its own values. Sampling draws every
node's noise up front in node order, so an intervention (which swaps one
equation for a constant) sees exactly the same noise as the observational
run under the same seed: ``generate_do(spec, t, 1, n, s)`` and
``generate_do(spec, t, 0, n, s)`` are paired counterfactuals.

Factories:

* :func:`default_maritime_scm` - eight-node order-delay model with a
  supplier-size confounder of the ``Multi`` treatment and heavy-tailed
  delays.
* :func:`quantity_step_scm` - low-noise model whose ``Multi`` effect steps
  from 5 to 15 days at ``Quantity = 0.5``.
* :func:`sign_flip_scm` - model whose ``Multi`` effect is +10 days when
  ``Express = 1`` and -10 days otherwise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import ColumnSpec, DataTable
from .errors import DataError

Equation = Callable[[Mapping[str, np.ndarray], np.ndarray], np.ndarray]
NoiseSampler = Callable[[np.random.Generator, int], np.ndarray]
Assign = Callable[[int, np.ndarray], np.ndarray]

QUARTERS = ("Q1", "Q2", "Q3", "Q4")


@dataclass
class Node:
    name: str
    kind: str
    parents: tuple[str, ...]
    equation: Equation
    noise: NoiseSampler
    form: str = ""
    noise_form: str = ""
    # E[noise] for additive-noise numeric nodes; enables analytic conditional means
    noise_mean: float | None = None


@dataclass
class Treatment:
    """Binary intervention target.

    ``assign(value, node_noise)`` returns the intervened values of ``node``;
    for a categorical node the treatment is the indicator of one level.
    """

    name: str
    node: str
    assign: Assign


@dataclass
class ScmSpec:
    family: str
    nodes: list[Node]
    treatments: dict[str, Treatment]
    outcome: str
    params: dict = field(default_factory=dict)
    # analytic ATE for treatments whose effect is an additive constant
    constant_effects: dict[str, float] = field(default_factory=dict)
    # analytic CATE: treatment -> (covariate, function of covariate values)
    cate_functions: dict[str, tuple[str, Callable[[np.ndarray], np.ndarray]]] = field(default_factory=dict)
    # treatment -> P(treatment = 1 | its parents), evaluated on a table
    propensities: dict[str, Callable[[DataTable], np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        seen: set[str] = set()
        for node in self.nodes:
            for p in node.parents:
                if p not in seen:
                    raise DataError(f"node {node.name!r}: parent {p!r} not earlier in topological order")
            seen.add(node.name)
        if self.outcome not in seen:
            raise DataError(f"unknown outcome node {self.outcome!r}")
        for t in self.treatments.values():
            if t.node not in seen:
                raise DataError(f"treatment {t.name!r} targets unknown node {t.node!r}")

    @property
    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def edges(self) -> list[tuple[str, str]]:
        return [(p, n.name) for n in self.nodes for p in n.parents]

    def descendants(self, name: str) -> set[str]:
        out: set[str] = set()
        frontier = [name]
        while frontier:
            cur = frontier.pop()
            for n in self.nodes:
                if cur in n.parents and n.name not in out:
                    out.add(n.name)
                    frontier.append(n.name)
        return out

    def column_specs(self) -> list[ColumnSpec]:
        roles = {t.node: "treatment" for t in self.treatments.values()}
        roles[self.outcome] = "outcome"
        return [ColumnSpec(n.name, n.kind, roles.get(n.name, "covariate")) for n in self.nodes]

    def describe(self) -> dict:
        """Plain-data description used for serialization."""
        return {
            "family": self.family,
            "params": _jsonable(self.params),
            "outcome": self.outcome,
            "treatments": {k: t.node for k, t in self.treatments.items()},
            "nodes": [
                {
                    "name": n.name,
                    "kind": n.kind,
                    "parents": list(n.parents),
                    "equation": n.form,
                    "noise": n.noise_form,
                }
                for n in self.nodes
            ],
        }

    def to_text(self) -> str:
        return json.dumps(self.describe(), indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def spec_from_text(text: str) -> ScmSpec:
    doc = json.loads(text)
    factory = FAMILIES.get(doc.get("family"))
    if factory is None:
        raise DataError(f"unknown SCM family {doc.get('family')!r}")
    return factory(**doc.get("params", {}))


# ---------------------------------------------------------------- sampling


def _draw_noise(spec: ScmSpec, n: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {node.name: node.noise(rng, n) for node in spec.nodes}


def _evaluate(spec: ScmSpec, noise: Mapping[str, np.ndarray], override: Mapping[str, Callable] | None = None):
    values: dict[str, np.ndarray] = {}
    override = override or {}
    for node in spec.nodes:
        if node.name in override:
            values[node.name] = override[node.name](noise[node.name])
        else:
            values[node.name] = node.equation(values, noise[node.name])
    return values


def _table(spec: ScmSpec, values: Mapping[str, np.ndarray]) -> DataTable:
    return DataTable((cs, values[cs.name]) for cs in spec.column_specs())


def generate(spec: ScmSpec, n: int, seed: int) -> DataTable:
    """Observational sample of ``n`` rows by ancestral sampling."""
    if n < 1:
        raise DataError("n must be at least 1")
    return _table(spec, _evaluate(spec, _draw_noise(spec, n, seed)))


def _treatment(spec: ScmSpec, treatment: str) -> Treatment:
    if treatment not in spec.treatments:
        raise DataError(f"{treatment!r} is not a treatment of this model")
    return spec.treatments[treatment]


def generate_do(spec: ScmSpec, treatment: str, value: int, n: int, seed: int) -> DataTable:
    """Sample under ``do(treatment = value)`` with the same noise as :func:`generate`."""
    t = _treatment(spec, treatment)
    if value not in (0, 1):
        raise DataError("intervention value must be 0 or 1")
    if n < 1:
        raise DataError("n must be at least 1")
    noise = _draw_noise(spec, n, seed)
    return _table(spec, _evaluate(spec, noise, {t.node: lambda u: t.assign(value, u)}))


@dataclass(frozen=True)
class TrueEffect:
    value: float
    std_error: float = 0.0

    @property
    def exact(self) -> bool:
        return self.std_error == 0.0

    def __float__(self) -> float:
        return self.value


def true_ate(spec: ScmSpec, treatment: str, n_mc: int = 200_000, seed: int = 0) -> TrueEffect:
    """Average effect of ``treatment`` on the outcome.

    Exact when the model declares the effect an additive constant,
    otherwise the mean of paired ``do(1) - do(0)`` differences with its
    Monte-Carlo standard error.
    """
    _treatment(spec, treatment)
    if treatment in spec.constant_effects:
        return TrueEffect(float(spec.constant_effects[treatment]))
    diff = _paired_difference(spec, treatment, n_mc, seed)
    return TrueEffect(float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n_mc)))


def _paired_difference(spec: ScmSpec, treatment: str, n: int, seed: int) -> np.ndarray:
    t = _treatment(spec, treatment)
    noise = _draw_noise(spec, n, seed)
    hi = _evaluate(spec, noise, {t.node: lambda u: t.assign(1, u)})
    lo = _evaluate(spec, noise, {t.node: lambda u: t.assign(0, u)})
    return hi[spec.outcome] - lo[spec.outcome]


def true_cate(
    spec: ScmSpec,
    treatment: str,
    covariate: str,
    grid: Sequence[float],
    n_mc: int = 200_000,
    seed: int = 0,
) -> np.ndarray:
    """Effect of ``treatment`` conditional on a pre-treatment covariate, on ``grid``.

    Analytic when the model declares a CATE function for this covariate (or
    a constant effect); otherwise paired Monte-Carlo differences averaged
    within bins centred on the grid points.
    """
    t = _treatment(spec, treatment)
    if covariate not in spec.node_names:
        raise DataError(f"unknown covariate {covariate!r}")
    if covariate == t.node or covariate in spec.descendants(t.node):
        raise DataError(f"covariate {covariate!r} is downstream of treatment {treatment!r}")
    grid = np.asarray(grid, dtype=float)
    declared = spec.cate_functions.get(treatment)
    if declared is not None and declared[0] == covariate:
        return np.asarray(declared[1](grid), dtype=float)
    if treatment in spec.constant_effects:
        return np.full(len(grid), float(spec.constant_effects[treatment]))
    noise = _draw_noise(spec, n_mc, seed)
    obs = _evaluate(spec, noise)
    x = np.asarray(obs[covariate], dtype=float)
    diff = _paired_difference(spec, treatment, n_mc, seed)
    edges = np.concatenate([[-np.inf], (grid[1:] + grid[:-1]) / 2, [np.inf]])
    which = np.digitize(x, edges) - 1
    out = np.full(len(grid), np.nan)
    for k in range(len(grid)):
        sel = which == k
        if sel.any():
            out[k] = diff[sel].mean()
    return out


def oracle_outcome(spec: ScmSpec, table: DataTable, treatment: str, value: int) -> np.ndarray:
    """E[outcome | parents] with the treatment set to ``value``, row by row.

    Requires additive outcome noise with known mean and a treatment whose
    node is a direct parent of the outcome with no other descendants among
    the outcome's parents; this is the exact outcome regression g(d, X).
    """
    t = _treatment(spec, treatment)
    out_node = spec.node(spec.outcome)
    if out_node.noise_mean is None:
        raise DataError("outcome noise has no declared mean")
    if spec.descendants(t.node) - {spec.outcome}:
        raise DataError(f"treatment {treatment!r} has mediators; g(d, X) is not a parent lookup")
    parents = {p: table[p] for p in out_node.parents}
    if t.node in parents:
        parents[t.node] = t.assign(value, np.zeros(table.n_rows))
    mean_noise = np.full(table.n_rows, out_node.noise_mean)
    return out_node.equation(parents, mean_noise)


def oracle_propensity(spec: ScmSpec, table: DataTable, treatment: str) -> np.ndarray:
    """P(treatment = 1 | parents of the treatment node), when the model exposes it."""
    _treatment(spec, treatment)
    fn = spec.propensities.get(treatment)
    if fn is None:
        raise DataError(f"no propensity oracle for {treatment!r} in family {spec.family!r}")
    return fn(table)


# ---------------------------------------------------------------- helpers


def _zipf_probs(k: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, k + 1) ** exponent
    return w / w.sum()


def _categorical(levels: Sequence[str], probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(np.cumsum(probs), u, side="right")
    idx = np.minimum(idx, len(levels) - 1)
    return np.asarray(levels, dtype=object)[idx]


def _season_from_uniform(u: np.ndarray) -> np.ndarray:
    return np.asarray(QUARTERS, dtype=object)[np.minimum((u * 4).astype(int), 3)]


def _quarter_treatment(quarter: str) -> Treatment:
    others = [q for q in QUARTERS if q != quarter]

    def assign(value: int, u: np.ndarray) -> np.ndarray:
        if value == 1:
            return np.full(len(u), quarter, dtype=object)
        # the same uniform picks one of the remaining quarters
        return np.asarray(others, dtype=object)[np.minimum((u * 3).astype(int), 2)]

    return Treatment(f"Season_{quarter}", "Season", assign)


def _binary_treatment(name: str) -> Treatment:
    return Treatment(name, name, lambda value, u: np.full(len(u), float(value)))


def _uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(size=n)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lookup(table: Mapping[str, float], keys: np.ndarray) -> np.ndarray:
    return np.array([table[k] for k in keys], dtype=float)


# ---------------------------------------------------------------- maritime


@dataclass(frozen=True)
class MaritimeParams:
    n_suppliers: int = 40
    n_projects: int = 16
    n_parts: int = 60
    zipf_exponent: float = 1.0
    multi_effect: float = 15.0
    season_effects: tuple[float, float, float, float] = (-6.0, 8.0, 10.0, -19.0)
    # days of delay per standard deviation of supplier scale
    confounding: float = 8.0
    # change in P(Multi) per standard deviation of supplier scale
    propensity_slope: float = 0.15
    quantity_log_mean: float = 3.3
    quantity_log_sd: float = 0.9
    quantity_scale_slope: float = 0.3
    season_quantity: tuple[float, float, float, float] = (0.08, 0.03, -0.03, -0.08)
    price_level: float = 0.5
    price_scale_slope: float = 0.1
    price_sd: float = 0.1
    season_price: tuple[float, float, float, float] = (-0.03, -0.01, 0.01, 0.03)
    delay_per_unit: float = 2.5
    price_effect: float = 60.0
    part_effect_sd: float = 15.0
    project_effect_sd: float = 10.0
    supplier_effect_sd: float = 6.0
    baseline: float = -115.0
    noise_log_mean: float = 3.2
    noise_log_sd: float = 0.9
    structure_seed: int = 2024


def _supplier_scale(probs: np.ndarray) -> np.ndarray:
    """Standardised size score per supplier rank: order-weighted mean 0, sd 1, largest first."""
    idx = np.arange(len(probs), dtype=float)
    mean = probs @ idx
    sd = np.sqrt(probs @ (idx - mean) ** 2)
    return -(idx - mean) / sd


def default_maritime_scm(**overrides) -> ScmSpec:
    """Order-delay model on the practitioner graph, with a supplier confounder.

    Nodes: Season, Supplier, Multi, Part, Project, Quantity, Price, Delay.
    Suppliers are numbered by order volume (``S01`` largest, Zipf shares).
    Each supplier's traits are affine in a standardised size score, so
    larger suppliers route more orders through several warehouses
    (``Multi``), ship larger and pricier orders, favour lower-numbered parts
    and projects and run ``confounding`` days later per unit of score. That
    score is the confounding path Supplier -> Multi, Supplier -> Delay.
    ``Multi`` acts on Delay additively with ``multi_effect`` days. Delay
    noise is a mean-zero shifted log-normal, giving a long right tail.
    """
    params = replace(MaritimeParams(), **{k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()})
    p = params
    srng = np.random.default_rng(p.structure_seed)
    suppliers = [f"S{i + 1:02d}" for i in range(p.n_suppliers)]
    projects = [f"P{i + 1:02d}" for i in range(p.n_projects)]
    parts = [f"Part{i + 1:02d}" for i in range(p.n_parts)]
    sup_probs = _zipf_probs(p.n_suppliers, p.zipf_exponent)
    scale = dict(zip(suppliers, _supplier_scale(sup_probs)))
    sup_idio = dict(zip(suppliers, srng.normal(0, p.supplier_effect_sd, p.n_suppliers)))
    # supplier i draws Zipf-ranked parts offset by i (projects by i // 4)
    rank = np.arange(p.n_suppliers)
    part_shift = dict(zip(suppliers, rank))
    proj_shift = dict(zip(suppliers, rank // 4))
    part_probs = _zipf_probs(p.n_parts, p.zipf_exponent)
    proj_probs = _zipf_probs(p.n_projects, p.zipf_exponent)
    # lower-numbered parts and projects are the slower ones
    part_eff = dict(zip(parts, np.sort(srng.normal(0, p.part_effect_sd, p.n_parts))[::-1]))
    proj_eff = dict(zip(projects, np.sort(srng.normal(0, p.project_effect_sd, p.n_projects))[::-1]))
    season_eff = dict(zip(QUARTERS, p.season_effects))
    season_qty = dict(zip(QUARTERS, p.season_quantity))
    season_price = dict(zip(QUARTERS, p.season_price))
    sd = p.noise_log_sd
    noise_shift = float(np.exp(p.noise_log_mean + sd * sd / 2))

    def ranked_choice(levels, probs, shift_of, supplier, u):
        rank = np.searchsorted(np.cumsum(probs), u, side="right")
        rank = np.minimum(rank, len(levels) - 1)
        shift = np.array([shift_of[s] for s in supplier])
        return np.asarray(levels, dtype=object)[(rank + shift) % len(levels)]

    def multi_prob(supplier):
        return np.clip(0.5 + p.propensity_slope * _lookup(scale, supplier), 0.05, 0.95)

    def delay(v, e):
        s = v["Supplier"]
        return (
            p.baseline
            + p.confounding * _lookup(scale, s)
            + _lookup(sup_idio, s)
            + _lookup(part_eff, v["Part"])
            + _lookup(proj_eff, v["Project"])
            + p.delay_per_unit * v["Quantity"]
            + p.price_effect * v["Price"]
            + _lookup(season_eff, v["Season"])
            + p.multi_effect * v["Multi"]
            + e
        )

    nodes = [
        Node("Season", "categorical", (), lambda v, u: _season_from_uniform(u), _uniform,
             "quarter uniform over Q1..Q4", "U(0,1)"),
        Node("Supplier", "categorical", (), lambda v, u: _categorical(suppliers, sup_probs, u), _uniform,
             f"Zipf({p.zipf_exponent}) over {p.n_suppliers} suppliers", "U(0,1)"),
        Node("Multi", "binary", ("Supplier",),
             lambda v, u: (u < multi_prob(v["Supplier"])).astype(float), _uniform,
             f"1[u < clip(0.5 + {p.propensity_slope} * scale(Supplier), 0.05, 0.95)]", "U(0,1)"),
        Node("Part", "categorical", ("Supplier",),
             lambda v, u: ranked_choice(parts, part_probs, part_shift, v["Supplier"], u), _uniform,
             "Zipf part rank offset by supplier number", "U(0,1)"),
        Node("Project", "categorical", ("Supplier",),
             lambda v, u: ranked_choice(projects, proj_probs, proj_shift, v["Supplier"], u), _uniform,
             "Zipf project rank offset by supplier number // 4", "U(0,1)"),
        Node("Quantity", "numeric", ("Supplier", "Season"),
             lambda v, e: np.maximum(1.0, np.round(np.exp(
                 p.quantity_log_mean + p.quantity_scale_slope * _lookup(scale, v["Supplier"])
                 + _lookup(season_qty, v["Season"]) + e))),
             lambda rng, n: rng.normal(0.0, p.quantity_log_sd, n),
             "max(1, round(exp(mu + a*scale(Supplier) + b(Season) + e)))", f"N(0, {p.quantity_log_sd}^2)"),
        Node("Price", "numeric", ("Supplier", "Season"),
             lambda v, e: np.clip(p.price_level + p.price_scale_slope * _lookup(scale, v["Supplier"])
                                  + _lookup(season_price, v["Season"]) + e, 0.0, None),
             lambda rng, n: rng.normal(0.0, p.price_sd, n),
             "max(0, level + c*scale(Supplier) + d(Season) + e)", f"N(0, {p.price_sd}^2)"),
        Node("Delay", "numeric", ("Season", "Supplier", "Multi", "Part", "Project", "Quantity", "Price"),
             delay,
             lambda rng, n: rng.lognormal(p.noise_log_mean, sd, n) - noise_shift,
             "baseline + confounding*scale(Supplier) + s(Supplier) + part + project "
             "+ k_q*Quantity + k_p*Price + season + multi_effect*Multi + e",
             f"LogNormal({p.noise_log_mean}, {sd}^2) - mean",
             noise_mean=0.0),
    ]
    treatments = {"Multi": _binary_treatment("Multi")}
    for q in QUARTERS:
        t = _quarter_treatment(q)
        treatments[t.name] = t
    param_dict = asdict(params)
    spec = ScmSpec(
        family="maritime",
        nodes=nodes,
        treatments=treatments,
        outcome="Delay",
        params=param_dict,
        constant_effects={"Multi": p.multi_effect},
        propensities={"Multi": lambda table: multi_prob(table["Supplier"])},
    )
    return spec


# ---------------------------------------------------------------- small models


def quantity_step_scm(
    low: float = 5.0,
    high: float = 15.0,
    cutoff: float = 0.5,
    noise_sd: float = 2.0,
    confounding: float = 8.0,
    n_suppliers: int = 8,
    structure_seed: int = 7,
) -> ScmSpec:
    """Heterogeneous model: Multi adds ``low`` days, or ``high`` when Quantity > cutoff.

    Quantity is Uniform(0, 1), so the average effect is
    ``low + (high - low) * (1 - cutoff)``.
    """
    srng = np.random.default_rng(structure_seed)
    suppliers = [f"S{i + 1}" for i in range(n_suppliers)]
    tier = dict(zip(suppliers, srng.permutation(np.resize([-1.0, 1.0], n_suppliers))))
    season_eff = dict(zip(QUARTERS, (-6.0, 8.0, 10.0, -19.0)))

    def effect(q):
        return low + (high - low) * (np.asarray(q, dtype=float) > cutoff)

    def multi_prob(supplier):
        return _sigmoid(1.0 * _lookup(tier, supplier))

    nodes = [
        Node("Season", "categorical", (), lambda v, u: _season_from_uniform(u), _uniform, "uniform quarter", "U(0,1)"),
        Node("Supplier", "categorical", (), lambda v, u: _categorical(suppliers, np.full(n_suppliers, 1 / n_suppliers), u),
             _uniform, f"uniform over {n_suppliers} suppliers", "U(0,1)"),
        Node("Multi", "binary", ("Supplier",), lambda v, u: (u < multi_prob(v["Supplier"])).astype(float), _uniform,
             "1[u < sigmoid(tier(Supplier))]", "U(0,1)"),
        Node("Quantity", "numeric", (), lambda v, u: u, _uniform, "Uniform(0,1)", "U(0,1)"),
        Node("Delay", "numeric", ("Season", "Supplier", "Multi", "Quantity"),
             lambda v, e: 30.0 + confounding * _lookup(tier, v["Supplier"]) + _lookup(season_eff, v["Season"])
             + 10.0 * v["Quantity"] + effect(v["Quantity"]) * v["Multi"] + e,
             lambda rng, n: rng.normal(0.0, noise_sd, n),
             "30 + confounding*tier + season + 10*Quantity + theta(Quantity)*Multi + e",
             f"N(0, {noise_sd}^2)", noise_mean=0.0),
    ]
    params = dict(low=low, high=high, cutoff=cutoff, noise_sd=noise_sd, confounding=confounding,
                  n_suppliers=n_suppliers, structure_seed=structure_seed)
    spec = ScmSpec(
        family="quantity_step",
        nodes=nodes,
        treatments={"Multi": _binary_treatment("Multi")},
        outcome="Delay",
        params=params,
        cate_functions={"Multi": ("Quantity", effect)},
        propensities={"Multi": lambda table: multi_prob(table["Supplier"])},
    )
    return spec


def sign_flip_scm(
    effect: float = 10.0,
    noise_sd: float = 5.0,
    confounding: float = 4.0,
    n_suppliers: int = 6,
    structure_seed: int = 11,
) -> ScmSpec:
    """Multi adds ``+effect`` days when Express = 1 and ``-effect`` otherwise."""
    srng = np.random.default_rng(structure_seed)
    suppliers = [f"S{i + 1}" for i in range(n_suppliers)]
    tier = dict(zip(suppliers, srng.permutation(np.resize([-1.0, 1.0], n_suppliers))))

    def multi_prob(supplier):
        return _sigmoid(0.8 * _lookup(tier, supplier))

    nodes = [
        Node("Season", "categorical", (), lambda v, u: _season_from_uniform(u), _uniform, "uniform quarter", "U(0,1)"),
        Node("Supplier", "categorical", (), lambda v, u: _categorical(suppliers, np.full(n_suppliers, 1 / n_suppliers), u),
             _uniform, f"uniform over {n_suppliers} suppliers", "U(0,1)"),
        Node("Express", "binary", (), lambda v, u: (u < 0.5).astype(float), _uniform, "Bernoulli(0.5)", "U(0,1)"),
        Node("Quantity", "numeric", (), lambda v, u: u, _uniform, "Uniform(0,1)", "U(0,1)"),
        Node("Multi", "binary", ("Supplier",), lambda v, u: (u < multi_prob(v["Supplier"])).astype(float), _uniform,
             "1[u < sigmoid(0.8 tier(Supplier))]", "U(0,1)"),
        Node("Delay", "numeric", ("Supplier", "Express", "Quantity", "Multi"),
             lambda v, e: 20.0 + confounding * _lookup(tier, v["Supplier"]) + 5.0 * v["Quantity"]
             + effect * (2 * v["Express"] - 1) * v["Multi"] + e,
             lambda rng, n: rng.normal(0.0, noise_sd, n),
             "20 + confounding*tier + 5*Quantity + effect*(2*Express-1)*Multi + e",
             f"N(0, {noise_sd}^2)", noise_mean=0.0),
    ]
    params = dict(effect=effect, noise_sd=noise_sd, confounding=confounding,
                  n_suppliers=n_suppliers, structure_seed=structure_seed)
    spec = ScmSpec(
        family="sign_flip",
        nodes=nodes,
        treatments={"Multi": _binary_treatment("Multi")},
        outcome="Delay",
        params=params,
        cate_functions={"Multi": ("Express", lambda x: effect * (2 * np.asarray(x, dtype=float) - 1))},
        propensities={"Multi": lambda table: multi_prob(table["Supplier"])},
    )
    return spec


FAMILIES: dict[str, Callable[..., ScmSpec]] = {
    "maritime": default_maritime_scm,
    "quantity_step": quantity_step_scm,
    "sign_flip": sign_flip_scm,
}


def build_scm(family: str = "maritime", **params) -> ScmSpec:
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise DataError(f"unknown SCM family {family!r}; choose from {sorted(FAMILIES)}") from None
    return factory(**params)

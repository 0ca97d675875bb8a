"""Command-line pipeline: ingest, graph learning, effect estimation and simulation.

Usage::

    causaldelay ingest|dag|ate|cate|policy|simulate --config run.json
        [--seed N] [--out DIR] [--algo hc|tabu|pc] [--treatment NAME]

Exit status is 0 on success, 2 for usage and configuration errors and 3
when an estimation step fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import synthgen
from .cate import build_basis, cate_curve, project_cate
from .dataset import (
    ColumnSpec,
    DataTable,
    DesignMatrix,
    clean,
    derive_quarter,
    encode,
    load_csv,
    summary_stats,
    write_csv,
)
from .dml import NUISANCE_PARAMS, AteEstimate, DmlConfig, covariate_names, estimate_ate, fold_seed
from .errors import CausalDelayError, ConfigError
from .learners import Hyperparams
from .policy import constant_policy, evaluate_policy, fit_policy_tree
from .structure import (
    discretize,
    export_dot,
    graph_record,
    hill_climb,
    pc,
    seeded_dag,
    tabu_search,
)

log = logging.getLogger("causaldelay")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ESTIMATION = 3

ATE_COLUMNS = ("Treatment", "Coef", "t-statistics", "P-value", "Std error")
ALGORITHMS = ("hc", "tabu", "pc")
COMMANDS = ("ingest", "dag", "ate", "cate", "policy", "simulate")


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class DataSource:
    csv: str | None = None
    columns: tuple[ColumnSpec, ...] = ()
    synthetic: dict | None = None
    derive_quarter: dict | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.csv is not None:
            out["csv"] = self.csv
            out["columns"] = [c.to_dict() for c in self.columns]
        if self.synthetic is not None:
            out["synthetic"] = self.synthetic
        if self.derive_quarter is not None:
            out["derive_quarter"] = self.derive_quarter
        return out


@dataclass(frozen=True)
class StructureSettings:
    algorithm: str = "hc"
    score: str | None = None
    alpha: float = 0.01
    max_cond_size: int = 3
    max_parents: int = 4
    max_iter: int = 1000
    tabu_capacity: int = 50
    patience: int = 20
    seed_treatment_edges: bool = True
    bins: int = 4

    def score_for(self, algorithm: str) -> str:
        return self.score or ("bic" if algorithm == "tabu" else "k2")


@dataclass(frozen=True)
class CateSettings:
    covariate: str | None = None
    df: int = 5
    degree: int = 3
    grid: int = 100
    knots: str = "quantile"


@dataclass(frozen=True)
class PolicySettings:
    max_depth: int = 2
    features: tuple[str, ...] | None = None
    holdout: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    source: DataSource
    outcome: str | None = None
    treatments: tuple[str, ...] = ()
    labels: dict = field(default_factory=dict)
    normalize: tuple[str, ...] = ()
    exclude: dict = field(default_factory=dict)
    dag_edges: tuple[tuple[str, str], ...] = ()
    dml: DmlConfig = DmlConfig()
    outcome_learner: Hyperparams | tuple[Hyperparams, ...] = NUISANCE_PARAMS
    propensity_learner: Hyperparams | tuple[Hyperparams, ...] = NUISANCE_PARAMS
    cate: CateSettings = CateSettings()
    policy: PolicySettings = PolicySettings()
    structure: StructureSettings = StructureSettings()
    output_dir: str = "out"
    seed: int = 0
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> dict:
        def learner(choice):
            if isinstance(choice, Hyperparams):
                return asdict(choice)
            return [asdict(h) for h in choice]

        return {
            "data": self.source.to_dict(),
            "outcome": self.outcome,
            "treatments": list(self.treatments),
            "labels": dict(sorted(self.labels.items())),
            "normalize": list(self.normalize),
            "exclude": {k: list(v) for k, v in sorted(self.exclude.items())},
            "dag_edges": [list(e) for e in self.dag_edges],
            "dml": asdict(self.dml),
            "learners": {"outcome": learner(self.outcome_learner), "propensity": learner(self.propensity_learner)},
            "cate": asdict(self.cate),
            "policy": {**asdict(self.policy), "features": list(self.policy.features) if self.policy.features else None},
            "structure": asdict(self.structure),
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        """Hash of everything that determines results; the output location is left out."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def label(self, treatment: str) -> str:
        return self.labels.get(treatment, treatment)

    @property
    def out_path(self) -> Path:
        p = Path(self.output_dir)
        return p if p.is_absolute() else self.base_dir / p


def _section(doc: dict, key: str, cls, path: str):
    raw = doc.get(key, {}) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    known = set(cls.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _learner(raw, path: str):
    if raw is None:
        return NUISANCE_PARAMS
    try:
        if isinstance(raw, list):
            if not raw:
                raise ConfigError(f"{path}: empty grid")
            return tuple(Hyperparams(**h) for h in raw)
        return Hyperparams(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


TOP_LEVEL = {
    "data", "outcome", "treatments", "labels", "normalize", "exclude", "dag_edges", "dml",
    "learners", "cate", "policy", "structure", "output_dir", "seed",
}


def parse_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a configuration document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown configuration field(s) {sorted(unknown)}")
    if "data" not in doc:
        raise ConfigError("missing required field 'data'")
    data = doc["data"]
    if not isinstance(data, dict):
        raise ConfigError("data: expected an object")
    has_csv, has_syn = "csv" in data, "synthetic" in data
    if has_csv == has_syn:
        raise ConfigError("data: give exactly one of 'csv' or 'synthetic'")
    if has_csv:
        if "columns" not in data:
            raise ConfigError("missing required field 'data.columns'")
        try:
            columns = tuple(ColumnSpec.from_dict(c) for c in data["columns"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"data.columns: {exc}") from exc
        source = DataSource(csv=str(data["csv"]), columns=columns, derive_quarter=data.get("derive_quarter"))
    else:
        syn = dict(data["synthetic"])
        if "family" not in syn:
            syn["family"] = "maritime"
        unknown = set(syn) - {"family", "n", "params"}
        if unknown:
            raise ConfigError(f"data.synthetic: unknown field(s) {sorted(unknown)}")
        syn.setdefault("n", 20000)
        syn.setdefault("params", {})
        source = DataSource(synthetic=syn)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    dml_raw = dict(doc.get("dml", {}) or {})
    if "seed" in dml_raw:
        raise ConfigError("dml.seed: set the top-level 'seed' instead")
    dml = _section({"dml": {**dml_raw}}, "dml", DmlConfig, "dml")
    dml = replace(dml, seed=seed)

    learners = doc.get("learners", {}) or {}
    unknown = set(learners) - {"outcome", "propensity"}
    if unknown:
        raise ConfigError(f"learners: unknown field(s) {sorted(unknown)}")
    policy = _section(doc, "policy", PolicySettings, "policy")
    if policy.features is not None:
        policy = replace(policy, features=tuple(policy.features))
    if not 0 <= policy.holdout < 1:
        raise ConfigError("policy.holdout must lie in [0, 1)")
    if policy.max_depth not in (1, 2, 3):
        raise ConfigError("policy.max_depth must be 1, 2 or 3")
    structure = _section(doc, "structure", StructureSettings, "structure")
    if structure.algorithm not in ALGORITHMS:
        raise ConfigError(f"structure.algorithm must be one of {ALGORITHMS}")
    cate = _section(doc, "cate", CateSettings, "cate")

    treatments = doc.get("treatments", [])
    if isinstance(treatments, str):
        treatments = [treatments]
    try:
        dag_edges = tuple((str(a), str(b)) for a, b in doc.get("dag_edges", []))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dag_edges: expected [parent, child] pairs ({exc})") from exc
    return RunConfig(
        source=source,
        outcome=doc.get("outcome"),
        treatments=tuple(treatments),
        labels=dict(doc.get("labels", {}) or {}),
        normalize=tuple(doc.get("normalize", [])),
        exclude={k: tuple(v) for k, v in (doc.get("exclude", {}) or {}).items()},
        dag_edges=dag_edges,
        dml=dml,
        outcome_learner=_learner(learners.get("outcome"), "learners.outcome"),
        propensity_learner=_learner(learners.get("propensity"), "learners.propensity"),
        cate=cate,
        policy=policy,
        structure=structure,
        output_dir=str(doc.get("output_dir", "out")),
        seed=seed,
        base_dir=base_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, path.parent)


def apply_overrides(config: RunConfig, seed=None, out=None, algo=None, treatment=None) -> RunConfig:
    if seed is not None:
        config = replace(config, seed=seed, dml=replace(config.dml, seed=seed))
    if out is not None:
        config = replace(config, output_dir=str(Path(out).resolve()))
    if algo is not None:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
        config = replace(config, structure=replace(config.structure, algorithm=algo))
    if treatment is not None:
        config = replace(config, treatments=(treatment,))
    return config


# ---------------------------------------------------------------- report


@dataclass
class RunReport:
    command: str
    fingerprint: str
    files: list[str] = field(default_factory=list)
    estimates: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return _json_text(asdict(self))


def _clean_json(obj):
    if isinstance(obj, dict):
        return {str(k): _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _json_text(obj) -> str:
    return json.dumps(_clean_json(obj), indent=2, sort_keys=True) + "\n"


class _Outputs:
    """Sequential writer that records every file it creates."""

    def __init__(self, root: Path, report: RunReport):
        self.root = root
        self.report = report
        root.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> Path:
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self.report.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        return self.text(name, _json_text(obj))

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        return self.text(name, buf.getvalue())

    def table(self, name: str, table: DataTable) -> Path:
        write_csv(table, self.root / name)
        self.report.files.append(name)
        return self.root / name

    def finish(self) -> Path:
        name = f"report_{self.report.command}.json"
        self.report.files.append(name)
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.report.to_json())
        return path


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


# ---------------------------------------------------------------- data


@dataclass
class LoadedData:
    table: DataTable
    outcome: str
    scm: synthgen.ScmSpec | None = None
    removed_missing: int = 0
    removed_duplicates: int = 0
    raw_rows: int = 0


def _scm(config: RunConfig) -> synthgen.ScmSpec:
    syn = config.source.synthetic
    try:
        return synthgen.build_scm(syn["family"], **syn.get("params", {}))
    except TypeError as exc:
        raise ConfigError(f"data.synthetic.params: {exc}") from exc


def load_data(config: RunConfig) -> LoadedData:
    if config.source.synthetic is not None:
        scm = _scm(config)
        n = config.source.synthetic.get("n", 20000)
        if not isinstance(n, int) or n < 1:
            raise ConfigError("data.synthetic.n must be a positive integer")
        raw = synthgen.generate(scm, n, config.seed)
        outcome = config.outcome or scm.outcome
    else:
        path = Path(config.source.csv)
        if not path.is_absolute():
            path = config.base_dir / path
        try:
            raw = load_csv(path, config.source.columns)
        except FileNotFoundError:
            raise ConfigError(f"data file not found: {path}") from None
        dq = config.source.derive_quarter
        if dq:
            raw = derive_quarter(raw, dq["date_column"], dq.get("name", "Season"))
        scm = None
        if config.outcome is None:
            outs = [c.name for c in config.source.columns if c.role == "outcome"]
            if len(outs) != 1:
                raise ConfigError("missing required field 'outcome'")
            outcome = outs[0]
        else:
            outcome = config.outcome
    if outcome not in raw:
        raise ConfigError(f"outcome column {outcome!r} not in data")
    table, removed_missing, removed_dup = clean(raw)
    return LoadedData(table, outcome, scm, removed_missing, removed_dup, raw.n_rows)


def _graph_edges(config: RunConfig, data: LoadedData) -> list[tuple[str, str]]:
    if config.dag_edges:
        return list(config.dag_edges)
    if data.scm is not None:
        return data.scm.edges()
    return []


def _descendants(edges, node: str) -> set[str]:
    out: set[str] = set()
    frontier = [node]
    while frontier:
        cur = frontier.pop()
        for a, b in edges:
            if a == cur and b not in out:
                out.add(b)
                frontier.append(b)
    return out


def excluded_columns(config: RunConfig, data: LoadedData, design: DesignMatrix, treatment: str) -> list[str]:
    """Columns kept out of the adjustment set: configured ones plus graph descendants."""
    source = design.source_column[treatment].name
    drop = set(config.exclude.get(treatment, ())) | _descendants(_graph_edges(config, data), source)
    drop.discard(data.outcome)
    return sorted(drop)


def _design(config: RunConfig, data: LoadedData) -> DesignMatrix:
    return encode(data.table, config.normalize)


def _treatments(config: RunConfig, data: LoadedData, design: DesignMatrix) -> list[str]:
    treatments = list(config.treatments)
    if not treatments:
        if data.scm is not None:
            treatments = list(data.scm.treatments)
        else:
            raise ConfigError("missing required field 'treatments'")
    for t in treatments:
        if t not in design.feature_names:
            raise ConfigError(f"treatment {t!r} is not a column or one-hot feature of the data")
        if t == data.outcome:
            raise ConfigError("the outcome cannot also be a treatment")
    return treatments


def run_estimates(config: RunConfig, data: LoadedData) -> tuple[DesignMatrix, list[tuple[str, AteEstimate, list[str]]]]:
    design = _design(config, data)
    out = []
    for t in _treatments(config, data, design):
        excl = excluded_columns(config, data, design, t)
        try:
            est = estimate_ate(
                design, t, data.outcome, config.dml, exclude_columns=excl,
                outcome_learner=config.outcome_learner, propensity_learner=config.propensity_learner,
            )
        except CausalDelayError as exc:
            raise type(exc)(f"treatment {t!r}: {exc}") from exc
        out.append((t, est, excl))
    return design, out


def _base_report(command: str, config: RunConfig, data: LoadedData | None = None) -> RunReport:
    report = RunReport(command, config.fingerprint(), config=config.to_dict())
    if data is not None:
        report.diagnostics.update(
            rows_read=data.raw_rows,
            rows_used=data.table.n_rows,
            removed_missing=data.removed_missing,
            removed_duplicates=data.removed_duplicates,
        )
    return report


# ---------------------------------------------------------------- commands


def cmd_ingest(config: RunConfig) -> RunReport:
    data = load_data(config)
    report = _base_report("ingest", config, data)
    out = _Outputs(config.out_path, report)
    out.table("cleaned.csv", data.table)
    stats = summary_stats(data.table[data.outcome])
    out.json("stats.json", {
        "outcome": data.outcome,
        "rows": data.table.n_rows,
        "removed_missing": data.removed_missing,
        "removed_duplicates": data.removed_duplicates,
        **stats.to_dict(),
    })
    report.diagnostics["stats"] = stats.to_dict()
    out.finish()
    print(f"rows kept {data.table.n_rows} of {data.raw_rows} "
          f"(missing {data.removed_missing}, duplicates {data.removed_duplicates})")
    return report


def cmd_dag(config: RunConfig, algo: str | None = None) -> RunReport:
    algo = algo or config.structure.algorithm
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    data = load_data(config)
    report = _base_report("dag", config, data)
    st = config.structure
    if algo == "pc":
        result = pc(data.table, alpha=st.alpha, max_cond_size=st.max_cond_size)
        graph = result.pdag
        record = graph_record(graph, "pc", alpha=st.alpha, tests=result.n_tests,
                              conflicts=[list(c) for c in graph.conflicts])
        report.diagnostics["tests"] = result.n_tests
        print(f"pc: {result.n_tests} independence tests, "
              f"{len(graph.directed_edges())} directed and {len(graph.undirected_edges())} undirected edges")
    else:
        disc = discretize(data.table, bins=st.bins)
        score = st.score_for(algo)
        if algo == "hc":
            result = hill_climb(disc, None, score, st.max_iter, st.max_parents)
        else:
            init = None
            if st.seed_treatment_edges:
                init = seeded_dag(disc.names, _treatment_edges(config, data, disc.names))
            result = tabu_search(disc, init, score, st.tabu_capacity, st.max_iter, st.patience, st.max_parents)
        graph = result.dag
        record = graph_record(graph, algo, score=result.score, score_kind=score,
                              trajectory=result.trajectory, iterations=result.iterations,
                              stopped=result.stopped)
        report.diagnostics.update(score=result.score, iterations=result.iterations, stopped=result.stopped)
        print(f"{algo}: {score} score {result.score:.4f} after {result.iterations} iterations ({result.stopped})")
    out = _Outputs(config.out_path, report)
    out.text(f"dag_{algo}.dot", export_dot(graph, name=f"dag_{algo}"))
    out.json(f"dag_{algo}.json", record)
    out.finish()
    return report


def _treatment_edges(config: RunConfig, data: LoadedData, nodes) -> list[tuple[str, str]]:
    design = _design(config, data)
    sources = []
    for t in _treatments(config, data, design):
        col = design.source_column[t].name
        if col in nodes and col not in sources:
            sources.append(col)
    return [(s, data.outcome) for s in sources]


def _ate_rows(config: RunConfig, results) -> list[list]:
    return [[config.label(t), e.theta, e.t_statistic, e.p_value, e.std_error] for t, e, _ in results]


def format_ate_table(rows: Sequence[Sequence]) -> str:
    """Fixed-width text rendering of the effect table."""
    cells = [list(ATE_COLUMNS)] + [
        [str(r[0]), f"{r[1]:.2f}", f"{r[2]:.2f}", f"{r[3]:.2e}", f"{r[4]:.3f}"] for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(ATE_COLUMNS))]
    lines = []
    for k, row in enumerate(cells):
        parts = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _estimate_row(config: RunConfig, fingerprint: str, t: str, e: AteEstimate, excl: list[str]) -> dict:
    return {
        **e.record(),
        "label": config.label(t),
        "treatment": t,
        "excluded_columns": excl,
        "rep_thetas": e.rep_thetas,
        "fingerprint": fingerprint,
    }


def cmd_ate(config: RunConfig) -> RunReport:
    data = load_data(config)
    report = _base_report("ate", config, data)
    _, results = run_estimates(config, data)
    rows = _ate_rows(config, results)
    out = _Outputs(config.out_path, report)
    out.csv("ate.csv", ATE_COLUMNS, rows)
    table = format_ate_table(rows)
    out.text("ate.txt", table)
    detail_cols = ("treatment", "label", "coef", "std_error", "t_statistic", "p_value", "ci_low", "ci_high",
                   "n", "k_folds", "n_reps", "clamped_count", "fingerprint")
    detail = [_estimate_row(config, report.fingerprint, t, e, x) for t, e, x in results]
    out.csv("ate_detail.csv", detail_cols, [[d[c] for c in detail_cols] for d in detail])
    report.estimates = detail
    report.diagnostics["fold_seeds"] = [fold_seed(config.dml.seed, r) for r in range(config.dml.n_reps)]
    report.diagnostics["clamped_propensities"] = {t: e.clamped_count for t, e, _ in results}
    out.finish()
    print(table, end="")
    return report


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def cmd_cate(config: RunConfig) -> RunReport:
    cov = config.cate.covariate
    if not cov:
        raise ConfigError("missing required field 'cate.covariate'")
    data = load_data(config)
    if cov not in data.table:
        raise ConfigError(f"cate.covariate {cov!r} not in data")
    if data.table.spec(cov).kind != "numeric":
        raise ConfigError(f"cate.covariate {cov!r} must be numeric, not {data.table.spec(cov).kind}")
    x = np.asarray(data.table[cov], dtype=float)
    c = config.cate
    try:
        basis = build_basis(x, df=c.df, degree=c.degree, knots=c.knots)
    except CausalDelayError as exc:
        raise type(exc)(f"cate.covariate {cov!r}: {exc}") from exc
    report = _base_report("cate", config, data)
    _, results = run_estimates(config, data)
    out = _Outputs(config.out_path, report)
    B = basis.evaluate(x)
    for t, est, excl in results:
        try:
            coef, covm = project_cate(est.mean_psi_b(), B)
        except CausalDelayError as exc:
            raise type(exc)(f"treatment {t!r}: {exc}") from exc
        curve = cate_curve(coef, covm, basis, grid=c.grid, level=config.dml.confidence_level)
        name = f"cate_{_safe(t)}.csv"
        out.csv(name, (cov, "estimate", "band_low", "band_high"), curve.rows())
        report.estimates.append({
            **_estimate_row(config, report.fingerprint, t, est, excl),
            "cate_file": name,
            "covariate": cov,
            "df": c.df,
            "knots": basis.knots.tolist(),
            "coefficients": coef.tolist(),
        })
        print(f"{config.label(t)}: CATE over {cov} written to {name}")
    out.finish()
    return report


def _policy_features(config: RunConfig, design: DesignMatrix, treatment: str, data: LoadedData, excl) -> list[str]:
    if config.policy.features:
        feats = []
        for f in config.policy.features:
            if f in design.feature_names:
                feats.append(f)
            elif design.features_of(f):
                feats.extend(design.features_of(f))
            else:
                raise ConfigError(f"policy.features: unknown feature {f!r}")
        return feats
    return covariate_names(design, treatment, data.outcome, excl)


def cmd_policy(config: RunConfig) -> RunReport:
    data = load_data(config)
    report = _base_report("policy", config, data)
    design, results = run_estimates(config, data)
    out = _Outputs(config.out_path, report)
    n = design.n_rows
    perm = np.random.default_rng(np.random.SeedSequence([config.seed, 7])).permutation(n)
    n_hold = int(round(config.policy.holdout * n))
    hold, train = np.sort(perm[:n_hold]), np.sort(perm[n_hold:])
    for t, est, excl in results:
        feats = _policy_features(config, design, t, data, excl)
        X = design.subset(feats).values
        psi = est.mean_psi_b()
        tree = fit_policy_tree(X[train], psi[train], config.policy.max_depth, feats)
        train_value = evaluate_policy(tree, X[train], psi[train])
        entry = {
            "treatment": t,
            "label": config.label(t),
            "features": feats,
            "train_value": train_value.value,
            "train_mean_value": train_value.mean,
            "train_rows": int(len(train)),
            "treat_all_train_value": evaluate_policy(constant_policy(1, len(feats)), X[train], psi[train]).value,
            "treat_none_train_value": evaluate_policy(constant_policy(0, len(feats)), X[train], psi[train]).value,
            "fingerprint": report.fingerprint,
        }
        if len(hold):
            hv = evaluate_policy(tree, X[hold], psi[hold])
            entry.update(holdout_value=hv.value, holdout_mean_value=hv.mean, holdout_rows=int(len(hold)))
        else:
            entry.update(holdout_value=None, holdout_mean_value=None, holdout_rows=0)
        base = f"policy_{_safe(t)}"
        out.text(base + ".txt", tree.to_text())
        out.text(base + ".dot", tree.to_dot())
        entry["files"] = [base + ".txt", base + ".dot"]
        report.estimates.append(entry)
        held = f"{entry['holdout_mean_value']:.4f}" if entry["holdout_mean_value"] is not None else "n/a"
        print(f"{config.label(t)}: train value/row {train_value.mean:.4f}, held-out value/row {held}")
        print(tree.to_text(), end="")
    out.finish()
    return report


def cmd_simulate(config: RunConfig) -> RunReport:
    if config.source.synthetic is None:
        raise ConfigError("simulate needs a 'data.synthetic' source")
    scm = _scm(config)
    n = config.source.synthetic.get("n", 20000)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("data.synthetic.n must be a positive integer")
    table = synthgen.generate(scm, n, config.seed)
    report = _base_report("simulate", config)
    out = _Outputs(config.out_path, report)
    out.table("data.csv", table)
    out.text("scm.json", scm.to_text() + "\n")
    effects = {}
    for t in scm.treatments:
        eff = synthgen.true_ate(scm, t, seed=config.seed)
        effects[t] = {"true_ate": eff.value, "std_error": eff.std_error, "exact": eff.exact}
    out.json("oracle.json", {"family": scm.family, "n": n, "seed": config.seed,
                             "outcome": scm.outcome, "effects": effects})
    report.diagnostics.update(rows=n, family=scm.family)
    out.finish()
    print(f"simulated {n} rows from {scm.family!r}")
    return report


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causaldelay", description="Causal analysis of delivery delays.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--algo", choices=ALGORITHMS, help="structure learning algorithm (dag)")
        p.add_argument("--treatment", help="restrict estimation to one treatment")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(command: str, config: RunConfig) -> RunReport:
    if command == "ingest":
        return cmd_ingest(config)
    if command == "dag":
        return cmd_dag(config)
    if command == "ate":
        return cmd_ate(config)
    if command == "cate":
        return cmd_cate(config)
    if command == "policy":
        return cmd_policy(config)
    if command == "simulate":
        return cmd_simulate(config)
    raise ConfigError(f"unknown command {command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = apply_overrides(load_config(args.config), args.seed, args.out, args.algo, args.treatment)
        run(args.command, config)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CausalDelayError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

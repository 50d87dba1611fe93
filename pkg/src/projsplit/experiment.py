"""Lasso experiments: algorithm notation, presets, runs and CSV output."""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .data import DatasetSpec, load_dataset
from .errors import ConfigError
from .lasso import LassoMetrics, LassoProblem, build_splitting, calibrate_lambda, fista, oracle_solution
from .scheduler import SchedulePolicy
from .solver import RunRecord, SolverConfig, solve

__all__ = [
    "AlgorithmSpec",
    "ExperimentSpec",
    "PRESETS",
    "DATASET_PRESETS",
    "parse_algorithm",
    "algorithm_from",
    "spec_from_dict",
    "resolve_preset",
    "load_config",
    "prepare_problem",
    "run_algorithm",
    "run_experiment",
    "qe_to_reach",
    "RUN_HEADER",
    "SUMMARY_HEADER",
]

RUN_HEADER = [
    "iteration",
    "q_equivalents",
    "objective_residual",
    "subgrad_residual",
    "phi",
    "pi",
    "alpha",
    "blocks",
    "seed",
]

SUMMARY_HEADER = [
    "label",
    "algorithm",
    "r",
    "policy",
    "delay",
    "per_iter",
    "seed",
    "status",
    "iterations",
    "q_equivalents",
    "final_objective_residual",
    "final_subgrad_residual",
    "qe_to_1e-4",
    "qe_to_1e-6",
    "file",
]

_POLICY_CODES = {"G": "greedy", "R": "random", "RR": "rr"}
_POLICY_LETTERS = {"greedy": "G", "random": "R", "rr": "RR"}


@dataclass
class AlgorithmSpec:
    """One solver configuration in an experiment.

    ``gamma`` and ``rho`` override the experiment-wide values; ``rho`` is
    the fixed PSBack stepsize for every block.
    """

    name: str = "psfor"
    r: int = 10
    policy: str = "greedy"
    delay: int = 0
    per_iter: int = 1
    gamma: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        self.name = self.name.lower()
        if self.name not in ("psfor", "psback", "fista"):
            raise ConfigError(f"unknown algorithm {self.name!r}")
        if self.policy not in _POLICY_LETTERS:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.r < 1 or self.per_iter < 1 or self.delay < 0:
            raise ConfigError("need r >= 1, per_iter >= 1 and delay >= 0")
        if self.per_iter > self.r:
            raise ConfigError(f"per_iter {self.per_iter} exceeds the {self.r} blocks")

    @property
    def label(self) -> str:
        if self.name == "fista":
            return "FISTA"
        head = "PSFor" if self.name == "psfor" else "PSBack"
        if self.policy == "random" and self.delay and self.per_iter == 1:
            return f"{head}({self.r},{self.delay})"
        parts = [str(self.r), _POLICY_LETTERS[self.policy]]
        if self.per_iter != 1:
            parts.append(str(self.per_iter))
        label = f"{head}({','.join(parts)})"
        return f"{label}+D{self.delay}" if self.delay else label

    @property
    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9]+", "_", self.label).strip("_").lower()


_ALGO_RE = re.compile(r"^\s*(psfor|psback)\s*\(\s*(\d+)\s*(?:,\s*([A-Za-z]+|\d+)\s*)?(?:,\s*(\d+)\s*)?\)\s*$", re.I)


def parse_algorithm(text: str) -> AlgorithmSpec:
    """Parse the bracket notation for algorithms.

    ``PSFor(r,G)`` and ``PSFor(r,R)`` pick greedy or random selection,
    ``PSFor(r,G,b)`` processes ``b`` blocks per iteration and ``PSFor(r,D)``
    with an integer ``D`` means random selection with maximum delay ``D``.
    ``PSBack`` takes the same arguments and ``FISTA`` none.
    """
    if text.strip().lower() == "fista":
        return AlgorithmSpec(name="fista")
    m = _ALGO_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse algorithm {text!r}; expected e.g. PSFor(10,G), PSBack(10,5) or FISTA")
    name, r, second, b = m.groups()
    kw = {"name": name, "r": int(r)}
    if second is not None:
        if second.isdigit():
            kw.update(policy="random", delay=int(second))
        elif second.upper() in _POLICY_CODES:
            kw["policy"] = _POLICY_CODES[second.upper()]
        else:
            raise ConfigError(f"unknown selection code {second!r} in {text!r}")
    if b is not None:
        kw["per_iter"] = int(b)
    return AlgorithmSpec(**kw)


# Tuned values per dataset: gamma (shared by PSFor and PSBack), fixed PSBack
# stepsize and lambda.
DATASET_PRESETS = {
    "gene": {"gamma": 100.0, "rho": 1e-3, "lam": 10.0},
    "drivFace": {"gamma": 100.0, "rho": 1.0, "lam": 10.0},
    "hand": {"gamma": 1.0, "rho": 0.1, "lam": 1.0},
    "random": {"gamma": 1.0, "rho": 0.1, "lam": 1.0},
}

_PRESET_ALGOS = {
    "psfor-10G": "PSFor(10,G)",
    "psback-10G": "PSBack(10,G)",
    "psfor-10R": "PSFor(10,R)",
    "psfor-1-0": "PSFor(1,0)",
    "fista": "FISTA",
}

PRESETS = {f"{ds}-{key}": (ds, algo) for ds in DATASET_PRESETS for key, algo in _PRESET_ALGOS.items()}


@dataclass
class ExperimentSpec:
    """A full experiment: one dataset, one lambda, several algorithms."""

    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    lam: Union[float, str] = "auto-10pct"
    algorithms: list = field(default_factory=lambda: [parse_algorithm("PSFor(10,G)")])
    budget_qe: float = 500.0
    max_iterations: int = 10**7
    gamma: float = 1.0
    rho: float = 0.1
    cg_max_iter: int = 200
    seed: int = 0
    f_star: Optional[float] = None
    metrics_every: int = 1
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        if not self.budget_qe > 0:
            raise ConfigError("the Q-equivalent budget must be positive")
        if isinstance(self.lam, str):
            if self.lam != "auto-10pct":
                try:
                    self.lam = float(self.lam)
                except ValueError:
                    raise ConfigError(f"lambda must be a number or 'auto-10pct', got {self.lam!r}") from None
        if not isinstance(self.lam, str) and self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if not self.gamma > 0 or not self.rho > 0:
            raise ConfigError("gamma and rho must be positive")
        if self.cg_max_iter < 0:
            raise ConfigError("cg_max_iter must be nonnegative")
        if self.metrics_every < 1 or self.jobs < 1:
            raise ConfigError("metrics_every and jobs must be at least 1")
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else algorithm_from(a) for a in self.algorithms]
        if not self.algorithms:
            raise ConfigError("no algorithms given")


def algorithm_from(entry) -> AlgorithmSpec:
    if isinstance(entry, str):
        return parse_algorithm(entry)
    if isinstance(entry, dict):
        allowed = {f.name for f in fields(AlgorithmSpec)}
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError(f"unknown algorithm keys {sorted(unknown)}")
        return AlgorithmSpec(**entry)
    raise ConfigError(f"cannot read algorithm entry {entry!r}")


def resolve_preset(name: str) -> dict:
    """Spec fields for a preset such as ``random-psfor-10G``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; run the presets verb for the list")
    ds, algo = PRESETS[name]
    vals = DATASET_PRESETS[ds]
    out = {"gamma": vals["gamma"], "rho": vals["rho"], "lam": vals["lam"], "algorithms": [algo]}
    if ds == "random":
        out["dataset"] = {"format": "synthetic", "m": 1000, "d": 10000, "seed": 1}
    return out


def load_config(path) -> dict:
    """Read a YAML experiment file into a plain dict."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    if "lambda" in raw:
        raw["lam"] = raw.pop("lambda")
    return raw


def spec_from_dict(raw: dict) -> ExperimentSpec:
    raw = dict(raw)
    allowed = {f.name for f in fields(ExperimentSpec)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    ds = raw.pop("dataset", None) or {}
    if isinstance(ds, dict):
        ds_allowed = {f.name for f in fields(DatasetSpec)}
        bad = set(ds) - ds_allowed
        if bad:
            raise ConfigError(f"unknown dataset keys {sorted(bad)}")
        ds = DatasetSpec(**ds)
    return ExperimentSpec(dataset=ds, **raw)


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------


@dataclass
class PreparedProblem:
    problem: LassoProblem
    x_star: np.ndarray
    f_star: float


def prepare_problem(spec: ExperimentSpec) -> PreparedProblem:
    Q, b = load_dataset(spec.dataset)
    lam = calibrate_lambda(Q, b, 0.1) if spec.lam == "auto-10pct" else float(spec.lam)
    problem = LassoProblem(Q, b, lam)
    x_star = oracle_solution(problem)
    f_star = problem.objective(x_star) if spec.f_star is None else float(spec.f_star)
    return PreparedProblem(problem, x_star, f_star)


def run_algorithm(prep: PreparedProblem, algo: AlgorithmSpec, spec: ExperimentSpec) -> RunRecord:
    metrics = LassoMetrics(prep.problem)
    if algo.name == "fista":
        return fista(
            prep.problem,
            max_iterations=spec.max_iterations,
            max_q_equivalents=spec.budget_qe,
            metrics=metrics,
            f_star=prep.f_star,
            metrics_every=spec.metrics_every,
        )
    split, settings = build_splitting(prep.problem, algo.r, algo.name, cg_max_iter=spec.cg_max_iter)
    rho = None
    if algo.name == "psback":
        rho = algo.rho if algo.rho is not None else spec.rho
    cfg = SolverConfig(
        gamma=algo.gamma if algo.gamma is not None else spec.gamma,
        rho=rho,
        last_block_rho=settings["last_block_rho"],
        policy=SchedulePolicy(algo.policy, algo.per_iter, settings["always_active"]),
        max_delay=algo.delay,
        seed=spec.seed,
        max_iterations=spec.max_iterations,
        max_q_equivalents=spec.budget_qe,
        metrics_every=spec.metrics_every,
    )
    return solve(split, cfg, metrics, prep.f_star)


def qe_to_reach(run: RunRecord, threshold: float, metric: str = "objective_residual") -> Optional[float]:
    """Q-equivalents spent when ``metric`` first drops to ``threshold``."""
    for rec in run.records:
        val = getattr(rec, metric)
        if val is not None and val <= threshold:
            return rec.q_equivalents
    return None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def run_rows(run: RunRecord) -> list[list[str]]:
    rows = []
    for rec in run.records:
        rows.append(
            [
                str(rec.k),
                _fmt(float(rec.q_equivalents)),
                _fmt(rec.objective_residual),
                _fmt(rec.subgrad_residual),
                _fmt(float(rec.phi)),
                _fmt(float(rec.pi)),
                _fmt(float(rec.alpha)),
                " ".join(str(i + 1) for i in rec.active),
                str(run.seed),
            ]
        )
    return rows


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _last(run: RunRecord, name: str):
    for rec in reversed(run.records):
        val = getattr(rec, name)
        if val is not None:
            return val
    return None


def run_experiment(spec: ExperimentSpec, prep: Optional[PreparedProblem] = None) -> dict:
    """Run every algorithm and write one CSV each plus ``summary.csv``.

    Returns a dict mapping labels to ``(RunRecord, path)`` and the summary
    path under ``"summary"``.
    """
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    prep = prep or prepare_problem(spec)

    labels = [a.label for a in spec.algorithms]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate algorithms in {labels}")

    def one(algo):
        return run_algorithm(prep, algo, spec)

    if spec.jobs > 1 and len(spec.algorithms) > 1:
        with ThreadPoolExecutor(spec.jobs) as pool:
            runs = list(pool.map(one, spec.algorithms))
    else:
        runs = [one(a) for a in spec.algorithms]

    results = {}
    summary = []
    for algo, run in zip(spec.algorithms, runs):
        path = out / f"{algo.slug}.csv"
        try:
            _write_csv(path, RUN_HEADER, run_rows(run))
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from exc
        results[algo.label] = (run, path)
        summary.append(
            [
                algo.label,
                algo.name,
                str(algo.r) if algo.name != "fista" else "",
                algo.policy if algo.name != "fista" else "",
                str(algo.delay),
                str(algo.per_iter),
                str(run.seed),
                run.status.value,
                str(run.iterations),
                _fmt(float(run.q_equivalents)),
                _fmt(_last(run, "objective_residual")),
                _fmt(_last(run, "subgrad_residual")),
                _fmt(qe_to_reach(run, 1e-4)),
                _fmt(qe_to_reach(run, 1e-6)),
                path.name,
            ]
        )
    summary_path = out / "summary.csv"
    _write_csv(summary_path, SUMMARY_HEADER, summary)
    results["summary"] = summary_path
    return results


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **kw)

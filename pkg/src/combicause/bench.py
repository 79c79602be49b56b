"""Wall-clock and CI-test-count sweeps over variables and rows.

A single base dataset is generated per suite, at the largest variable and row
counts; sweep points are column prefixes and row prefixes of it, the way the
scalability figures use subsets of one large survey.  Planted causes are the
leading columns, so every sweep point keeps them.
"""

from __future__ import annotations

import csv
import gc
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baseline import expanded_pool_size, naive_h
from .citest import BudgetExceeded, CITester, TestConfig
from .dataset import BinaryDataset, load_csv
from .mhpc import MhpcConfig, mh_pc
from .synth import GenSpec, generate

CSV_FIELDS = ["algorithm", "n_variables", "n_rows", "wall_time_s", "n_ci_tests",
              "n_candidates", "n_pruned"]
ALGORITHMS = ("mhpc-f", "mhpc-b", "naive-h")


@dataclass
class BenchRecord:
    algorithm: str
    n_variables: int
    n_rows: int
    wall_time_s: float
    n_ci_tests: int
    n_candidates: int = 0
    n_pruned: int = 0
    sweep: str = "variables"
    status: str = "ok"  # "ok" or "budget" when naive-h hit its cap

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if min(self.n_variables, self.n_rows, self.n_ci_tests, self.n_candidates, self.n_pruned) < 0:
            raise ValueError("bench counts must be non-negative")


@dataclass(frozen=True)
class BenchSuite:
    """Sweep design.  ``n_variables`` counts predictors, not the target."""

    name: str
    variables: tuple[int, ...] = (30, 50, 70, 100)
    variables_rows: int = 50_000
    rows: tuple[int, ...] = ()
    rows_variables: int = 100
    algorithms: tuple[str, ...] = ("mhpc-f", "mhpc-b")
    naive_in_rows_sweep: bool = False
    repeats: int = 3
    naive_ci_budget: int = 100_000
    seed: int = 0
    k_max: int = 2
    test: TestConfig = field(default_factory=TestConfig)

    def __post_init__(self):
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    @property
    def max_rows(self) -> int:
        return max((self.variables_rows, *self.rows))

    @property
    def max_variables(self) -> int:
        return max((*self.variables, self.rows_variables if self.rows else 0))


SUITES: dict[str, BenchSuite] = {
    "figures": BenchSuite(
        "figures", variables=(30, 50, 70, 100, 150), variables_rows=50_000,
        rows=(50_000, 100_000, 150_000, 200_000, 250_000), rows_variables=100,
        algorithms=ALGORITHMS, repeats=1, naive_ci_budget=200_000),
    "quick": BenchSuite(
        "quick", variables=(30, 50, 70, 100), variables_rows=50_000,
        rows=(25_000, 50_000, 100_000), rows_variables=50, algorithms=ALGORITHMS,
        repeats=5),
}


def suite(name: str, **overrides) -> BenchSuite:
    try:
        base = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown bench preset {name!r}; choose from {sorted(SUITES)}") from None
    return replace(base, **overrides)


def base_spec(s: BenchSuite) -> GenSpec:
    """Logistic data with 5 single and 5 combined causes.

    Combined-cause parents cover roughly 100-150 rows whatever the size, so
    the planted effect stays splittable into marginally null components.
    """
    n = s.max_rows
    return GenSpec(s.max_variables, n, 5, 5, "logistic", seed=s.seed,
                   combined_prevalence=(100 / n, 150 / n))


def base_dataset(s: BenchSuite) -> BinaryDataset:
    dataset, _ = generate(base_spec(s))
    return dataset


def _run_once(algorithm: str, dataset: BinaryDataset, s: BenchSuite) -> tuple[float, dict]:
    # like timeit, keep the collector out of the measurement
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return _timed(algorithm, dataset, s)
    finally:
        if was_enabled:
            gc.enable()


def _timed(algorithm: str, dataset: BinaryDataset, s: BenchSuite) -> tuple[float, dict]:
    t0 = time.perf_counter()
    if algorithm == "naive-h":
        tester = CITester(dataset, s.test, max_tests=s.naive_ci_budget)
        status = "ok"
        try:
            naive_h(dataset, s.k_max, tester=tester)
        except BudgetExceeded:
            status = "budget"
        elapsed = time.perf_counter() - t0
        n_pred = len(dataset.predictors)
        n_cand = expanded_pool_size(n_pred, s.k_max) - n_pred
        return elapsed, {"n_ci_tests": tester.n_tests, "n_candidates": n_cand,
                         "n_pruned": 0, "status": status}
    variant = "F" if algorithm == "mhpc-f" else "B"
    state = mh_pc(dataset, MhpcConfig(variant, s.k_max, s.test))
    elapsed = time.perf_counter() - t0
    return elapsed, {"n_ci_tests": state.n_ci_tests, "n_candidates": state.n_generated,
                     "n_pruned": state.n_pruned, "status": "ok"}


def time_point(dataset: BinaryDataset, algorithms: Sequence[str], s: BenchSuite,
               sweep: str) -> list[BenchRecord]:
    """Best-of-``repeats`` timings; repeats of different algorithms are interleaved."""
    best: dict[str, tuple[float, dict]] = {}
    for _ in range(s.repeats):
        for alg in algorithms:
            if alg == "naive-h" and alg in best:
                continue  # deterministic and slow; one run is enough
            elapsed, info = _run_once(alg, dataset, s)
            if alg not in best or elapsed < best[alg][0]:
                best[alg] = (elapsed, info)
    n_vars = len(dataset.predictors)
    return [BenchRecord(alg, n_vars, dataset.n_rows, best[alg][0], best[alg][1]["n_ci_tests"],
                        best[alg][1]["n_candidates"], best[alg][1]["n_pruned"], sweep,
                        best[alg][1]["status"])
            for alg in algorithms]


def run_suite(s: BenchSuite, dataset: BinaryDataset | None = None,
              progress: Callable[[BenchRecord], None] | None = None) -> list[BenchRecord]:
    """Run every sweep point of ``s`` sequentially."""
    if dataset is None:
        dataset = base_dataset(s)
    preds = [dataset.names[i] for i in dataset.predictors]
    need = s.max_variables
    if len(preds) < need or dataset.n_rows < s.max_rows:
        raise ValueError(f"base dataset too small: need {need} predictors and {s.max_rows} rows")
    records: list[BenchRecord] = []

    def emit(recs):
        for r in recs:
            records.append(r)
            if progress:
                progress(r)

    for nv in s.variables:
        emit(time_point(dataset.subset(preds[:nv], s.variables_rows), s.algorithms, s, "variables"))
    row_algs = [a for a in s.algorithms if a != "naive-h" or s.naive_in_rows_sweep]
    for nr in s.rows:
        emit(time_point(dataset.subset(preds[:s.rows_variables], nr), row_algs, s, "rows"))
    return records


def run_files(paths: Sequence[str | Path], target: str, s: BenchSuite,
              progress: Callable[[BenchRecord], None] | None = None) -> list[BenchRecord]:
    """Time the algorithms of ``s`` on existing CSV datasets."""
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"dataset missing: {', '.join(missing)}")
    records = []
    for p in paths:
        dataset = load_csv(p, target)  # loading is not timed
        for r in time_point(dataset, s.algorithms, s, "files"):
            records.append(r)
            if progress:
                progress(r)
    return records


def write_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([r.algorithm, r.n_variables, r.n_rows, f"{r.wall_time_s:.6f}",
                             r.n_ci_tests, r.n_candidates, r.n_pruned])


def write_json(records: Sequence[BenchRecord], s: BenchSuite, path: str | Path) -> None:
    cfg = asdict(s)
    payload = {"suite": cfg, "records": [asdict(r) for r in records]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) on log(x)."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.maximum(np.asarray(y, dtype=float), 1e-12))
    return float(np.polyfit(x, y, 1)[0])


def plot(records: Sequence[BenchRecord], path: str | Path) -> None:
    """Two-panel SVG: time vs variables and time vs rows."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    panels = (("variables", "n_variables", "number of variables"),
              ("rows", "n_rows", "number of rows"))
    for ax, (sweep, attr, xlabel) in zip(axes, panels):
        recs = [r for r in records if r.sweep == sweep]
        for alg in ALGORITHMS:
            pts = sorted((getattr(r, attr), r.wall_time_s, r.status) for r in recs if r.algorithm == alg)
            if not pts:
                continue
            xs, ys, st = zip(*pts)
            line, = ax.plot(xs, ys, marker="o", label=alg)
            capped = [(a, b) for a, b, c in pts if c == "budget"]
            if capped:
                cx, cy = zip(*capped)
                ax.scatter(cx, cy, marker="x", s=80, color=line.get_color(),
                           label=f"{alg} (budget hit)")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("wall time (s)")
        ax.set_yscale("log")
        ax.set_title(f"time vs {sweep}")
        if recs:
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

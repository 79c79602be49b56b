"""Conditional independence tests between a (combined) variable and the target."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .dataset import (
    BinaryDataset,
    ColumnCache,
    CombinedVariable,
    ContingencyTable,
    cooccurrence,
    count_cells,
    informative_strata,
    stratum_masks,
)


@dataclass(frozen=True)
class TestConfig:
    """Thresholds and policies shared by every CI test of a run.

    ``unreliable_policy`` decides the verdict when a test has fewer than
    ``min_samples_per_dof`` rows per free parameter: ``"dependent"`` keeps the
    candidate (never accept independence from thin evidence).
    """

    __test__ = False  # not a pytest class

    alpha_causal: float = 0.05
    alpha_redundancy: float = 0.01
    min_samples_per_dof: int = 5
    max_k: int = 3
    statistic: str = "g2"
    unreliable_policy: str = "dependent"
    prune_on_unreliable: bool = False
    # never condition on a variable whose component set nests with the tested one
    bar_components: bool = True

    def __post_init__(self):
        for name in ("alpha_causal", "alpha_redundancy"):
            a = getattr(self, name)
            if not 0 < a < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {a}")
        if self.max_k < 0:
            raise ValueError("max_k must be >= 0")
        if self.min_samples_per_dof < 0:
            raise ValueError("min_samples_per_dof must be >= 0")
        if self.statistic not in ("g2", "x2"):
            raise ValueError(f"unknown test statistic {self.statistic!r}")
        if self.unreliable_policy not in ("dependent", "independent"):
            raise ValueError(f"unknown unreliable policy {self.unreliable_policy!r}")

    def with_(self, **changes) -> "TestConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CiResult:
    statistic: float
    dof: int
    p_value: float
    reliable: bool
    independent: bool


class ConditioningSetTooLarge(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """A configured candidate or CI-test budget was exhausted."""


def chi2_sf(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square distribution."""
    if dof <= 0:
        return 1.0
    if statistic <= 0:
        return 1.0
    return float(special.chdtrc(dof, statistic))


def _stratum_terms(cells, statistic: str) -> tuple[float, int]:
    """Statistic summed over informative strata, and their number (the dof)."""
    total = 0.0
    dof = 0
    for (a, b), (c, d) in cells.tolist():
        r0, r1, c0, c1 = a + b, c + d, a + c, b + d
        if not (r0 and r1 and c0 and c1):
            continue
        dof += 1
        n = r0 + r1
        for o, r, k in ((a, r0, c0), (b, r0, c1), (c, r1, c0), (d, r1, c1)):
            e = r * k / n
            if statistic == "g2":
                if o:
                    total += o * math.log(o / e)
            else:
                total += (o - e) ** 2 / e
    if statistic == "g2":
        total = max(2.0 * total, 0.0)
    return total, dof


def g2_statistic(cells: np.ndarray) -> float:
    """2 * sum o ln(o/e) over informative strata and nonzero cells."""
    return _stratum_terms(np.asarray(cells).reshape(-1, 2, 2), "g2")[0]


def x2_statistic(cells: np.ndarray) -> float:
    return _stratum_terms(np.asarray(cells).reshape(-1, 2, 2), "x2")[0]


_STATISTICS = {"g2": g2_statistic, "x2": x2_statistic}


def _decide(stat: float, dof: int, n_eff: int, alpha: float, cfg: TestConfig) -> CiResult:
    if dof == 0:
        return CiResult(0.0, 0, 1.0, n_eff >= cfg.min_samples_per_dof, True)
    p = chi2_sf(stat, dof)
    reliable = n_eff >= cfg.min_samples_per_dof * (dof + 1)
    if reliable:
        independent = p >= alpha
    else:
        independent = cfg.unreliable_policy == "independent" and p >= alpha
    return CiResult(stat, dof, p, reliable, independent)


def decide_unstratified(cells: np.ndarray, alpha: float, cfg: TestConfig) -> list[CiResult]:
    """Vectorised verdicts for a batch of single-stratum ``(N, 2, 2)`` tables.

    Gives the same results as testing each table on its own.
    """
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2, 2)
    obs = cells.astype(float)
    n = obs.sum(axis=(1, 2), keepdims=True)
    exp = obs.sum(axis=2, keepdims=True) * obs.sum(axis=1, keepdims=True) / np.where(n > 0, n, 1)
    dof = informative_strata(cells).astype(int)
    safe_exp = np.where(exp > 0, exp, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if cfg.statistic == "g2":
            terms = np.where(obs > 0, obs * np.log(np.where(obs > 0, obs, 1.0) / safe_exp), 0.0)
            stat = np.maximum(2.0 * terms.sum(axis=(1, 2)), 0.0)
        else:
            stat = (((obs - exp) ** 2) / safe_exp).sum(axis=(1, 2))
    stat = np.where(dof > 0, stat, 0.0)
    p = np.where((dof > 0) & (stat > 0), special.chdtrc(1, stat), 1.0)
    n_eff = cells.sum(axis=(1, 2))
    out = []
    for s, d, pv, ne in zip(stat.tolist(), dof.tolist(), p.tolist(), n_eff.tolist()):
        if d == 0:
            out.append(CiResult(0.0, 0, 1.0, ne >= cfg.min_samples_per_dof, True))
            continue
        reliable = ne >= cfg.min_samples_per_dof * 2
        if reliable:
            independent = pv >= alpha
        else:
            independent = cfg.unreliable_policy == "independent" and pv >= alpha
        out.append(CiResult(s, 1, pv, reliable, independent))
    return out


def g2_test(table: ContingencyTable, alpha: float, cfg: TestConfig | None = None) -> CiResult:
    """Apply the configured statistic (G² by default) to a stratified table.

    A table without informative strata has ``dof == 0`` and is reported as
    independent with statistic 0 and p-value 1.
    """
    cfg = cfg or TestConfig()
    stat = _STATISTICS[cfg.statistic](table.cells)
    return _decide(stat, table.dof, table.n_effective, alpha, cfg)


class CITester:
    """Runs CI tests against one dataset, counting every test performed.

    Materialized combined variables are shared through a :class:`ColumnCache`;
    test verdicts themselves are never cached, so ``n_tests`` is the number of
    tables actually counted.
    """

    def __init__(self, dataset: BinaryDataset, cfg: TestConfig | None = None,
                 cache: ColumnCache | None = None, max_tests: int | None = None):
        self.dataset = dataset
        self.cfg = cfg or TestConfig()
        self.cache = cache or ColumnCache(dataset)
        self.max_tests = max_tests
        self._lock = threading.Lock()
        self.n_tests = 0
        self.max_cond_seen = 0

    def _bump(self, k: int, count: int = 1) -> None:
        with self._lock:
            self.n_tests += count
            if k > self.max_cond_seen:
                self.max_cond_seen = k
            if self.max_tests is not None and self.n_tests > self.max_tests:
                raise BudgetExceeded(f"CI-test budget of {self.max_tests} exceeded")

    def table(self, x: CombinedVariable, cond: Sequence[CombinedVariable] = (),
              row_mask: np.ndarray | None = None) -> ContingencyTable:
        get = self.cache.get
        base = self.dataset.valid_mask if row_mask is None else self.dataset.valid_mask & row_mask
        cells = count_cells(get(x), self.dataset.target, stratum_masks(base, [get(c) for c in cond]))
        return ContingencyTable(cells, int(informative_strata(cells).sum()), int(cells.sum()))

    def test(self, x: CombinedVariable, cond: Sequence[CombinedVariable] = (),
             alpha: float | None = None, row_mask: np.ndarray | None = None) -> CiResult:
        cond = tuple(cond)
        if len(cond) > self.cfg.max_k:
            raise ConditioningSetTooLarge(
                f"conditioning set of size {len(cond)} exceeds max_k={self.cfg.max_k}")
        self._bump(len(cond))
        get = self.cache.get
        base = self.dataset.valid_mask if row_mask is None else self.dataset.valid_mask & row_mask
        cells = count_cells(get(x), self.dataset.target, stratum_masks(base, [get(c) for c in cond]))
        stat, dof = _stratum_terms(cells, self.cfg.statistic)
        return _decide(stat, dof, int(cells.sum()),
                       self.cfg.alpha_causal if alpha is None else alpha, self.cfg)

    def restricted_pairs(self, pairs: Sequence[tuple[CombinedVariable, CombinedVariable]],
                         alpha: float | None = None) -> list[tuple[CiResult, CiResult]]:
        """For each ``(u, v)``: u vs T on rows with v = 1, and v vs T on rows with u = 1.

        Equivalent to two :meth:`test` calls per pair with the partner as
        row mask, but all counts come from one co-occurrence pass.
        """
        if not pairs:
            return []
        alpha = self.cfg.alpha_causal if alpha is None else alpha
        parts = sorted({p for pair in pairs for p in pair})
        pos = {p: i for i, p in enumerate(parts)}
        cols = np.stack([self.cache.get(p) for p in parts])
        both, with_t = cooccurrence(cols, self.dataset.target, self.dataset.n_rows)
        a = np.array([pos[u] for u, _ in pairs])
        b = np.array([pos[v] for _, v in pairs])
        n_uv, n_uvt = both[a, b], with_t[a, b]

        def cells(n, n_t):
            out = np.empty((len(pairs), 2, 2), dtype=np.int64)
            out[:, 1, 1] = n_uvt
            out[:, 1, 0] = n_uv - n_uvt
            out[:, 0, 1] = n_t - n_uvt
            out[:, 0, 0] = n - n_uv - n_t + n_uvt
            return out

        self._bump(0, 2 * len(pairs))
        r_u = decide_unstratified(cells(both[b, b], with_t[b, b]), alpha, self.cfg)
        r_v = decide_unstratified(cells(both[a, a], with_t[a, a]), alpha, self.cfg)
        return list(zip(r_u, r_v))

    def strength(self, x: CombinedVariable) -> tuple[CiResult, tuple]:
        res = self.test(x, ())
        return res, strength_key(res)


def ci(dataset: BinaryDataset, x: CombinedVariable, cond: Iterable[CombinedVariable] = (),
       cfg: TestConfig | None = None, alpha: float | None = None,
       row_mask: np.ndarray | None = None) -> CiResult:
    """One-off CI test of ``x`` against the target given ``cond``."""
    return CITester(dataset, cfg).test(x, tuple(cond), alpha, row_mask)


def strength_key(res: CiResult) -> tuple[float, float]:
    """Larger is stronger: smaller p-value first, then larger statistic."""
    return (-res.p_value, res.statistic)


def assoc_strength(dataset: BinaryDataset, x: CombinedVariable,
                   cfg: TestConfig | None = None) -> tuple[float, float]:
    return strength_key(ci(dataset, x, (), cfg))


def _tie_round(v: float) -> float:
    # mirrored tables give the same statistic up to summation order
    return float(f"{v:.10g}")


def open_order_key(x: CombinedVariable, res: CiResult) -> tuple:
    """Ascending sort key realising descending strength with index tie-break.

    p-values and statistics are compared to 10 significant digits so that
    mathematically tied tables fall through to the component order.
    """
    return (_tie_round(res.p_value), -_tie_round(res.statistic), x.components)

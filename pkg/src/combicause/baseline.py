"""Naive-H: expand every combination up front, then run plain HITON-PC.

Only feasible for a handful of predictors; it exists as a small-scale
reference point for the multi-level algorithm.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

from .citest import BudgetExceeded, CITester, TestConfig
from .dataset import BinaryDataset, CombinedVariable
from .hiton import hiton_pc

DEFAULT_CANDIDATE_BUDGET = 100_000

__all__ = ["BudgetExceeded", "expanded_pool", "expanded_pool_size", "naive_h"]


def expanded_pool_size(n_predictors: int, k_max: int) -> int:
    return sum(comb(n_predictors, i) for i in range(1, min(k_max, n_predictors) + 1))


def expanded_pool(dataset: BinaryDataset, k_max: int,
                  budget: int = DEFAULT_CANDIDATE_BUDGET) -> list[CombinedVariable]:
    preds = dataset.predictors
    size = expanded_pool_size(len(preds), k_max)
    if size > budget:
        raise BudgetExceeded(
            f"naive expansion needs {size} candidates (budget {budget}); use MH-PC instead")
    return [CombinedVariable(c) for i in range(1, k_max + 1) for c in combinations(preds, i)]


def naive_h(dataset: BinaryDataset, k_max: int = 2, cfg: TestConfig | None = None,
            budget: int = DEFAULT_CANDIDATE_BUDGET, max_ci_tests: int | None = None,
            tester: CITester | None = None) -> list[CombinedVariable]:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    pool = expanded_pool(dataset, k_max, budget)
    tester = tester or CITester(dataset, cfg, max_tests=max_ci_tests)
    return hiton_pc(dataset, pool, tester=tester)

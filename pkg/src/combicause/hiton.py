"""Semi-interleaved HITON-PC over an arbitrary pool of (combined) variables."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .citest import CiResult, CITester, TestConfig, open_order_key
from .dataset import BinaryDataset, CombinedVariable

TpcList = list  # list[CombinedVariable], insertion ordered


@dataclass
class CandidateRecord:
    """Bookkeeping for one candidate across all tests run on it."""

    marginal: CiResult
    n_tests: int = 0
    max_p: float = 0.0
    witness: tuple[CombinedVariable, ...] | None = None
    eliminated_in: str | None = None  # "forward" | "backward"


@dataclass
class OpenQueue:
    """Candidates dependent on the target, strongest association first."""

    entries: list[tuple[CombinedVariable, CiResult]] = field(default_factory=list)

    def variables(self) -> list[CombinedVariable]:
        return [cv for cv, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def build_open(tester: CITester, pool: Iterable[CombinedVariable], threads: int = 1,
               records: dict | None = None) -> OpenQueue:
    """Unconditional scan of ``pool``; keeps dependent candidates in strength order."""
    pool = list(pool)
    if threads > 1 and len(pool) > 64:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda cv: tester.test(cv, ()), pool))
    else:
        results = [tester.test(cv, ()) for cv in pool]
    entries = []
    for cv, res in zip(pool, results):
        if records is not None:
            records[cv] = CandidateRecord(res, n_tests=1, max_p=res.p_value)
        if not res.independent:
            entries.append((cv, res))
    entries.sort(key=lambda e: open_order_key(*e))
    return OpenQueue(entries)


def conditioning_candidates(x: CombinedVariable, pool: Sequence[CombinedVariable],
                            exclusions: Iterable[CombinedVariable] = (),
                            bar_components: bool = True) -> list[CombinedVariable]:
    excluded = set(exclusions)
    out = []
    for z in pool:
        if z == x or z in excluded:
            continue
        # nested variables are deterministic functions of each other on a stratum
        if bar_components and (z.issubset(x) or x.issubset(z)):
            continue
        out.append(z)
    return out


def subset_search(tester: CITester, x: CombinedVariable, pool: Sequence[CombinedVariable],
                  exclusions: Iterable[CombinedVariable] = (),
                  record: CandidateRecord | None = None) -> tuple[CombinedVariable, ...] | None:
    """First conditioning set making ``x`` independent of the target.

    Subsets of ``pool`` (minus ``x`` and ``exclusions``) are tried by increasing
    size up to ``max_k``, lexicographically in pool order within each size.
    """
    cfg = tester.cfg
    cands = conditioning_candidates(x, pool, exclusions, cfg.bar_components)
    for size in range(0, min(cfg.max_k, len(cands)) + 1):
        for subset in combinations(cands, size):
            res = tester.test(x, subset)
            if record is not None:
                record.n_tests += 1
                record.max_p = max(record.max_p, res.p_value)
            if res.independent:
                if record is not None:
                    record.witness = subset
                return subset
    return None


def interleave(tester: CITester, queue: OpenQueue, lower: Sequence[CombinedVariable] = (),
               variant: str = "F", records: dict | None = None) -> list[CombinedVariable]:
    """Inclusion / elimination loop over one level's OPEN queue.

    ``lower`` holds already confirmed members from earlier levels; they are
    available as conditioning variables but are never re-tested.  With
    ``variant == "B"`` the forward stage conditions on ``lower`` only.  With
    ``lower`` empty this is exactly plain semi-interleaved HITON-PC.
    """
    if variant not in ("F", "B"):
        raise ValueError(f"unknown variant {variant!r}")
    lower = list(lower)
    pending = queue.variables()
    level: list[CombinedVariable] = []
    records = records if records is not None else {}

    def rec(cv):
        return records.get(cv)

    while pending:
        x = pending.pop(0)
        level.append(x)
        if pending:
            pool = lower if variant == "B" else lower + level
            if subset_search(tester, x, pool, record=rec(x)) is not None:
                level.remove(x)
                if rec(x) is not None:
                    rec(x).eliminated_in = "forward"
        else:
            for member in list(level):
                if subset_search(tester, member, lower + level, record=rec(member)) is not None:
                    level.remove(member)
                    if rec(member) is not None:
                        rec(member).eliminated_in = "backward"
    return level


def hiton_pc(dataset: BinaryDataset, pool: Iterable[CombinedVariable] | None = None,
             cfg: TestConfig | None = None, tester: CITester | None = None,
             records: dict | None = None, threads: int = 1) -> TpcList:
    """Tentative parents and children of the target among ``pool``.

    ``pool`` defaults to every single predictor.
    """
    tester = tester or CITester(dataset, cfg)
    if pool is None:
        pool = [CombinedVariable.of(i) for i in dataset.predictors]
    pool = list(pool)
    for cv in pool:
        if dataset.target_index in cv.components:
            raise ValueError("the target cannot be part of the candidate pool")
    queue = build_open(tester, pool, threads=threads, records=records)
    return interleave(tester, queue, (), "F", records)

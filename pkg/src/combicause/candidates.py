"""Level-wise generation of combined variables and redundancy pruning."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .citest import CiResult, CITester
from .dataset import BinaryDataset, CombinedVariable


@dataclass
class DroppedMember:
    member: CombinedVariable
    failed: str  # which restricted test accepted independence: "u|v=1", "v|u=1" or "both"
    p_u_given_v: float
    p_v_given_u: float


@dataclass
class LevelPool:
    """Level-k candidates with the (lower, lower) split each was built from."""

    level: int
    members: list[CombinedVariable] = field(default_factory=list)
    provenance: dict[CombinedVariable, tuple[CombinedVariable, CombinedVariable]] = field(
        default_factory=dict)
    dropped: list[DroppedMember] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def generate_level(ntpc: Mapping[int, Sequence[CombinedVariable]], k: int,
                   lower_tpc: Iterable[CombinedVariable] = ()) -> LevelPool:
    """All k-component unions of an i-level and a (k-i)-level non-cause.

    Unions that contain the full component set of any lower-level TPC member
    are skipped, as are non-disjoint pairs.  Members come out in canonical
    (sorted) order; provenance keeps the first split met with i ascending.
    """
    if k < 2:
        raise ValueError("combined levels start at k=2")
    blocked = [set(t.components) for t in lower_tpc if t.level < k]
    levels = {i: sorted(set(ntpc.get(i, ()))) for i in range(1, k)}
    provenance: dict[CombinedVariable, tuple[CombinedVariable, CombinedVariable]] = {}
    for i in range(1, k):
        for u in levels[i]:
            u_set = set(u.components)
            for v in levels[k - i]:
                if u_set & set(v.components):
                    continue
                w = u.union(v)
                if w.level != k or w in provenance:
                    continue
                w_set = set(w.components)
                if any(b <= w_set for b in blocked):
                    continue
                provenance[w] = (u, v)
    members = sorted(provenance)
    return LevelPool(k, members, {m: provenance[m] for m in members})


def _restricted_tests(tester: CITester, split: tuple[CombinedVariable, CombinedVariable]
                      ) -> tuple[CiResult, CiResult]:
    u, v = split
    alpha = tester.cfg.alpha_redundancy
    u_col = tester.cache.get(u)
    v_col = tester.cache.get(v)
    r_u = tester.test(u, (), alpha, row_mask=v_col)
    r_v = tester.test(v, (), alpha, row_mask=u_col)
    return r_u, r_v


def _accepts_independence(res: CiResult, prune_on_unreliable: bool) -> bool:
    if res.independent:
        return True
    return prune_on_unreliable and not res.reliable


# above this many distinct split parts the co-occurrence matrices get large
BATCH_MAX_PARTS = 2048


def redundancy_filter(tester: CITester, pool: LevelPool, threads: int = 1) -> LevelPool:
    """Drop members for which either component is independent of the target
    on the rows where the other component equals 1."""
    splits = [pool.provenance[m] for m in pool.members]
    n_parts = len({p for s in splits for p in s})
    if 0 < n_parts <= BATCH_MAX_PARTS:
        results = tester.restricted_pairs(splits, tester.cfg.alpha_redundancy)
    elif threads > 1 and len(splits) > 64:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda s: _restricted_tests(tester, s), splits))
    else:
        results = [_restricted_tests(tester, s) for s in splits]
    prune_unrel = tester.cfg.prune_on_unreliable
    out = LevelPool(pool.level, dropped=list(pool.dropped))
    for member, (r_u, r_v) in zip(pool.members, results):
        ind_u = _accepts_independence(r_u, prune_unrel)
        ind_v = _accepts_independence(r_v, prune_unrel)
        if ind_u or ind_v:
            failed = "both" if ind_u and ind_v else ("u|v=1" if ind_u else "v|u=1")
            out.dropped.append(DroppedMember(member, failed, r_u.p_value, r_v.p_value))
        else:
            out.members.append(member)
            out.provenance[member] = pool.provenance[member]
    return out


def is_redundant(dataset: BinaryDataset, u: CombinedVariable, v: CombinedVariable,
                 tester: CITester | None = None) -> bool:
    """Pairwise redundancy check for a single (u, v) combination."""
    tester = tester or CITester(dataset)
    r_u, r_v = _restricted_tests(tester, (u, v))
    prune = tester.cfg.prune_on_unreliable
    return _accepts_independence(r_u, prune) or _accepts_independence(r_v, prune)


def write_dropped_csv(pools: Iterable[LevelPool], names: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "member", "failed", "p_u_given_v", "p_v_given_u"])
        for pool in pools:
            for d in pool.dropped:
                writer.writerow([pool.level, d.member.label(names), d.failed,
                                 f"{d.p_u_given_v:.6g}", f"{d.p_v_given_u:.6g}"])

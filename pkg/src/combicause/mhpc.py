"""Multi-level HITON-PC: single causes first, then combined causes level by level.

Two variants are provided.  ``F`` conditions the forward test of a level-k
candidate on every current TPC member; ``B`` leaves the level-k members out
of forward-stage conditioning sets, which saves tests, and relies on the
backward stage to catch what slips through.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .candidates import LevelPool, generate_level, redundancy_filter
from .citest import CITester, TestConfig
from .dataset import BinaryDataset, ColumnCache, CombinedVariable
from .hiton import CandidateRecord, build_open, interleave


@dataclass(frozen=True)
class MhpcConfig:
    variant: str = "F"
    k_max: int = 2
    test: TestConfig = field(default_factory=TestConfig)

    def __post_init__(self):
        if self.variant not in ("F", "B"):
            raise ValueError(f"variant must be 'F' or 'B', got {self.variant!r}")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass
class DiscoveryState:
    """Everything a run learned; ``tpc`` is the final answer."""

    variant: str
    k_max: int
    tpc: list[CombinedVariable] = field(default_factory=list)
    tpc_by_level: dict[int, list[CombinedVariable]] = field(default_factory=dict)
    ntpc_by_level: dict[int, list[CombinedVariable]] = field(default_factory=dict)
    pools: dict[int, LevelPool] = field(default_factory=dict)
    records: dict[CombinedVariable, CandidateRecord] = field(default_factory=dict)
    current_level: int = 0
    n_ci_tests: int = 0
    n_generated: int = 0
    n_pruned: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def singles(self) -> list[CombinedVariable]:
        return list(self.tpc_by_level.get(1, []))

    @property
    def combined(self) -> list[CombinedVariable]:
        return [cv for k in sorted(self.tpc_by_level) if k >= 2 for cv in self.tpc_by_level[k]]

    def cause_sets(self) -> set[tuple[int, ...]]:
        return {cv.components for cv in self.tpc}


def variant_conditioning_pool(state: DiscoveryState, x: CombinedVariable, variant: str,
                              stage: str = "forward") -> list[CombinedVariable]:
    """Variables a witness set for ``x`` may be drawn from at the current level."""
    if variant == "B" and stage == "forward" and state.current_level >= 2:
        level = set(state.tpc_by_level.get(state.current_level, []))
        return [z for z in state.tpc if z not in level and z != x]
    return [z for z in state.tpc if z != x]


def mh_pc(dataset: BinaryDataset, cfg: MhpcConfig | None = None, threads: int = 1,
          cache: ColumnCache | None = None, tester: CITester | None = None) -> DiscoveryState:
    cfg = cfg or MhpcConfig()
    tester = tester or CITester(dataset, cfg.test, cache)
    state = DiscoveryState(cfg.variant, cfg.k_max)
    start_tests = tester.n_tests

    t0 = time.perf_counter()
    singles = [CombinedVariable.of(i) for i in dataset.predictors]
    state.current_level = 1
    queue = build_open(tester, singles, threads=threads, records=state.records)
    # no lower level exists yet, so both variants reduce to plain HITON-PC here
    tpc1 = interleave(tester, queue, (), "F", state.records)
    state.tpc = list(tpc1)
    state.tpc_by_level[1] = list(tpc1)
    state.ntpc_by_level[1] = [cv for cv in singles if cv not in set(tpc1)]
    state.timings["level1"] = time.perf_counter() - t0

    for k in range(2, cfg.k_max + 1):
        state.current_level = k
        t0 = time.perf_counter()
        generated = generate_level(state.ntpc_by_level, k, state.tpc)
        t1 = time.perf_counter()
        pool = redundancy_filter(tester, generated, threads=threads)
        t2 = time.perf_counter()
        state.pools[k] = pool
        state.n_generated += len(generated)
        state.n_pruned += len(generated) - len(pool)
        queue = build_open(tester, pool.members, threads=threads, records=state.records)
        t3 = time.perf_counter()
        found = interleave(tester, queue, state.tpc, cfg.variant, state.records)
        t4 = time.perf_counter()
        state.tpc_by_level[k] = found
        state.tpc = state.tpc + found
        found_set = set(found)
        state.ntpc_by_level[k] = [cv for cv in pool.members if cv not in found_set]
        for name, dt in (("generate", t1 - t0), ("redundancy", t2 - t1),
                         ("open", t3 - t2), ("search", t4 - t3)):
            state.timings[f"level{k}_{name}"] = dt

    state.n_ci_tests = tester.n_tests - start_tests
    return state


def report(state: DiscoveryState, dataset: BinaryDataset, test_cfg: TestConfig | None = None,
           extra: dict | None = None) -> dict:
    """JSON-ready summary of a run."""
    names = dataset.names

    def label(cv):
        return [names[c] for c in cv.components]

    in_tpc = set(state.tpc)
    candidates = []
    for cv, rec in sorted(state.records.items(), key=lambda kv: (kv[0].level, kv[0].components)):
        if cv in in_tpc:
            status = "cause"
        elif rec.eliminated_in:
            status = f"eliminated-{rec.eliminated_in}"
        else:
            status = "not-associated"
        candidates.append({
            "variable": label(cv),
            "level": cv.level,
            "status": status,
            "marginal_p": rec.marginal.p_value,
            "max_p": rec.max_p,
            "n_tests": rec.n_tests,
            "witness": None if rec.witness is None else [label(z) for z in rec.witness],
        })
    out = {
        "target": dataset.target_name,
        "variant": state.variant,
        "k_max": state.k_max,
        "levels": {str(k): [label(cv) for cv in v] for k, v in sorted(state.tpc_by_level.items())},
        "singles": [names[cv.components[0]] for cv in state.singles],
        "combined": [label(cv) for cv in state.combined],
        "candidates": candidates,
        "n_ci_tests": state.n_ci_tests,
        "n_candidates_generated": state.n_generated,
        "n_pruned": state.n_pruned,
        "timings_s": state.timings,
    }
    if test_cfg is not None:
        out["test_config"] = asdict(test_cfg)
    if extra:
        out.update(extra)
    return out


def write_report(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def state_from_tpc(tpc: Sequence[CombinedVariable], variant: str = "naive-h") -> DiscoveryState:
    """Wrap a flat TPC list (e.g. from the naive baseline) as a state."""
    by_level: dict[int, list[CombinedVariable]] = {}
    for cv in tpc:
        by_level.setdefault(cv.level, []).append(cv)
    k_max = max(by_level, default=1)
    return DiscoveryState(variant, k_max, list(tpc), by_level)

"""Scoring discoveries against a planted ground truth and F/B consistency."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dataset import BinaryDataset
from .mhpc import DiscoveryState, MhpcConfig, mh_pc
from .synth import GroundTruth

SCOPES = ("combined_only", "all")

NameSet = frozenset  # frozenset[str]: one (possibly combined) cause by component names


class EvalError(ValueError):
    """Found and truth sets do not live in the same name space."""


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    true_positives: list[list[str]] = field(default_factory=list)
    false_positives: list[list[str]] = field(default_factory=list)
    false_negatives: list[list[str]] = field(default_factory=list)
    scope: str = "combined_only"

    def to_json(self) -> dict:
        return {
            "scope": self.scope,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": len(self.true_positives),
            "fp": len(self.false_positives),
            "fn": len(self.false_negatives),
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
        }


def _as_sets(items: Iterable) -> set[NameSet]:
    out = set()
    for item in items:
        out.add(frozenset([item]) if isinstance(item, str) else frozenset(item))
    return out


def found_sets(found, names: Sequence[str] | None = None) -> set[NameSet]:
    """Normalise discoveries to a set of component-name sets.

    ``found`` may be a :class:`DiscoveryState` (``names`` required), a result
    JSON payload with ``singles``/``combined`` keys, or an iterable whose items
    are names or sequences of names.
    """
    if isinstance(found, DiscoveryState):
        if names is None:
            raise EvalError("names are needed to label a DiscoveryState")
        return {frozenset(names[c] for c in cv.components) for cv in found.tpc}
    if isinstance(found, Mapping):
        return _as_sets(found.get("singles", [])) | _as_sets(found.get("combined", []))
    return _as_sets(found)


def truth_sets(truth: GroundTruth) -> set[NameSet]:
    return _as_sets(truth.singles) | _as_sets(truth.combined)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _listing(sets: Iterable[NameSet]) -> list[list[str]]:
    return sorted(sorted(s) for s in sets)


def score(found, truth: GroundTruth, scope: str = "combined_only",
          names: Sequence[str] | None = None) -> EvalReport:
    """Precision, recall and F1 of ``found`` against ``truth``.

    Causes match by unordered component-set equality.  With
    ``scope="combined_only"`` only causes of two or more components count.
    When both sides are empty the scores are 1 (nothing to find, nothing
    found); otherwise an empty denominator gives 0.
    """
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")
    f = found_sets(found, names)
    t = truth_sets(truth)
    if names is not None:
        known = set(names)
        unknown = {n for s in f | t for n in s} - known
        if unknown:
            raise EvalError(f"unknown names: {sorted(unknown)}")
    if scope == "combined_only":
        f = {s for s in f if len(s) >= 2}
        t = {s for s in t if len(s) >= 2}
    tp, fp, fn = f & t, f - t, t - f
    if not f and not t:
        p = r = f1 = 1.0
    else:
        p = _ratio(len(tp), len(tp) + len(fp))
        r = _ratio(len(tp), len(tp) + len(fn))
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return EvalReport(p, r, f1, _listing(tp), _listing(fp), _listing(fn), scope)


def load_found(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


@dataclass
class ConsistencyReport:
    equal: bool
    only_f: list[list[str]]
    only_b: list[list[str]]
    state_f: DiscoveryState | None = None
    state_b: DiscoveryState | None = None

    def to_json(self) -> dict:
        return {"equal": self.equal, "only_f": self.only_f, "only_b": self.only_b}


def consistency_check(dataset: BinaryDataset | None, cfg: MhpcConfig | None = None) -> ConsistencyReport:
    """Run both variants on ``dataset`` and diff their final cause sets.

    ``None`` stands for an empty pool and is trivially consistent.
    """
    if dataset is None:
        return ConsistencyReport(True, [], [])
    cfg = cfg or MhpcConfig()
    sf = mh_pc(dataset, MhpcConfig("F", cfg.k_max, cfg.test))
    sb = mh_pc(dataset, MhpcConfig("B", cfg.k_max, cfg.test))
    a, b = found_sets(sf, dataset.names), found_sets(sb, dataset.names)
    return ConsistencyReport(a == b, _listing(a - b), _listing(b - a), sf, sb)


def minimize_divergence(dataset: BinaryDataset, cfg: MhpcConfig | None = None) -> BinaryDataset:
    """Greedily drop predictors while the F and B outputs still differ.

    Returns a smaller dataset that still diverges; useful for reporting.
    If the input does not diverge it is returned unchanged.
    """
    if consistency_check(dataset, cfg).equal:
        return dataset
    keep = [dataset.names[i] for i in dataset.predictors]
    changed = True
    while changed:
        changed = False
        for name in list(keep):
            trial = [k for k in keep if k != name]
            if trial and not consistency_check(dataset.subset(trial), cfg).equal:
                keep = trial
                changed = True
    return dataset.subset(keep)

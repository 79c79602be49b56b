"""Synthetic data with planted single and combined causes.

Two generators are provided: ancestral sampling from a random Bayesian
network (small sets) and a logistic model over independent predictors (large
sets).  A planted combined cause is produced by splitting a parent ``A`` of
the target into two columns with ``A1 & A2 == A`` whose individual
association with the target is statistically null.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .citest import CITester, TestConfig
from .dataset import BinaryDataset, CombinedVariable, pack_bits, write_csv


class SpecError(ValueError):
    """The generator specification cannot be realised."""


class SplitError(RuntimeError):
    """A planted cause could not be split into two marginally null components."""


@dataclass
class GroundTruth:
    singles: list[str] = field(default_factory=list)
    combined: list[list[str]] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.combined = [sorted(pair) for pair in self.combined]

    def validate(self, names: Sequence[str] | None = None) -> None:
        singles = set(self.singles)
        for pair in self.combined:
            if singles & set(pair):
                raise SpecError(f"combined cause {pair} shares a member with the singles")
        if names is not None:
            known = set(names)
            missing = (singles | {n for p in self.combined for n in p}) - known
            if missing:
                raise SpecError(f"ground truth names not in dataset: {sorted(missing)}")

    def to_json(self) -> dict:
        return {"singles": list(self.singles), "combined": [list(p) for p in self.combined],
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, payload: dict) -> "GroundTruth":
        return cls(list(payload.get("singles", [])), [list(p) for p in payload.get("combined", [])],
                   dict(payload.get("provenance", {})))

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one synthetic dataset.

    ``n_predictors`` counts columns after splitting, so it includes both
    components of every combined cause.
    """

    n_predictors: int
    n_rows: int
    n_single_causes: int
    n_combined_causes: int
    mode: str = "bn_random"
    seed: int = 0
    edge_density: float = 0.3
    coefficient_range: tuple[float, float] = (0.8, 1.5)
    combined_coefficient_range: tuple[float, float] = (2.5, 3.5)
    single_effect_range: tuple[float, float] = (0.15, 0.35)
    combined_effect_range: tuple[float, float] = (0.5, 0.7)
    combined_prevalence: tuple[float, float] = (0.03, 0.05)
    target_rate: float = 0.3
    alpha_causal: float = 0.05
    max_split_retries: int = 200
    max_split_share: float = 0.4
    max_attempts: int = 25

    def __post_init__(self):
        if self.mode not in ("bn_random", "logistic"):
            raise SpecError(f"unknown mode {self.mode!r}")
        if min(self.n_predictors, self.n_rows, self.n_single_causes, self.n_combined_causes) < 0:
            raise SpecError("counts must be non-negative")
        if self.n_single_causes + 2 * self.n_combined_causes > self.n_predictors:
            raise SpecError("n_single + 2*n_combined exceeds n_predictors")
        if not 0 <= self.edge_density <= 1:
            raise SpecError("edge_density must lie in [0, 1]")
        if not 0 < self.target_rate < 1:
            raise SpecError("target_rate must lie in (0, 1)")


PRESETS: dict[str, GenSpec] = {
    "syn7": GenSpec(6, 1000, 2, 1, "bn_random"),
    "syn10": GenSpec(9, 1000, 3, 2, "bn_random"),
    "syn12": GenSpec(11, 2000, 4, 3, "bn_random", combined_prevalence=(0.02, 0.035)),
    "syn16": GenSpec(15, 2000, 4, 3, "bn_random", combined_prevalence=(0.02, 0.035)),
    "syn20": GenSpec(19, 2000, 4, 4, "bn_random", combined_prevalence=(0.02, 0.035)),
    "syn50": GenSpec(49, 5000, 5, 5, "logistic", combined_prevalence=(0.01, 0.015)),
    "syn60": GenSpec(59, 5000, 5, 5, "logistic", combined_prevalence=(0.01, 0.015)),
    "syn80": GenSpec(79, 5000, 5, 5, "logistic", combined_prevalence=(0.01, 0.015)),
    "syn100": GenSpec(99, 5000, 5, 5, "logistic", combined_prevalence=(0.01, 0.015)),
    "syn120": GenSpec(119, 5000, 5, 5, "logistic", combined_prevalence=(0.01, 0.015)),
}


def preset(name: str, seed: int = 0, **overrides) -> GenSpec:
    try:
        base = PRESETS[name.lower().replace("-", "")]
    except KeyError:
        raise SpecError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, seed=seed, **overrides)


# ---------------------------------------------------------------------------
# splitting


def _component_z(q: float, p_a: float, t1: float, t0: float, n: int) -> float:
    """Expected z-score of a component's marginal association when a fraction
    ``q`` of the A=0 rows gets that component set to 1."""
    p1 = p_a + (1 - p_a) * q
    pt = p_a * t1 + (1 - p_a) * t0
    if p1 <= 0 or p1 >= 1 or pt <= 0 or pt >= 1:
        return 0.0
    diff = p_a * (t1 - t0) / p1
    se = np.sqrt(pt * (1 - pt) * (1 / (n * p1) + 1 / (n * (1 - p1))))
    return float(diff / se)


def _joint_pass_probability(q: float, p_a: float, t1: float, t0: float, n: int,
                            alpha: float) -> float:
    m = _component_z(q, p_a, t1, t0, n)
    # the two components share the A=0 rows, so their noise is negatively correlated
    rho = max(-q / (1 - q), -0.999)
    c = stats.norm.isf(alpha / 2)
    mv = stats.multivariate_normal([m, m], [[1, rho], [rho, 1]])
    return float(mv.cdf([c, c]) - mv.cdf([-c, c]) - mv.cdf([c, -c]) + mv.cdf([-c, -c]))


def split_probabilities(a: np.ndarray, t: np.ndarray, alpha: float = 0.05,
                        max_share: float = 0.4) -> tuple[float, float, float]:
    """Allocation (p00, p01, p10) for the A=0 rows.

    Chosen symmetric (p01 == p10 == q) with q maximising the probability that
    both components come out non-significant on this dataset.  ``q`` is capped
    at ``max_share`` < 1/2 so that p00 > 0; with p00 == 0 the components are
    complementary off the support of A and ``A1 | A2`` is identically 1.
    """
    a = np.asarray(a, bool)
    t = np.asarray(t, bool)
    n = a.size
    p_a = a.mean()
    if p_a in (0.0, 1.0):
        return (1 - 2 * max_share, max_share, max_share)
    t1 = t[a].mean()
    t0 = t[~a].mean()
    res = optimize.minimize_scalar(
        lambda q: -_joint_pass_probability(q, p_a, t1, t0, n, alpha),
        bounds=(0.05, max_share), method="bounded", options={"xatol": 1e-3})
    q = float(res.x)
    return (1 - 2 * q, q, q)


def _replace_columns(dataset: BinaryDataset, index: int, new_cols: Sequence[np.ndarray],
                     new_names: Sequence[str]) -> BinaryDataset:
    dense = dataset.to_dense().T.astype(bool)
    names = list(dataset.names)
    rows = list(dense)
    rows[index:index + 1] = [np.asarray(c, bool) for c in new_cols]
    names[index:index + 1] = list(new_names)
    target_name = dataset.target_name
    return BinaryDataset(dataset.n_rows, pack_bits(np.vstack(rows)), tuple(names),
                         names.index(target_name))


def split_cause(dataset: BinaryDataset, truth: GroundTruth, cause_name: str, seed,
                new_names: tuple[str, str] | None = None, alpha: float = 0.05,
                max_retries: int = 200, max_share: float = 0.4) -> tuple[BinaryDataset, GroundTruth]:
    """Replace single cause ``A`` with components ``A1, A2`` such that A1 & A2 == A.

    Rows with A=1 become (1, 1); rows with A=0 get (0,0), (0,1) or (1,0).
    The allocation is redrawn until neither component is associated with the
    target at ``alpha``.
    """
    if cause_name not in truth.singles:
        raise SpecError(f"{cause_name!r} is not a planted single cause")
    rng = np.random.default_rng(seed)
    idx = dataset.index(cause_name)
    dense = dataset.to_dense()
    a = dense[:, idx].astype(bool)
    t = dense[:, dataset.target_index].astype(bool)
    names = new_names or (f"{cause_name}_1", f"{cause_name}_2")
    if set(names) & (set(dataset.names) - {cause_name}):
        raise SpecError(f"split names {names} collide with existing columns")
    p00, p01, p10 = split_probabilities(a, t, alpha, max_share)
    zero_rows = np.flatnonzero(~a)
    cfg = TestConfig(alpha_causal=alpha)
    for attempt in range(1, max_retries + 1):
        alloc = rng.choice(3, size=zero_rows.size, p=[p00, p01, p10])
        a1 = a.copy()
        a2 = a.copy()
        a1[zero_rows[alloc == 2]] = True
        a2[zero_rows[alloc == 1]] = True
        if np.array_equal(a1, a) or np.array_equal(a2, a):
            continue  # a component identical to A is no split at all
        out = _replace_columns(dataset, idx, [a1, a2], names)
        tester = CITester(out, cfg)
        r1 = tester.test(out.variable(names[0]))
        r2 = tester.test(out.variable(names[1]))
        if r1.independent and r2.independent:
            singles = [s for s in truth.singles if s != cause_name]
            prov = dict(truth.provenance)
            prov.setdefault("splits", {})[cause_name] = {
                "components": list(names), "p00": p00, "p01": p01, "p10": p10,
                "attempts": attempt, "p_component": [r1.p_value, r2.p_value]}
            new_truth = GroundTruth(singles, truth.combined + [list(names)], prov)
            return out, new_truth
    raise SplitError(f"could not split {cause_name!r} into marginally null components "
                     f"after {max_retries} draws; the planted effect is too strong")


# ---------------------------------------------------------------------------
# generators


def _roles(spec: GenSpec) -> tuple[list[str], list[str], list[str]]:
    n_other = spec.n_predictors - spec.n_single_causes - 2 * spec.n_combined_causes
    combined = [f"C{j + 1}" for j in range(spec.n_combined_causes)]
    singles = [f"S{j + 1}" for j in range(spec.n_single_causes)]
    others = [f"N{j + 1}" for j in range(n_other)]
    return combined, singles, others


def _final_names(spec: GenSpec, combined: list[str], singles: list[str], others: list[str]):
    """Map internal names onto V1..Vn: combined components, then singles, then the rest."""
    order = [f"{c}_{i}" for c in combined for i in (1, 2)] + singles + others
    return {name: f"V{i + 1}" for i, name in enumerate(order)}, order


def _assemble(columns: dict[str, np.ndarray], order: Sequence[str], t: np.ndarray) -> BinaryDataset:
    dense = np.vstack([columns[n] for n in order] + [t]).astype(bool)
    return BinaryDataset(t.size, pack_bits(dense), tuple(order) + ("T",), len(order))


def _rename(dataset: BinaryDataset, truth: GroundTruth, mapping: dict[str, str]):
    names = tuple(mapping.get(n, n) for n in dataset.names)
    data = BinaryDataset(dataset.n_rows, dataset.bits.copy(), names, dataset.target_index)
    prov = dict(truth.provenance)
    prov["internal_names"] = {v: k for k, v in mapping.items()}
    splits = prov.get("splits", {})
    renamed = {}
    for v in splits.values():
        comps = [mapping.get(c, c) for c in v["components"]]
        renamed["&".join(comps)] = {**v, "components": comps}
    prov["splits"] = renamed
    new = GroundTruth([mapping[s] for s in truth.singles],
                      [[mapping[a], mapping[b]] for a, b in truth.combined], prov)
    return data, new


def _split_all(dataset, truth, combined, rng, spec):
    for c in combined:
        dataset, truth = split_cause(dataset, truth, c, int(rng.integers(2**31)),
                                     alpha=spec.alpha_causal, max_retries=spec.max_split_retries,
                                     max_share=spec.max_split_share)
    return dataset, truth


def _with_attempts(spec: GenSpec, build):
    rng = np.random.default_rng(spec.seed)
    last: Exception | None = None
    for attempt in range(1, spec.max_attempts + 1):
        try:
            dataset, truth = build(rng)
        except SplitError as exc:
            last = exc
            continue
        truth.provenance.update({"spec": _spec_json(spec), "attempts": attempt})
        truth.validate(dataset.names)
        return dataset, truth
    raise SpecError(f"spec infeasible after {spec.max_attempts} attempts: {last}")


def _spec_json(spec: GenSpec) -> dict:
    out = asdict(spec)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def gen_bn(spec: GenSpec) -> tuple[BinaryDataset, GroundTruth]:
    """Ancestral sampling from a random binary BN whose target parents are the
    designated causes.

    Designated combined-cause parents are low-prevalence roots with the target
    as their only child.  The remaining predictors form a random DAG (edge
    probability ``edge_density``) among themselves and the single causes.
    ``edge_density == 0`` is the null model: no edges at all, empty truth.
    """
    if spec.mode != "bn_random":
        raise SpecError("gen_bn needs mode='bn_random'")
    combined, singles, others = _roles(spec)
    mapping, order = _final_names(spec, combined, singles, others)
    null_model = spec.edge_density == 0
    lo, hi = spec.single_effect_range

    def build(rng):
        n = spec.n_rows
        cols: dict[str, np.ndarray] = {}
        for c in combined:
            if null_model:
                for part in (f"{c}_1", f"{c}_2"):
                    cols[part] = rng.random(n) < rng.uniform(0.3, 0.7)
            else:
                cols[c] = rng.random(n) < rng.uniform(*spec.combined_prevalence)
        graph_nodes = singles + others
        topo = list(rng.permutation(graph_nodes))
        parents = {v: [] for v in topo}
        for j, child in enumerate(topo):
            for par in topo[:j]:
                if rng.random() < spec.edge_density:
                    parents[child].append(par)
        for v in topo:
            if parents[v]:
                base = rng.uniform(0.3, 0.7)
                effects = rng.uniform(lo, hi, len(parents[v])) * rng.choice([-1, 1], len(parents[v]))
                prob = base + sum(e * cols[p] for e, p in zip(effects, parents[v]))
                prob = np.clip(prob, 0.05, 0.95)
            else:
                prob = np.full(n, rng.uniform(0.3, 0.7))
            cols[v] = rng.random(n) < prob
        if null_model:
            t = rng.random(n) < rng.uniform(0.3, 0.7)
            truth = GroundTruth([], [], {"null_model": True})
        else:
            effects_s = rng.uniform(lo, hi, len(singles)) * rng.choice([-1, 1], len(singles))
            effects_c = rng.uniform(*spec.combined_effect_range, len(combined))
            base = rng.uniform(0.25, 0.45)
            prob = np.full(n, base)
            for e, s in zip(effects_s, singles):
                prob = prob + e * (cols[s].astype(float) - cols[s].mean())
            for e, c in zip(effects_c, combined):
                prob = prob + e * cols[c]
            t = rng.random(n) < np.clip(prob, 0.03, 0.97)
            truth = GroundTruth(singles + combined, [], {
                "target_parents": singles + combined,
                "edges": [[p, c] for c in topo for p in parents[c]]})
        if null_model:
            dataset = _assemble(cols, order, t)
        else:
            dataset = _assemble(cols, singles + others + combined, t)
            dataset, truth = _split_all(dataset, truth, combined, rng, spec)
        dataset = _reorder(dataset, order)
        return _rename(dataset, truth, mapping)

    return _with_attempts(spec, build)


def _reorder(dataset: BinaryDataset, order: Sequence[str]) -> BinaryDataset:
    idx = [dataset.index(n) for n in order] + [dataset.target_index]
    return BinaryDataset(dataset.n_rows, dataset.bits[idx].copy(),
                         tuple(dataset.names[i] for i in idx), len(order))


def _intercept_for_rate(linear: np.ndarray, rate: float) -> float:
    """Bisection for b with mean(sigmoid(b + linear)) == rate."""
    f = lambda b: float(np.mean(1 / (1 + np.exp(-(b + linear))))) - rate  # noqa: E731
    return float(optimize.brentq(f, -50, 50, xtol=1e-10))


def gen_logistic(spec: GenSpec) -> tuple[BinaryDataset, GroundTruth]:
    """Independent Bernoulli predictors and a logistic target.

    Singles get coefficients of random sign in ``coefficient_range``; each
    combined-cause parent is a rare Bernoulli with a positive coefficient in
    ``combined_coefficient_range``, later split into two components.  The
    intercept is solved so the expected positive rate equals ``target_rate``.
    """
    if spec.mode != "logistic":
        raise SpecError("gen_logistic needs mode='logistic'")
    combined, singles, others = _roles(spec)
    mapping, order = _final_names(spec, combined, singles, others)

    def build(rng):
        n = spec.n_rows
        cols: dict[str, np.ndarray] = {}
        for v in singles + others:
            cols[v] = rng.random(n) < rng.uniform(0.2, 0.8)
        for c in combined:
            cols[c] = rng.random(n) < rng.uniform(*spec.combined_prevalence)
        coef_s = rng.uniform(*spec.coefficient_range, len(singles)) * rng.choice([-1, 1], len(singles))
        coef_c = rng.uniform(*spec.combined_coefficient_range, len(combined))
        linear = np.zeros(n)
        for b, s in zip(coef_s, singles):
            linear += b * cols[s]
        for b, c in zip(coef_c, combined):
            linear += b * cols[c]
        if not np.any(linear):
            intercept = float(np.log(spec.target_rate / (1 - spec.target_rate)))
        else:
            intercept = _intercept_for_rate(linear, spec.target_rate)
        t = rng.random(n) < 1 / (1 + np.exp(-(intercept + linear)))
        causes = [s for s, b in zip(singles, coef_s) if b != 0] + \
                 [c for c, b in zip(combined, coef_c) if b != 0]
        truth = GroundTruth(causes, [], {
            "intercept": intercept,
            "coefficients": {**dict(zip(singles, coef_s.tolist())), **dict(zip(combined, coef_c.tolist()))}})
        layout = singles + others
        for c in combined:
            if c in causes:
                layout.append(c)
            else:
                # an inert parent has nothing to split; emit two noise columns
                for part in (f"{c}_1", f"{c}_2"):
                    cols[part] = rng.random(n) < rng.uniform(0.2, 0.8)
                    layout.append(part)
        dataset = _assemble(cols, layout, t)
        dataset, truth = _split_all(dataset, truth, [c for c in combined if c in causes], rng, spec)
        dataset = _reorder(dataset, order)
        return _rename(dataset, truth, mapping)

    return _with_attempts(spec, build)


def generate(spec: GenSpec) -> tuple[BinaryDataset, GroundTruth]:
    return gen_bn(spec) if spec.mode == "bn_random" else gen_logistic(spec)


def write_outputs(dataset: BinaryDataset, truth: GroundTruth, spec: GenSpec,
                  out_dir: str | Path, stem: str) -> dict[str, Path]:
    """Dataset CSV, ground-truth sidecar and generator manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "data": out_dir / f"{stem}.csv",
        "truth": out_dir / f"{stem}.truth.json",
        "manifest": out_dir / f"{stem}.manifest.json",
    }
    write_csv(dataset, paths["data"])
    paths["truth"].write_text(json.dumps(truth.to_json(), indent=2) + "\n", encoding="utf-8")
    dense = dataset.to_dense()
    manifest = {
        "spec": _spec_json(spec),
        "seed": spec.seed,
        "n_rows": dataset.n_rows,
        "n_predictors": dataset.n_columns - 1,
        "target": dataset.target_name,
        "positive_rate": float(dense[:, dataset.target_index].mean()) if dataset.n_rows else 0.0,
        "ground_truth_shape": [len(truth.singles), len(truth.combined)],
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return paths


def truth_variables(dataset: BinaryDataset, truth: GroundTruth) -> set[CombinedVariable]:
    return {dataset.variable(s) for s in truth.singles} | {dataset.variable(*p) for p in truth.combined}

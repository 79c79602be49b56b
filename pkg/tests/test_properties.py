"""Module invariants as property-based tests, each over at least 1000 cases."""

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from combicause.baseline import expanded_pool, expanded_pool_size, naive_h
from combicause.candidates import generate_level, redundancy_filter
from combicause.citest import CITester, TestConfig
from combicause.dataset import BinaryDataset, CombinedVariable as CV, materialize, unpack_bits
from combicause.evaluation import score
from combicause.hiton import hiton_pc
from combicause.mhpc import MhpcConfig, mh_pc
from combicause.synth import GroundTruth, SplitError, split_cause
from oracles import and_column, dense_columns, exhaustive_hiton, random_structured

CASES = 1000
prop = settings(max_examples=CASES, deadline=None, suppress_health_check=list(HealthCheck),
                derandomize=True)


def ds(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    return BinaryDataset.from_array(arr, [f"V{i}" for i in range(arr.shape[1] - 1)] + ["T"], "T")


@st.composite
def structured(draw, max_pred=8, min_rows=8, max_rows=200):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_rows, max_rows))
    p = draw(st.integers(1, max_pred))
    return ds(random_structured(np.random.default_rng(seed), n, p))


class Recorder(CITester):
    def __init__(self, *a, **k):
        super().__init__(*a, **k)
        self.sizes = []

    def test(self, x, cond=(), alpha=None, row_mask=None):
        self.sizes.append(len(cond))
        return super().test(x, cond, alpha, row_mask)


# dataset -------------------------------------------------------------------

@prop
@given(st.integers(0, 2**32 - 1), st.integers(1, 150), st.integers(2, 6), st.data())
def test_and_semantics(seed, n, p, data):
    r = np.random.default_rng(seed)
    d = ds(r.random((n, p + 1)) < r.uniform(0.05, 0.95, p + 1))
    comps = data.draw(st.lists(st.integers(0, p - 1), min_size=1, max_size=p, unique=True))
    cv = CV(tuple(sorted(comps)))
    col = unpack_bits(materialize(d, cv), n)
    assert list(map(int, col)) == and_column(dense_columns(d), cv.components)
    assert col.sum() <= min(d.to_dense()[:, c].sum() for c in cv.components)


# hiton ---------------------------------------------------------------------

@prop
@given(structured(max_rows=64), st.integers(0, 3))
def test_hiton_equals_exhaustive_oracle(d, max_k):
    got = [cv.components[0] for cv in hiton_pc(d, cfg=TestConfig(max_k=max_k))]
    assert got == exhaustive_hiton(d, max_k)


@prop
@given(structured(), st.integers(0, 3), st.integers(1, 3), st.sampled_from("FB"))
def test_max_k_bound(d, max_k, k_max, variant):
    tester = Recorder(d, TestConfig(max_k=max_k))
    mh_pc(d, MhpcConfig(variant, k_max, tester.cfg), tester=tester)
    assert max(tester.sizes, default=0) <= max_k and tester.max_cond_seen <= max_k


@prop
@given(structured())
def test_tpc_members_marginally_dependent(d):
    tester = CITester(d)
    for cv in mh_pc(d, MhpcConfig("F", 2)).tpc:
        assert not tester.test(cv).independent


# candidates ----------------------------------------------------------------

@prop
@given(structured(min_rows=20), st.randoms(use_true_random=False))
def test_pool_invariants_and_permutation(d, rnd):
    state = mh_pc(d, MhpcConfig("F", 2))
    ntpc = state.ntpc_by_level
    pool = generate_level(ntpc, 2, state.tpc_by_level[1])
    shuffled = generate_level({1: rnd.sample(ntpc[1], len(ntpc[1]))}, 2, state.tpc_by_level[1])
    assert shuffled.members == pool.members == sorted(set(pool.members))
    lower = {cv.components for cv in state.tpc_by_level[1]}
    for m in pool:
        assert all(CV.of(c) in ntpc[1] for c in m.components)
        assert not any(set(b) <= set(m.components) for b in lower)
    filtered = redundancy_filter(CITester(d), pool)
    assert set(filtered.members) <= set(pool.members)
    assert all(filtered.provenance[m] == pool.provenance[m] for m in filtered.members)


# mhpc ----------------------------------------------------------------------

@prop
@given(structured(), st.integers(1, 3), st.sampled_from("FB"))
def test_state_partition_and_definition1(d, k_max, variant):
    state = mh_pc(d, MhpcConfig(variant, k_max))
    assert state.tpc == [cv for k in sorted(state.tpc_by_level) for cv in state.tpc_by_level[k]]
    assert sorted(state.tpc_by_level[1] + state.ntpc_by_level[1]) == [CV.of(i) for i in d.predictors]
    seen = set()
    for k in sorted(state.tpc_by_level):
        found = state.tpc_by_level[k]
        if k >= 2:
            assert sorted(found + state.ntpc_by_level[k]) == state.pools[k].members
            assert not any(CV.of(c) in seen for cv in found for c in cv.components)
        assert not {cv.components for cv in found} & {cv.components for cv in seen}
        seen |= set(found)


@prop
@given(structured(), st.sampled_from("FB"))
def test_determinism(d, variant):
    a = mh_pc(d, MhpcConfig(variant, 2))
    b = mh_pc(d, MhpcConfig(variant, 2))
    assert (a.tpc, a.ntpc_by_level, a.n_ci_tests) == (b.tpc, b.ntpc_by_level, b.n_ci_tests)


@prop
@given(structured(max_pred=12, min_rows=20, max_rows=300))
def test_mhpc_discoveries_appear_in_naive(d):
    naive = naive_h(d, 2)
    naive_singles = {cv for cv in naive if cv.level == 1}
    for cv in mh_pc(d, MhpcConfig("F", 2)).combined:
        if not any(CV.of(c) in naive_singles for c in cv.components):
            assert cv in naive


# baseline ------------------------------------------------------------------

@prop
@given(structured(max_pred=6, max_rows=80), st.integers(1, 4))
def test_naive_pool_and_k1(d, k_max):
    pool = expanded_pool(d, k_max)
    assert len(pool) == len(set(pool)) == expanded_pool_size(len(d.predictors), k_max)
    if k_max == 1:
        assert naive_h(d, 1) == hiton_pc(d)


# synth ---------------------------------------------------------------------

@prop
@given(st.integers(0, 2**32 - 1), st.integers(40, 400), st.floats(0.02, 0.6))
def test_split_reconstruction(seed, n, p_a):
    r = np.random.default_rng(seed)
    a = r.random(n) < p_a
    t = r.random(n) < np.where(a, 0.5, 0.3)
    d = BinaryDataset.from_array(np.column_stack([a, r.random(n) < 0.5, t]), ["A", "B", "T"], "T")
    try:
        out, truth = split_cause(d, GroundTruth(["A"], []), "A", seed, max_retries=20)
    except SplitError:
        return
    dense = out.to_dense().astype(bool)
    assert np.array_equal(dense[:, 0] & dense[:, 1], a)
    truth.validate(out.names)
    assert truth.combined == [["A_1", "A_2"]] and truth.singles == []


# eval / bench --------------------------------------------------------------

labels = st.sampled_from(list("ABCDEF"))
causes = st.lists(st.lists(labels, min_size=2, max_size=3, unique=True), max_size=5)


@prop
@given(causes, causes, st.randoms(use_true_random=False))
def test_score_symmetry(found, truth, rnd):
    t = GroundTruth([], truth)
    shuffled = [rnd.sample(c, len(c)) for c in rnd.sample(found, len(found))]
    a, b = score(found, t), score(shuffled, t)
    assert (a.precision, a.recall, a.f1) == (b.precision, b.recall, b.f1)


@prop
@given(structured(min_rows=20, max_rows=300))
def test_b_uses_no_more_tests_than_f(d):
    f = mh_pc(d, MhpcConfig("F", 2))
    b = mh_pc(d, MhpcConfig("B", 2))
    assert b.n_ci_tests <= f.n_ci_tests

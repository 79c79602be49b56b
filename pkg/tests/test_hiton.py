import numpy as np
import pytest
from hypothesis import given, strategies as st

from combicause.citest import CITester, TestConfig
from combicause.dataset import BinaryDataset, CombinedVariable
from combicause.hiton import build_open, conditioning_candidates, hiton_pc, subset_search
from combicause.synth import generate, preset, truth_variables
from oracles import exhaustive_hiton, random_structured


def ds(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    return BinaryDataset.from_array(arr, [f"V{i}" for i in range(arr.shape[1] - 1)] + ["T"], "T")


class RecordingTester(CITester):
    def __init__(self, *a, **k):
        super().__init__(*a, **k)
        self.calls = []

    def test(self, x, cond=(), alpha=None, row_mask=None):
        self.calls.append((x, tuple(cond)))
        return super().test(x, cond, alpha, row_mask)


def chain_dataset(seed, n=3000):
    # X <- Z -> T
    r = np.random.default_rng(seed)
    z = r.random(n) < 0.5
    x = np.where(z, r.random(n) < 0.85, r.random(n) < 0.15)
    t = np.where(z, r.random(n) < 0.8, r.random(n) < 0.2)
    return ds(np.column_stack([x, z, t]))


def test_empty_pool():
    d = ds(np.zeros((10, 2)))
    assert hiton_pc(d, []) == []


def test_singleton_dependent(rng):
    t = rng.random(200) < 0.5
    x = np.where(rng.random(200) < 0.1, ~t, t)
    d = ds(np.column_stack([x, t]))
    tester = RecordingTester(d)
    assert hiton_pc(d, tester=tester) == [CombinedVariable.of(0)]
    # the OPEN scan, then the backward stage's empty conditioning set
    assert tester.calls == [(CombinedVariable.of(0), ())] * 2


def test_chain_witness():
    d = chain_dataset(0)
    x, z = CombinedVariable.of(0), CombinedVariable.of(1)
    tester = CITester(d)
    assert not tester.test(x).independent
    assert subset_search(tester, x, [z]) == (z,)
    assert hiton_pc(d) == [z]


def test_subset_search_empty_tpc_and_max_k0(rng):
    d = chain_dataset(1)
    x, z = CombinedVariable.of(0), CombinedVariable.of(1)
    tester = RecordingTester(d, TestConfig(max_k=0))
    assert subset_search(tester, x, []) is None
    assert subset_search(tester, x, [z]) is None
    assert all(cond == () for _, cond in tester.calls)


def test_nested_variables_are_never_conditioned_on():
    x = CombinedVariable.of(1)
    pool = [CombinedVariable.of(2), CombinedVariable((1, 2)), CombinedVariable((2, 3)), x]
    assert conditioning_candidates(x, pool) == [CombinedVariable.of(2), CombinedVariable((2, 3))]
    xy = CombinedVariable((1, 2))
    assert conditioning_candidates(xy, pool) == [CombinedVariable((2, 3))]
    assert len(conditioning_candidates(x, pool, bar_components=False)) == 3


def test_copy_of_target_heads_queue(rng):
    t = rng.random(500) < 0.4
    noisy = np.where(rng.random(500) < 0.2, ~t, t)
    d = ds(np.column_stack([noisy, t, rng.random(500) < 0.5, t]))
    q = build_open(CITester(d), [CombinedVariable.of(i) for i in range(3)])
    assert q.variables()[0] == CombinedVariable.of(1)


def test_noise_pool_empty_queue_rate():
    empty = 0
    trials = 300
    for seed in range(trials):
        r = np.random.default_rng(seed)
        d = ds((r.random((500, 4)) < 0.5).astype(np.uint8))
        empty += len(build_open(CITester(d), [CombinedVariable.of(i) for i in range(3)])) == 0
    # (1 - 0.05)^3 = 0.857; three binomial standard errors either side
    assert abs(empty / trials - 0.95 ** 3) < 3 * np.sqrt(0.857 * 0.143 / trials)


def test_syn7_level1():
    d, truth = generate(preset("syn7", seed=3))
    q = build_open(CITester(d), [CombinedVariable.of(i) for i in d.predictors])
    singles = {d.variable(s) for s in truth.singles}
    assert singles <= set(q.variables())
    assert set(hiton_pc(d)) == singles


def test_forward_eliminated_are_discarded():
    d = chain_dataset(2)
    records = {}
    hiton_pc(d, records=records)
    rec = records[CombinedVariable.of(0)]
    assert rec.eliminated_in in ("forward", "backward") and rec.witness == (CombinedVariable.of(1),)


def test_target_not_allowed_in_pool(rng):
    d = ds((rng.random((20, 3)) < 0.5).astype(np.uint8))
    with pytest.raises(ValueError):
        hiton_pc(d, [CombinedVariable.of(d.target_index)])


@st.composite
def small_structured(draw, max_pred=8, max_rows=64):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(8, max_rows))
    p = draw(st.integers(1, max_pred))
    return ds(random_structured(np.random.default_rng(seed), n, p))


@given(small_structured(), st.integers(0, 3))
def test_matches_exhaustive_oracle(d, max_k):
    got = [cv.components[0] for cv in hiton_pc(d, cfg=TestConfig(max_k=max_k))]
    assert got == exhaustive_hiton(d, max_k)


@given(small_structured(max_rows=200), st.integers(0, 3))
def test_max_k_bound_order_and_dependence(d, max_k):
    cfg = TestConfig(max_k=max_k)
    tester = RecordingTester(d, cfg)
    tpc = hiton_pc(d, tester=tester)
    assert all(len(cond) <= max_k for _, cond in tester.calls)
    assert tester.max_cond_seen <= max_k
    queue = build_open(CITester(d, cfg), [CombinedVariable.of(i) for i in d.predictors]).variables()
    positions = [queue.index(cv) for cv in tpc]  # every member entered OPEN
    assert positions == sorted(positions) and len(set(tpc)) == len(tpc)
    assert hiton_pc(d, cfg=cfg) == tpc

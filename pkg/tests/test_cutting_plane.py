import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hullmargin.cutting_plane import (CPConfig, cp_learn, lift, perceptron_seed_baseline, relax_cut,
                                      write_trace)
from hullmargin.errors import DegenerateReference, SeparabilityViolated
from hullmargin.instances import gen_separable
from hullmargin.learners import cp_reference
from hullmargin.oracles import OracleSuite, TargetPartition


def binary_oracle(labels):
    """labels in {1, 2}: 1 is the +1 side."""
    return OracleSuite(TargetPartition(np.asarray(labels), 2)).binary(1, 2)


def lifted_witness(inst):
    w = inst.witnesses[0]
    R = lift(inst.points).R
    u = np.append(w.u, w.b / R)
    return u / np.linalg.norm(u), w.r


def test_lift_examples():
    L = lift([[1.0, 0.0], [-1.0, 0.0]])
    assert L.R == 1.0
    assert np.array_equal(L.lifted, [[1, 0, 1], [-1, 0, 1]])
    single = lift([[3.0, 4.0]])
    assert single.lifted[0, -1] == 5.0
    assert lift(np.zeros((2, 2))).R == 1.0
    assert np.array_equal(single.lifted[:, :-1], single.original)


@pytest.mark.parametrize("seed", range(5))
def test_lifted_witness_margin(seed):
    inst = gen_separable(3, 100, 50.0, seed)
    u, r = lifted_witness(inst)
    h = np.where(inst.labels == 1, 1.0, -1.0)
    assert np.min(h * (lift(inst.points).lifted @ u)) >= r / 2 - 1e-9


def test_relax_cut_examples():
    u = np.array([0.0, 1.0])
    mu = np.array([1.0, 0.0])
    assert np.array_equal(relax_cut(u, np.array([1.0, 1.0]), mu), u)
    mu = np.array([1.0, 1.0]) / np.sqrt(2)
    assert np.allclose(relax_cut(u, np.array([1.0, 0.0]), mu), [-1.0, 1.0])
    assert np.allclose(relax_cut(mu, mu, mu), 0.0)
    with pytest.raises(DegenerateReference):
        relax_cut(u, np.array([-1.0, 0.0]), np.array([1.0, 0.0]))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**9))
def test_relax_cut_boundary_and_containment(d, seed):
    g = np.random.default_rng(seed)
    mu = g.standard_normal(d)
    z0 = g.standard_normal(d)
    if z0 @ mu < 0:
        z0 = -z0
    u = g.standard_normal(d)
    if u @ mu > 0:
        u = -u
    if z0 @ mu <= 1e-6:
        return
    us = relax_cut(u, z0, mu)
    assert abs(us @ mu) <= 1e-9 * max(1.0, np.linalg.norm(u) * np.linalg.norm(mu) * np.linalg.norm(z0)
                                        / (z0 @ mu))
    v = g.standard_normal((1000, d))
    inside = (v @ z0 >= 0) & (v @ u >= 0)
    assert np.all(v[inside] @ us >= -1e-9)


def test_all_positive_shortcut():
    X = np.random.default_rng(0).standard_normal((10, 2))
    o = binary_oracle(np.ones(10, dtype=int))
    res = cp_learn(X, o)
    assert res.seed_queries == 1 and o.suite.ledger.seed_count == 1
    assert res.plus.size == 10 and res.minus.size == 0


def test_all_negative():
    X = np.random.default_rng(0).standard_normal((10, 2))
    res = cp_learn(X, binary_oracle(np.full(10, 2)))
    assert res.plus.size == 0 and res.minus.size == 10


def test_one_dimensional():
    X = np.array([[-1.0], [1.0]])
    for s in range(10):
        res = cp_learn(X, binary_oracle([2, 1]), rng=np.random.default_rng(s))
        assert list(res.plus) == [1] and list(res.minus) == [0]
        assert res.rounds <= 3


@pytest.mark.parametrize("m,ratio", [(2, 10.0), (3, 100.0), (4, 1000.0)])
def test_exact_and_witness_retention(m, ratio):
    for s in range(4):
        inst = gen_separable(m, 150, ratio, 10 * m + s)
        o = binary_oracle(inst.labels)
        res = cp_learn(inst.points, o, rng=np.random.default_rng(s))
        assert np.array_equal(np.sort(res.plus), np.flatnonzero(inst.labels == 1))
        u, _ = lifted_witness(inst)
        for rec in res.records:
            assert rec.normal @ u >= -1e-9 * np.linalg.norm(rec.normal)
            if rec.relaxed:
                assert abs(rec.normal @ rec.mu_hat) <= 1e-9 * np.linalg.norm(rec.raw_normal) * max(
                    1.0, np.linalg.norm(rec.mu_hat)) * 10
        assert res.rounds <= inst.n
        assert len({rec.point for rec in res.records}) == len(res.records)
        assert res.seed_queries == o.suite.ledger.seed_count


def test_seed_bound_m4():
    m, ratio = 4, 1000.0
    for s in range(10):
        inst = gen_separable(m, 200, ratio, 500 + s)
        o = binary_oracle(inst.labels)
        res = cp_learn(inst.points, o, rng=np.random.default_rng(s))
        assert res.seed_queries <= 10 * m * math.log2(ratio) + 20


def test_non_separable_input():
    # every round reveals a point, so XOR ends with all labels known
    X = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    res = cp_learn(X, binary_oracle([1, 1, 2, 2]), rng=np.random.default_rng(0))
    assert res.rounds <= 4
    assert list(res.plus) == [0, 1]
    with pytest.raises(SeparabilityViolated):
        cp_learn(X, binary_oracle([1, 1, 2, 2]), CPConfig(max_rounds=1), np.random.default_rng(0))


def test_known_points_never_queried():
    inst = gen_separable(2, 60, 20.0, 3)
    o = binary_oracle(inst.labels)
    known = {0: 1 if inst.labels[0] == 1 else -1, 1: 1 if inst.labels[1] == 1 else -1}
    res = cp_learn(inst.points, o, rng=np.random.default_rng(0), known=known)
    for ev in o.suite.ledger.transcript:
        assert 0 not in ev.query and 1 not in ev.query
    assert np.array_equal(np.sort(res.plus), np.flatnonzero(inst.labels == 1))


def test_perceptron_examples():
    X = np.random.default_rng(0).standard_normal((10, 2))
    o = binary_oracle(np.ones(10, dtype=int))
    r = perceptron_seed_baseline(X, o)
    assert r.seed_queries == 1 and r.plus.size == 10
    r = perceptron_seed_baseline(np.array([[-1.0], [1.0]]), binary_oracle([2, 1]))
    assert list(r.plus) == [1]


def test_perceptron_much_worse_at_small_margin():
    inst = gen_separable(3, 300, 100.0, 7)
    rp = perceptron_seed_baseline(inst.points, binary_oracle(inst.labels))
    rc = cp_learn(inst.points, binary_oracle(inst.labels), rng=np.random.default_rng(0))
    assert np.array_equal(np.sort(rp.plus), np.sort(rc.plus))
    assert rp.seed_queries >= 5 * rc.seed_queries


def test_reference_bound_value():
    assert cp_reference(2, 10.0) == pytest.approx(2 / math.log2(math.e / (math.e - 1)) * 2 * math.log2(80))


def test_trace_csv(tmp_path):
    inst = gen_separable(2, 50, 10.0, 1)
    res = cp_learn(inst.points, binary_oracle(inst.labels), rng=np.random.default_rng(0))
    path = tmp_path / "trace.csv"
    write_trace(res.records, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["round", "seed_answers", "acceptance", "constraints"]
    assert len(rows) == len(res.records) + 1

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regime_gauge._rng import make_rng
from regime_gauge.datasets import TabularDataset
from regime_gauge.evaluation import (
    AurocUndefined,
    Decision,
    Gate,
    ShiftReport,
    auroc,
    bootstrap_ci,
    cst,
    degradation_slope_advantage,
    firewall_gate,
    shift_report,
)
from regime_gauge.models import train_logistic


def brute_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(Fraction(1) if p > n else Fraction(1, 2) if p == n else Fraction(0) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def random_instance(rng):
    n = int(rng.integers(2, 51))
    # coarse integer scores force plenty of ties
    scores = rng.integers(0, int(rng.integers(1, 8)) + 1, n).astype(float)
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    return scores, labels


def test_auroc_brute_force_1000_instances():
    rng = make_rng(2024)
    for _ in range(1000):
        s, y = random_instance(rng)
        exact = brute_auroc(s.tolist(), y.tolist())
        # pair-count AUROC has denominator n_pos * n_neg; comparing as fractions is exact
        assert Fraction(auroc(s, y)).limit_denominator(2 * 50 * 50) == exact


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=30))
def test_auroc_property(pairs):
    s = [float(a) for a, _ in pairs]
    y = [b for _, b in pairs]
    if len(set(y)) < 2:
        with pytest.raises(AurocUndefined):
            auroc(s, y)
        return
    assert auroc(s, y) == pytest.approx(float(brute_auroc(s, y)), abs=1e-12)
    # label flip mirrors the value
    assert auroc(s, [1 - v for v in y]) == pytest.approx(1 - auroc(s, y), abs=1e-12)


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auroc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auroc([0.8, 0.2, 0.8, 0.4], [1, 1, 0, 0]) == 0.375
    with pytest.raises(AurocUndefined, match="AUROC undefined"):
        auroc([0.1, 0.2], [1, 1])


def test_report_reference_triples():
    r = ShiftReport({"A": 0.733, "B": 0.716, "C": 0.739})
    assert r.robust_auroc == 0.716
    assert r.delta == pytest.approx(-0.006, abs=1e-12)
    r2 = ShiftReport({"A": 0.954, "B": 0.740, "C": 0.760})
    assert r2.robust_auroc == 0.740
    assert r2.delta == pytest.approx(0.194, abs=1e-12)


def test_slope_advantage_examples():
    assert degradation_slope_advantage(-0.020, 0.039) == pytest.approx(0.059, abs=1e-12)
    assert degradation_slope_advantage(0.05, 0.05) == 0
    simple = ShiftReport({"A": 0.733, "B": 0.716, "C": 0.739})
    complex_ = ShiftReport({"A": 0.954, "B": 0.740, "C": 0.760})
    assert degradation_slope_advantage(simple, complex_) == pytest.approx(0.200, abs=1e-12)
    with pytest.raises(ValueError):
        degradation_slope_advantage(ShiftReport({"A": 0.7}), complex_)


@given(st.dictionaries(st.sampled_from("ABC"), st.floats(0, 1), min_size=1))
def test_robust_is_min(per_env):
    r = ShiftReport(per_env)
    assert r.robust_auroc == min(per_env.values())
    assert all(r.robust_auroc <= v for v in r.per_env_auroc.values())


def _envs_dataset(seed, c_single_class=False):
    rng = make_rng(seed)
    parts = []
    for e in "ABC":
        X = rng.standard_normal((200, 2))
        y = (X[:, 0] + 0.5 * rng.standard_normal(200) > 0).astype(int)
        if c_single_class and e == "C":
            y[:] = 1
        parts.append(TabularDataset(X, y, np.full(200, e), ("a", "b")))
    return TabularDataset.concat(parts)


def test_identical_envs_give_zero_delta():
    base = _envs_dataset(1).subset("A")
    data = TabularDataset.concat([base, *(TabularDataset(base.features, base.labels, np.full(200, e), base.feature_names) for e in "BC")])
    r = shift_report(train_logistic(data), data)
    assert r.delta == 0 and r.robust_auroc == r.per_env_auroc["A"]


def test_single_class_env_excluded_with_warning():
    data = _envs_dataset(2, c_single_class=True)
    with pytest.warns(UserWarning, match="environment C"):
        r = shift_report(train_logistic(data), data)
    assert r.excluded == ("C",) and "C" not in r.per_env_auroc and r.delta is None


def test_bootstrap_ci_brackets_point_and_is_seeded():
    data = _envs_dataset(3)
    m = train_logistic(data)
    r = shift_report(m, data, bootstrap=True, seed=5)
    lo, hi = r.ci["C"]
    assert lo <= r.per_env_auroc["C"] <= hi
    assert shift_report(m, data, bootstrap=True, seed=5).ci == r.ci
    s = np.array([0.1, 0.9, 0.4, 0.6])
    assert bootstrap_ci(s, np.array([0, 1, 0, 1]), resamples=50) == bootstrap_ci(s, np.array([0, 1, 0, 1]), resamples=50)


def rep(a, c, b=None):
    d = {"A": a, "C": c}
    if b is not None:
        d["B"] = b
    return ShiftReport(d)


def test_cst_examples():
    adopt = cst(rep(0.8, 0.70), rep(0.9, 0.80), 0.05)
    assert adopt.decision is Decision.ADOPT_COMPLEXITY and adopt.margin == pytest.approx(0.10)
    assert cst(rep(0.8, 0.70), rep(0.9, 0.72), 0.05).decision is Decision.DEFAULT_TO_SIMPLICITY
    # exactly representable margin equal to delta
    tie = cst(rep(0.75, 0.5), rep(0.75, 0.625), 0.125)
    assert tie.margin == 0.125 and tie.decision is Decision.DEFAULT_TO_SIMPLICITY


def test_cst_mismatched_envs():
    with pytest.raises(ValueError, match="different environments"):
        cst(rep(0.8, 0.7, 0.6), rep(0.8, 0.7))


def test_cst_dict_carries_both_margins():
    doc = cst(rep(0.8, 0.7, 0.6), rep(0.9, 0.72, 0.5)).to_dict()
    assert doc["margin"] == pytest.approx(0.02) and doc["robust_margin"] == pytest.approx(-0.1)
    assert doc["delta_threshold"] == 0.05 and "delta_note" in doc


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
def test_cst_rule(a1, c1, a2, c2, delta):
    d = cst(rep(a1, c1), rep(a2, c2), delta)
    assert (d.decision is Decision.ADOPT_COMPLEXITY) == (c2 - c1 > delta)


def test_firewall_examples():
    rng = make_rng(9)
    p = rng.random(50)
    assert all(g is Gate.PASS for g in firewall_gate(p, p, 0.01).gates)
    assert firewall_gate([0.2], [0.9], 0.5).gates == (Gate.HALT,)
    q = rng.random(1000)
    r = rng.random(1000)
    assert firewall_gate(np.r_[q, 0.0], np.r_[r, 1.0], 1.0).halt_rate == 0.0
    with pytest.raises(ValueError, match="length mismatch"):
        firewall_gate([0.1], [0.1, 0.2], 0.5)
    with pytest.raises(ValueError):
        firewall_gate([0.1], [0.1], 0.0)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20), st.floats(0.01, 1))
def test_firewall_property(pairs, theta):
    g, c = zip(*pairs)
    res = firewall_gate(g, c, theta)
    assert [x is Gate.HALT for x in res.gates] == [abs(b - a) > theta for a, b in pairs]

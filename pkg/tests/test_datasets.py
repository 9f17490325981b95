import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regime_gauge.datasets import (
    DataError,
    SimConfig,
    TabularDataset,
    fit_standardizer,
    generate_shifting,
    invariant_logit_scale,
    load_csv,
    load_matrix,
    ood_signs,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def _ds(X, env="A"):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    return TabularDataset(X, np.zeros(len(X), dtype=int), np.full(len(X), env), tuple(f"x{i}" for i in range(X.shape[1])))


def test_env_counts(tmp_path):
    p = _write(tmp_path, "x,label,env\n1,0,A\n2,1,A\n3,0,B\n4,1,C\n")
    d = load_csv(p)
    assert d.env_counts() == {"A": 2, "B": 1, "C": 1}
    assert d.feature_names == ("x",) and d.dropped == 0


def test_non_numeric_cell_names_row_and_column(tmp_path):
    p = _write(tmp_path, "x,y,label,env\n1,2,0,A\n1,oops,1,A\n")
    with pytest.raises(DataError, match=r"row 3, column 'y'"):
        load_csv(p)


def test_missing_env_drops_row(tmp_path):
    p = _write(tmp_path, "x,label,env\n1,0,A\n2,1,\n3,1,C\n")
    d = load_csv(p)
    assert d.dropped == 1 and d.n_rows == 2


@pytest.mark.parametrize(
    "text,match",
    [
        ("x,env\n1,A\n", "missing required column 'label'"),
        ("x,label,env\n1,2,A\n", "not 0 or 1"),
        ("x,label,env\n1,0,Z\n", "environment"),
        ("x,label,env\n1,0\n", "expected 3 fields"),
        ("", "empty file"),
    ],
)
def test_load_errors(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        load_csv(_write(tmp_path, text))


def test_load_custom_columns(tmp_path):
    p = _write(tmp_path, "y,x,period\n1,0.5,C\n0,0.1,A\n")
    d = load_csv(p, label_column="y", env_column="period")
    assert d.labels.tolist() == [1, 0] and d.env.tolist() == ["C", "A"]


def test_csv_round_trip(tmp_path):
    train, ood = generate_shifting(SimConfig(n_per_env=50, max_spurious=3), 3)
    d = TabularDataset.concat([train, ood])
    d.write_csv(tmp_path / "rt.csv")
    back = load_csv(tmp_path / "rt.csv")
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels) and np.array_equal(back.env, d.env)


def test_load_matrix(tmp_path):
    p = _write(tmp_path, "a,b,label\n1,2,0\nNA,3,1\n4,5,1\n")
    X, names, dropped = load_matrix(p)
    assert names == ("a", "b") and dropped == 1 and X.tolist() == [[1, 2], [4, 5]]


def test_standardizer_examples():
    s = fit_standardizer(_ds([1, 2, 3]))
    assert s.means[0] == 2 and s.scales[0] == pytest.approx(np.sqrt(2 / 3))
    assert s.transform(np.array([[1.0], [2.0], [3.0]])).ravel() == pytest.approx([-1.2247449, 0, 1.2247449])
    c = fit_standardizer(_ds([5, 5]))
    assert c.scales[0] == 1 and bool(c.constant[0])
    assert c.transform(np.array([[5.0], [5.0]])).ravel().tolist() == [0, 0]
    with pytest.raises(DataError):
        fit_standardizer(_ds([1, 2]), "C")


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40).filter(lambda v: np.std(v) > 1e-3))
def test_standardizer_idempotent(values):
    d = _ds(values)
    Z = fit_standardizer(d).transform(d.features)
    again = fit_standardizer(_ds(Z[:, 0])).transform(Z)
    assert np.allclose(again, Z, atol=1e-12)


def test_standardizer_round_trip():
    s = fit_standardizer(_ds([[1, 4], [2, 4], [6, 4]]))
    assert fit_standardizer(_ds([[1, 4], [2, 4], [6, 4]])).to_dict() == type(s).from_dict(s.to_dict()).to_dict()


def test_rho_one_keeps_signs():
    cfg = SimConfig(rho=1.0)
    assert np.all(ood_signs(cfg, 3) == 1)


def test_rho_zero_flips_everything():
    cfg = SimConfig(rho=0.0, n_per_env=4000)
    train, ood = generate_shifting(cfg, 1)
    assert ood.meta["ood_signs"].tolist() == [-1.0]
    a = lambda d: np.mean(d.features[d.labels == 1, -1]) - np.mean(d.features[d.labels == 0, -1])
    assert a(train) > 0 > a(ood)


def test_flip_fraction_monte_carlo():
    cfg = SimConfig(rho=0.25, max_spurious=50)
    flips = np.mean([np.mean(ood_signs(cfg, r) < 0) for r in range(20)])
    assert abs(flips - 0.75) <= 0.1


def test_generator_shapes_and_capacity_nesting():
    cfg = SimConfig(n_per_env=100)
    t0, _ = generate_shifting(cfg, 0)
    t8, o8 = generate_shifting(cfg, 8)
    assert t0.features.shape == (100, 4) and t8.features.shape == (100, 12)
    assert np.array_equal(t8.features[:, :4], t0.features)
    assert set(t8.env) == {"A"} and set(o8.env) == {"C"}
    assert t8.feature_names[:5] == ("inv_0", "inv_1", "inv_2", "inv_3", "spur_0")
    with pytest.raises(ValueError):
        generate_shifting(cfg, 65)


def test_generator_deterministic():
    cfg = SimConfig(n_per_env=64)
    a, b = generate_shifting(cfg, 5, 2), generate_shifting(cfg, 5, 2)
    assert np.array_equal(a[0].features, b[0].features) and np.array_equal(a[1].labels, b[1].labels)


def test_invariant_scale_hits_bayes_accuracy():
    # Monte-Carlo check of the quadrature root
    rng = np.random.default_rng(0)
    z = rng.standard_normal(400_000) * invariant_logit_scale(0.8)
    assert np.mean(1 / (1 + np.exp(-np.abs(z)))) == pytest.approx(0.8, abs=2e-3)


def test_dataset_validation():
    with pytest.raises(DataError):
        TabularDataset(np.zeros((2, 1)), np.array([0, 2]), np.array(["A", "A"]), ("x",))
    with pytest.raises(DataError):
        TabularDataset(np.zeros((2, 1)), np.array([0, 1]), np.array(["A", "Q"]), ("x",))
    with pytest.raises(DataError):
        TabularDataset(np.zeros((2, 2)), np.array([0, 1]), np.array(["A", "A"]), ("x", "x"))

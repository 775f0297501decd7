import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argen.model import (
    PRESETS,
    ArgenConfig,
    Dataset,
    FittedModel,
    config_from_dict,
    config_to_dict,
    count_nonzero,
    fit,
    make_preset,
    objective_constant,
    penalized_objective,
    predict,
    read_dataset_csv,
    transform_to_qp,
    write_dataset_csv,
)
from argen.qp import objective
from oracles import cd_elastic_net, enet_objective

INF = math.inf


def cfg(p, lambda1=0.0, lambda2=0.0, w=None, sigma=None, s=None, t=None):
    return ArgenConfig(
        lambda1=lambda1,
        lambda2=lambda2,
        w=np.ones(p) if w is None else w,
        sigma=np.eye(p) if sigma is None else sigma,
        s=np.full(p, -10.0) if s is None else s,
        t=np.full(p, 10.0) if t is None else t,
    )


TWO_ROWS = Dataset(np.array([[1.0], [1.0]]), np.array([1.0, 1.0]))


# config and data validation

def test_config_rejects_empty_box():
    with pytest.raises(ValueError):
        cfg(2, s=np.array([0.0, 1.0]), t=np.array([1.0, 1.0]))


def test_config_rejects_infinite_lower():
    with pytest.raises(ValueError):
        cfg(1, s=np.array([-INF]))


def test_config_rejects_negative_inputs():
    with pytest.raises(ValueError):
        cfg(1, lambda1=-1.0)
    with pytest.raises(ValueError):
        cfg(2, w=np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        cfg(2, sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_config_normalized_weights():
    c = ArgenConfig(1.0, 0.0, [1.0, 3.0], np.eye(2), [0, 0], [1, 1], weight_entry="normalized")
    np.testing.assert_allclose(c.w, [0.25, 0.75])


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), np.ones(2), ["train", "bogus"])


def test_dataset_slices():
    d = Dataset(np.arange(8.0).reshape(4, 2), np.arange(4.0), ["train", "validation", "test", "train"])
    assert d.train.n == 2 and d.validation.n == 1 and d.test.n == 1
    np.testing.assert_array_equal(d.train.Y, [0.0, 3.0])


# transform_to_qp

def test_transform_zero_lower():
    X = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 1.0]])
    Y = np.array([1.0, 0.0, 2.0])
    c = cfg(2, lambda1=0.5, lambda2=0.3, s=np.zeros(2), t=np.array([2.0, INF]))
    P = transform_to_qp(Dataset(X, Y), c)
    np.testing.assert_array_equal(P.v0, 0.0)
    np.testing.assert_allclose(P.b, -2 * X.T @ Y)
    np.testing.assert_array_equal(P.l, [2.0, INF])


def test_transform_no_ridge():
    X = np.random.default_rng(0).standard_normal((5, 3))
    P = transform_to_qp(Dataset(X, np.ones(5)), cfg(3))
    np.testing.assert_allclose(P.A, 2 * X.T @ X)


def test_transform_hand_case():
    P = transform_to_qp(TWO_ROWS, cfg(1, lambda1=1.0, s=np.zeros(1), t=np.array([10.0])))
    np.testing.assert_allclose(P.A, [[4.0]])
    np.testing.assert_allclose(P.b, [-4.0])
    np.testing.assert_allclose(P.d, [1.0])
    np.testing.assert_allclose(P.v0, [0.0])
    np.testing.assert_allclose(P.l, [10.0])


def test_transform_shifted_box():
    c = cfg(1, lambda1=1.0, s=np.array([-2.0]), t=np.array([3.0]))
    P = transform_to_qp(TWO_ROWS, c)
    np.testing.assert_allclose(P.v0, [2.0])
    np.testing.assert_allclose(P.l, [5.0])
    np.testing.assert_allclose(P.b, [4.0 * -2.0 - 4.0])


def test_transform_dimension_mismatch():
    with pytest.raises(ValueError):
        transform_to_qp(TWO_ROWS, cfg(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_objective_identity(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(2, 10)), int(rng.integers(1, 5))
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal(n)
    s = rng.uniform(-3, 1, p)
    c = cfg(p, lambda1=rng.uniform(0, 2), lambda2=rng.uniform(0, 2), w=rng.uniform(0, 1, p),
            s=s, t=s + rng.uniform(0.5, 4, p))
    data = Dataset(X, Y)
    P = transform_to_qp(data, c)
    beta = rng.uniform(c.s, c.t)
    lhs = penalized_objective(data, c, beta)
    rhs = objective(P, beta - c.s) + objective_constant(P, c)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


# fit

def test_fit_interpolation():
    X = np.vstack([np.eye(2), np.eye(2)])
    m = fit(Dataset(X, X @ np.array([1.0, 2.0])), cfg(2))
    np.testing.assert_allclose(m.beta, [1.0, 2.0], atol=1e-6)


def test_fit_soft_threshold():
    m = fit(TWO_ROWS, cfg(1, lambda1=1.0, s=np.zeros(1), t=np.array([10.0])))
    assert m.beta[0] == pytest.approx(0.75, abs=1e-6)


def test_fit_clamped():
    m = fit(TWO_ROWS, cfg(1, lambda1=1.0, s=np.zeros(1), t=np.array([0.5])))
    assert m.beta[0] == pytest.approx(0.5, abs=1e-6)


def test_fit_uses_train_rows_only():
    X = np.array([[1.0], [1.0], [1.0]])
    data = Dataset(X, np.array([1.0, 1.0, 100.0]), ["train", "train", "test"])
    m = fit(data, cfg(1, lambda1=1.0, s=np.zeros(1), t=np.array([10.0])))
    assert m.beta[0] == pytest.approx(0.75, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_fit_within_bounds_and_dominates(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(2, 12)), int(rng.integers(1, 6))
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal(n) * 3
    s = rng.uniform(-2, 0.5, p)
    t = s + rng.uniform(0.1, 3, p)
    c = cfg(p, lambda1=rng.uniform(0, 3), lambda2=rng.uniform(0, 3), w=rng.uniform(0, 1, p), s=s, t=t)
    data = Dataset(X, Y)
    m = fit(data, c)
    assert np.all(m.beta >= s) and np.all(m.beta <= t)
    f = penalized_objective(data, c, m.beta)
    ls = np.clip(np.linalg.lstsq(X, Y, rcond=None)[0], s, t)
    for ref in (s, ls, 0.5 * (s + t)):
        assert f <= penalized_objective(data, c, ref) + 1e-8 * (1 + abs(f))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_fit_matches_coordinate_descent(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(3, 15)), int(rng.integers(1, 6))
    X = rng.standard_normal((n, p))
    Y = X @ rng.uniform(-1, 2, p) + rng.standard_normal(n)
    l1, l2 = rng.uniform(0, 3), rng.uniform(0, 3)
    s, t = np.zeros(p), np.full(p, 1e6)
    m = fit(Dataset(X, Y), cfg(p, l1, l2, s=s, t=t))
    ref = cd_elastic_net(X, Y, l1, l2, np.ones(p), np.eye(p), s, t)
    f_fit = enet_objective(X, Y, l1, l2, np.ones(p), np.eye(p), m.beta)
    f_ref = enet_objective(X, Y, l1, l2, np.ones(p), np.eye(p), ref)
    assert abs(f_fit - f_ref) <= 1e-4


def test_fit_general_sigma_matches_coordinate_descent():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((20, 4))
    Y = X @ np.array([1.0, -0.5, 0.0, 2.0]) + 0.3 * rng.standard_normal(20)
    Z = rng.standard_normal((4, 4))
    sigma = Z @ Z.T / 4
    w = rng.uniform(0, 1, 4)
    s, t = np.full(4, -1.0), np.full(4, 1.5)
    m = fit(Dataset(X, Y), cfg(4, 2.0, 1.0, w=w, sigma=sigma, s=s, t=t))
    ref = cd_elastic_net(X, Y, 2.0, 1.0, w, sigma, s, t)
    np.testing.assert_allclose(m.beta, ref, atol=1e-5)


def test_shrinkage_monotone_in_lambda1():
    X = np.array([[1.0], [2.0], [0.5]])
    Y = np.array([1.0, 2.5, 0.2])
    prev = INF
    # zero iff lambda1 >= 2 X'Y = 12.2
    for lam in np.linspace(0, 13, 27):
        b = fit(Dataset(X, Y), cfg(1, lambda1=lam, s=np.zeros(1), t=np.array([10.0]))).beta[0]
        assert b <= prev + 1e-9
        prev = b
    assert prev == 0.0


def test_count_nonzero():
    assert count_nonzero(np.array([0.0, 1e-9, 0.5])) == 1
    assert count_nonzero(np.array([1e-7, 0.0])) == 1
    assert count_nonzero(np.array([100.0, 1e-7])) == 1


# predict

def test_predict_cases():
    c = cfg(2)
    zero = FittedModel(np.zeros(2), c, 0, 0.0, True, 0)
    np.testing.assert_array_equal(predict(zero, np.ones((3, 2))), 0.0)
    m = FittedModel(np.array([0.5, 1.0]), c, 0, 0.0, True, 2)
    np.testing.assert_array_equal(predict(m, np.eye(2)), [0.5, 1.0])
    np.testing.assert_array_equal(predict(m, np.array([[1.0, 1.0]])), [1.5])
    with pytest.raises(ValueError):
        predict(m, np.ones((1, 3)))


# presets

def test_preset_arls():
    t = make_preset("ARLS", 8)
    assert t.tunable == ()
    c = t.config
    assert c.lambda1 == 0 and c.lambda2 == 0
    np.testing.assert_array_equal(c.w, np.full(8, 1 / 8))
    np.testing.assert_array_equal(c.sigma, np.eye(8))


def test_preset_arl():
    t = make_preset("arl", 8)
    assert t.tunable == ("lambda1",)
    assert t.config.lambda2 == 0
    np.testing.assert_array_equal(t.config.w, np.full(8, 1 / 8))


def test_preset_argen():
    assert set(make_preset("ARGEN", 8).tunable) == {"lambda1", "lambda2", "w", "sigma"}


@pytest.mark.parametrize("name,tunable", [
    ("ARGL", {"lambda1", "w"}),
    ("ARR", {"lambda2"}),
    ("ARGR", {"lambda2", "sigma"}),
    ("AREN", {"lambda1", "lambda2"}),
    ("ARLEN", {"lambda1", "lambda2", "w"}),
    ("ARREN", {"lambda1", "lambda2", "sigma"}),
])
def test_preset_table(name, tunable):
    assert set(make_preset(name, 3).tunable) == tunable


def test_preset_unknown():
    with pytest.raises(ValueError, match="unknown preset"):
        make_preset("LASSO", 3)
    assert len(PRESETS) == 9


def test_preset_instantiate_rejects_fixed_field():
    with pytest.raises(ValueError):
        make_preset("ARL", 2).instantiate(lambda2=1.0)


# IO

def test_dataset_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(rng.standard_normal((5, 3)), rng.standard_normal(5),
                ["train", "train", "validation", "test", "test"])
    path = tmp_path / "d.csv"
    write_dataset_csv(path, d)
    e = read_dataset_csv(path)
    np.testing.assert_array_equal(d.X, e.X)
    np.testing.assert_array_equal(d.Y, e.Y)
    assert list(e.split) == list(d.split)


def test_dataset_csv_without_split(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,x1,x2\n1,1,0\n2,0,1\n")
    d = read_dataset_csv(path)
    assert d.train.n == 2


def test_dataset_csv_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,y\n1,2\n")
    with pytest.raises(ValueError, match="first column"):
        read_dataset_csv(path)
    path.write_text("y,x1\n1,abc\n")
    with pytest.raises(ValueError, match=":2"):
        read_dataset_csv(path)


def test_config_dict_forms():
    c = config_from_dict({"lambda1": 1.0, "s": [0, "-1"], "t": ["inf", 2.0], "sigma": "identity"})
    np.testing.assert_array_equal(c.sigma, np.eye(2))
    assert c.t[0] == INF
    back = config_to_dict(c)
    assert back["t"][0] == "inf"
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    c2 = config_from_dict({"s": [0, 0], "t": [1, 1], "sigma": {"P": P.tolist(), "D": [1, 2]}})
    np.testing.assert_allclose(c2.sigma, P @ np.diag([1, 2]) @ P.T)

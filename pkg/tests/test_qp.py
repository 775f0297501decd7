import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argen.qp import (
    QpProblem,
    SolverOptions,
    auxiliary_g,
    kkt_residual,
    mu_update,
    objective,
    problem_from_dict,
    problem_to_dict,
    solution_to_dict,
    solve_qp,
    split_matrix,
    update_roots,
)
from oracles import f_value, qp_oracle, random_qp

INF = math.inf


def one_d(b=-2.0, d=0.0, v0=0.0, l=10.0, a=2.0):
    return QpProblem([[a]], [b], [d], [v0], [l])


# split_matrix

def test_split_mixed_signs():
    Ap, Am = split_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    np.testing.assert_array_equal(Ap, [[2, 0], [0, 2]])
    np.testing.assert_array_equal(Am, [[0, 1], [1, 0]])


def test_split_zero():
    Ap, Am = split_matrix(np.array([[0.0]]))
    assert Ap[0, 0] == 0 and Am[0, 0] == 0


def test_split_nonnegative():
    A = np.array([[1.0, 3.0], [3.0, 1.0]])
    Ap, Am = split_matrix(A)
    np.testing.assert_array_equal(Ap, A)
    assert not Am.any()


@given(st.integers(1, 6), st.integers(0, 10_000))
def test_split_reconstructs(p, seed):
    Z = np.random.default_rng(seed).standard_normal((p, p))
    A = Z + Z.T
    Ap, Am = split_matrix(A)
    assert np.array_equal(Ap - Am, A)
    assert (Ap >= 0).all() and (Am >= 0).all()


# problem validation

def test_rejects_negative_d():
    with pytest.raises(ValueError, match="d"):
        one_d(d=-1.0)


def test_rejects_negative_anchor_and_cap():
    with pytest.raises(ValueError):
        one_d(v0=-0.1)
    with pytest.raises(ValueError):
        one_d(l=0.0)


def test_rejects_indefinite():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 2.0], [2.0, 1.0]], [0, 0], [0, 0], [0, 0], [1, 1])


def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 0.5], [0.0, 1.0]], [0, 0], [0, 0], [0, 0], [1, 1])


def test_accepts_roundoff_psd():
    rng = np.random.default_rng(3)
    Z = rng.standard_normal((3, 8))
    A = Z.T @ Z  # rank 3, PSD up to roundoff
    QpProblem(A, np.zeros(8), np.zeros(8), np.zeros(8), np.full(8, INF))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol=0)
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
    with pytest.raises(ValueError):
        SolverOptions(init=[0.0]).start(one_d())
    with pytest.raises(ValueError):
        SolverOptions(init=[11.0]).start(one_d())


def test_default_start_is_positive_midpoint():
    P = QpProblem(np.eye(2), [0, 0], [0, 0], [0.0, 2.0], [INF, 0.5])
    v = SolverOptions().start(P)
    np.testing.assert_allclose(v, [0.5 * (1e-10 + 1.0), 0.5 * (1e-10 + 0.5)])


# objective

def test_objective_scalar():
    assert objective(one_d(), [1.0]) == -1.0


def test_objective_at_anchor_without_linear_term():
    rng = np.random.default_rng(0)
    P = random_qp(rng, p=5)
    P = QpProblem(P.A, np.zeros(5), P.d, P.v0, P.l)
    assert objective(P, P.v0) == pytest.approx(0.5 * P.v0 @ P.A @ P.v0, rel=1e-14)


def test_objective_separable():
    P = QpProblem(2 * np.eye(2), [0, 0], [1, 1], [0, 0], [INF, INF])
    assert objective(P, [1.0, 1.0]) == 4.0


def test_objective_dimension_mismatch():
    with pytest.raises(ValueError):
        objective(one_d(), [1.0, 2.0])


# mu_update

def test_mu_fixed_point():
    np.testing.assert_allclose(mu_update(one_d(l=INF), [1.0]), [1.0], rtol=1e-15)


def test_mu_single_step_from_half():
    np.testing.assert_allclose(mu_update(one_d(l=INF), [0.5]), [1.0], rtol=1e-15)


def test_mu_otherwise_branch():
    P = one_d(b=0.0, d=1.0, v0=0.5, l=1.0)
    r1, r2 = update_roots(P, [0.5])
    assert r1[0] == pytest.approx(0.0, abs=1e-15)
    assert r2[0] == pytest.approx(0.5)
    np.testing.assert_allclose(mu_update(P, [0.5]), [0.5])


def test_mu_zero_diagonal_linear_root():
    # a = 0, c > 0: root is c v / (b + d)
    P = QpProblem([[0.0, -1.0], [-1.0, 1.0]], [1.0, 0.0], [0.0, 0.0], [0, 0], [INF, INF],
                  check_psd=False)
    v = np.array([2.0, 3.0])
    out = mu_update(P, v)
    assert out[0] == pytest.approx(3.0 * 2.0 / 1.0)


def test_mu_zero_diagonal_no_positive_root_clamps():
    P = QpProblem([[0.0, -1.0], [-1.0, 1.0]], [-1.0, 0.0], [0.0, 0.0], [0, 0], [5.0, INF],
                  check_psd=False)
    assert mu_update(P, [2.0, 3.0])[0] == 5.0


def test_mu_indeterminate_keeps_value():
    P = QpProblem([[0.0, 0.0], [0.0, 1.0]], [0.0, -1.0], [0.0, 0.0], [0, 0], [INF, INF])
    assert mu_update(P, [0.7, 1.0])[0] == 0.7


def test_mu_zero_absorbing():
    rng = np.random.default_rng(1)
    P = random_qp(rng, p=6)
    v = SolverOptions().start(P)
    v[2] = 0.0
    for _ in range(20):
        v = mu_update(P, v)
        assert v[2] == 0.0


def test_mu_small_root_not_cancelled():
    # tiny c with b > 0: naive formula would round the root to exactly 0
    P = QpProblem([[1.0, -1e-12], [-1e-12, 1.0]], [1.0, 1.0], [0.0, 0.0], [0, 0], [INF, INF])
    out = mu_update(P, [1.0, 1.0])
    assert out[0] > 0
    assert out[0] == pytest.approx(1e-12, rel=1e-10)


# solve_qp

def test_solve_scalar():
    sol = solve_qp(one_d())
    assert sol.converged
    np.testing.assert_allclose(sol.v, [1.0], rtol=1e-8)
    assert sol.objective == pytest.approx(-1.0, abs=1e-12)


def test_solve_zero_problem():
    rng = np.random.default_rng(5)
    P0 = random_qp(rng, p=4)
    P = QpProblem(P0.A, np.zeros(4), np.zeros(4), np.zeros(4), P0.l)
    sol = solve_qp(P)
    np.testing.assert_allclose(sol.v, 0.0, atol=1e-8)
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_solve_separable_with_clamp():
    P = QpProblem(2 * np.eye(2), [-2, -6], [1, 1], [0, 0], [1, 1])
    sol = solve_qp(P)
    np.testing.assert_allclose(sol.v, [0.5, 1.0], rtol=1e-8)


def test_solve_cap_reports_not_converged():
    P = random_qp(np.random.default_rng(12), p=20)
    sol = solve_qp(P, SolverOptions(max_iter=1))
    assert not sol.converged and sol.iterations == 1
    assert np.all(sol.v >= 0) and np.all(sol.v <= P.l)


def test_solution_objective_consistent():
    rng = np.random.default_rng(8)
    for _ in range(10):
        P = random_qp(rng, p_max=10)
        sol = solve_qp(P)
        assert sol.objective == pytest.approx(f_value(P.A, P.b, P.d, P.v0, sol.v),
                                              rel=1e-12, abs=1e-14)


def test_trace_starts_at_initial_point():
    P = one_d()
    sol = solve_qp(P, SolverOptions(record_trace=True))
    assert sol.trace[0] == pytest.approx(objective(P, SolverOptions().start(P)))
    assert len(sol.trace) == sol.iterations + 1


def test_polish_off_is_pure_mu():
    rng = np.random.default_rng(4)
    P = random_qp(rng, p=5)
    opts = SolverOptions(polish=False, max_iter=50)
    sol = solve_qp(P, opts)
    v = opts.start(P)
    for _ in range(50):
        v = mu_update(P, v)
    np.testing.assert_array_equal(sol.v, v)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_descent_and_feasibility(seed):
    P = random_qp(np.random.default_rng(seed), p_max=12)
    sol = solve_qp(P, SolverOptions(record_trace=True, max_iter=5000))
    tr = sol.trace
    assert np.all(tr[1:] <= tr[:-1] + 1e-10 * (1 + np.abs(tr[:-1])))
    assert np.all(sol.v >= 0) and np.all(sol.v <= P.l)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_iterates_stay_in_box(seed):
    P = random_qp(np.random.default_rng(seed), p_max=8)
    v = SolverOptions().start(P)
    for _ in range(30):
        v = mu_update(P, v)
        assert np.all(v >= 0) and np.all(v <= P.l)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_matches_oracle_small(seed):
    rng = np.random.default_rng(seed)
    P = random_qp(rng, p=int(rng.integers(1, 4)))
    _, f_ref = qp_oracle(P)
    assert solve_qp(P).objective <= f_ref + 1e-7


# kkt_residual

def test_kkt_at_optimum():
    assert kkt_residual(one_d(), [1.0]) == 0.0


def test_kkt_at_kink():
    assert kkt_residual(one_d(b=0.0, d=1.0, v0=0.5, l=1.0), [0.5]) == 0.0


def test_kkt_far_from_optimum():
    assert kkt_residual(one_d(), [10.0]) == pytest.approx(18.0)


def test_kkt_bounds():
    # optimum of v^2 - 6v on [0, 1] is the cap; gradient -4 pushes outward
    P = one_d(b=-6.0, l=1.0)
    assert kkt_residual(P, [1.0]) == 0.0
    # at the lower bound with gradient pointing inward
    P = one_d(b=3.0)
    assert kkt_residual(P, [0.0]) == 0.0
    assert kkt_residual(one_d(), [0.0]) == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_fixed_point_certifies_kkt(seed):
    P = random_qp(np.random.default_rng(seed), p_max=10)
    sol = solve_qp(P, SolverOptions(polish=False))
    if not sol.converged or np.any(sol.v <= 0):
        return
    if np.allclose(mu_update(P, sol.v), sol.v, rtol=0, atol=0):
        assert kkt_residual(P, sol.v) <= 1e-8 * (1 + np.abs(P.b).max())


# auxiliary_g

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_majorizer_tight_and_above(seed):
    rng = np.random.default_rng(seed)
    P = random_qp(rng, p_max=10)
    hi = np.minimum(P.l, 3.0)
    v = rng.uniform(0.01, 1, P.p) * hi
    u = rng.uniform(0.01, 1, P.p) * hi
    fv = objective(P, v)
    assert auxiliary_g(P, v, v) == pytest.approx(fv, rel=1e-12, abs=1e-12)
    assert auxiliary_g(P, u, v) >= objective(P, u) - 1e-10


def test_majorizer_nonnegative_matrix():
    P = QpProblem([[2.0, 1.0], [1.0, 2.0]], [-1.0, 0.5], [0.2, 0.0], [0.3, 0.0], [INF, INF])
    u, v = np.array([0.2, 1.5]), np.array([1.0, 0.4])
    assert auxiliary_g(P, u, v) >= objective(P, u)


def test_majorizer_hand_case():
    P = QpProblem([[2.0, -1.0], [-1.0, 2.0]], [0.0, 0.0], [0.0, 0.0], [0, 0], [INF, INF])
    u, v = np.array([1.0, 1.0]), np.array([2.0, 2.0])
    # quadratic part 0.5*sum(A+ u^2 v / v) = 0.5*(2+2); log part -0.5*(2*4*(1+log(1/4)))
    expected = 0.5 * (2 + 2) - 0.5 * 2 * 4 * (1 + math.log(0.25))
    assert auxiliary_g(P, u, v) == pytest.approx(expected, rel=1e-14)
    assert auxiliary_g(P, u, v) >= objective(P, u)


def test_majorizer_domain():
    P = QpProblem([[2.0, -1.0], [-1.0, 2.0]], [0.0, 0.0], [0.0, 0.0], [0, 0], [INF, INF])
    with pytest.raises(ValueError):
        auxiliary_g(P, [1.0, 1.0], [0.0, 1.0])
    assert auxiliary_g(P, [0.0, 1.0], [1.0, 1.0]) == INF


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_branches_mutually_exclusive(seed):
    rng = np.random.default_rng(seed)
    P = random_qp(rng, p_max=10)
    v = rng.uniform(0.01, 1, P.p) * np.minimum(P.l, 3.0)
    r1, r2 = update_roots(P, v)
    assert not np.any((r1 > P.v0) & (r2 < P.v0))


# serialization

def test_problem_roundtrip():
    P = QpProblem([[2.0, 0.5], [0.5, 1.0]], [1, -1], [0.1, 0], [0, 0.3], [INF, 2])
    obj = json.loads(json.dumps(problem_to_dict(P)))
    assert obj["l"][0] == "inf"
    Q = problem_from_dict(obj)
    for name in ("A", "b", "d", "v0", "l"):
        np.testing.assert_array_equal(getattr(P, name), getattr(Q, name))


def test_problem_from_dict_errors():
    with pytest.raises(ValueError, match="missing"):
        problem_from_dict({"A": [[1]]})
    with pytest.raises(ValueError, match="l\\[0\\]"):
        problem_from_dict({"A": [[1]], "b": [0], "d": [0], "v0": [0], "l": ["big"]})


def test_solution_dict_fields():
    out = solution_to_dict(solve_qp(one_d()))
    assert set(out) == {"v", "objective", "iterations", "kkt_residual", "converged"}

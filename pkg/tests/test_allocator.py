import math

import numpy as np
import pytest

from coulomb_formation import (
    AbsoluteState,
    AllocatorConfig,
    Branch,
    CLFViolationError,
    DesiredConfiguration,
    FormationModel,
    QuadraticCLF,
    allocate,
    allocate_from_derivatives,
    evaluate,
    kkt_consistency,
    min_norm_thrust,
    relative_from_absolute,
    vec,
)
from coulomb_formation.allocator import charge_decrease_check

from conftest import random_case


def qp_oracle(c, a):
    """min T.T s.t. c + a.T <= 0 by an active-set KKT linear solve."""
    if c <= 0:
        return np.zeros_like(a)
    n = a.size
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = 2 * np.eye(n)
    K[:n, n] = a
    K[n, :n] = a
    rhs = np.zeros(n + 1)
    rhs[n] = -c
    sol = np.linalg.solve(K, rhs)
    assert sol[n] >= 0  # multiplier of the active constraint
    return sol[:n]


def random_problem(rng):
    """Random formation, random PD P and an error state that needs input."""
    model, des, s = random_case(rng)
    n = model.n_rel
    M = rng.normal(size=(2 * n, 2 * n))
    clf = QuadraticCLF(M @ M.T + 0.5 * np.eye(2 * n), float(rng.uniform(0.001, 0.1)))
    return model, des, clf, relative_from_absolute(s, des)


def two_craft(nu):
    model = FormationModel([1.0, 1.0], d=1)
    des = DesiredConfiguration([20.0])
    s = AbsoluteState([[0.0], [10.0]], [[0.0], [nu]])
    clf = QuadraticCLF(np.eye(2), 0.1)
    return model, des, clf, relative_from_absolute(s, des)


def test_two_craft_by_hand():
    model, des, clf, err = two_craft(-1.0)
    res = allocate(clf, model, des, err, AllocatorConfig(eta=0.5, q_max=1.0))
    # V = 101, LfV = 20, need = 30.1; relative Coulomb acceleration 1.798e8 q1 q2
    assert res.V == 101.0
    assert res.branch is Branch.CHARGE_AND_THRUST
    assert res.lambda_min == pytest.approx(-1.798e8, rel=1e-12)
    q_mag = math.sqrt(0.5 * 30.1 / 1.798e8)
    np.testing.assert_allclose(res.q_star, [q_mag / math.sqrt(2)] * 2, rtol=1e-12)
    np.testing.assert_allclose(res.T_star, [-3.7625, 3.7625], rtol=1e-12)
    assert res.predicted_Vdot == pytest.approx(-0.1 * 101, rel=1e-12)


def test_two_craft_no_input_when_already_closing():
    model, des, clf, err = two_craft(5.0)
    # LfV = -100, eps V = 12.5
    res = allocate(clf, model, des, err, AllocatorConfig(eta=0.5))
    assert res.branch is Branch.NO_INPUT
    assert not np.any(res.q_star) and not np.any(res.T_star)
    assert math.isnan(res.lambda_min)
    assert res.predicted_Vdot == -100.0


def test_clf_violation_when_thrust_direction_vanishes():
    # nu = 0: LgTV = 0 but eps V > 0
    model, des, clf, err = two_craft(0.0)
    with pytest.raises(CLFViolationError):
        allocate(clf, model, des, err, AllocatorConfig(eta=0.5))


def test_thrust_only_at_eta_zero(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    res = allocate(square_P_clf, square_model, square_desired, err, AllocatorConfig(eta=0.0))
    assert res.branch is Branch.THRUST_ONLY
    assert not np.any(res.q_star)
    der = evaluate(square_P_clf, square_model, square_desired, err)
    np.testing.assert_allclose(res.T_star, qp_oracle(der.LfV + 0.01 * der.V, der.LgTV), rtol=1e-12)
    assert res.predicted_Vdot == pytest.approx(-0.01 * der.V, rel=1e-12)


def test_eta_one_uncapped_needs_no_thrust(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    res = allocate(square_P_clf, square_model, square_desired, err, AllocatorConfig(eta=1.0, q_max=10.0))
    assert not res.cap_active
    np.testing.assert_array_equal(res.T_star, 0.0)


def test_square_initial_allocation(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    der = evaluate(square_P_clf, square_model, square_desired, err)
    cfg = AllocatorConfig(eta=0.99, q_max=10.0)
    res = allocate_from_derivatives(der, 0.01, cfg)
    assert res.branch is Branch.CHARGE_AND_THRUST
    assert res.q_star[0] >= 0
    assert abs(charge_decrease_check(res, der, cfg, 0.01)) <= 1e-9 * 0.99 * (der.LfV + 0.01 * der.V)
    assert res.predicted_Vdot <= -0.01 * der.V + 1e-9 * (1 + der.V)


def test_charge_cap(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    free = allocate(square_P_clf, square_model, square_desired, err, AllocatorConfig(eta=0.99, q_max=10.0))
    capped = allocate(square_P_clf, square_model, square_desired, err, AllocatorConfig(eta=0.99, q_max=1e-3))
    assert capped.cap_active and not free.cap_active
    assert np.linalg.norm(capped.q_star) == pytest.approx(1e-3, rel=1e-12)
    np.testing.assert_allclose(capped.q_star / 1e-3, free.q_star / np.linalg.norm(free.q_star), rtol=1e-10)
    assert np.linalg.norm(capped.T_star) > np.linalg.norm(free.T_star)
    assert capped.predicted_Vdot == pytest.approx(free.predicted_Vdot, rel=1e-9)


def test_min_norm_thrust_against_qp_oracle(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        a = rng.normal(size=n) * 10 ** rng.uniform(-3, 3)
        c = float(rng.normal()) * 10 ** rng.uniform(-3, 3)
        T = min_norm_thrust(c, a)
        ref = qp_oracle(c, a)
        if c <= 0:
            assert not np.any(T)
        else:
            worst = max(worst, np.linalg.norm(T - ref) / np.linalg.norm(ref))
    assert worst <= 1e-8


def test_min_norm_thrust_against_generic_solver(rng):
    optimize = pytest.importorskip("scipy.optimize")
    for _ in range(20):
        n = int(rng.integers(2, 7))
        a, c = rng.normal(size=n), abs(float(rng.normal())) + 0.1
        sol = optimize.minimize(
            lambda T: T @ T, np.zeros(n), jac=lambda T: 2 * T, method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda T: -(c + a @ T), "jac": lambda T: -a}],
            options={"ftol": 1e-14, "maxiter": 200},
        )
        np.testing.assert_allclose(min_norm_thrust(c, a), sol.x, rtol=1e-6, atol=1e-9)


def test_min_norm_thrust_is_optimal_under_perturbation(rng):
    for _ in range(100):
        a, c = rng.normal(size=6), abs(float(rng.normal())) + 0.01
        T = min_norm_thrust(c, a)
        for _ in range(20):
            cand = T + rng.normal(scale=0.5, size=6)
            # push back onto the feasible set along a if needed
            slack = c + a @ cand
            if slack > 0:
                cand = cand - slack / (a @ a) * a
            assert cand @ cand >= T @ T * (1 - 1e-12)


def test_min_norm_thrust_errors():
    with pytest.raises(CLFViolationError):
        min_norm_thrust(1.0, np.zeros(3))
    np.testing.assert_array_equal(min_norm_thrust(0.0, np.zeros(3)), 0.0)
    np.testing.assert_array_equal(min_norm_thrust(1e-13, np.zeros(3), tol=1e-12), 0.0)


def test_decrease_on_random_states(rng):
    worst = -np.inf
    for _ in range(1000):
        model, des, clf, err = random_problem(rng)
        cfg = AllocatorConfig(eta=float(rng.uniform()), q_max=float(10 ** rng.uniform(-4, 0)))
        res = allocate(clf, model, des, err, cfg)
        worst = max(worst, (res.predicted_Vdot + clf.epsilon * res.V) / (1 + res.V))
    assert worst <= 1e-9


def test_every_allocation_conventions(rng):
    for _ in range(300):
        model, des, clf, err = random_problem(rng)
        cfg = AllocatorConfig(eta=float(rng.uniform()), q_max=float(10 ** rng.uniform(-4, 0)))
        der = evaluate(clf, model, des, err)
        S = der.charge_form
        assert np.trace(S) == 0.0
        np.testing.assert_array_equal(np.diag(S), 0.0)
        res = allocate_from_derivatives(der, clf.epsilon, cfg)
        assert res.q_star[0] >= 0
        if res.branch is Branch.NO_INPUT:
            continue
        # zero diagonal and zero trace force a negative eigenvalue unless S vanishes
        if np.any(S):
            assert res.lambda_min < 0
        q = res.q_star
        assert der.vdot(-q, res.T_star) == der.vdot(q, res.T_star)
        if not res.cap_active:
            need = der.LfV + clf.epsilon * der.V
            assert abs(charge_decrease_check(res, der, cfg, clf.epsilon)) <= 1e-9 * abs(need)


def test_kkt_consistency_on_applicable_states(rng):
    reports = []
    while len(reports) < 100:
        model, des, clf, err = random_problem(rng)
        cfg = AllocatorConfig(eta=float(rng.uniform(0.05, 0.95)), q_max=1e3)
        der = evaluate(clf, model, des, err)
        res = allocate_from_derivatives(der, clf.epsilon, cfg)
        rep = kkt_consistency(der, res, cfg, clf.epsilon)
        if rep.applicable:
            reports.append(rep)
            assert rep.passed, rep
            assert rep.mu == pytest.approx(-1.0 / res.lambda_min)
            assert rep.gamma2 > 0
    assert max(r.thrust_rel_error for r in reports) <= 1e-8


def test_kkt_not_applicable_cases(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    der = evaluate(square_P_clf, square_model, square_desired, err)
    for cfg, why in [
        (AllocatorConfig(eta=0.0), "branch"),
        (AllocatorConfig(eta=1.0, q_max=10.0), "eta"),
        (AllocatorConfig(eta=0.5, q_max=1e-6), "cap"),
    ]:
        res = allocate_from_derivatives(der, 0.01, cfg)
        rep = kkt_consistency(der, res, cfg, 0.01)
        assert not rep.applicable and why in rep.reason


def test_eta_monotonicity(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    prev_q, prev_T = -1.0, np.inf
    for eta in np.linspace(0, 1, 21):
        res = allocate(square_P_clf, square_model, square_desired, err, AllocatorConfig(eta=float(eta), q_max=10.0))
        nq, nT = np.linalg.norm(res.q_star), np.linalg.norm(res.T_star)
        assert nq >= prev_q and nT <= prev_T * (1 + 1e-12)
        prev_q, prev_T = nq, nT


def test_non_finite_state_rejected(square_P_clf, square_model, square_desired):
    Xi = np.zeros(12)
    Xi[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        allocate(square_P_clf, square_model, square_desired, Xi, AllocatorConfig(eta=0.5))


def test_config_validation():
    with pytest.raises(ValueError, match="eta"):
        AllocatorConfig(eta=1.5)
    with pytest.raises(ValueError, match="q_max"):
        AllocatorConfig(eta=0.5, q_max=0.0)
    with pytest.raises(ValueError, match="q_max"):
        AllocatorConfig(eta=0.5, q_max=math.inf)


def test_deterministic(square_P_clf, square_model, square_desired, square_initial):
    err = relative_from_absolute(square_initial, square_desired)
    cfg = AllocatorConfig(eta=0.7)
    a = allocate(square_P_clf, square_model, square_desired, err, cfg)
    b = allocate(square_P_clf, square_model, square_desired, err, cfg)
    assert a.q_star.tobytes() == b.q_star.tobytes() and a.T_star.tobytes() == b.T_star.tobytes()

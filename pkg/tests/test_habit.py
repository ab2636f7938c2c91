import warnings

import numpy as np
import pytest
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from twinforge import habit, lin3, twin
from twinforge.errors import DegenerateF, InputError, MiddleEigenvalueNotOne
from twinforge.report import dumps


def lsq_habit(U1, guess_n, seed=0):
    """Oracle: least squares in (rotation vector, a, n) for R U1 = 1 + a⊗n, |n| = 1."""
    rng = np.random.default_rng(seed)

    def res(p):
        R = Rotation.from_rotvec(p[:3]).as_matrix()
        a, n = p[3:6], p[6:9]
        return np.concatenate([(R @ U1 - np.eye(3) - np.outer(a, n)).ravel(), [n @ n - 1.0]])

    p0 = np.concatenate([0.01 * rng.normal(size=3), np.zeros(3), guess_n])
    sol = least_squares(res, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return np.outer(sol.x[3:6], sol.x[6:9]), float(np.abs(sol.fun).max())


def test_compound_pair_lambda0(compound):
    U1, _, res = compound
    s = res.systems[0]
    sols = habit.solve_habit(U1, s.b, s.m, 0.0)
    assert len(sols) == 2
    for h in sols:
        assert h.residual <= 1e-9
        assert lin3.is_rotation(h.R)
        assert lin3.norm(h.R @ U1 - np.eye(3) - np.outer(h.a, h.n)) <= 1e-9
        oracle, fit = lsq_habit(U1, h.n)
        assert fit <= 1e-12
        assert lin3.norm(oracle - h.shear()) <= 1e-8


def test_compound_pair_frozen(compound):
    U1, _, res = compound
    sols = habit.solve_habit(U1, res.systems[0].b, res.systems[0].m, 0.0)
    # n ∝ -sqrt(1 - λ1) e1' ± sqrt(λ3 - 1) e3' in the eigenframe of U1ᵀU1
    np.testing.assert_allclose(sols[0].n, [0.02500782105753178, -0.9996872555384282, 0.0], atol=1e-13)
    np.testing.assert_allclose(sols[1].n, [0.9996872555384281, -0.02500782105753178, 0.0], atol=1e-13)


def test_middle_eigenvalue_examples(compound):
    U1, _, res = compound
    s = res.systems[0]
    assert habit.middle_eigenvalue(U1, s.b, s.m, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert habit.middle_eigenvalue(U1, s.b, s.m, 0.5) == pytest.approx(1.0, abs=1e-10)
    assert habit.middle_eigenvalue(np.diag([0.9, 1.05, 1.2]), np.zeros(3), np.zeros(3), 0.0) == pytest.approx(1.05)


def test_unsolvable_carries_deviation():
    with pytest.raises(MiddleEigenvalueNotOne) as err:
        habit.solve_habit(np.diag([0.9, 1.05, 1.1]), np.zeros(3), np.zeros(3), 0.0)
    assert err.value.deviation == pytest.approx(0.05, abs=1e-12)


def test_rank_one_from_identity_exact():
    U = np.eye(3) + 0.1 * np.outer([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    sols = habit.rank_one_from_identity(U)
    exact = [h for h in sols if lin3.norm(h.R - np.eye(3)) <= 1e-12]
    assert len(exact) == 1
    np.testing.assert_allclose(exact[0].a, [0.1, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(exact[0].n, [0.0, 1.0, 0.0], atol=1e-15)
    assert exact[0].residual <= 1e-15


def test_degenerate_F():
    with pytest.raises(DegenerateF):
        habit.middle_eigenvalue(np.eye(3), np.array([-2.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), 1.0)


def test_scan_cc_pair(compound):
    U1, _, res = compound
    s = res.systems[0]
    rows = habit.lambda_scan(U1, s.b, s.m, 21)
    assert len(rows) == 21
    assert all(r.solvable for r in rows)
    assert max(r.best_residual for r in rows) <= 1e-7
    np.testing.assert_allclose([r.lam for r in rows], np.linspace(0, 1, 21))


def test_scan_cc1_violator():
    U1 = np.diag([0.9, 1.02, 1.1])
    s, _ = twin.twin_solutions(U1, lin3.unit([1.0, 1.0, 0.0]))
    rows = habit.lambda_scan(U1, s.b, s.m, 5)
    assert not rows[0].solvable
    assert abs(rows[0].sigma_mid - 1.0) == pytest.approx(0.02, abs=1e-9)


def test_scan_endpoints(compound):
    U1, _, res = compound
    rows = habit.lambda_scan(U1, res.systems[0].b, res.systems[0].m, 2)
    assert [r.lam for r in rows] == [0.0, 1.0]
    with pytest.raises(InputError):
        habit.lambda_scan(U1, res.systems[0].b, res.systems[0].m, 1)


def test_scan_threads_agree(compound, monkeypatch):
    U1, _, res = compound
    s = res.systems[1]
    serial = habit.lambda_scan(U1, s.b, s.m, 11)
    monkeypatch.setenv("TWINFORGE_THREADS", "4")
    threaded = habit.lambda_scan(U1, s.b, s.m, 11)
    assert dumps(serial) == dumps(threaded)


def test_solvability_criterion_random():
    rng = np.random.default_rng(7)
    agree = 0
    for k in range(500):
        lo, hi = rng.uniform(0.8, 0.99), rng.uniform(1.01, 1.2)
        mid = 1.0 if k % 2 == 0 else rng.uniform(0.9, 1.1)
        Q = lin3.random_rotation(rng)
        U = (Q * np.array([lo, mid, hi])) @ Q.T
        sig = habit.middle_eigenvalue(U, np.zeros(3), np.zeros(3), 0.0)
        try:
            sols = habit.solve_habit(U, np.zeros(3), np.zeros(3), 0.0)
        except MiddleEigenvalueNotOne:
            sols = []
        agree += bool(sols) == (abs(sig - 1.0) <= 1e-8)
        for h in sols:
            assert h.residual <= 1e-9
            assert len(sols) in (1, 2)
    assert agree == 500


def test_at_most_two_solutions_per_lambda(super_I):
    U1, _, s = super_I
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for lam in np.linspace(0, 1, 7):
            assert 1 <= len(habit.solve_habit(U1, s.b, s.m, lam)) <= 2

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from twinforge import lin3
from twinforge.errors import InputError, NonPositiveDeterminant, NotSymmetric

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
mats = arrays(np.float64, (3, 3), elements=finite)
vecs = arrays(np.float64, (3,), elements=finite)


def test_as_mat3_reads_row_major():
    assert lin3.as_mat3(range(9))[0, 2] == 2.0


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), [1.0] * 8, [[np.nan] * 3] * 3])
def test_as_mat3_rejects(bad):
    with pytest.raises(InputError):
        lin3.as_mat3(bad)


@given(mats)
def test_cofactor_identity(M):
    np.testing.assert_allclose(M @ lin3.cofactor(M).T, lin3.det(M) * np.eye(3), atol=1e-10)


@given(vecs, vecs)
def test_rank_one_has_zero_cofactor(a, n):
    assert np.abs(lin3.cofactor(np.outer(a, n))).max() <= 1e-12


@given(mats)
def test_det_matches_numpy(M):
    assert lin3.det(M) == pytest.approx(np.linalg.det(M), abs=1e-11)


def test_eigen_sym_orders_and_signs():
    w, V = lin3.eigen_sym(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])
    assert np.all(V.max(axis=0) > 0)


def test_eigen_sym_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        lin3.eigen_sym(np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def test_polar_reconstructs(rng):
    for _ in range(20):
        R = lin3.random_rotation(rng)
        U = lin3.random_spd(rng)
        R2, U2 = lin3.polar(R @ U)
        np.testing.assert_allclose(R2, R, atol=1e-12)
        np.testing.assert_allclose(U2, U, atol=1e-12)


def test_polar_needs_positive_det():
    with pytest.raises(NonPositiveDeterminant):
        lin3.polar(np.diag([1.0, 1.0, -1.0]))


def test_sym_sqrt():
    C = np.array([[2.0, 0.5, 0.0], [0.5, 1.5, 0.1], [0.0, 0.1, 1.0]])
    S = lin3.sym_sqrt(C)
    np.testing.assert_allclose(S @ S, C, atol=1e-14)


@given(vecs, vecs)
def test_rank_one_fit_recovers(a, n):
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(n) < 1e-3:
        return
    pair, dev = lin3.rank_one_fit(np.outer(a, n))
    assert dev <= 1e-12
    assert np.linalg.norm(pair.n) == pytest.approx(1.0)
    np.testing.assert_allclose(pair.matrix(), np.outer(a, n), atol=1e-12)


def test_rank_one_fit_zero_matrix():
    pair, dev = lin3.rank_one_fit(np.zeros((3, 3)))
    np.testing.assert_array_equal(pair.n, [1.0, 0.0, 0.0])
    assert dev == 0.0 and not pair.a.any()


@given(vecs, vecs)
def test_rotation_taking(u, v):
    if np.linalg.norm(u) < 1e-3 or np.linalg.norm(v) < 1e-3:
        return
    R = lin3.rotation_taking(u, v)
    assert lin3.is_rotation(R)
    np.testing.assert_allclose(R @ lin3.unit(u), lin3.unit(v), atol=1e-12)


def test_rotation_taking_antiparallel():
    R = lin3.rotation_taking([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], atol=1e-15)


def test_half_turn():
    e = lin3.unit([1.0, 2.0, 2.0])
    Q = lin3.half_turn(e)
    assert lin3.is_rotation(Q)
    np.testing.assert_allclose(Q @ e, e)
    np.testing.assert_allclose(Q @ Q, np.eye(3), atol=1e-15)


def test_unit_zero():
    with pytest.raises(InputError):
        lin3.unit(np.zeros(3))

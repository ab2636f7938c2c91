import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinforge import cofactor, lin3, twin
from twinforge.errors import CofactorNotSatisfied, NoSharedNormal, NoSharedShearVector, NotATwinSolution

# 3.02 - 0.9801 - 404/10201 - 2, in exact arithmetic
CC3_COMPOUND = 3.0199 / 10201.0


def direct_cc(U1, b, m):
    """Independent evaluation of the three conditions with plain numpy."""
    U2 = U1 @ U1
    C = U2 - np.eye(3)
    cof = np.linalg.det(C) * np.linalg.inv(C).T if abs(np.linalg.det(C)) > 1e-14 else lin3.cofactor(C)
    w = np.linalg.eigvalsh(U1)
    return abs(w[1] - 1.0), float(b @ U1 @ cof @ m), float(np.trace(U2) - np.linalg.det(U2) - 0.25 * (b @ b) * (m @ m) - 2.0)


def test_compound_pair_conditions(compound):
    U1, _, res = compound
    for s in res.systems:
        r = cofactor.check_cofactor(U1, s.b, s.m)
        assert r.cc1_residual <= 1e-12
        assert abs(r.cc2_value) <= 1e-12
        assert r.cc3_value == pytest.approx(CC3_COMPOUND, abs=1e-6)
        assert r.cc3_value == pytest.approx(CC3_COMPOUND, rel=1e-12)
        assert r.satisfied


def test_cofactor_of_compound_matrix(compound):
    U1, _, _ = compound
    np.testing.assert_allclose(lin3.cofactor(U1 @ U1 - np.eye(3)), np.diag([0.0, 0.0, -0.0399]), atol=1e-15)


def test_cc1_violator():
    U1 = np.diag([0.9, 1.02, 1.1])
    e = lin3.unit([1.0, 1.0, 0.0])
    s, _ = twin.twin_solutions(U1, e)
    r = cofactor.check_cofactor(U1, s.b, s.m)
    assert r.cc1_residual == pytest.approx(0.02, abs=1e-12)
    assert not r.cc1_ok and not r.satisfied


def test_zero_shear_is_not_a_twin(compound):
    U1, _, _ = compound
    with pytest.raises(NotATwinSolution):
        cofactor.check_cofactor(U1, np.zeros(3), [1.0, 0.0, 0.0])


def test_degeneracy_metric(compound):
    U1, _, res = compound
    assert cofactor.degeneracy_metric(U1, res.systems[0].b, res.systems[0].m) == 0.0
    U = np.diag([0.9, 1.001, 1.1])
    s, _ = twin.twin_solutions(U, lin3.unit([1.0, 0.0, 1.0]))
    assert cofactor.degeneracy_metric(U, s.b, s.m) == pytest.approx(1e-3, abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_report_matches_direct_evaluation(seed):
    rng = np.random.default_rng(seed)
    U1 = lin3.random_spd(rng)
    s, s2 = twin.twin_solutions(U1, lin3.unit(rng.normal(size=3)))
    for sol in (s, s2):
        r = cofactor.check_cofactor(U1, sol.b, sol.m)
        cc1, cc2, cc3 = direct_cc(U1, sol.b, sol.m)
        assert r.cc1_residual == pytest.approx(cc1, abs=1e-12)
        assert r.cc2_value == pytest.approx(cc2, abs=1e-10)
        assert r.cc3_value == pytest.approx(cc3, abs=1e-12)


def test_tolerance_relaxes(super_I):
    U1, _, s = super_I
    Up = U1 + 1e-5 * np.diag([0.0, 1.0, 0.0])
    sol, _ = twin.twin_solutions(Up, s.m if s.formula == "I" else s.b)
    assert not cofactor.check_cofactor(Up, sol.b, sol.m).satisfied
    assert cofactor.check_cofactor(Up, sol.b, sol.m, tol=1e-3).satisfied


def test_supercompatible_examples(super_I, super_II):
    for U1, _, s in (super_I, super_II):
        r = cofactor.check_cofactor(U1, s.b, s.m)
        assert r.satisfied
        assert r.cc3_value > 0
    with pytest.raises(ValueError):
        cofactor.supercompatible_example("III")


def test_typeI_family(super_I, family_I):
    U1, _, s = super_I
    assert len(cofactor.typeI_families(U1, s.b, s.m)) == 1
    assert cofactor.typeII_families(U1, s.b, s.m) == []
    assert family_I.residual(U1, s.b, s.m) <= 1e-8
    assert family_I.orthogonality() <= 1e-8
    for lam in np.linspace(0.0, 1.0, 11):
        G = family_I.gradient(lam)
        assert np.abs(lin3.cofactor(G - np.eye(3))).max() <= 1e-12
        assert lin3.norm(family_I.R0 @ (U1 + lam * np.outer(s.b, s.m)) - G) <= 1e-8


def test_typeI_family_frozen(family_I):
    # first-pass values, checked against the λ = 0 and λ = 1 habit solutions
    np.testing.assert_allclose(family_I.a0, [-0.16396, -0.06224, 0.09615], atol=5e-5)
    np.testing.assert_allclose(family_I.n0, [0.52150, 0.09651, 0.84778], atol=5e-5)
    mhat = family_I.mhat
    np.testing.assert_allclose(lin3.unit(mhat), -lin3.unit([1.0, 2.0, 3.0]), atol=1e-8)


def test_typeII_family(super_II, family_II):
    U1, _, s = super_II
    assert cofactor.typeI_families(U1, s.b, s.m) == []
    assert len(cofactor.typeII_families(U1, s.b, s.m)) == 1
    assert family_II.residual(U1, s.b, s.m) <= 1e-8


def test_wrong_family_type(super_I, super_II):
    U1, _, s = super_II
    with pytest.raises(NoSharedShearVector):
        cofactor.build_typeI_family(U1, s.b, s.m)
    U1, _, s = super_I
    with pytest.raises(NoSharedNormal):
        cofactor.build_typeII_family(U1, s.b, s.m)


def test_family_needs_cofactor_conditions():
    U1 = np.diag([0.9, 1.02, 1.1])
    s, _ = twin.twin_solutions(U1, lin3.unit([1.0, 1.0, 0.0]))
    with pytest.raises(CofactorNotSatisfied):
        cofactor.build_typeI_family(U1, s.b, s.m)


# The compound pair meets CC1 and CC2 exactly but CC3 > 0, and no pairing of
# its λ = 0 and λ = 1 habit solutions shares both the rotation and a (or n).
# These two cases are the documented expectation; they fail on purpose.

def test_compound_typeI_family_residual(compound):
    U1, _, res = compound
    s = res.systems[0]
    fam = cofactor.build_typeI_family(U1, s.b, s.m)
    assert fam.residual(U1, s.b, s.m) <= 1e-8


def test_compound_typeII_family_residual(compound):
    U1, _, res = compound
    s = res.systems[3]
    fam = cofactor.build_typeII_family(U1, s.b, s.m)
    assert fam.residual(U1, s.b, s.m) <= 1e-8

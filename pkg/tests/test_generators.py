import copy
import json

import numpy as np
import pytest

from twinforge import hull, lin3
from twinforge.errors import FieldTooSmall, ProfileOutOfRange
from twinforge.generators import GroundTruth, make_grid, mu1_gradient
from twinforge.mask import (
    closure_residual,
    gen_mu1_compound,
    gen_opposing_interfaces,
    gen_planar_laminate,
    gen_typeI_curved,
    gen_typeII_planar,
    mu1_epsilon,
    mu1_wells,
)
from twinforge.profiles import Profile
from twinforge.report import dumps


def max_cof(fld):
    M = fld.F - np.eye(3)
    return float(np.abs(np.stack([lin3.cofactor(m) for m in M.reshape(-1, 3, 3)])).max())


def test_type1_cells_are_rank_one(type1_fields):
    for gen in type1_fields.values():
        assert max_cof(gen.field) <= 1e-12
        assert closure_residual(gen.field) <= 1e-10


def test_type1_segment_deviation_is_first_order(type1_fields):
    d16 = type1_fields[16].truth.params["segment_deviation"]
    d32 = type1_fields[32].truth.params["segment_deviation"]
    assert d32 / d16 == pytest.approx(0.5, abs=0.1)


def test_type1_matches_family_at_cell_centres(family_I):
    # a constant λ profile leaves a single gradient: the family member at that λ
    gen = gen_typeI_curved(family_I, Profile.constant(0.3), (4, 4, 4))
    target = np.eye(3) + np.outer(family_I.a0, family_I.n0 + 0.3 * family_I.mhat)
    assert np.abs(gen.field.F - target).max() <= 1e-12


def test_type2_aligned_is_rank_one(family_II):
    gen = gen_typeII_planar(family_II, Profile.sine(), (12, 5, 5))
    assert max_cof(gen.field) <= 1e-12
    assert closure_residual(gen.field) <= 1e-10
    assert lin3.is_rotation(gen.truth.frame)
    np.testing.assert_allclose(gen.truth.p, [1.0, 0.0, 0.0], atol=1e-14)


def test_type2_lab_frame_is_not_exact(family_II):
    gen = gen_typeII_planar(family_II, Profile.sine(), (12, 12, 12), frame="lab")
    assert max_cof(gen.field) > 1e-8
    with pytest.raises(ValueError):
        gen_typeII_planar(family_II, Profile.sine(), (4, 4, 4), frame="sample")


def test_profile_out_of_range(family_I):
    with pytest.raises(ProfileOutOfRange):
        gen_typeI_curved(family_I, Profile.sine(0.5, 0.8, 1.0), (8, 8, 8))


def test_planar_laminate_columns():
    gen = gen_planar_laminate([0.0, 0.0, 1.0], Profile.step(0.0, 0.25, 0.5), (2, 2, 8), a_dir=(1.0, 0.0, 0.0))
    M = gen.field.F - np.eye(3)
    assert np.abs(M[..., :, :2]).max() == 0.0
    assert np.abs(M[..., 1:, :]).max() == 0.0
    assert set(np.round(M[0, 0, :, 0, 2], 12)) <= {0.0, 0.25, 0.125}


def test_mu1_epsilon_bound():
    eps = mu1_epsilon()
    D = 0.99
    assert eps == pytest.approx(np.sqrt(1.01 - D * D), abs=1e-9)
    wells = hull.CompoundWellSet.from_wells(mu1_wells())
    assert hull.hull_membership(mu1_gradient(0.99 * eps), wells).member
    assert not hull.hull_membership(mu1_gradient(1.05 * eps), wells).member


def test_mu1_generator():
    gen = gen_mu1_compound(Profile.sine(0.0, 0.1, 1.0), (16, 3, 3))
    assert gen.truth.params["hull_violations"] == 0
    assert gen.truth.params["distinct_gradients"] > 1
    assert max_cof(gen.field) <= 1e-12
    with pytest.raises(ProfileOutOfRange):
        gen_mu1_compound(Profile.sine(0.0, 0.5, 1.0), (8, 3, 3))


def test_opposing_interfaces_field():
    cx = gen_opposing_interfaces((8, 2, 2))
    assert np.all(cx.field.F == np.eye(3) + np.diag([1.0, 0.0, 0.0]))
    assert cx.plane == pytest.approx(0.5)
    np.testing.assert_array_equal(cx.a[:4, 0, 0, 0], 1.0)
    np.testing.assert_array_equal(cx.a[4:, 0, 0, 0], -1.0)
    assert np.all(np.einsum("...i,...j->...ij", cx.a, cx.n) == np.diag([1.0, 0.0, 0.0]))


def test_truth_round_trip(type1_fields):
    truth = type1_fields[16].truth
    back = GroundTruth.from_dict(json.loads(dumps(truth.to_dict())))
    x = np.random.default_rng(0).uniform(0, 1, size=(20, 3))
    np.testing.assert_allclose(back.z(x), truth.z(x), rtol=0, atol=1e-15)


def test_truth_level_of_inverts_image(type1_fields):
    truth = copy.deepcopy(type1_fields[16].truth)
    truth.set_range(-0.5, 2.0)
    G = np.linspace(0.0, 1.5, 7)
    pts = truth._image(G)
    np.testing.assert_allclose(truth.level_of(pts), G, atol=1e-9)


@pytest.mark.parametrize("dims", [(0, 4, 4), (4, 4), (-1, 2, 2)])
def test_bad_grid(dims):
    with pytest.raises(FieldTooSmall):
        make_grid(dims)


def test_grid_defaults():
    dims, spacing, origin = make_grid((4, 8, 2))
    assert dims == (4, 8, 2)
    np.testing.assert_allclose(spacing, [0.25, 0.125, 0.5])
    np.testing.assert_allclose(origin, 0.0)

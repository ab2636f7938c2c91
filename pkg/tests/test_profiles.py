import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from twinforge.profiles import Profile

PROFILES = [
    Profile.constant(0.3),
    Profile.step(0.2, 0.7, 0.4),
    Profile.sine(0.5, 0.3, 0.8, 0.6),
    Profile.tanh(0.1, 0.9, 0.3, 0.05),
    Profile.linear(0.2, 0.5),
]


@pytest.mark.parametrize("prof", PROFILES, ids=lambda p: p.kind)
@pytest.mark.parametrize("s", [-0.7, 0.0, 0.25, 0.4, 1.3])
def test_antiderivative_matches_quadrature(prof, s):
    points = [prof.params["at"]] if prof.kind == "step" else None
    lo, hi = sorted((0.0, s))
    val, _ = quad(prof, lo, hi, points=points if points and lo < points[0] < hi else None, epsabs=1e-13)
    assert float(prof.antiderivative(s)) == pytest.approx(val if s >= 0 else -val, abs=1e-10)


@pytest.mark.parametrize("prof", PROFILES, ids=lambda p: p.kind)
def test_antiderivative_vanishes_at_zero(prof):
    assert float(prof.antiderivative(0.0)) == 0.0


@pytest.mark.parametrize("prof", PROFILES, ids=lambda p: p.kind)
@given(lo=st.floats(-2, 2), width=st.floats(0, 3))
def test_bounds_enclose_samples(prof, lo, width):
    hi = lo + width
    fmin, fmax = prof.bounds(lo, hi)
    vals = prof(np.linspace(lo, hi, 257))
    assert vals.min() >= fmin - 1e-12
    assert vals.max() <= fmax + 1e-12


@pytest.mark.parametrize("prof", PROFILES, ids=lambda p: p.kind)
def test_dict_round_trip(prof):
    assert Profile.from_dict(prof.to_dict()) == prof


def test_defaults_fill_in():
    assert Profile("sine").params == {"mean": 0.5, "amplitude": 0.4, "wavelength": 1.0, "phase": 0.0}


@pytest.mark.parametrize(
    "kind, params",
    [("cosine", {}), ("sine", {"wavelength": 0.0}), ("tanh", {"width": -1.0}), ("step", {"height": 1.0})],
)
def test_rejects(kind, params):
    with pytest.raises(ValueError):
        Profile(kind, params)


def test_tanh_antiderivative_far_tail():
    p = Profile.tanh(0.0, 1.0, 0.0, 0.01)
    # log-cosh must not overflow; far right the antiderivative grows like s
    assert float(p.antiderivative(50.0)) == pytest.approx(50.0 - 0.005 * np.log(2.0), abs=1e-9)

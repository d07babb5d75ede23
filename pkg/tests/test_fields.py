import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanishdist.capacity import CapacityProfile
from vanishdist.fields import (
    AlongX,
    Bump,
    CapacityField,
    Gaussian,
    LatticeSum,
    LinearField,
    RadialTaper,
    Squeeze1Field,
    Squeeze2Field,
    ZeroField,
    capacity_lattice_field,
    cutoff,
    squeeze_profile,
)
from vanishdist.geometry import Lattice, index_order, round_to_lattice


def fd_jacobian(f, q, h):
    out = np.empty((q.shape[0], f.n_out, f.n))
    for j in range(f.n):
        e = np.zeros(f.n)
        e[j] = h
        out[:, :, j] = (f(q + e) - f(q - e)) / (2 * h)
    return out


FIELDS = [
    RadialTaper(np.zeros(2), 1.0),
    Bump(np.array([0.1, 0.1]), 0.5),
    Gaussian(np.zeros(2), 0.5),
    cutoff(2),
    CapacityField(CapacityProfile.from_radius(0.05, 2)),
    Squeeze1Field(3, (1,), 1.3, 2),
    Squeeze2Field(3, (0,), 4.0, math.exp(-3**0.25) / 6, 2),
    AlongX(capacity_lattice_field(CapacityProfile.from_radius(0.05, 2), Lattice(2, (1,)))),
]


@pytest.mark.parametrize("f", FIELDS, ids=lambda f: type(f).__name__)
def test_analytic_gradients_match_finite_differences(f):
    rng = np.random.default_rng(0)
    q = rng.uniform(-0.2, 1.2, (400, 2))
    J = f.grad(q)
    Jfd = fd_jacobian(f, q, 1e-7)
    # drop points within a step of a kink (sup-norm ramps, capacity radii)
    ok = np.all(np.abs(J - Jfd) < 1e-4 * (1 + np.abs(J)), axis=(1, 2))
    assert ok.mean() > 0.97


def test_zero_and_linear():
    assert np.all(ZeroField(2)(np.ones((3, 2))) == 0)
    L = LinearField.squeeze_toward([0.5], 2.0)
    assert np.allclose(L(np.array([0.3, 1.0])), [0.0, -1.0])


def test_squeeze_profile_is_linear_on_cell():
    w = np.random.default_rng(2).uniform(-0.5, 0.5, (100, 2))
    u, J = squeeze_profile(w)
    assert np.allclose(u, -w)
    assert np.allclose(J, -np.eye(2))
    # periodic
    assert np.allclose(squeeze_profile(w + 2.0)[0], u)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.floats(0, 1), st.floats(0, 1), st.sampled_from(index_order(1)), st.floats(0.1, 6))
def test_squeeze1_equals_linear_field_on_strip(k, x, y, I, eta):
    lat = Lattice(k, I)
    z = round_to_lattice(np.array([y]), lat)
    if abs(y - z[0]) > 1 / (2 * k):
        return
    f = Squeeze1Field(k, I, eta, 2)
    v = f(np.array([x, y]))
    assert v[0] == 0.0
    assert v[1] == pytest.approx(-eta * (y - z[0]), abs=1e-12)


def test_squeeze1_vanishes_outside_cutoff():
    f = Squeeze1Field(2, (0,), 1.0, 2)
    assert np.all(f(np.array([[1.3, 0.2], [-0.3, 0.4], [0.5, 1.26]])) == 0)


def test_squeeze2_shape_and_sup_bound():
    k, alpha = 2, 3.0
    w = math.exp(-2**0.25) / (2 * k)
    f = Squeeze2Field(k, (1,), alpha, w, 2)
    z = 0.5
    assert f(np.array([0.5, z + 0.3 * w]))[1] == pytest.approx(-alpha * 0.3 * w)
    assert np.all(f(np.array([[0.5, z + 2.01 * w], [0.5, z - 2.5 * w]])) == 0)
    y = np.linspace(0, 1, 20001)
    vals = np.abs(f(np.stack([np.full_like(y, 0.5), y], 1))[:, 1])
    assert vals.max() <= alpha * w * (1 + 1e-9)
    with pytest.raises(ValueError):
        Squeeze2Field(k, (1,), alpha, 0.3, 2)


def test_lattice_sum_and_along_x():
    cp = CapacityProfile.from_radius(0.01, 2)
    g = capacity_lattice_field(cp, Lattice(4, (0,)))
    assert isinstance(g, LatticeSum) and len(g.offsets) == 3
    # each profile is 1 on its own ball; neighbours within distance 1 add to it
    for z in (0.0, 0.5, 1.0):
        assert g(np.array([0.0, z]))[0] >= 1.0
    assert g(np.array([0.0, 0.5]))[0] == pytest.approx(1 + 2 * math.log(2) / math.log(100))
    v = AlongX(g)(np.array([[0.0, 0.25]]))
    assert v[0, 1] == 0.0 and v[0, 0] == pytest.approx(g(np.array([0.0, 0.25]))[0])
    with pytest.raises(ValueError):
        AlongX(Squeeze1Field(1, (0,), 1.0, 2))


def test_dilation_and_translation_helpers():
    f = Bump(np.zeros(2), 1.0)
    g = f.dilated(0.5).translated([1.0, 0.0])
    q = np.array([[1.1, 0.2]])
    assert np.allclose(g(q), f((q - [1.0, 0.0]) / 0.5))
    assert np.allclose(f.scaled(3.0)(q / 4), 3 * f(q / 4))

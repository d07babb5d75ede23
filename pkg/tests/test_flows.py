import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from vanishdist.fields import Bump, LinearField, RadialTaper
from vanishdist.flows import (
    ComposedMap,
    CostLedger,
    ExactRegionMap,
    IntegratedMap,
    IntegratorConfig,
    OutsideRegion,
    TimeField,
    ToleranceExceeded,
    compose,
    flow_point,
    flow_trajectory,
    identity_map,
    ledger_total,
    path_length,
)
from vanishdist.norms import NormEstimate, Sampler


def squeeze_tf(eta, z=0.5):
    return TimeField(LinearField.squeeze_toward([z], eta))


@pytest.mark.parametrize("eta", [1.0, 2.0, 5.0])
def test_linear_squeeze_matches_exponential(eta):
    y = np.linspace(0.0, 1.0, 101)
    q = np.stack([np.full_like(y, 0.3), y], 1)
    out = flow_point(squeeze_tf(eta), 0.0, 1.0, q)
    d0, d1 = y - 0.5, out[:, 1] - 0.5
    mask = np.abs(d0) > 0
    assert np.max(np.abs(d1[mask] / (d0[mask] * math.exp(-eta)) - 1)) < 1e-8
    assert np.all(out[:, 0] == 0.3)


def test_richardson_check():
    q = np.array([0.0, 1.0])
    cfg = IntegratorConfig(step_count=16, richardson_check=True, tol=1e-14)
    with pytest.raises(ToleranceExceeded):
        flow_point(squeeze_tf(5.0), 0.0, 1.0, q, cfg)
    loose = IntegratorConfig(step_count=16, richardson_check=True, tol=1e-3)
    coarse = flow_point(squeeze_tf(5.0), 0.0, 1.0, q, IntegratorConfig(step_count=16))
    assert np.array_equal(flow_point(squeeze_tf(5.0), 0.0, 1.0, q, loose), coarse)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step_count=8)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 2), st.floats(-1, 2))
def test_inverse_roundtrip(x, y):
    # rotation about (1/2, 1/2)
    tf = TimeField(LinearField(np.array([[0.0, -1.0], [1.0, 0.0]]), center=[0.5, 0.5]))
    fwd = IntegratedMap(tf, 0.0, 1.0)
    back = fwd.inverse()
    assert back.kind == "inverted"
    q = np.array([x, y])
    assert np.allclose(back(fwd(q)), q, atol=1e-9)


def test_rotation_oracle():
    tf = TimeField(LinearField(np.array([[0.0, -1.0], [1.0, 0.0]])))
    out = flow_point(tf, 0.0, 1.0, np.array([1.0, 0.0]))
    assert np.allclose(out, [math.cos(1), math.sin(1)], atol=1e-10)


def test_profile_time_action():
    # u_t = t * (-eta (y - z)) gives y - z scaled by exp(-eta / 2)
    tf = TimeField(LinearField.squeeze_toward([0.0], 2.0), "profile", profile=lambda t: t)
    out = flow_point(tf, 0.0, 1.0, np.array([0.0, 1.0]))
    assert out[1] == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_piecewise_concatenation():
    tf = TimeField.concat([squeeze_tf(1.0, 0.0), squeeze_tf(2.0, 0.0)])
    assert tf.duration == 2.0
    out = flow_point(tf, 0.0, 2.0, np.array([0.0, 1.0]))
    assert out[1] == pytest.approx(math.exp(-3.0), rel=1e-8)
    back = flow_point(tf, 2.0, 0.0, out)
    assert back[1] == pytest.approx(1.0, rel=1e-8)


def test_x_shift_follows_moving_plateau():
    from vanishdist.fields import AlongX
    g = AlongX(RadialTaper(np.zeros(2), 1.0))
    tf = TimeField(g, "x-shift")
    times, traj = flow_trajectory(tf, 0.0, 1.0, np.array([[0.0, 0.1]]), checkpoints=64)
    # the plateau moves with unit speed and carries the point along exactly
    assert np.allclose(traj[:, 0, 0], times, atol=1e-12)
    assert np.all(traj[:, 0, 1] == 0.1)


def test_composition_order_is_right_to_left():
    sq = IntegratedMap(squeeze_tf(1.0, 0.0))
    shift = IntegratedMap(TimeField(LinearField.constant([0.0, 1.0])))
    q = np.array([0.0, 1.0])
    assert np.allclose(compose(shift, sq)(q), [0.0, math.exp(-1) + 1])
    assert np.allclose(compose(sq, shift)(q), [0.0, 2 * math.exp(-1)])
    inv = compose(shift, sq).inverse()
    assert np.allclose(inv(compose(shift, sq)(q)), q, atol=1e-10)
    assert np.array_equal(identity_map()(q), q)


def test_exact_region_map():
    formula = lambda q: q * 2
    region = lambda q: q[:, 0] < 1
    m = ExactRegionMap(formula, region, lambda q: q / 2, lambda q: q[:, 0] < 2)
    assert np.allclose(m(np.array([0.5, 1.0])), [1.0, 2.0])
    with pytest.raises(OutsideRegion):
        m(np.array([3.0, 0.0]))
    assert np.allclose(m.inverse()(np.array([1.0, 2.0])), [0.5, 1.0])


def test_ledger_total_logsumexp():
    cl = CostLedger()
    assert ledger_total(cl) == -math.inf
    cl.add("a", 0.3)
    cl.add("b", -1.2, paired=True)
    assert ledger_total(cl) == pytest.approx(logsumexp([0.3, -1.2 + math.log(2)]))
    # huge negative entries stay finite in log space
    cl.add("c", -1e300)
    assert math.isfinite(ledger_total(cl))


def test_measured_total_requires_measurements():
    cl = CostLedger()
    cl.add("a", 0.0, NormEstimate(2.0, 0.1, "monte-carlo", 10), paired=True)
    assert ledger_total(cl, measured=True) == pytest.approx(math.log(4.0))
    cl.add("b", 0.0)
    with pytest.raises(ValueError):
        ledger_total(cl, measured=True)


def test_path_length_homogeneity(sp23):
    f = Bump(np.zeros(2), 0.7)
    quad = Sampler(method="quadrature", resolution=48)
    base = path_length(TimeField(f), sp23, "gn-bound-a", constants=(1.0, 1.0), sampler=quad)
    prof = path_length(TimeField(f, "profile", profile=lambda t: 3 * t * t), sp23, "gn-bound-a",
                       constants=(1.0, 1.0), sampler=quad)
    assert prof.value == pytest.approx(base.value, rel=1e-9)
    two = path_length(TimeField.concat([TimeField(f), TimeField(f)]), sp23, "gn-bound-a",
                      constants=(1.0, 1.0), sampler=quad)
    assert two.value == pytest.approx(2 * base.value)
    with pytest.raises(ValueError):
        path_length(TimeField(f), sp23, "gn-bound-a")

import math

import numpy as np
import pytest

from vanishdist.fields import Bump, Gaussian, RadialTaper, ZeroField
from vanishdist.norms import (
    NonConvergent,
    Sampler,
    SobolevParams,
    calibrate_constants,
    gagliardo_seminorm,
    gn_bound_a,
    gn_bound_b,
    gn_estimate,
    gradient_lp_norm,
    interpolation_product_a,
    lp_norm,
    sobolev_norm,
    sup_norm,
    w1p_norm,
)

SMALL = Sampler(n_samples=2 * 10**5, seed=11)


def test_sobolev_params():
    sp = SobolevParams(2, 3.0)
    assert sp.s == pytest.approx(2 / 3) and sp.m == 1 and sp.sp == 2.0
    with pytest.raises(ValueError):
        SobolevParams(2, 2.0)
    with pytest.raises(ValueError):
        SobolevParams(1, 3.0)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_gaussian_lp_norm_closed_form(p):
    sigma = 0.5
    f = Gaussian(np.zeros(2), sigma)
    exact = (2 * math.pi * sigma**2 / p) ** (1 / p)
    mc = lp_norm(f, p, sampler=SMALL)
    assert abs(mc.value - exact) < 4 * mc.stderr + 1e-3 * exact
    quad = lp_norm(f, p, sampler=Sampler(method="quadrature", resolution=64))
    assert quad.value == pytest.approx(exact, rel=1e-6)


def test_gaussian_gradient_norm_is_scale_free():
    # ||grad f||_2^2 = pi for every sigma in two dimensions
    for sigma in (1.0, 0.1):
        est = gradient_lp_norm(Gaussian(np.zeros(2), sigma), 2.0, sampler=Sampler(method="quadrature"))
        assert est.value**2 == pytest.approx(math.pi, rel=1e-5)


def test_gaussian_seminorm_oracle():
    # p=2, s=1/2, n=2: [f]^2 = int |h|^-3 2(A(0)-A(h)) dh with A the autocorrelation,
    # which integrates to 2 pi^(5/2) sigma
    sigma = 1.0
    exact = math.sqrt(2 * math.pi**2.5 * sigma)
    est = gagliardo_seminorm(Gaussian(np.zeros(2), sigma), SobolevParams(2, 3.0), SMALL, s=0.5, p=2.0)
    assert abs(est.value - exact) < 4 * est.stderr


def test_critical_seminorm_is_dilation_invariant(sp23):
    f = RadialTaper(np.zeros(2), 1.0)
    a = gagliardo_seminorm(f, sp23, SMALL)
    b = gagliardo_seminorm(f.dilated(0.25), sp23, SMALL.with_seed(12))
    assert abs(a.value - b.value) < 3 * math.hypot(a.stderr, b.stderr)


def test_subcritical_seminorm_scales(sp23):
    # with s p < n the seminorm picks up lam^((n - s p)/p)
    f = Gaussian(np.zeros(2), 0.5)
    s, p = 0.5, 2.0
    a = gagliardo_seminorm(f, sp23, SMALL, s=s, p=p)
    b = gagliardo_seminorm(f.dilated(4.0), sp23, SMALL.with_seed(13), s=s, p=p)
    assert b.value / a.value == pytest.approx(4.0 ** ((2 - s * p) / p), rel=0.03)


def test_seeded_estimates_are_reproducible(sp23):
    f = Bump(np.zeros(2), 1.0)
    assert gagliardo_seminorm(f, sp23, SMALL) == gagliardo_seminorm(f, sp23, SMALL)
    assert gagliardo_seminorm(f, sp23, SMALL) != gagliardo_seminorm(f, sp23, SMALL.with_seed(99))


def test_nonconvergent_raised_on_tiny_budget(sp23):
    f = RadialTaper(np.zeros(2), 1.0)
    with pytest.raises(NonConvergent):
        gagliardo_seminorm(f, sp23, Sampler(n_samples=50, seed=0, chunk=50, rel_cap=1e-4))


def test_zero_field_norms(sp23):
    z = ZeroField(2)
    assert lp_norm(z, 3.0).value == 0.0
    assert gagliardo_seminorm(z, sp23).value == 0.0


def test_sup_norm_of_bump_and_taper():
    assert sup_norm(Bump(np.zeros(2), 1.0)) == pytest.approx(1.0)
    assert sup_norm(RadialTaper(np.zeros(2), 1.0).scaled(2.5)) == pytest.approx(2.5)


def test_w1p_combines_terms():
    f = Gaussian(np.zeros(2), 0.5)
    quad = Sampler(method="quadrature")
    a, g, w = lp_norm(f, 2.0, sampler=quad), gradient_lp_norm(f, 2.0, sampler=quad), w1p_norm(f, 2.0, sampler=quad)
    assert w.value**2 == pytest.approx(a.value**2 + g.value**2, rel=1e-9)


@pytest.mark.parametrize("c", [0.1, 3.0])
def test_interpolation_bounds_are_homogeneous(sp23, c):
    f = Bump(np.zeros(2), 0.7)
    quad = Sampler(method="quadrature", resolution=48)
    assert gn_bound_a(f.scaled(c), sp23, 1.0, quad) == pytest.approx(c * gn_bound_a(f, sp23, 1.0, quad), rel=1e-9)
    assert gn_bound_b(f.scaled(c), sp23, 1.0, quad) == pytest.approx(c * gn_bound_b(f, sp23, 1.0, quad), rel=1e-6)


def test_gn_estimate_wraps_product(sp23):
    f = Bump(np.zeros(2), 0.7)
    est = gn_estimate(f, sp23, 2.0, "gn-bound-a", SMALL)
    assert est.value == pytest.approx(2.0 * interpolation_product_a(f, sp23, SMALL)[0])
    with pytest.raises(ValueError):
        gn_estimate(f, sp23, 2.0, "bogus", SMALL)
    with pytest.raises(ValueError):
        gn_bound_a(f, sp23, 0.0, SMALL)


def test_full_norm_dominates_seminorm(sp23):
    f = Bump(np.zeros(2), 1.0)
    assert sobolev_norm(f, sp23, SMALL).value > gagliardo_seminorm(f, sp23, SMALL).value


def test_calibration_is_bit_identical_for_equal_seeds(sp23):
    smp = Sampler(n_samples=5 * 10**4, seed=5)
    a, b = calibrate_constants(sp23, smp), calibrate_constants(sp23, smp)
    assert a.to_dict() == b.to_dict()
    assert a.C_a > 0 and a.C_b > 0 and len(a.evidence) == 3

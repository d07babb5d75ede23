# Critical fractional Sobolev norms by Monte Carlo
#
# With s = n/p the Gagliardo seminorm of f and of f(x/lam) agree.  This
# script estimates both for a smooth radial taper, checks a Gaussian against
# its closed form, and calibrates the two interpolation constants.

import math

import numpy as np

from vanishdist.fields import Gaussian, RadialTaper
from vanishdist.norms import Sampler, SobolevParams, calibrate_constants, gagliardo_seminorm, holdout_field
from vanishdist.norms import gn_bound_a, gn_bound_b

sp = SobolevParams(n=2, p=3.0)
print(f"n = {sp.n}, p = {sp.p}, s = {sp.s:.4f}")

# Scale invariance at the critical exponent.

taper = RadialTaper(np.zeros(2), 1.0)
for i, lam in enumerate([1.0, 0.5, 0.1, 0.01]):
    est = gagliardo_seminorm(taper.dilated(lam), sp, Sampler(n_samples=2 * 10**5, seed=i))
    print(f"lam = {lam:5.2f}: seminorm = {est.value:.4f} +- {est.stderr:.4f}")

# A check against a closed form: for p = 2, s = 1/2 in the plane the squared
# seminorm of a Gaussian of width sigma is 2 pi^(5/2) sigma.

g = Gaussian(np.zeros(2), 1.0)
est = gagliardo_seminorm(g, sp, Sampler(n_samples=2 * 10**5, seed=9), s=0.5, p=2.0)
print(f"Gaussian: MC {est.value:.4f} +- {est.stderr:.4f}, exact {math.sqrt(2 * math.pi**2.5):.4f}")

# Calibration pins the constants of the two interpolation inequalities, which
# then bound the norm of an unrelated bump.

cal = calibrate_constants(sp, Sampler(n_samples=2 * 10**5, seed=0))
print(f"C_a = {cal.C_a:.3f}, C_b = {cal.C_b:.3f}")
f = holdout_field(2)
smp = Sampler(n_samples=2 * 10**5, seed=1)
semi = gagliardo_seminorm(f, sp, smp)
print(f"holdout: seminorm {semi.value:.3f}, bound a {gn_bound_a(f, sp, cal.C_a, smp):.3f}, "
      f"bound b {gn_bound_b(f, sp, cal.C_b, smp):.3f}")

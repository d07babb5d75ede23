"""Radial log-cutoff profiles used to transport squeezed strips.

Everything is parametrised by ``log_r``, the natural log of the inner
radius, so profiles whose radius underflows a double remain usable for
cost accounting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CapacityProfile:
    """xi(x) = 1 on |x| <= r, log(1/|x|)/log(1/r) on r < |x| < 1, 0 beyond.

    ``r = sqrt(n) * lambda`` so that the cube [-lambda, lambda]^n sits
    inside the plateau.
    """

    k: int
    log_lambda: float
    n: int

    def __post_init__(self):
        if not self.log_lambda < 0:
            raise ValueError("log_lambda must be negative")
        if not self.log_r < 0:
            raise ValueError("inner radius sqrt(n)*lambda must be < 1")

    @classmethod
    def from_radius(cls, r: float, n: int, k: int = 0) -> "CapacityProfile":
        return cls(k=k, log_lambda=math.log(r) - 0.5 * math.log(n), n=n)

    @property
    def log_r(self) -> float:
        return 0.5 * math.log(self.n) + self.log_lambda

    @property
    def r(self) -> float:
        return math.exp(self.log_r)

    @property
    def log_inv_r(self) -> float:
        return -self.log_r


def capacity_eval(cp: CapacityProfile, x) -> np.ndarray:
    """Evaluate the profile at points ``x`` of shape (N, n) or (n,)."""
    x = np.asarray(x, dtype=float)
    rho = np.linalg.norm(np.atleast_2d(x), axis=-1)
    with np.errstate(divide="ignore"):
        logrho = np.log(rho)
    out = np.where(logrho <= cp.log_r, 1.0, -logrho / cp.log_inv_r)
    out = np.where(rho >= 1.0, 0.0, out)
    return out[0] if x.ndim == 1 else out


def capacity_grad(cp: CapacityProfile, x) -> np.ndarray:
    """Gradient -x / (|x|^2 log(1/r)) on the annulus, zero elsewhere."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho2 = np.einsum("ij,ij->i", x, x)
    rho = np.sqrt(rho2)
    with np.errstate(divide="ignore"):
        logrho = np.log(rho)
    ann = (logrho > cp.log_r) & (rho < 1.0)
    g = np.zeros_like(x)
    g[ann] = -x[ann] / (rho2[ann, None] * cp.log_inv_r)
    return g


def capacity_norm_bound(cp: CapacityProfile, sp, C: float) -> float:
    """Log of the bound ``C * log(1/r)^((1-n)/p)`` on the critical norm of xi.

    ``sp`` is a SobolevParams.  Only ``log_r`` enters, so the result stays
    finite when r itself underflows.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    return math.log(C) + ((1.0 - sp.n) / sp.p) * math.log(cp.log_inv_r)


def conjectured_log_rate(cp: CapacityProfile, p: float) -> float:
    """Log of log(1/lambda)^((1-p)/p), the expected sharp rate. Reported only."""
    return ((1.0 - p) / p) * math.log(-cp.log_lambda)


def gradient_norm_closed_form(r: float, n: int) -> float:
    """||d xi||_{L^n}^n = |S^{n-1}| * log(1/r)^(1-n)."""
    return sphere_area(n) * math.log(1.0 / r) ** (1 - n)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)

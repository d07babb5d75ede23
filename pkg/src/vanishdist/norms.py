"""Lebesgue, Sobolev and fractional Sobolev norm estimators.

Monte Carlo estimators draw from a mixture density built from the field's
sampling plan (a covering box plus optional radial log-uniform components
around singular points), so weights stay bounded for the capacity
profiles.  Samples are generated in fixed-size chunks, each from its own
spawned seed, and merged in chunk order: results depend only on the seed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .capacity import (
    CapacityProfile,
    capacity_eval,
    capacity_norm_bound,
    conjectured_log_rate,
    sphere_area,
)
from .fields import Bump, Field, RadialTaper
from .geometry import Box

METHODS = ("quadrature", "monte-carlo", "gn-bound-a", "gn-bound-b", "closed-form")


class BoxTooSmall(ValueError):
    pass


class NonConvergent(RuntimeError):
    pass


@dataclass(frozen=True)
class SobolevParams:
    """Critical exponents: s = n / p with p > n >= 2, and m = n - 1."""

    n: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if not self.p > self.n:
            raise ValueError("critical exponent needs p > n")

    @property
    def s(self) -> float:
        return self.n / self.p

    @property
    def m(self) -> int:
        return self.n - 1

    @property
    def sp(self) -> float:
        # exactly n, kept explicit for the W^{1,sp} bound
        return float(self.n)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    stderr: float
    method: str
    sample_count: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"norm value must be finite and >= 0, got {self.value}")

    @property
    def rel_stderr(self) -> float:
        return self.stderr / self.value if self.value > 0 else 0.0


@dataclass(frozen=True)
class Sampler:
    """Estimator configuration.

    ``method`` is "mc" or "quadrature"; quadrature uses ``resolution``
    cells per axis with a 4-point Gauss-Legendre rule in each cell.
    """

    n_samples: int = 10**6
    seed: int = 0
    method: str = "mc"
    resolution: int = 64
    chunk: int = 2**16
    workers: int = 1
    rel_cap: float = 0.05

    def with_seed(self, seed: int) -> "Sampler":
        return Sampler(self.n_samples, seed, self.method, self.resolution,
                       self.chunk, self.workers, self.rel_cap)


DEFAULT_SAMPLER = Sampler()


# -- sampling machinery ------------------------------------------------------

@dataclass
class _Mixture:
    comps: list
    weights: np.ndarray
    n: int

    def draw(self, rng: np.random.Generator, N: int) -> np.ndarray:
        which = rng.choice(len(self.comps), size=N, p=self.weights)
        x = np.empty((N, self.n))
        for c, comp in enumerate(self.comps):
            sel = which == c
            cnt = int(sel.sum())
            if cnt == 0:
                continue
            if comp[0] == "box":
                b = comp[1]
                x[sel] = rng.uniform(b.lo, b.hi, size=(cnt, self.n))
            else:
                _, center, r_in, r_out = comp
                rho = r_in * (r_out / r_in) ** rng.uniform(size=cnt)
                x[sel] = center + rho[:, None] * _directions(rng, cnt, self.n)
        return x

    def density(self, x: np.ndarray) -> np.ndarray:
        q = np.zeros(x.shape[0])
        for w, comp in zip(self.weights, self.comps):
            if comp[0] == "box":
                b = comp[1]
                q += w * b.contains(x) / b.volume
            else:
                _, center, r_in, r_out = comp
                rho = np.linalg.norm(x - center, axis=1)
                ok = (rho >= r_in) & (rho <= r_out)
                dens = np.zeros_like(rho)
                dens[ok] = 1.0 / (sphere_area(self.n) * rho[ok] ** self.n * math.log(r_out / r_in))
                q += w * dens
        return q


def _directions(rng: np.random.Generator, N: int, n: int) -> np.ndarray:
    v = rng.standard_normal((N, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _mixture(f: Field, box: Box) -> _Mixture:
    comps = [("box", box)]
    for c in f.sampling_plan():
        if c[0] == "box":
            b = c[1].intersect(box)
            if b is not None and b.volume > 0 and b != box:
                comps.append(("box", b))
        elif c[3] > c[2] > 0:
            comps.append(c)
    if len(comps) == 1:
        w = np.array([1.0])
    else:
        w = np.full(len(comps), 0.5 / (len(comps) - 1))
        w[0] = 0.5
    return _Mixture(comps, w, f.n)


def _check_box(f: Field, box: Box | None) -> Box:
    box = f.support if box is None else box
    if not box.is_finite:
        raise BoxTooSmall("integration box must be finite")
    if not box.contains_box(f.support):
        raise BoxTooSmall(f"support {f.support} is not inside box {box}")
    return box


def _run_chunks(kernel: Callable[[np.random.Generator, int], np.ndarray], sampler: Sampler):
    """Mean and standard error of i.i.d. chunk outputs, merged in chunk order."""
    n_chunks = max(1, math.ceil(sampler.n_samples / sampler.chunk))
    sizes = [sampler.chunk] * (n_chunks - 1) + [sampler.n_samples - sampler.chunk * (n_chunks - 1)]
    seeds = np.random.SeedSequence(sampler.seed).spawn(n_chunks)

    def one(i):
        vals = kernel(np.random.default_rng(seeds[i]), sizes[i])
        return vals.size, float(np.mean(vals)), float(np.sum((vals - np.mean(vals)) ** 2))

    if sampler.workers > 1:
        with ThreadPoolExecutor(sampler.workers) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(i) for i in range(n_chunks)]
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = count + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta**2 * count * nb / tot
        count = tot
    var = m2 / max(count - 1, 1)
    return mean, math.sqrt(var / count), count


def _root(mean: float, se: float, p: float):
    """(I^(1/p), delta-method stderr)."""
    if mean <= 0:
        return 0.0, 0.0
    val = mean ** (1.0 / p)
    return val, val * se / (p * mean)


def _quadrature_nodes(box: Box, resolution: int):
    g, gw = np.polynomial.legendre.leggauss(4)
    axes, wts = [], []
    for a, b in zip(box.lo, box.hi):
        edges = np.linspace(a, b, resolution + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        axes.append((mid[:, None] + half[:, None] * g[None]).ravel())
        wts.append((half[:, None] * gw[None]).ravel())
    X = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    W = np.prod(np.stack([m.ravel() for m in np.meshgrid(*wts, indexing="ij")], axis=1), axis=1)
    return X, W


def _integrate(f: Field, integrand, box: Box, sampler: Sampler):
    """Integral of integrand(f, x) over the box. Returns (mean, stderr, count, method)."""
    if box.volume == 0:
        return 0.0, 0.0, 0, "closed-form"
    if sampler.method == "quadrature":
        X, W = _quadrature_nodes(box, sampler.resolution)
        total = 0.0
        for i in range(0, X.shape[0], 2**18):
            total += float(np.sum(integrand(X[i:i + 2**18]) * W[i:i + 2**18]))
        return total, 0.0, X.shape[0], "quadrature"
    if sampler.method != "mc":
        raise ValueError(f"unknown sampler method {sampler.method}")
    mix = _mixture(f, box)

    def kernel(rng, N):
        x = mix.draw(rng, N)
        q = mix.density(x)
        return np.where(q > 0, integrand(x) / np.where(q > 0, q, 1.0), 0.0)

    mean, se, count = _run_chunks(kernel, sampler)
    return mean, se, count, "monte-carlo"


def _abs(v):
    return np.sqrt(np.sum(np.reshape(v, (v.shape[0], -1)) ** 2, axis=1))


# -- norms -------------------------------------------------------------------

def lp_norm(f: Field, p: float, box: Box | None = None, sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """(int |f|^p)^(1/p), |.| the Euclidean norm of the field value."""
    if p < 1:
        raise ValueError("p must be >= 1")
    box = _check_box(f, box)
    mean, se, count, method = _integrate(f, lambda x: _abs(f(x)) ** p, box, sampler)
    val, err = _root(mean, se, p)
    return NormEstimate(val, err, method, count)


def gradient_lp_norm(f: Field, p: float, box: Box | None = None,
                     sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """||df||_{L^p}, with |df| the Frobenius norm of the Jacobian."""
    box = _check_box(f, box)
    mean, se, count, method = _integrate(f, lambda x: _abs(f.grad(x)) ** p, box, sampler)
    val, err = _root(mean, se, p)
    return NormEstimate(val, err, method, count)


def w1p_norm(f: Field, p: float, box: Box | None = None, sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """(||f||_p^p + ||df||_p^p)^(1/p), both terms from the same samples."""
    if p < 1:
        raise ValueError("p must be >= 1")
    box = _check_box(f, box)

    def integrand(x):
        return _abs(f(x)) ** p + _abs(f.grad(x)) ** p

    mean, se, count, method = _integrate(f, integrand, box, sampler)
    val, err = _root(mean, se, p)
    return NormEstimate(val, err, method, count)


def sup_norm(f: Field, box: Box | None = None, grid: int | None = None) -> float:
    """Max of |f| over a grid, the field's hotspots, and a refined patch.

    A lower bound on the true supremum; tight for fields whose maximum is
    attained on a plateau or at a listed hotspot.
    """
    box = _check_box(f, box)
    n = f.n
    if grid is None:
        per_axis = max(np.subtract(box.hi, box.lo)) / f.length_scale
        grid = int(min(max(per_axis * 2 + 1, 33), round(2e6 ** (1.0 / n))))
    grid += 1 - grid % 2
    axes = [np.linspace(a, b, grid) for a, b in zip(box.lo, box.hi)]
    X = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    cands = [X, f.hotspots()]
    vals = _abs(f(X))
    best = X[int(np.argmax(vals))]
    cell = np.subtract(box.hi, box.lo) / (grid - 1)
    local = [np.linspace(c - h, c + h, 21) for c, h in zip(best, cell)]
    cands.append(np.stack([m.ravel() for m in np.meshgrid(*local, indexing="ij")], axis=1))
    return float(max(np.max(_abs(f(c))) if len(c) else 0.0 for c in cands))


def gagliardo_seminorm(f: Field, sp: SobolevParams, sampler: Sampler = DEFAULT_SAMPLER,
                       s: float | None = None, p: float | None = None) -> NormEstimate:
    """Monte Carlo estimate of (int int |f(x)-f(y)|^p / |x-y|^(n+sp))^(1/p).

    x is drawn from the field's mixture over its support box B, the offset
    h = y - x radially log-uniform on [r_min, R_max] with r_min = 1e-8 diam(B)
    and R_max = 2 diam(B).  Pairs with y outside B are counted twice (they
    stand in for the mirror pair with x outside B), offsets beyond R_max are
    integrated exactly, and offsets below r_min use the linearisation
    f(x+h) - f(x) ~ df(x) h.  ``s`` and ``p`` override the critical pair.
    """
    s = sp.s if s is None else s
    p = sp.p if p is None else p
    n = f.n
    B = _check_box(f, None)
    diam = B.diam
    if diam == 0:
        return NormEstimate(0.0, 0.0, "monte-carlo", 0)
    r_min, r_max = 1e-8 * diam, 2.0 * diam
    log_span = math.log(r_max / r_min)
    sigma = sphere_area(n)
    mix = _mixture(f, B)

    def kernel(rng, N):
        x = mix.draw(rng, N)
        q = mix.density(x)
        inB = B.contains(x) & (q > 0)
        x, q = x[inB], q[inB]
        out = np.zeros(N)
        if x.shape[0] == 0:
            return out
        omega = _directions(rng, x.shape[0], n)
        rho = r_min * np.exp(log_span * rng.uniform(size=x.shape[0]))
        y = x + rho[:, None] * omega
        fx = f(x)
        diff = _abs(fx - f(y)) ** p
        factor = 1.0 + (~B.contains(y))
        body = factor * diff * sigma * log_span / rho ** (s * p)
        tail = 2.0 * _abs(fx) ** p * sigma * r_max ** (-s * p) / (s * p)
        lin = _abs(np.einsum("nij,nj->ni", f.grad(x), omega)) ** p
        near = lin * sigma * r_min ** (p - s * p) / (p - s * p)
        out[np.flatnonzero(inB)] = (body + tail + near) / q
        return out

    mean, se, count = _run_chunks(kernel, sampler)
    val, err = _root(mean, se, p)
    est = NormEstimate(val, err, "monte-carlo", count)
    if val > 0 and est.rel_stderr > sampler.rel_cap:
        raise NonConvergent(f"relative stderr {est.rel_stderr:.3g} exceeds cap {sampler.rel_cap}")
    return est


def sobolev_norm(f: Field, sp: SobolevParams, sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """Full W^{s,p} norm (||f||_p^p + seminorm^p)^(1/p), Monte Carlo."""
    a = lp_norm(f, sp.p, sampler=sampler.with_seed(sampler.seed + 7919))
    b = gagliardo_seminorm(f, sp, sampler)
    return _combine_p(a, b, sp.p)


def _combine_p(a: NormEstimate, b: NormEstimate, p: float) -> NormEstimate:
    tot = a.value**p + b.value**p
    if tot == 0:
        return NormEstimate(0.0, 0.0, "monte-carlo", a.sample_count + b.sample_count)
    val = tot ** (1.0 / p)
    # d val / d a = (a/val)^(p-1)
    err = math.hypot((a.value / val) ** (p - 1) * a.stderr, (b.value / val) ** (p - 1) * b.stderr)
    return NormEstimate(val, err, "monte-carlo", a.sample_count + b.sample_count)


# -- interpolation bounds ----------------------------------------------------

def _product(factors):
    """Value and relative error of prod a_i^e_i from (NormEstimate|float, exponent) pairs."""
    val, rel2 = 1.0, 0.0
    for est, e in factors:
        v = est.value if isinstance(est, NormEstimate) else float(est)
        se = est.stderr if isinstance(est, NormEstimate) else 0.0
        if v == 0:
            return 0.0, 0.0
        val *= v**e
        rel2 += (e * se / v) ** 2
    return val, math.sqrt(rel2)


def interpolation_product_a(f: Field, sp: SobolevParams, sampler: Sampler = DEFAULT_SAMPLER):
    """||f||_{L^p}^(1-s) ||f||_{1,p}^s as (value, relative stderr)."""
    a = lp_norm(f, sp.p, sampler=sampler)
    b = w1p_norm(f, sp.p, sampler=sampler.with_seed(sampler.seed + 1))
    return _product([(a, 1 - sp.s), (b, sp.s)])


def interpolation_product_b(f: Field, sp: SobolevParams, sampler: Sampler = DEFAULT_SAMPLER):
    """||f||_{1,sp}^s ||f||_inf^(1-s) as (value, relative stderr)."""
    b = w1p_norm(f, sp.sp, sampler=sampler)
    sup = sup_norm(f)
    return _product([(b, sp.s), (sup, 1 - sp.s)])


def gn_bound_a(f: Field, sp: SobolevParams, C: float, sampler: Sampler = DEFAULT_SAMPLER) -> float:
    """C ||f||_{L^p}^(1-s) ||f||_{1,p}^s."""
    if C <= 0:
        raise ValueError("C must be positive")
    return C * interpolation_product_a(f, sp, sampler)[0]


def gn_bound_b(f: Field, sp: SobolevParams, C: float, sampler: Sampler = DEFAULT_SAMPLER) -> float:
    """C ||f||_{W^{1,sp}}^s ||f||_inf^(1-s); needs sp > 1."""
    if C <= 0:
        raise ValueError("C must be positive")
    if not sp.sp > 1:
        raise ValueError("second interpolation bound needs sp > 1")
    return C * interpolation_product_b(f, sp, sampler)[0]


def gn_estimate(f: Field, sp: SobolevParams, C: float, which: str,
                sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """Interpolation bound wrapped as a NormEstimate with propagated stderr."""
    if which == "gn-bound-a":
        val, rel = interpolation_product_a(f, sp, sampler)
    elif which == "gn-bound-b":
        val, rel = interpolation_product_b(f, sp, sampler)
    else:
        raise ValueError(f"unknown bound {which}")
    return NormEstimate(C * val, C * val * rel, which, sampler.n_samples)


# -- calibration -------------------------------------------------------------

CALIBRATION_SCALES = (1.0, 0.25, 0.0625)


def calibration_family(n: int) -> list[Field]:
    return [RadialTaper(np.zeros(n), scale) for scale in CALIBRATION_SCALES]


def holdout_field(n: int) -> Field:
    """A smooth bump unrelated to the calibration tapers."""
    return Bump(np.full(n, 0.1), scale=0.5)


@dataclass
class Calibration:
    n: int
    p: float
    C_a: float
    C_b: float
    seed: int
    n_samples: int
    evidence: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "C_a": self.C_a, "C_b": self.C_b,
                "seed": self.seed, "n_samples": self.n_samples, "evidence": self.evidence}


def calibrate_constants(sp: SobolevParams, sampler: Sampler = DEFAULT_SAMPLER,
                        safety: float = 1.1) -> Calibration:
    """C := safety * max over the taper family of (MC W^{s,p} norm) / (interpolation product)."""
    rows = []
    for i, (scale, f) in enumerate(zip(CALIBRATION_SCALES, calibration_family(sp.n))):
        smp = sampler.with_seed(sampler.seed + 101 * i)
        norm = sobolev_norm(f, sp, smp)
        semi = gagliardo_seminorm(f, sp, smp)
        pa, _ = interpolation_product_a(f, sp, smp)
        pb, _ = interpolation_product_b(f, sp, smp)
        rows.append({"scale": scale, "norm": norm.value, "norm_stderr": norm.stderr,
                     "seminorm": semi.value, "seminorm_stderr": semi.stderr,
                     "product_a": pa, "product_b": pb,
                     "ratio_a": norm.value / pa, "ratio_b": norm.value / pb})
    C_a = safety * max(r["ratio_a"] for r in rows)
    C_b = safety * max(r["ratio_b"] for r in rows)
    return Calibration(sp.n, sp.p, C_a, C_b, sampler.seed, sampler.n_samples, rows)


__all__ = [
    "SobolevParams", "NormEstimate", "Sampler", "BoxTooSmall", "NonConvergent",
    "CapacityProfile", "capacity_eval", "capacity_norm_bound", "conjectured_log_rate",
    "lp_norm", "gradient_lp_norm", "w1p_norm", "sup_norm", "gagliardo_seminorm",
    "sobolev_norm", "gn_bound_a", "gn_bound_b", "gn_estimate", "calibrate_constants",
    "calibration_family", "holdout_field", "Calibration",
]

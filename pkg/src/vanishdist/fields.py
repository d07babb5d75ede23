"""Closed-form scalar and vector fields on R^n.

Every field knows its support box (evaluation outside it is exactly zero),
an analytic gradient where one is cheap, a finest length scale, and a
sampling plan used by the Monte Carlo norm estimators.  Fields are
immutable and evaluation is vectorised over points of shape (N, n).
"""
from __future__ import annotations

import numpy as np

from .capacity import CapacityProfile, capacity_eval, capacity_grad
from .geometry import (
    Box,
    Lattice,
    as_points,
    product_taper,
    round_to_lattice,
    smoothstep,
    smoothstep_deriv,
)

CUTOFF_MARGIN = 0.25


def eval_field(f: "Field", p):
    """Evaluate ``f`` at a Point, a point array (n,), or a batch (N, n)."""
    return f(p)


class Field:
    """Base class. Subclasses implement ``_eval`` and optionally ``_grad``."""

    kind = "abstract"

    def __init__(self, n: int, n_out: int, support: Box, length_scale: float):
        if support.dim != n:
            raise ValueError("support box dimension does not match field dimension")
        self.n = n
        self.n_out = n_out
        self.support = support
        self.length_scale = float(length_scale)

    def __call__(self, q):
        q, single = as_points(q, self.n)
        out = np.zeros((q.shape[0], self.n_out))
        inside = self.support.contains(q)
        if inside.any():
            out[inside] = self._eval(q[inside])
        return out[0] if single else out

    def grad(self, q):
        """Jacobian, shape (N, n_out, n) (or (n_out, n) for one point)."""
        q, single = as_points(q, self.n)
        out = np.zeros((q.shape[0], self.n_out, self.n))
        inside = self.support.contains(q)
        if inside.any():
            out[inside] = self._grad(q[inside])
        return out[0] if single else out

    def _eval(self, q):
        raise NotImplementedError

    def _grad(self, q):
        # central differences, step tied to the finest feature
        h = 1e-6 * self.length_scale
        out = np.empty((q.shape[0], self.n_out, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            out[:, :, j] = (self(q + e) - self(q - e)) / (2 * h)
        return out

    def sampling_plan(self) -> list[tuple]:
        """Mixture components covering the support.

        Each entry is ``("box", Box)`` or ``("radial", center, r_in, r_out)``.
        """
        return [("box", self.support)]

    def hotspots(self) -> np.ndarray:
        pts = [c[1] for c in self.sampling_plan() if c[0] == "radial"]
        return np.array(pts).reshape(-1, self.n)

    # composition helpers
    def scaled(self, c: float) -> "Field":
        return Scaled(self, c=c)

    def dilated(self, lam: float) -> "Field":
        return Scaled(self, lam=lam)

    def translated(self, v) -> "Field":
        return Translated(self, v)


class ZeroField(Field):
    kind = "closed-form-piecewise-linear"

    def __init__(self, n: int, n_out: int = 1):
        super().__init__(n, n_out, Box.cube(0.0, 0.0, n), 1.0)

    def _eval(self, q):
        return np.zeros((q.shape[0], self.n_out))

    def _grad(self, q):
        return np.zeros((q.shape[0], self.n_out, self.n))


class LinearField(Field):
    """A (q - center) + offset, restricted to ``support`` (default: all of R^n)."""

    kind = "closed-form-piecewise-linear"

    def __init__(self, matrix, center=None, offset=None, support: Box | None = None):
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        n_out, n = A.shape
        super().__init__(n, n_out, support or Box.whole(n), 1.0)
        self.A = A
        self.center = np.zeros(n) if center is None else np.asarray(center, float)
        self.offset = np.zeros(n_out) if offset is None else np.asarray(offset, float)

    @classmethod
    def squeeze_toward(cls, z, rate: float) -> "LinearField":
        """The field -rate * (y - z) acting on y, with zero x-component."""
        z = np.asarray(z, float)
        m = z.size
        A = np.zeros((m + 1, m + 1))
        A[1:, 1:] = -rate * np.eye(m)
        return cls(A, center=np.concatenate([[0.0], z]))

    @classmethod
    def constant(cls, v) -> "LinearField":
        v = np.asarray(v, float)
        return cls(np.zeros((v.size, v.size)), offset=v)

    def _eval(self, q):
        return (q - self.center) @ self.A.T + self.offset

    def _grad(self, q):
        return np.broadcast_to(self.A, (q.shape[0],) + self.A.shape).copy()


class ProductTaper(Field):
    """Scalar prod_i plateau(q_i) equal to 1 on [lo, hi] and 0 outside a margin."""

    kind = "closed-form-separable"

    def __init__(self, lo, hi, width: float, n: int | None = None):
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        if n is not None:
            lo = np.broadcast_to(lo, (n,))
            hi = np.broadcast_to(hi, (n,))
        self.lo, self.hi, self.width = lo, hi, float(width)
        super().__init__(lo.size, 1, Box(lo - width, hi + width), width)

    def _eval(self, q):
        v, _ = product_taper(q, self.lo, self.hi, self.width)
        return v[:, None]

    def _grad(self, q):
        _, g = product_taper(q, self.lo, self.hi, self.width)
        return g[:, None, :]


def cutoff(n: int) -> ProductTaper:
    """chi: identically 1 on [0, 1]^n, vanishing outside (-1/4, 5/4)^n."""
    return ProductTaper(0.0, 1.0, CUTOFF_MARGIN, n=n)


class RadialTaper(Field):
    """g(|q - c| / scale): 1 for radius <= scale/2, 0 for radius >= scale."""

    kind = "closed-form-radial"

    def __init__(self, center, scale: float = 1.0):
        self.center = np.atleast_1d(np.asarray(center, float))
        self.scale = float(scale)
        n = self.center.size
        super().__init__(n, 1, Box(self.center - scale, self.center + scale), scale / 2)

    def _eval(self, q):
        rho = np.linalg.norm(q - self.center, axis=1) / self.scale
        return smoothstep(2.0 * (1.0 - rho))[:, None]

    def _grad(self, q):
        d = q - self.center
        rho = np.linalg.norm(d, axis=1)
        t = 2.0 * (1.0 - rho / self.scale)
        dg = -2.0 / self.scale * smoothstep_deriv(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(rho[:, None] > 0, d / rho[:, None], 0.0)
        return (dg[:, None] * unit)[:, None, :]


class Bump(Field):
    """exp(1 - 1/(1 - rho^2)) with rho = |q - c| / scale; sup 1 at the center."""

    kind = "closed-form-radial"

    def __init__(self, center, scale: float = 1.0):
        self.center = np.atleast_1d(np.asarray(center, float))
        self.scale = float(scale)
        n = self.center.size
        super().__init__(n, 1, Box(self.center - scale, self.center + scale), scale / 4)

    def _eval(self, q):
        r2 = np.sum((q - self.center) ** 2, axis=1) / self.scale**2
        out = np.zeros_like(r2)
        ok = r2 < 1.0
        out[ok] = np.exp(1.0 - 1.0 / (1.0 - r2[ok]))
        return out[:, None]

    def _grad(self, q):
        d = (q - self.center) / self.scale
        r2 = np.sum(d**2, axis=1)
        g = np.zeros_like(q)
        ok = r2 < 1.0
        val = np.exp(1.0 - 1.0 / (1.0 - r2[ok]))
        g[ok] = (-2.0 * val / (1.0 - r2[ok]) ** 2)[:, None] * d[ok] / self.scale
        return g[:, None, :]


class Gaussian(Field):
    """exp(-|q - c|^2 / (2 sigma^2)), truncated to the box of half-width ``cut`` sigma."""

    kind = "closed-form-radial"

    def __init__(self, center, sigma: float = 1.0, cut: float = 9.0):
        self.center = np.atleast_1d(np.asarray(center, float))
        self.sigma = float(sigma)
        n = self.center.size
        half = cut * sigma
        super().__init__(n, 1, Box(self.center - half, self.center + half), sigma / 4)

    def _eval(self, q):
        r2 = np.sum((q - self.center) ** 2, axis=1)
        return np.exp(-r2 / (2 * self.sigma**2))[:, None]

    def _grad(self, q):
        d = q - self.center
        v = np.exp(-np.sum(d**2, axis=1) / (2 * self.sigma**2))
        return (-(v[:, None] * d) / self.sigma**2)[:, None, :]


class CapacityField(Field):
    """The capacity profile xi centred at ``center``."""

    kind = "closed-form-radial"

    def __init__(self, profile: CapacityProfile, center=None):
        n = profile.n
        self.profile = profile
        self.center = np.zeros(n) if center is None else np.asarray(center, float)
        scale = max(profile.r, 1e-300)
        super().__init__(n, 1, Box(self.center - 1.0, self.center + 1.0), scale)

    def _eval(self, q):
        return capacity_eval(self.profile, q - self.center).reshape(-1, 1)

    def _grad(self, q):
        return capacity_grad(self.profile, q - self.center)[:, None, :]

    def sampling_plan(self):
        r_in = max(self.profile.r, 1e-300)
        return [("box", self.support), ("radial", self.center, r_in, 1.0)]


def squeeze_profile(w):
    """The periodic profile u with u(w) = -w on [-1/2, 1/2]^m.

    u = -w * prod_i tau(w_i) on (-1, 1)^m, tau a plateau on [-1/2, 1/2],
    extended 2Z^m-periodically.  Returns values (N, m) and Jacobians (N, m, m).
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    w = w - 2.0 * np.floor(w / 2.0 + 0.5)
    m = w.shape[1]
    T, dT = product_taper(w, -0.5, 0.5, 0.5)
    val = -w * T[:, None]
    jac = -T[:, None, None] * np.eye(m)[None] - w[:, :, None] * dT[:, None, :]
    return val, jac


class Squeeze1Field(Field):
    """(eta/k) u(k y - I) chi(x, y): equals -eta (y - [y]_I) on [0,1] x L_I."""

    kind = "closed-form-separable"

    def __init__(self, k: int, index, eta: float, n: int):
        self.lattice = Lattice(k, tuple(index))
        if self.lattice.m != n - 1:
            raise ValueError("index length must be n - 1")
        self.k, self.eta = k, float(eta)
        self.chi = cutoff(n)
        super().__init__(n, n, self.chi.support, 1.0 / (4 * k))

    def _eval(self, q):
        k = self.k
        w = k * q[:, 1:] - np.asarray(self.lattice.index, float)
        u, _ = squeeze_profile(w)
        chi = self.chi(q)[:, 0]
        out = np.zeros_like(q)
        out[:, 1:] = (self.eta / k) * u * chi[:, None]
        return out

    def _grad(self, q):
        k = self.k
        w = k * q[:, 1:] - np.asarray(self.lattice.index, float)
        u, du = squeeze_profile(w)
        chi = self.chi(q)[:, 0]
        dchi = self.chi.grad(q)[:, 0, :]
        out = np.zeros((q.shape[0], self.n, self.n))
        out[:, 1:, 1:] = self.eta * du * chi[:, None, None]
        out[:, 1:, :] += (self.eta / k) * u[:, :, None] * dchi[:, None, :]
        return out


class Squeeze2Field(Field):
    """-alpha (y - [y]_I) rho(|y - [y]_I|_inf) chi(x, y).

    rho is 1 on the stage-one cubes (sup-radius w) and decreases linearly to
    0 at sup-radius 2w.
    """

    kind = "closed-form-piecewise-linear"

    def __init__(self, k: int, index, alpha: float, w: float, n: int):
        self.lattice = Lattice(k, tuple(index))
        if self.lattice.m != n - 1:
            raise ValueError("index length must be n - 1")
        if not 0 < 2 * w < 1.0 / k + 1e-15:
            raise ValueError("taper annulus would overlap neighbouring cells")
        self.k, self.alpha, self.w = k, float(alpha), float(w)
        self.chi = cutoff(n)
        super().__init__(n, n, self.chi.support, w)

    def _parts(self, q):
        y = q[:, 1:]
        d = y - round_to_lattice(y, self.lattice)
        r = np.max(np.abs(d), axis=1)
        rho = np.clip(2.0 - r / self.w, 0.0, 1.0)
        return d, r, rho

    def _eval(self, q):
        d, _, rho = self._parts(q)
        chi = self.chi(q)[:, 0]
        out = np.zeros_like(q)
        out[:, 1:] = -self.alpha * d * (rho * chi)[:, None]
        return out

    def _grad(self, q):
        d, r, rho = self._parts(q)
        N, m = d.shape
        chi = self.chi(q)[:, 0]
        dchi = self.chi.grad(q)[:, 0, :]
        ramp = (r > self.w) & (r < 2 * self.w)
        drho = np.zeros((N, m))
        j = np.argmax(np.abs(d), axis=1)
        drho[np.arange(N), j] = np.where(ramp, -np.sign(d[np.arange(N), j]) / self.w, 0.0)
        out = np.zeros((N, self.n, self.n))
        inner = rho[:, None, None] * np.eye(m)[None] + d[:, :, None] * drho[:, None, :]
        out[:, 1:, 1:] = -self.alpha * inner * chi[:, None, None]
        out[:, 1:, :] += (-self.alpha * d * rho[:, None])[:, :, None] * dchi[:, None, :]
        return out

    def sampling_plan(self):
        lo = np.asarray(self.support.lo)
        hi = np.asarray(self.support.hi)
        plan = [("box", self.support)]
        for z in self.lattice.points_near(lo[1:] - 2 * self.w, hi[1:] + 2 * self.w):
            b = Box(np.concatenate([[lo[0]], z - 2 * self.w]), np.concatenate([[hi[0]], z + 2 * self.w]))
            b = b.intersect(self.support)
            if b is not None and b.volume > 0:
                plan.append(("box", b))
        return plan


class LatticeSum(Field):
    """sum_o base(q - o) over a finite set of offsets o."""

    kind = "lattice-sum"

    def __init__(self, base: Field, offsets):
        offsets = np.atleast_2d(np.asarray(offsets, float))
        if offsets.shape[1] != base.n:
            raise ValueError("offsets must live in R^n")
        self.base, self.offsets = base, offsets
        support = base.support.shifted(offsets[0])
        for o in offsets[1:]:
            support = support.union(base.support.shifted(o))
        super().__init__(base.n, base.n_out, support, base.length_scale)

    def _eval(self, q):
        out = np.zeros((q.shape[0], self.n_out))
        for o in self.offsets:
            out += self.base(q - o)
        return out

    def _grad(self, q):
        out = np.zeros((q.shape[0], self.n_out, self.n))
        for o in self.offsets:
            out += self.base.grad(q - o)
        return out

    def sampling_plan(self):
        plan = [("box", self.support)]
        for o in self.offsets:
            for c in self.base.sampling_plan():
                if c[0] == "box":
                    plan.append(("box", c[1].shifted(o)))
                else:
                    plan.append(("radial", c[1] + o, c[2], c[3]))
        return plan


class Translated(Field):
    """q -> base(q - v)."""

    kind = "time-shifted"

    def __init__(self, base: Field, v):
        self.base = base
        self.v = np.asarray(v, float)
        super().__init__(base.n, base.n_out, base.support.shifted(self.v), base.length_scale)

    def _eval(self, q):
        return self.base(q - self.v)

    def _grad(self, q):
        return self.base.grad(q - self.v)

    def sampling_plan(self):
        out = []
        for c in self.base.sampling_plan():
            if c[0] == "box":
                out.append(("box", c[1].shifted(self.v)))
            else:
                out.append(("radial", c[1] + self.v, c[2], c[3]))
        return out


class Scaled(Field):
    """q -> c * base(q / lam)."""

    kind = "scaled"

    def __init__(self, base: Field, c: float = 1.0, lam: float = 1.0):
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        self.base, self.c, self.lam = base, float(c), float(lam)
        super().__init__(base.n, base.n_out, base.support.scaled(lam), base.length_scale * lam)

    def _eval(self, q):
        return self.c * self.base(q / self.lam)

    def _grad(self, q):
        return (self.c / self.lam) * self.base.grad(q / self.lam)

    def sampling_plan(self):
        out = []
        for comp in self.base.sampling_plan():
            if comp[0] == "box":
                out.append(("box", comp[1].scaled(self.lam)))
            else:
                out.append(("radial", comp[1] * self.lam, comp[2] * self.lam, comp[3] * self.lam))
        return out


class AlongX(Field):
    """Vector field (g, 0, ..., 0) from a scalar field g."""

    def __init__(self, base: Field):
        if base.n_out != 1:
            raise ValueError("AlongX needs a scalar field")
        self.base = base
        self.kind = base.kind
        super().__init__(base.n, base.n, base.support, base.length_scale)

    def _eval(self, q):
        out = np.zeros_like(q)
        out[:, :1] = self.base(q)
        return out

    def _grad(self, q):
        out = np.zeros((q.shape[0], self.n, self.n))
        out[:, :1, :] = self.base.grad(q)
        return out

    def sampling_plan(self):
        return self.base.sampling_plan()


def capacity_lattice_field(profile: CapacityProfile, lattice: Lattice) -> Field:
    """xi_k^I(x, y) = sum over z in Z_I cap [0,1]^m of xi_k(x, y - z)."""
    zs = lattice.points_in_unit_cube()
    offsets = np.hstack([np.zeros((zs.shape[0], 1)), zs])
    return LatticeSum(CapacityField(profile), offsets)


"""Points, sublattices, strips and smooth tapers on R^n = R x R^m.

The first coordinate is called ``x`` and the remaining ``m = n - 1``
coordinates ``y``.  Arrays of points always have shape ``(N, n)`` with
``x`` in column 0.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

TIE_TOL = 1e-12


class AmbiguousNearest(ValueError):
    """Raised when a point is equidistant from two sublattice points."""


class Point(NamedTuple):
    x: float
    y: np.ndarray

    @classmethod
    def from_array(cls, q) -> "Point":
        q = np.asarray(q, dtype=float)
        return cls(float(q[0]), q[1:].copy())

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.x], np.atleast_1d(self.y)]).astype(float)

    @property
    def m(self) -> int:
        return int(np.size(self.y))


def as_points(q, n: int | None = None) -> tuple[np.ndarray, bool]:
    """Return ``q`` as a float ``(N, n)`` array and whether it was a single point."""
    if isinstance(q, Point):
        q = q.as_array()
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if n is not None and q.shape[1] != n:
        raise ValueError(f"expected points in R^{n}, got shape {q.shape}")
    return q, single


def index_order(m: int) -> list[tuple[int, ...]]:
    """Elements of Z_2^m in the stage order used by the construction.

    Ordered by number of ones, and within a weight class in decreasing
    lexicographic order: (0,..,0), (1,0,..,0), (0,1,0,..), ..., (0,1,..,1), (1,..,1).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    idx = list(itertools.product((0, 1), repeat=m))
    return sorted(idx, key=lambda I: (sum(I), tuple(-i for i in I)))


@dataclass(frozen=True)
class Lattice:
    """The sublattice Z_I = (2/k) Z^m + I/k of (1/k) Z^m."""

    k: int
    index: tuple[int, ...]

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("lattice density k must be a positive integer")
        if any(i not in (0, 1) for i in self.index) or len(self.index) < 1:
            raise ValueError(f"lattice index must be a nonempty binary vector, got {self.index}")
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def m(self) -> int:
        return len(self.index)

    @property
    def spacing(self) -> float:
        return 2.0 / self.k

    @property
    def offset(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) / self.k

    def points_in_unit_cube(self) -> np.ndarray:
        """Lattice points of Z_I inside [0, 1]^m, shape (M, m)."""
        axes = []
        for c in self.offset:
            j = np.arange(0, int(np.floor((1.0 - c) / self.spacing + 1e-9)) + 1)
            axes.append(c + j * self.spacing)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def points_near(self, lo, hi) -> np.ndarray:
        """Lattice points inside the box [lo, hi] (in y-coordinates)."""
        lo = np.broadcast_to(np.asarray(lo, float), (self.m,))
        hi = np.broadcast_to(np.asarray(hi, float), (self.m,))
        axes = []
        for c, a, b in zip(self.offset, lo, hi):
            j0 = int(np.ceil((a - c) / self.spacing - 1e-9))
            j1 = int(np.floor((b - c) / self.spacing + 1e-9))
            axes.append(c + np.arange(j0, j1 + 1) * self.spacing)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


def round_to_lattice(y, lat: Lattice) -> np.ndarray:
    """Componentwise nearest point of Z_I, ties broken upward. Never raises."""
    y = np.asarray(y, dtype=float)
    c = lat.offset
    return c + np.floor((y - c) / lat.spacing + 0.5) * lat.spacing


def nearest_lattice_point(y, lat: Lattice) -> np.ndarray:
    """The point [y]_I of Z_I closest to ``y``.

    Accepts a single ``y`` of shape (m,) or a batch (N, m).  Raises
    AmbiguousNearest if some coordinate sits on a cell boundary within
    ``TIE_TOL`` lattice spacings.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != lat.m:
        raise ValueError(f"y has dimension {y.shape[-1]}, lattice has m={lat.m}")
    u = (y - lat.offset) / lat.spacing
    frac = u - np.floor(u)
    if np.any(np.abs(frac - 0.5) < TIE_TOL):
        raise AmbiguousNearest(f"{y} lies on a cell boundary of Z_{lat.index}")
    return lat.offset + np.round(u) * lat.spacing


def strip_membership(p, lat: Lattice, halfwidth: float):
    """Whether points lie in (Z_I + [-h, h]^m) intersected with [0, 1]^m.

    ``p`` is a Point, a single point array of shape (n,), or a batch (N, n);
    only the y-part is inspected.  Returns a bool or a bool array.
    """
    if not 0.0 < halfwidth <= 1.0 / lat.k + 1e-15:
        raise ValueError(f"halfwidth must lie in (0, 1/k], got {halfwidth}")
    q, single = as_points(p)
    y = q[:, 1:]
    if y.shape[1] != lat.m:
        raise ValueError("point dimension does not match lattice")
    d = np.abs(y - round_to_lattice(y, lat))
    inside = np.all((y >= 0.0) & (y <= 1.0), axis=1)
    # boundary points belong to both neighbouring strips
    out = np.all(d <= halfwidth + TIE_TOL * lat.spacing, axis=1) & inside
    return bool(out[0]) if single else out


def strip_index(y, k: int, m: int) -> np.ndarray:
    """Index I with y in L_I, via parity of the nearest point of (1/k) Z^m.

    Returns an integer array of shape (N, m).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    j = np.floor(y * k + 0.5).astype(np.int64)
    return np.mod(j, 2)


# -- smooth tapers ---------------------------------------------------------

def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _dh(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / tp**2
    return out


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, all derivatives flat at both ends."""
    t = np.asarray(t, dtype=float)
    a, b = _h(t), _h(1.0 - t)
    return a / (a + b)


def smoothstep_deriv(t):
    t = np.asarray(t, dtype=float)
    a, b = _h(t), _h(1.0 - t)
    da, db = _dh(t), _dh(1.0 - t)
    return (da * b + a * db) / (a + b) ** 2


def plateau(t, lo: float, hi: float, width: float):
    """1 on [lo, hi], 0 outside (lo - width, hi + width), smooth in between."""
    t = np.asarray(t, dtype=float)
    return smoothstep((t - (lo - width)) / width) * smoothstep(((hi + width) - t) / width)


def plateau_deriv(t, lo: float, hi: float, width: float):
    t = np.asarray(t, dtype=float)
    a = (t - (lo - width)) / width
    b = ((hi + width) - t) / width
    return (smoothstep_deriv(a) * smoothstep(b) - smoothstep(a) * smoothstep_deriv(b)) / width


def product_taper(q, lo: Sequence[float], hi: Sequence[float], width: float):
    """Value and gradient of prod_i plateau(q_i; lo_i, hi_i, width).

    q has shape (N, d); returns (N,) values and (N, d) gradients.
    """
    q = np.asarray(q, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, float), (q.shape[1],))
    hi = np.broadcast_to(np.asarray(hi, float), (q.shape[1],))
    vals = np.stack([plateau(q[:, i], lo[i], hi[i], width) for i in range(q.shape[1])], axis=1)
    ders = np.stack([plateau_deriv(q[:, i], lo[i], hi[i], width) for i in range(q.shape[1])], axis=1)
    total = np.prod(vals, axis=1)
    grad = np.empty_like(q)
    for i in range(q.shape[1]):
        others = np.prod(np.delete(vals, i, axis=1), axis=1) if q.shape[1] > 1 else 1.0
        grad[:, i] = ders[:, i] * others
    return total, grad


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box; infinite bounds are allowed."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds have different dimensions")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo} .. {self.hi}")

    @classmethod
    def cube(cls, lo: float, hi: float, n: int) -> "Box":
        return cls((lo,) * n, (hi,) * n)

    @classmethod
    def whole(cls, n: int) -> "Box":
        return cls((-np.inf,) * n, (np.inf,) * n)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, q) -> np.ndarray:
        q = np.atleast_2d(q)
        return np.all((q >= np.asarray(self.lo)) & (q <= np.asarray(self.hi)), axis=1)

    def contains_box(self, other: "Box", tol: float = 1e-12) -> bool:
        return bool(np.all(np.asarray(other.lo) >= np.asarray(self.lo) - tol)
                    and np.all(np.asarray(other.hi) <= np.asarray(self.hi) + tol))

    def union(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def shifted(self, v) -> "Box":
        v = np.asarray(v, float)
        return Box(np.asarray(self.lo) + v, np.asarray(self.hi) + v)

    def scaled(self, lam: float) -> "Box":
        return Box(np.asarray(self.lo) * lam, np.asarray(self.hi) * lam)

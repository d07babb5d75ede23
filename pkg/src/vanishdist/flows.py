"""Flow maps of time-dependent vector fields, composition, and path costs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .fields import Field, ZeroField
from .geometry import as_points
from .norms import (
    DEFAULT_SAMPLER,
    NormEstimate,
    Sampler,
    SobolevParams,
    gn_estimate,
    sobolev_norm,
)


class ToleranceExceeded(RuntimeError):
    pass


class OutsideRegion(ValueError):
    pass


TIME_ACTIONS = ("autonomous", "x-shift", "profile", "piecewise")
NORM_METHODS = ("gn-bound-a", "gn-bound-b", "gagliardo-mc")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step classical RK4; ``step_count`` steps per unit time."""

    method: str = "rk4"
    step_count: int = 256
    richardson_check: bool = False
    tol: float = 1e-8

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError("only fixed-step rk4 is supported")
        if self.step_count < 16:
            raise ValueError("step_count must be >= 16")


DEFAULT_INTEGRATOR = IntegratorConfig()


@dataclass(frozen=True)
class TimeField:
    """A velocity field u_t.

    ``x-shift`` means u_t(q) = base(q - t e_1); ``profile`` means
    u_t = profile(t) * base; ``piecewise`` runs ``segments`` one after the
    other, each over a unit time interval.
    """

    base: Field
    time_action: str = "autonomous"
    profile: Callable[[float], float] | None = None
    segments: tuple = ()

    def __post_init__(self):
        if self.time_action not in TIME_ACTIONS:
            raise ValueError(f"unknown time action {self.time_action}")
        if self.time_action == "profile" and self.profile is None:
            raise ValueError("profile time action needs a profile function")

    @classmethod
    def concat(cls, parts: Sequence["TimeField"]) -> "TimeField":
        return cls(parts[0].base, "piecewise", segments=tuple(parts))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def duration(self) -> float:
        return float(len(self.segments)) if self.time_action == "piecewise" else 1.0

    def __call__(self, t: float, q: np.ndarray) -> np.ndarray:
        if self.time_action == "autonomous":
            return self.base(q)
        if self.time_action == "x-shift":
            shift = np.zeros(self.n)
            shift[0] = t
            return self.base(q - shift)
        if self.time_action == "profile":
            return self.profile(t) * self.base(q)
        j = min(max(int(math.floor(t)), 0), len(self.segments) - 1)
        return self.segments[j](t - j, q)

    def at(self, t: float) -> Field:
        """The frozen field u_t."""
        if self.time_action == "autonomous":
            return self.base
        if self.time_action == "x-shift":
            shift = np.zeros(self.n)
            shift[0] = t
            return self.base.translated(shift)
        if self.time_action == "profile":
            return self.base.scaled(self.profile(t))
        j = min(max(int(math.floor(t)), 0), len(self.segments) - 1)
        return self.segments[j].at(t - j)


def _rk4(tf: TimeField, t0: float, t1: float, q: np.ndarray, steps: int, record: int = 0):
    h = (t1 - t0) / steps
    y = q.copy()
    snaps = []
    for i in range(steps):
        t = t0 + i * h
        k1 = tf(t, y)
        k2 = tf(t + h / 2, y + h / 2 * k1)
        k3 = tf(t + h / 2, y + h / 2 * k2)
        k4 = tf(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if record and (i + 1) % record == 0:
            snaps.append(y.copy())
    return y, snaps


def _integrate(tf: TimeField, t0: float, t1: float, q: np.ndarray, steps: int):
    if tf.time_action != "piecewise":
        return _rk4(tf, t0, t1, q, steps)[0]
    # segment by segment so no RK stage straddles a switch
    y = q
    lo, hi = min(t0, t1), max(t0, t1)
    cuts = sorted({lo, hi, *range(int(math.ceil(lo)), int(math.floor(hi)) + 1)})
    if t1 < t0:
        cuts = cuts[::-1]
    for a, b in zip(cuts[:-1], cuts[1:]):
        j = min(max(int(math.floor(min(a, b) + 1e-12)), 0), len(tf.segments) - 1)
        n_sub = max(1, round(steps * abs(b - a) / abs(t1 - t0)))
        y = _rk4(tf.segments[j], a - j, b - j, y, n_sub)[0]
    return y


def flow_point(tf: TimeField, t0: float, t1: float, q, cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
    """Solve dq/dt = u_t(q) from t0 to t1 (t1 < t0 runs backwards).

    With ``richardson_check`` the solution is recomputed with half the
    step; a Richardson error estimate above ``cfg.tol`` raises
    ToleranceExceeded.  The coarse solution is returned either way, so
    results do not depend on whether the check ran.
    """
    q, single = as_points(q, tf.n)
    if t1 == t0:
        return q[0].copy() if single else q.copy()
    steps = max(1, round(cfg.step_count * abs(t1 - t0)))
    y = _integrate(tf, t0, t1, q, steps)
    if cfg.richardson_check:
        y2 = _integrate(tf, t0, t1, q, 2 * steps)
        err = float(np.max(np.abs(y - y2))) * 16.0 / 15.0
        if err > cfg.tol:
            raise ToleranceExceeded(f"Richardson error estimate {err:.3g} exceeds {cfg.tol:.3g}")
    return y[0] if single else y


def flow_trajectory(tf: TimeField, t0: float, t1: float, q, cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
                    checkpoints: int = 64):
    """States at ``checkpoints`` equally spaced times after t0 (steps must divide evenly)."""
    q, _ = as_points(q, tf.n)
    steps = max(1, round(cfg.step_count * abs(t1 - t0)))
    if steps % checkpoints:
        raise ValueError("checkpoints must divide the step count")
    _, snaps = _rk4(tf, t0, t1, q, steps, record=steps // checkpoints)
    times = t0 + (t1 - t0) * np.arange(1, checkpoints + 1) / checkpoints
    return times, np.stack(snaps)


# -- flow maps -----------------------------------------------------------------

class FlowMap:
    kind = "abstract"

    def __call__(self, q):
        q, single = as_points(q)
        out = self._apply(q)
        return out[0] if single else out

    def _apply(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "FlowMap":
        raise NotImplementedError


class IntegratedMap(FlowMap):
    """Time-t1 map of the flow started at t0; reversed times give the inverse."""

    def __init__(self, tf: TimeField, t0: float = 0.0, t1: float | None = None,
                 cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
        self.tf, self.t0, self.cfg = tf, float(t0), cfg
        self.t1 = float(tf.duration if t1 is None else t1)

    @property
    def kind(self):
        return "inverted" if self.t1 < self.t0 else "integrated"

    def _apply(self, q):
        return flow_point(self.tf, self.t0, self.t1, q, self.cfg)

    def inverse(self):
        return IntegratedMap(self.tf, self.t1, self.t0, self.cfg)


class ExactRegionMap(FlowMap):
    """Closed-form map on a declared region, with an optional fallback elsewhere."""

    kind = "exact-region"

    def __init__(self, formula, region, inverse_formula, inverse_region, fallback: FlowMap | None = None):
        self.formula, self.region = formula, region
        self.inverse_formula, self.inverse_region = inverse_formula, inverse_region
        self.fallback = fallback

    def _apply(self, q):
        mask = self.region(q)
        out = np.empty_like(q)
        if mask.any():
            out[mask] = self.formula(q[mask])
        if (~mask).any():
            if self.fallback is None:
                raise OutsideRegion(f"{int((~mask).sum())} points outside the exact region")
            out[~mask] = self.fallback(q[~mask])
        return out

    def inverse(self):
        fb = None if self.fallback is None else self.fallback.inverse()
        return ExactRegionMap(self.inverse_formula, self.inverse_region, self.formula, self.region, fb)


class ComposedMap(FlowMap):
    """f_1 o f_2 o ... o f_r; factors are listed left to right and applied right to left."""

    kind = "composed"

    def __init__(self, factors: Sequence[FlowMap] = ()):
        self.factors = list(factors)

    def _apply(self, q):
        for f in reversed(self.factors):
            q = f._apply(q)
        return q

    def inverse(self):
        return ComposedMap([f.inverse() for f in reversed(self.factors)])


def compose(*maps: FlowMap) -> ComposedMap:
    return ComposedMap(maps)


def identity_map() -> ComposedMap:
    return ComposedMap([])


def eval_flowmap(fm: FlowMap, q):
    return fm(q)


# -- path length and cost ledger --------------------------------------------

def _norm_of(f: Field, sp: SobolevParams, norm_method: str, constants, sampler: Sampler) -> NormEstimate:
    if isinstance(f, ZeroField) or f.support.volume == 0:
        return NormEstimate(0.0, 0.0, "closed-form", 0)
    if norm_method == "gagliardo-mc":
        return sobolev_norm(f, sp, sampler)
    if constants is None:
        raise ValueError(f"{norm_method} needs calibrated constants (C_a, C_b)")
    C = constants[0] if norm_method == "gn-bound-a" else constants[1]
    return gn_estimate(f, sp, C, norm_method, sampler)


def path_length(tf: TimeField, sp: SobolevParams, norm_method: str = "gn-bound-a", t_nodes: int = 8,
                constants: tuple[float, float] | None = None,
                sampler: Sampler = DEFAULT_SAMPLER) -> NormEstimate:
    """int_0^T ||u_t||_{s,p} dt for the path generated by ``tf``.

    Autonomous and x-shift fields need a single norm evaluation (the
    integrand is constant in t, by translation invariance for x-shift);
    profile fields use Gauss-Legendre in t; piecewise fields add segments.
    """
    if norm_method not in NORM_METHODS:
        raise ValueError(f"norm_method must be one of {NORM_METHODS}")
    if tf.time_action in ("autonomous", "x-shift"):
        return _norm_of(tf.base, sp, norm_method, constants, sampler)
    if tf.time_action == "piecewise":
        parts = [path_length(s, sp, norm_method, t_nodes, constants, sampler) for s in tf.segments]
        return NormEstimate(sum(p.value for p in parts), math.sqrt(sum(p.stderr**2 for p in parts)),
                            parts[0].method, sum(p.sample_count for p in parts))
    nodes, weights = np.polynomial.legendre.leggauss(t_nodes)
    ts, ws = 0.5 * (nodes + 1.0), 0.5 * weights
    base = _norm_of(tf.base, sp, norm_method, constants, sampler)
    # homogeneity: ||g(t) u|| = |g(t)| ||u||
    factor = float(sum(w * abs(tf.profile(t)) for t, w in zip(ts, ws)))
    return NormEstimate(base.value * factor, base.stderr * factor, base.method, base.sample_count)


@dataclass(frozen=True)
class LedgerEntry:
    label: str
    log_cost_bound: float
    measured_cost: NormEstimate | None = None
    paired: bool = False  # also charged once more for the inverse stage


@dataclass
class CostLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def add(self, label: str, log_cost_bound: float, measured_cost: NormEstimate | None = None,
            paired: bool = False) -> None:
        self.entries.append(LedgerEntry(label, float(log_cost_bound), measured_cost, paired))

    @property
    def has_measured(self) -> bool:
        return bool(self.entries) and all(e.measured_cost is not None for e in self.entries)

    def summary(self) -> dict:
        out = {"log_total": ledger_total(self), "entries": [
            {"label": e.label, "log_cost_bound": e.log_cost_bound, "paired": e.paired,
             "measured": None if e.measured_cost is None else e.measured_cost.value,
             "measured_stderr": None if e.measured_cost is None else e.measured_cost.stderr}
            for e in self.entries]}
        if self.has_measured:
            out["log_total_measured"] = ledger_total(self, measured=True)
        return out


def ledger_total(cl: CostLedger, measured: bool = False) -> float:
    """log of the summed stage costs; paired stages are charged twice.

    An empty ledger gives -inf.  With ``measured`` the measured norms are
    used in place of the analytic bounds.
    """
    terms = []
    for e in cl.entries:
        if measured:
            if e.measured_cost is None:
                raise ValueError(f"entry {e.label} has no measured cost")
            v = math.log(e.measured_cost.value) if e.measured_cost.value > 0 else -math.inf
        else:
            v = e.log_cost_bound
        terms.append(v + (math.log(2.0) if e.paired else 0.0))
    if not terms:
        return -math.inf
    return float(logsumexp(terms))

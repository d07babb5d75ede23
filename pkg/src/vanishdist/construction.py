"""The displacing diffeomorphisms Phi_k and their cost ledger.

For each strip index I the stage map is Phi_k^I = Psi_I^-1 o Theta_I o Psi_I
where Psi_I = Psi_I^2 o Psi_I^1 squeezes the strip L_I onto cubes of
half-width lambda around the sublattice Z_I, and Theta_I pushes those cubes
past x = 1 along a moving capacity profile.  Phi_k composes the stages in
index order.

Widths are kept in log-space.  The true lambda_k is doubly exponentially
small; pointwise evaluation can substitute a representable width
(``clamped`` feasibility), while the ledger always uses the exact values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacity import CapacityProfile, capacity_norm_bound
from .fields import AlongX, Squeeze1Field, Squeeze2Field, capacity_lattice_field
from .flows import (
    DEFAULT_INTEGRATOR,
    ComposedMap,
    CostLedger,
    ExactRegionMap,
    FlowMap,
    IntegratedMap,
    IntegratorConfig,
    TimeField,
    compose,
    path_length,
)
from .geometry import Lattice, index_order, round_to_lattice
from .norms import DEFAULT_SAMPLER, Sampler, SobolevParams

LOG_TINY = math.log(1e-300)


class InfeasibleScale(ValueError):
    """The exact squeeze factor is not representable; use clamped mode."""


@dataclass(frozen=True)
class ConstructionParams:
    """eta_k = k^beta, alpha_k = exp(beta k^beta), lambda_k = exp(-alpha_k - eta_k) / 2k.

    ``log_lambda_floor`` clamps the pointwise width to max(lambda_k, floor);
    ``log_lambda_pin`` replaces it outright.  Either one switches
    feasibility to ``clamped`` when it changes the width.
    """

    sp: SobolevParams
    k: int
    beta: float = 0.25
    log_lambda_floor: float | None = None
    log_lambda_pin: float | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not 0.0 < self.beta < 1.0 - self.sp.s:
            raise ValueError(f"beta must lie in (0, 1 - s) = (0, {1 - self.sp.s:.6g})")
        if self.log_lambda_pin is not None and self.log_lambda_pin < LOG_TINY:
            raise ValueError("pinned width must be >= 1e-300")
        if self.feasibility == "clamped" and not self.alpha_eff > 0:
            raise ValueError("clamped width is wider than the first squeeze already gives")

    @property
    def n(self) -> int:
        return self.sp.n

    @property
    def m(self) -> int:
        return self.sp.m

    @property
    def eta(self) -> float:
        return self.k**self.beta

    @property
    def log_alpha(self) -> float:
        return self.beta * self.k**self.beta

    @property
    def log_neg_log_lambda(self) -> float:
        """log(-log lambda_k), finite even where alpha_k overflows."""
        a = self.log_alpha
        return a + math.log1p((self.eta + math.log(2 * self.k)) * math.exp(-a))

    @property
    def log_lambda_k(self) -> float:
        try:
            return -(math.exp(self.log_alpha) + self.eta + math.log(2 * self.k))
        except OverflowError:
            return -math.inf

    @property
    def log_lambda_eff(self) -> float:
        if self.log_lambda_pin is not None:
            return self.log_lambda_pin
        if self.log_lambda_floor is not None:
            return max(self.log_lambda_k, self.log_lambda_floor)
        return self.log_lambda_k

    @property
    def feasibility(self) -> str:
        return "exact" if self.log_lambda_eff == self.log_lambda_k else "clamped"

    @property
    def alpha_eff(self) -> float:
        """Second squeeze rate giving total half-width lambda_eff."""
        if self.feasibility == "exact":
            try:
                return math.exp(self.log_alpha)
            except OverflowError:
                return math.inf
        return -math.log(2 * self.k) - self.log_lambda_eff - self.eta

    @property
    def w1(self) -> float:
        """Half-width e^-eta / 2k of the cubes after the first squeeze."""
        return math.exp(-self.eta) / (2 * self.k)

    def capacity_profile(self) -> CapacityProfile:
        return CapacityProfile(self.k, self.log_lambda_eff, self.n)

    def exact_capacity_profile(self) -> CapacityProfile:
        return CapacityProfile(self.k, self.log_lambda_k, self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.sp.p, "s": self.sp.s, "k": self.k, "beta": self.beta,
                "eta_k": self.eta, "log_alpha_k": self.log_alpha, "log_lambda_k": self.log_lambda_k,
                "log_lambda_eff": self.log_lambda_eff, "alpha_eff": self.alpha_eff,
                "feasibility": self.feasibility}


def _cube_region(lat: Lattice, halfwidth: float):
    def region(q):
        x, y = q[:, 0], q[:, 1:]
        d = np.max(np.abs(y - round_to_lattice(y, lat)), axis=1)
        return (x >= 0) & (x <= 1) & np.all((y >= 0) & (y <= 1), axis=1) & (d <= halfwidth)
    return region


def _contraction(lat: Lattice, factor: float):
    def formula(q):
        out = q.copy()
        z = round_to_lattice(q[:, 1:], lat)
        out[:, 1:] = z + factor * (q[:, 1:] - z)
        return out
    return formula


def _squeeze_map(tf: TimeField, lat: Lattice, halfwidth: float, log_factor: float,
                 cfg: IntegratorConfig) -> ExactRegionMap:
    """Exact linear contraction on [0,1] x (cubes of ``halfwidth``), ODE elsewhere."""
    factor = math.exp(log_factor)
    return ExactRegionMap(
        formula=_contraction(lat, factor),
        region=_cube_region(lat, halfwidth),
        inverse_formula=_contraction(lat, 1.0 / factor),
        inverse_region=_cube_region(lat, halfwidth * factor),
        fallback=IntegratedMap(tf, 0.0, 1.0, cfg),
    )


def build_squeeze1(cp: ConstructionParams, I, cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
    """First squeeze: -eta_k (y - [y]_I) on [0,1] x L_I, contracting by e^-eta_k."""
    lat = Lattice(cp.k, tuple(I))
    tf = TimeField(Squeeze1Field(cp.k, lat.index, cp.eta, cp.n))
    return tf, _squeeze_map(tf, lat, 1.0 / (2 * cp.k), -cp.eta, cfg)


def build_squeeze2(cp: ConstructionParams, I, cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
    """Second squeeze: -alpha (y - [y]_I) on the stage-one cubes, contracting by e^-alpha."""
    alpha = cp.alpha_eff
    if cp.feasibility == "exact" and (not math.isfinite(alpha) or math.exp(-alpha) == 0.0):
        raise InfeasibleScale(f"exp(-alpha_k) underflows at k={cp.k}; evaluate in clamped mode")
    lat = Lattice(cp.k, tuple(I))
    tf = TimeField(Squeeze2Field(cp.k, lat.index, alpha, cp.w1, cp.n))
    return tf, _squeeze_map(tf, lat, cp.w1, -alpha, cfg)


def build_transport(cp: ConstructionParams, I, cfg: IntegratorConfig = DEFAULT_INTEGRATOR):
    """Transport along v(t, x, y) = xi_k^I(x - t, y); only x moves."""
    lat = Lattice(cp.k, tuple(I))
    field = AlongX(capacity_lattice_field(cp.capacity_profile(), lat))
    tf = TimeField(field, "x-shift")
    return tf, IntegratedMap(tf, 0.0, 1.0, cfg)


@dataclass
class StageBundle:
    index: tuple
    squeeze1: tuple[TimeField, FlowMap]
    squeeze2: tuple[TimeField, FlowMap]
    transport: tuple[TimeField, FlowMap]
    conjugated: FlowMap

    @property
    def squeeze(self) -> FlowMap:
        return compose(self.squeeze2[1], self.squeeze1[1])


def assemble_stage(cp: ConstructionParams, I, cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
                   transport: bool = True) -> StageBundle:
    s1 = build_squeeze1(cp, I, cfg)
    s2 = build_squeeze2(cp, I, cfg)
    tr = build_transport(cp, I, cfg)
    middle = [tr[1]] if transport else []
    conj = ComposedMap([s1[1].inverse(), s2[1].inverse(), *middle, s2[1], s1[1]])
    return StageBundle(tuple(I), s1, s2, tr, conj)


def assemble_phi_k(cp: ConstructionParams, cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
                   transport: bool = True, stages: bool = True) -> ComposedMap:
    """Phi_k = Phi_k^{2^m} o ... o Phi_k^1.

    ``transport=False`` drops every Theta_I and ``stages=False`` returns the
    identity; both exist as negative controls.
    """
    if not stages:
        return ComposedMap([])
    bundles = [assemble_stage(cp, I, cfg, transport) for I in index_order(cp.m)]
    return ComposedMap([b.conjugated for b in reversed(bundles)])


# -- cost accounting -----------------------------------------------------------

def analytic_entries(cp: ConstructionParams, C_a: float, C_b: float, effective: bool = False) -> dict:
    """Log-space cost bounds of the three stage fields.

    squeeze1:  C_a eta_k / k^(1-s)
    squeeze2:  C_a alpha_k exp(-(1-s) k^beta)
    transport: C_b k^m log(1/lambda_k)^((1-n)/p)

    With ``effective`` the squeeze rate and width actually used for
    pointwise evaluation replace alpha_k and lambda_k.
    """
    s, k = cp.sp.s, cp.k
    sq1 = math.log(C_a) + math.log(cp.eta) - (1 - s) * math.log(k)
    if effective:
        sq2 = math.log(C_a) + math.log(cp.alpha_eff) - (1 - s) * cp.eta
        tr = cp.m * math.log(k) + capacity_norm_bound(cp.capacity_profile(), cp.sp, C_b)
    else:
        sq2 = math.log(C_a) + cp.log_alpha - (1 - s) * cp.eta
        tr = math.log(C_b) + cp.m * math.log(k) + ((1 - cp.n) / cp.sp.p) * cp.log_neg_log_lambda
    return {"squeeze1": sq1, "squeeze2": sq2, "transport": tr}


def marginal_transport_entry(cp: ConstructionParams, C_b: float) -> float:
    """Transport entry at the marginal width lambda = exp(-k^p)."""
    return math.log(C_b) + cp.m * math.log(cp.k) + (1 - cp.n) * math.log(cp.k)


def cost_ledger(cp: ConstructionParams, C_a: float, C_b: float, measured: bool = False,
                norm_method: str | None = None, sampler: Sampler = DEFAULT_SAMPLER,
                cfg: IntegratorConfig = DEFAULT_INTEGRATOR) -> CostLedger:
    """Three paired entries per strip index (stage and inverse cost the same).

    ``measured`` attaches norm estimates of the actual (possibly clamped)
    stage fields: the first interpolation bound for the squeezes and the
    second for transport, unless ``norm_method`` forces one method.
    """
    ledger = CostLedger()
    entries = analytic_entries(cp, C_a, C_b)
    for I in index_order(cp.m):
        meas = {}
        if measured:
            tfs = {"squeeze1": build_squeeze1(cp, I, cfg)[0], "squeeze2": build_squeeze2(cp, I, cfg)[0],
                   "transport": build_transport(cp, I, cfg)[0]}
            for j, (name, tf) in enumerate(tfs.items()):
                method = norm_method or ("gn-bound-b" if name == "transport" else "gn-bound-a")
                meas[name] = path_length(tf, cp.sp, method, constants=(C_a, C_b),
                                         sampler=sampler.with_seed(sampler.seed + 17 * j))
        for name in ("squeeze1", "squeeze2", "transport"):
            label = f"I={''.join(map(str, I))}:{name}"
            ledger.add(label, entries[name], meas.get(name), paired=True)
    return ledger

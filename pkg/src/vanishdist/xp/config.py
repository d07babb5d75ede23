"""Experiment configuration, read from TOML.

Every key has a default, so an empty file is a valid config.  Layout::

    seed = 0
    probe_count = 10000
    probe_scheme = "low-discrepancy"   # or "grid"
    probe_margin = 1e-3
    norm_method = "gn-a"               # gn-a, gn-b or mc; unset pairs each stage with its bound
    output_path = "report.json"
    workers = 1

    [params]
    n = 2
    p = 3.0
    beta = 0.25
    k = [1, 2, 3]
    log10_lambda = -3.0                # optional width for pointwise evaluation
    lambda_mode = "pin"                # "pin" replaces lambda_k, "floor" takes the max

    [integrator]
    step_count = 256

    [sampler]
    n_samples = 1000000

    [constants]                        # optional; calibrated on demand otherwise
    C_a = 1.8
    C_b = 1.8

    [sweep]
    j_min = 3
    j_max = 20
    flow_k_max = 3
    measured = false
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from ..construction import ConstructionParams
from ..flows import IntegratorConfig
from ..norms import Sampler, SobolevParams

PROBE_SCHEMES = ("grid", "low-discrepancy")
CLI_NORM_METHODS = {"gn-a": "gn-bound-a", "gn-b": "gn-bound-b", "mc": "gagliardo-mc"}


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 2
    p: float = 3.0
    beta: float = 0.25
    k: tuple = (1, 2, 3)
    log10_lambda: float | None = -3.0
    lambda_mode: str = "pin"
    probe_count: int = 10_000
    probe_scheme: str = "low-discrepancy"
    probe_margin: float = 1e-3
    norm_method: str | None = None
    seed: int = 0
    output_path: str = "report.json"
    workers: int = 1
    step_count: int = 256
    n_samples: int = 10**6
    C_a: float | None = None
    C_b: float | None = None
    j_min: int = 3
    j_max: int = 20
    flow_k_max: int = 3
    measured: bool = False
    disable_transport: bool = False  # negative control
    disable_stages: bool = False     # negative control: Phi_k = Id

    def __post_init__(self):
        if self.probe_count < 100:
            raise ConfigError("probe_count must be >= 100")
        if self.probe_scheme not in PROBE_SCHEMES:
            raise ConfigError(f"probe_scheme must be one of {PROBE_SCHEMES}")
        if not 0 < self.probe_margin < 0.5:
            raise ConfigError("probe_margin must lie in (0, 1/2)")
        if self.norm_method is not None and self.norm_method not in CLI_NORM_METHODS:
            raise ConfigError(f"norm_method must be one of {tuple(CLI_NORM_METHODS)}")
        if self.lambda_mode not in ("pin", "floor"):
            raise ConfigError("lambda_mode must be 'pin' or 'floor'")
        if not self.k or any(int(v) != v or v < 1 for v in self.k):
            raise ConfigError("k must be a nonempty list of positive integers")
        if self.log10_lambda is not None and not self.log10_lambda < 0:
            raise ConfigError("log10_lambda must be negative")
        if not self.j_min <= self.j_max:
            raise ConfigError("j_min must not exceed j_max")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if (self.C_a is None) != (self.C_b is None):
            raise ConfigError("give both C_a and C_b or neither")
        try:
            SobolevParams(self.n, self.p)
            IntegratorConfig(step_count=self.step_count)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def sp(self) -> SobolevParams:
        return SobolevParams(self.n, self.p)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(step_count=self.step_count)

    @property
    def sampler(self) -> Sampler:
        return Sampler(n_samples=self.n_samples, seed=self.seed)

    @property
    def flow_norm_method(self) -> str | None:
        return None if self.norm_method is None else CLI_NORM_METHODS[self.norm_method]

    def construction(self, k: int, clamp: bool = True) -> ConstructionParams:
        """Construction parameters at scale k; ``clamp=False`` ignores the width setting."""
        try:
            if not clamp or self.log10_lambda is None:
                return ConstructionParams(self.sp, int(k), self.beta)
            log_lam = self.log10_lambda * math.log(10.0)
            if self.lambda_mode == "pin":
                return ConstructionParams(self.sp, int(k), self.beta, log_lambda_pin=log_lam)
            return ConstructionParams(self.sp, int(k), self.beta, log_lambda_floor=log_lam)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["k"] = list(self.k)
        return d


_SECTIONS = {
    None: {"seed", "probe_count", "probe_scheme", "probe_margin", "norm_method", "output_path", "workers"},
    "params": {"n", "p", "beta", "k", "log10_lambda", "lambda_mode"},
    "integrator": {"step_count"},
    "sampler": {"n_samples"},
    "constants": {"C_a", "C_b"},
    "sweep": {"j_min", "j_max", "flow_k_max", "measured"},
}


def _flatten(doc: dict) -> dict:
    flat = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in _SECTIONS or key is None:
                raise ConfigError(f"unknown section [{key}]")
            for sub, v in val.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key '{sub}' in [{key}]")
                flat[sub] = v
        elif key in _SECTIONS[None]:
            flat[key] = val
        else:
            raise ConfigError(f"unknown top-level key '{key}'")
    if "k" in flat:
        flat["k"] = tuple(flat["k"]) if isinstance(flat["k"], list) else (flat["k"],)
    return flat


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse TOML text; syntax errors carry the offending line."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        lines = text.splitlines()
        lineno = min(getattr(exc, "lineno", 0) or 0, len(lines))
        ctx = f"\n  line {lineno}: {lines[lineno - 1]}" if lineno else ""
        raise ConfigError(f"{source}: {exc}{ctx}") from exc
    try:
        return ExperimentConfig(**_flatten(doc))
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))

"""Run configuration: a flat TOML key/value file plus command-line overrides.

Example::

    sim.t_end = 100
    sim.dt_out = 0.5
    sim.seed = 42
    partition.mode = "dynamic"
    partition.policy = "population"
    partition.K = 10
    kappa.gene0 = "000000"

Keys are dotted; unknown keys are rejected so typos do not go unnoticed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamic import (DEFAULT_EPSILON, DynamicSetup, constant_policy, population_size_policy,
                      rate_policy)
from .engine import SimConfig
from .rts import ExtendedProgram
from .tdsha import KappaVector, bottom_family, compile_program, top_family


class ConfigError(ValueError):
    pass


_SIM_KEYS = {f.name for f in fields(SimConfig)}
POLICIES = ("population", "rate", "fixed")


@dataclass
class PartitionSpec:
    mode: str = "static"
    policy: str = "population"
    K: float | None = None
    Lambda: float | None = None
    dt: float | None = None
    epsilon: float = DEFAULT_EPSILON
    value: float | None = None  # for the fixed policy
    overrides: dict = field(default_factory=dict)  # (component, edge) -> constant f_e

    def validate(self):
        if self.mode not in ("static", "dynamic"):
            raise ConfigError(f"partition.mode must be static or dynamic, got {self.mode!r}")
        if self.mode == "static":
            return
        if self.policy not in POLICIES:
            raise ConfigError(f"partition.policy must be one of {', '.join(POLICIES)}, got {self.policy!r}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"partition.epsilon must be a finite positive number, got {self.epsilon!r}")
        if self.policy == "population" and (self.K is None or not self.K >= 0):
            raise ConfigError("population policy needs partition.K >= 0")
        if self.policy == "rate" and not (self.Lambda and self.Lambda > 0 and self.dt and self.dt > 0):
            raise ConfigError("rate policy needs partition.Lambda > 0 and partition.dt > 0")
        if self.policy == "fixed" and self.value is None:
            raise ConfigError("fixed policy needs partition.value")

    def build_policy(self, ext: ExtendedProgram):
        self.validate()
        if self.policy == "population":
            pol = population_size_policy(self.K, ext, self.epsilon)
        elif self.policy == "rate":
            pol = rate_policy(self.Lambda, self.dt, ext, self.epsilon)
        else:
            pol = constant_policy(self.value, ext, self.epsilon)
        return pol.override(self.overrides) if self.overrides else pol


def resolve_kappa(ext: ExtendedProgram, spec) -> KappaVector:
    """``bottom``, ``top``, a ``comp=bits,...`` string or mapping; missing components are bottom."""
    if spec is None or spec == "bottom":
        return bottom_family(ext)
    if spec == "top":
        return top_family(ext)
    given = KappaVector.parse(spec) if isinstance(spec, str) else KappaVector(spec)
    names = {r.component for r in ext.rts}
    unknown = set(given) - names
    if unknown:
        raise ConfigError(f"kappa names unknown component(s): {', '.join(sorted(unknown))}")
    bits = dict(bottom_family(ext))
    bits.update(given)
    for r in ext.rts:
        if len(bits[r.component]) != len(r.edges):
            raise ConfigError(f"kappa for {r.component} has {len(bits[r.component])} entries, "
                              f"its RTS has {len(r.edges)} edges")
    return KappaVector(bits)


def build_setup(ext: ExtendedProgram, partition: PartitionSpec, kappa=None):
    """A compiled Tdsha (static) or a DynamicSetup starting from ``kappa``."""
    partition.validate()
    k = resolve_kappa(ext, kappa)
    if partition.mode == "static":
        return compile_program(ext, k)
    return DynamicSetup(ext, partition.build_policy(ext), k)


@dataclass
class RunSpec:
    model: str | None = None
    sim: dict = field(default_factory=dict)
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    kappa: dict = field(default_factory=dict)
    kappa_text: str | None = None  # command-line kappa, wins over the file
    out: str = "."

    def sim_config(self, **overrides) -> SimConfig:
        kw = {**self.sim, **{k: v for k, v in overrides.items() if v is not None}}
        if "t_end" not in kw:
            raise ConfigError("sim.t_end is required")
        try:
            return SimConfig(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def kappa_string(self) -> str | None:
        if self.kappa_text:
            return self.kappa_text
        if not self.kappa:
            return None
        return ",".join(f"{k}={v}" for k, v in self.kappa.items())


def _flatten(d: Mapping, prefix="") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _num(key, v):
    if isinstance(v, str):
        try:
            return float(v)  # allows "inf"
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return v


def parse_config(text: str, validate: bool = True) -> RunSpec:
    """Parse a config file; ``validate=False`` defers checks until flags are merged."""
    try:
        flat = _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {exc}") from exc
    spec = RunSpec()
    part = spec.partition
    for key, v in flat.items():
        head, _, rest = key.partition(".")
        if key == "model":
            spec.model = str(v)
        elif key == "output.dir":
            spec.out = str(v)
        elif head == "sim" and rest in _SIM_KEYS:
            spec.sim[rest] = list(v) if rest == "times" else v
        elif head == "partition" and rest in ("mode", "policy"):
            setattr(part, rest, str(v))
        elif head == "partition" and rest in ("K", "Lambda", "dt", "epsilon", "value"):
            setattr(part, rest, _num(key, v))
        elif head == "kappa" and rest:
            spec.kappa[rest] = str(v)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if validate:
        part.validate()
    return spec


def load_config(path, validate: bool = True) -> RunSpec:
    return parse_config(Path(path).read_text(encoding="utf-8"), validate)

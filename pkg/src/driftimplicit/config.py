"""Experiment configuration and the shipped parameter presets.

A config file is TOML with an ``[experiment]`` table and one process table
named after the family::

    [experiment]
    process = "cir"
    horizon = 1.0
    ladder = [8, 16, 32, 64, 128, 256]
    reference_multiplier = 128
    paths = 10000
    p = 1.0
    seed = 20130901

    [cir]
    a = 1.0
    k = 1.0
    sigma = 0.5
    x0 = 1.0

``preset = "<name>"`` in ``[experiment]`` fills the process table from
:data:`PRESETS`; explicit keys override it.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .processes import (
    CevParams,
    CirParams,
    ProcessSpec,
    cev_spec,
    cir_spec,
    constant_diffusion,
    cos_diffusion,
    lamperti_spec,
)

__all__ = ["ConfigError", "ExperimentConfig", "Preset", "PRESETS", "FAMILIES", "load_config"]

FAMILIES = ("cir", "cev", "lamperti-builtin", "constant-diffusion")
SCHEMES = ("implicit", "euler")
SOLVERS = ("auto", "closed-form", "rootfind")

_PARAM_KEYS = {
    "cir": {"a", "k", "sigma", "x0"},
    "cev": {"a", "k", "sigma", "alpha", "x0"},
    "lamperti-builtin": {"name", "lam", "theta", "x0"},
    "constant-diffusion": {"sigma0", "lam", "theta", "x0"},
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class Preset:
    name: str
    process: str
    params: dict
    exercises: str
    description: str = ""


PRESETS = {
    p.name: p
    for p in [
        Preset("cir-order-one", "cir", {"a": 1.0, "k": 1.0, "sigma": 0.5, "x0": 1.0},
               "Theorem 2 regime", "a > sigma^2: strong order 1 for p < 4a/(3 sigma^2)"),
        Preset("cir-degraded", "cir", {"a": 1.0, "k": 1.0, "sigma": 1.3, "x0": 1.0},
               "Theorem 1 regime", "sigma^2 in (a, 2a): order at least 1/2"),
        Preset("cev-three-quarters", "cev",
               {"a": 1.0, "k": 1.0, "sigma": 0.3, "alpha": 0.75, "x0": 1.0},
               "CEV order 1", "Y = X^(1/4), order 1 for every p >= 1"),
        Preset("linear-drift", "constant-diffusion",
               {"sigma0": 2.0, "lam": 1.0, "theta": 0.0, "x0": 1.0},
               "Lamperti, constant diffusion", "f(y) = -y; implicit and Euler-Maruyama both order 1"),
        Preset("cos-diffusion", "lamperti-builtin",
               {"name": "cos-diffusion", "lam": 1.0, "theta": 0.0, "x0": 0.5},
               "Lamperti, bounded diffusion", "sigma(x) = 2 + cos x, b(x) = theta - lam sin x"),
    ]
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a strong-error experiment.

    ``workers`` and the output paths never change numerical results.
    """

    process: str
    params: dict
    horizon: float = 1.0
    ladder: tuple = (8, 16, 32, 64, 128, 256)
    reference_multiplier: int = 128
    paths: int = 10_000
    p: float = 1.0
    seed: int = 0
    tol: float = 1e-12
    scheme: str = "implicit"
    solver: str = "auto"
    batch_size: int = 256
    workers: int = 1
    out_dir: str = "."
    errors_csv: str = "errors.csv"
    fit_json: str = "fit.json"
    preset: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(int(n) for n in self.ladder))
        object.__setattr__(self, "params", dict(self.params))
        self.validate()

    @property
    def n_ref(self) -> int:
        return self.reference_multiplier * max(self.ladder)

    def validate(self):
        if self.process not in FAMILIES:
            raise ConfigError(f"unknown process {self.process!r}; expected one of {FAMILIES}")
        unknown = set(self.params) - _PARAM_KEYS[self.process]
        if unknown:
            raise ConfigError(f"unknown {self.process} parameter(s): {sorted(unknown)}")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.ladder or any(n < 1 for n in self.ladder):
            raise ConfigError("ladder must be a nonempty list of positive integers")
        if list(self.ladder) != sorted(set(self.ladder)):
            raise ConfigError("ladder must be strictly increasing")
        if self.reference_multiplier < 1:
            raise ConfigError("reference_multiplier must be >= 1")
        bad = [n for n in self.ladder if self.n_ref % n]
        if bad:
            raise ConfigError(f"ladder entries {bad} do not divide the reference n {self.n_ref}")
        if not self.p >= 1:
            raise ConfigError("moment order p must be >= 1")
        if self.paths < 1 or self.batch_size < 1 or self.workers < 1:
            raise ConfigError("paths, batch_size and workers must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def build_spec(self) -> ProcessSpec:
        """Process spec for this config; raises ``ParameterError`` on hypothesis violations."""
        prm = self.params
        try:
            if self.process == "cir":
                return cir_spec(CirParams(prm["a"], prm["k"], prm["sigma"], prm["x0"]))
            if self.process == "cev":
                return cev_spec(CevParams(prm["a"], prm["k"], prm["sigma"], prm["alpha"], prm["x0"]))
            if self.process == "constant-diffusion":
                return lamperti_spec(constant_diffusion(
                    prm["sigma0"], prm.get("lam", 1.0), prm.get("theta", 0.0), prm.get("x0", 1.0)))
            name = prm.get("name", "cos-diffusion")
            if name != "cos-diffusion":
                raise ConfigError(f"unknown built-in Lamperti process {name!r}")
            return lamperti_spec(cos_diffusion(prm.get("lam", 1.0), prm.get("theta", 0.0), prm.get("x0", 0.5)))
        except KeyError as err:
            raise ConfigError(f"missing {self.process} parameter {err.args[0]!r}") from None

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ladder"] = list(self.ladder)
        d["n_ref"] = self.n_ref
        return d


_EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"params"}


def load_config(path, **overrides) -> ExperimentConfig:
    """Parse a TOML config file; ``overrides`` replace ``[experiment]`` keys."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None

    exp = dict(raw.get("experiment", {}))
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown [experiment] key(s): {sorted(unknown)}")
    extra_tables = set(raw) - {"experiment"} - set(FAMILIES)
    if extra_tables:
        raise ConfigError(f"unknown table(s): {sorted(extra_tables)}")

    params = {}
    preset = exp.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; see `presets`")
        exp.setdefault("process", PRESETS[preset].process)
        params.update(PRESETS[preset].params)
    process = exp.get("process")
    if process is None:
        raise ConfigError("[experiment] needs `process` or `preset`")
    if process not in FAMILIES:
        raise ConfigError(f"unknown process {process!r}; expected one of {FAMILIES}")
    params.update(raw.get(process, {}))

    exp.update({k: v for k, v in overrides.items() if v is not None})
    if "out_dir" in exp:
        exp["out_dir"] = os.fspath(exp["out_dir"])
    exp["process"] = process
    try:
        return ExperimentConfig(params=params, **exp)
    except TypeError as err:
        raise ConfigError(str(err)) from None

"""TOML run configuration: parsing, range validation and model assembly.

Layout (every section optional except where a command needs it)::

    [model]
    d = 1
    q = 1
    p = 2.0
    drift  = { name = "linear", params = [0.0, 0.0, 0.0] }   # a x + c mean + k
    sigma  = { preset = "scaled-linear", params = [0.1] }
    theta  = { preset = "scaled-linear", params = [0.2] }
    init_x = { kind = "point", params = [0.0] }
    init_y = { kind = "discrete", atoms = [-1.0, 1.0], probs = [0.5, 0.5] }
    coupled_init = true

    [grid]
    T = 1.0
    M = 32
    M_list = [8, 16, 32, 64, 128]   # converge only
    M_ref = 512
    refine = 1

    [sampling]
    N = 16384
    seed = 0
    confidence = 0.99
    strikes = 33

    [output]
    directory = "out"
    formats = "both"                # csv | json | both

Command-specific sections are ``[simulate]``, ``[order]``, ``[converge]``,
``[dpp]``, ``[validate]`` and ``[experiment]``; see the README for their keys.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, LookupFailure, MkvError
from .model import DiffusionSpec, InitialLaw, MKVModel, TimeGrid, drift_lookup, preset_lookup

COMMANDS = ("simulate", "order-test", "converge", "dpp-verify", "experiment", "validate")
FORMATS = ("csv", "json", "both")
COMMAND_SECTIONS = ("simulate", "order", "converge", "dpp", "validate", "experiment")
SECTIONS = ("command", "model", "grid", "sampling", "output") + COMMAND_SECTIONS


def load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _num(section: dict, key: str, default, kind=float, lo=None, hi=None, lo_open=False, where=""):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}{key} must be a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{where}{key} must be an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{where}{key} must be finite")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{where}{key} = {v} is below the allowed range")
    if hi is not None and v > hi:
        raise ConfigError(f"{where}{key} = {v} is above the allowed range")
    return v


def _params(spec: dict, where: str) -> list[float]:
    p = spec.get("params", [])
    if not isinstance(p, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in p):
        raise ConfigError(f"{where}.params must be a list of numbers")
    return [float(v) for v in p]


def diffusion_from(spec: Any, d: int, q: int, T: float, where: str) -> DiffusionSpec:
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict) or "preset" not in spec:
        raise ConfigError(f"{where} needs a preset name")
    try:
        return preset_lookup(spec["preset"], _params(spec, where), d=d, q=q, T=T)
    except LookupFailure as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except MkvError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def law_from(spec: Any, d: int, where: str) -> InitialLaw:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where} needs a kind")
    kind = spec["kind"]
    try:
        if kind == "discrete":
            atoms, probs = spec.get("atoms"), spec.get("probs")
            if atoms is None or probs is None:
                raise ConfigError(f"{where}: discrete law needs atoms and probs")
            return InitialLaw.discrete(atoms, probs, d=d)
        return InitialLaw(kind, tuple(_params(spec, where)), d=d)
    except ConfigError:
        raise
    except MkvError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def model_from(section: dict, T: float = 1.0) -> MKVModel:
    where = "model."
    d = _num(section, "d", 1, int, lo=1, where=where)
    q = _num(section, "q", d, int, lo=1, where=where)
    p = _num(section, "p", 2.0, lo=2.0, where=where)
    dspec = section.get("drift", {"name": "zero"})
    if isinstance(dspec, str):
        dspec = {"name": dspec}
    try:
        drift = drift_lookup(dspec.get("name", "zero"), _params(dspec, "model.drift"), d=d)
    except MkvError as exc:
        raise ConfigError(f"model.drift: {exc}") from None
    if "sigma" not in section:
        raise ConfigError("model.sigma is required")
    sigma = diffusion_from(section["sigma"], d, q, T, "model.sigma")
    theta = diffusion_from(section.get("theta", section["sigma"]), d, q, T, "model.theta")
    ix = law_from(section.get("init_x", {"kind": "point", "params": [0.0]}), d, "model.init_x")
    iy = law_from(section.get("init_y", section.get("init_x", {"kind": "point", "params": [0.0]})),
                  d, "model.init_y")
    try:
        return MKVModel(drift, sigma, theta, ix, iy, d=d, q=q, p=p)
    except MkvError as exc:
        raise ConfigError(f"model: {exc}") from None


@dataclass
class RunConfig:
    command: str
    raw: dict
    model: MKVModel | None
    T: float
    M: int
    N: int
    seed: int
    confidence: float
    strikes: int
    refine: int
    coupled_init: bool
    out_dir: Path
    formats: str
    threads: int
    sections: dict = field(default_factory=dict)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.M)

    def section(self, name: str) -> dict:
        v = self.sections.get(name, {})
        if not isinstance(v, dict):
            raise ConfigError(f"[{name}] must be a table")
        return v

    def resolved(self) -> dict:
        """The config as run: the input tables plus every default and override applied.

        The thread count is left out; results do not depend on it.
        """
        out = copy.deepcopy(self.raw)
        out["command"] = self.command
        out.setdefault("grid", {}).update({"T": self.T, "M": self.M, "refine": self.refine})
        out.setdefault("sampling", {}).update({"N": self.N, "seed": self.seed, "confidence": self.confidence,
                                               "strikes": self.strikes})
        out.setdefault("output", {}).update({"directory": str(self.out_dir), "formats": self.formats})
        if "model" in out:
            out["model"].setdefault("coupled_init", self.coupled_init)
        return out


def build_run_config(command: str, raw: dict, *, seed: int | None = None, out: str | None = None,
                     fmt: str | None = None, threads: int = 1, needs_model: bool = True) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s) {sorted(unknown)}")
    if "command" in raw and raw["command"] != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    raw = copy.deepcopy(raw)
    g = raw.get("grid", {})
    s = raw.get("sampling", {})
    o = raw.get("output", {})
    for name, sec in (("grid", g), ("sampling", s), ("output", o)):
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
    T = _num(g, "T", 1.0, lo=0.0, lo_open=True, where="grid.")
    M = _num(g, "M", 32, int, lo=1, where="grid.")
    refine = _num(g, "refine", 1, int, lo=1, where="grid.")
    N = _num(s, "N", 2**14, int, lo=1, where="sampling.")
    cfg_seed = _num(s, "seed", 0, int, lo=0, hi=2**64 - 1, where="sampling.")
    conf = _num(s, "confidence", 0.99, lo=0.0, hi=1.0, lo_open=True, where="sampling.")
    if conf >= 1.0:
        raise ConfigError("sampling.confidence must be below 1")
    strikes = _num(s, "strikes", 33, int, lo=1, where="sampling.")
    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg_seed = int(seed)
    formats = fmt if fmt is not None else o.get("formats", "both")
    if formats not in FORMATS:
        raise ConfigError(f"output format must be one of {FORMATS}")
    out_dir = Path(out if out is not None else o.get("directory", "out"))
    model = None
    msec = raw.get("model")
    if msec is not None:
        if not isinstance(msec, dict):
            raise ConfigError("[model] must be a table")
        model = model_from(msec, T)
    elif needs_model:
        raise ConfigError(f"command {command!r} needs a [model] section")
    coupled = bool(msec.get("coupled_init", True)) if msec else True
    if model is not None and N < 2 and model.uses_measure():
        raise ConfigError("sampling.N must be at least 2 when coefficients read the measure")
    sections = {k: raw.get(k, {}) for k in COMMAND_SECTIONS}
    return RunConfig(command, raw, model, T, M, N, cfg_seed, conf, strikes, refine, coupled,
                     out_dir, formats, int(threads), sections)

"""Three-process comparisons along a chain sigma1 <= theta1 <= sigma2 <= theta2.

Bounding compares (sigma1, theta1, sigma2); partitioning compares
(theta1, sigma2, theta2).  Every process is driven by the same Brownian
increments and the same initial uniforms, so a process shared by both
experiments yields identical estimates, and margins are paired differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DimensionError
from ..functionals import PathFunctional, average_call, running_max, terminal_abs, terminal_call, terminal_square
from ..model import DiffusionSpec, DriftSpec, InitialLaw, MKVModel, TimeGrid
from ..order import Margin, bonferroni_z
from ..simulate import PathBundle, simulate_paths
from ..validate import ProbeConfig, dominance_check

LABELS = ("sigma1", "theta1", "sigma2", "theta2")
BOUNDING = ("sigma1", "theta1", "sigma2")
PARTITIONING = ("theta1", "sigma2", "theta2")


def default_battery() -> tuple[PathFunctional, ...]:
    return (terminal_call(0.0), terminal_abs(), terminal_square(), running_max(), average_call(0.0))


@dataclass(frozen=True)
class ChainConfig:
    coefficients: tuple
    initial: tuple
    drift: DriftSpec
    grid: TimeGrid
    N: int = 2**14
    seed: int = 0
    functionals: tuple = field(default_factory=default_battery)
    conf: float = 0.99
    r: int = 1
    probe: ProbeConfig = field(default_factory=lambda: ProbeConfig(n_samples=400))
    experiment: str = "chain"

    def __post_init__(self):
        if len(self.coefficients) != 4:
            raise ConfigError("a chain needs four coefficients sigma1, theta1, sigma2, theta2")
        laws = self.initial if len(self.initial) != 1 else tuple(self.initial) * 4
        if len(laws) != 4:
            raise ConfigError("give one initial law or one per process")
        object.__setattr__(self, "initial", tuple(laws))
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        object.__setattr__(self, "functionals", tuple(self.functionals))
        if self.N < 2:
            raise ConfigError("N must be at least 2")

    def coefficient(self, label: str) -> DiffusionSpec:
        return self.coefficients[LABELS.index(label)]

    def law(self, label: str) -> InitialLaw:
        return self.initial[LABELS.index(label)]

    def model(self, label: str) -> MKVModel:
        c = self.coefficient(label)
        law = self.law(label)
        return MKVModel(self.drift, c, c, law, law, d=c.d, q=c.q)


def check_chain(cfg: ChainConfig, labels: Sequence[str] = LABELS) -> list[dict]:
    """Sampled matrix order and exact initial-law order for each consecutive pair."""
    from ..order import strassen_lp_test

    rows = []
    for lo, hi in zip(labels[:-1], labels[1:]):
        a, b = cfg.coefficient(lo), cfg.coefficient(hi)
        if (a.d, a.q) != (b.d, b.q):
            raise DimensionError(f"{lo} and {hi} have different shapes")
        pair = MKVModel(cfg.drift, a, b, cfg.law(lo), cfg.law(hi), d=a.d, q=a.q)
        res = dominance_check(pair, ProbeConfig(**{**cfg.probe.__dict__, "d": a.d}))
        if not res.passed:
            raise ConfigError(f"coefficient chain broken: {lo} is not dominated by {hi} "
                              f"(worst margin {res.worst:.3g} at {res.witness})")
        ma, mb = cfg.law(lo).measure(), cfg.law(hi).measure()
        init = "not checked"
        if ma is not None and mb is not None:
            v = strassen_lp_test(ma, mb)
            if v.dominated != "yes":
                raise ConfigError(f"initial laws of {lo} and {hi} are not in convex order")
            init = "ordered"
        rows.append({"pair": [lo, hi], "matrix_margin": res.worst, "initial": init})
    return rows


class ChainProcesses:
    """Lazy simulation cache keyed by process label."""

    def __init__(self, cfg: ChainConfig):
        self.cfg = cfg
        self._paths: dict[str, PathBundle] = {}

    def __getitem__(self, label: str) -> PathBundle:
        if label not in self._paths:
            c = self.cfg
            bundle, _ = simulate_paths(c.model(label), c.grid, c.N, c.seed, "X", c.r,
                                       noise_tag="B", init_tag="init", experiment=c.experiment)
            self._paths[label] = bundle
        return self._paths[label]


def _gaussian_oracle(cfg: ChainConfig, label: str, F: PathFunctional) -> float | None:
    """Closed form E F(X_T) for zero drift, constant scalar volatility and atomic start."""
    c = cfg.coefficient(label)
    law = cfg.law(label)
    drift_zero = cfg.drift.kind in ("linear", "zero") and all(v == 0 for v in cfg.drift.params)
    if F.oracle is None or F.terminal is None or c.kind != "constant" or c.d != 1 or not drift_zero:
        return None
    if not law.is_atomic:
        return None
    sd = abs(c.params[0]) * np.sqrt(cfg.grid.T)
    vals = [F.oracle(float(a[0]), sd) for a in law.atoms]
    if any(v is None for v in vals):
        return None
    return float(np.dot(law.probs, vals))


@dataclass(frozen=True)
class ChainReport:
    kind: str
    labels: tuple
    estimates: dict
    margins: tuple
    rows: tuple
    chain: tuple
    conf: float
    oracle_tolerance: float = 3.0

    @property
    def passed(self) -> bool:
        return not any(m.rejected for m in self.margins)

    @property
    def oracle_passed(self) -> bool | None:
        zs = [r["oracle_z"] for r in self.rows if r["oracle_z"] is not None]
        if not zs:
            return None
        return all(abs(z) <= self.oracle_tolerance for z in zs)

    def table(self) -> tuple[list[str], list[list]]:
        cols = ["functional", "inequality", "estimate", "stderr", "threshold", "oracle", "oracle_z"]
        return cols, [[r[c] for c in cols] for r in self.rows]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "labels": list(self.labels), "estimates": self.estimates,
                "margins": list(self.rows), "chain": list(self.chain), "confidence": self.conf,
                "passed": self.passed, "oracle_passed": self.oracle_passed}


def _three_process(kind: str, labels: tuple, cfg: ChainConfig, procs: ChainProcesses | None) -> ChainReport:
    chain = check_chain(cfg, labels)
    procs = ChainProcesses(cfg) if procs is None else procs
    n_tests = 2 * len(cfg.functionals)
    z = bonferroni_z(cfg.conf, n_tests)
    estimates, margins, rows = {}, [], []
    for F in cfg.functionals:
        if F.convex is not True:
            raise ConfigError(f"functional {F.name} is not declared convex")
        vals = {}
        for lab in labels:
            b = procs[lab]
            vals[lab] = F(b.paths, b.times)
        estimates[F.name] = {
            lab: {"mean": float(v.mean()), "stderr": float(v.std(ddof=1) / np.sqrt(len(v))),
                  "oracle": _gaussian_oracle(cfg, lab, F)}
            for lab, v in vals.items()
        }
        for ineq, (lo, hi) in (("lower", labels[:2]), ("upper", labels[1:])):
            diff = vals[hi] - vals[lo]
            est = float(diff.mean())
            se = float(diff.std(ddof=1) / np.sqrt(len(diff)))
            m = Margin(f"{F.name}:{lo}<={hi}", est, se, z * se)
            margins.append(m)
            o_lo, o_hi = estimates[F.name][lo]["oracle"], estimates[F.name][hi]["oracle"]
            oracle = None if o_lo is None or o_hi is None else o_hi - o_lo
            oz = None
            if oracle is not None:
                oz = (est - oracle) / se if se > 0 else (0.0 if abs(est - oracle) < 1e-12 else float("inf"))
            rows.append({"functional": F.name, "inequality": f"{lo}<={hi}", "estimate": est,
                         "stderr": se, "threshold": z * se, "rejected": m.rejected,
                         "oracle": oracle, "oracle_z": oz})
    return ChainReport(kind, labels, estimates, tuple(margins), tuple(rows), tuple(chain), cfg.conf)


def bounding_experiment(cfg: ChainConfig, processes: ChainProcesses | None = None) -> ChainReport:
    """E F(X^sigma1) <= E F(Y^theta1) <= E F(X^sigma2) for each functional in the battery."""
    return _three_process("bounding", BOUNDING, cfg, processes)


def partitioning_experiment(cfg: ChainConfig, processes: ChainProcesses | None = None) -> ChainReport:
    """E F(Y^theta1) <= E F(X^sigma2) <= E F(Y^theta2) for each functional in the battery."""
    return _three_process("partitioning", PARTITIONING, cfg, processes)

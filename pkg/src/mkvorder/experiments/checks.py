"""Step-by-step checks on coupled X/Y ensembles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import MKVModel, TimeGrid
from ..order import call_function_test_1d
from ..simulate import coupled_simulate


@dataclass(frozen=True)
class StepRow:
    m: int
    t: float
    gap: float
    stderr: float
    z: float
    ok: bool

    def to_dict(self) -> dict:
        return {"m": self.m, "t": self.t, "gap": self.gap, "stderr": self.stderr, "z": self.z, "ok": self.ok}


@dataclass(frozen=True)
class StepReport:
    kind: str
    rows: tuple
    k: float | None = None
    conf: float | None = None
    verdicts: tuple = ()

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    def failures(self) -> list[int]:
        return [r.m for r in self.rows if not r.ok]

    def table(self) -> tuple[list[str], list[list]]:
        cols = ["m", "t", "gap", "stderr", "z", "ok"]
        return cols, [[getattr(r, c) for c in cols] for r in self.rows]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "k": self.k, "confidence": self.conf, "passed": self.passed,
               "rows": [r.to_dict() for r in self.rows], "failures": self.failures()}
        if self.verdicts:
            out["verdicts"] = [v.to_dict() for v in self.verdicts]
        return out


def mean_preservation_check(model: MKVModel, grid: TimeGrid, N: int, seed: int = 0, k: float = 4.0,
                            coupled_init: bool = True, experiment="mean-check") -> StepReport:
    """|mean X_m - mean Y_m| <= k * (paired stderr) at every step.

    A zero stderr demands an exact match up to rounding, so unequal
    deterministic starts are reported as violations.
    """
    xs, ys = coupled_simulate(model, grid, N, seed, coupled_init, experiment)
    rows = []
    for ex, ey in zip(xs, ys):
        diff = ex.states - ey.states
        gap_v = diff.mean(axis=0)
        gap = float(np.linalg.norm(gap_v))
        se = float(np.linalg.norm(diff.std(axis=0, ddof=1)) / np.sqrt(N)) if N > 1 else 0.0
        scale = 1e-12 * max(1.0, float(np.abs(ex.states).max()), float(np.abs(ey.states).max()))
        if se > 0:
            z = gap / se
            ok = gap <= k * se + scale
        else:
            z = 0.0 if gap <= scale else float("inf")
            ok = gap <= scale
        rows.append(StepRow(ex.m, ex.t, gap, se, float(z), bool(ok)))
    return StepReport("mean-preservation", tuple(rows), k=k)


def marginal_propagation_check(model: MKVModel, grid: TimeGrid, N: int, seed: int = 0, strikes: int = 33,
                               conf: float = 0.99, coupled_init: bool = True,
                               experiment="marginal-check") -> StepReport:
    """call_function_test_1d(X_m, Y_m) at every step; each step at its own confidence."""
    if model.d != 1:
        from ..errors import DimensionError

        raise DimensionError("marginal propagation check is one-dimensional")
    xs, ys = coupled_simulate(model, grid, N, seed, coupled_init, experiment)
    rows, verdicts = [], []
    for ex, ey in zip(xs, ys):
        v = call_function_test_1d(ex.states[:, 0], ey.states[:, 0], strikes, conf, paired=True)
        w = v.worst()
        z = (w.estimate / w.stderr) if (w is not None and w.stderr > 0) else 0.0
        rows.append(StepRow(ex.m, ex.t, float(w.estimate) if w else 0.0, float(w.stderr) if w else 0.0,
                            float(z), v.not_rejected))
        verdicts.append(v)
    return StepReport("marginal-propagation", tuple(rows), conf=conf, verdicts=tuple(verdicts))

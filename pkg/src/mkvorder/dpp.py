"""Backward dynamic programming on a one-dimensional state grid.

The fields are V_m(x) with V_M = f_M and V_m = f_m + Q(V_{m+1}), where

    Q(phi)(x, mu, u) = E phi(x + h b(t_m, x, mu) + u Z),   Z ~ N(0, 1),

is evaluated by Gauss-Hermite quadrature and u is sqrt(h) times the X or Y
diffusion coefficient at (t_m, x, mu_m).  For a separable functional
F = sum_m f_m(x_m) the value along a path is sum_{i<m} f_i(x_i) + V_m(x_m).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import DimensionError, DomainError, RangeError
from .functionals import PathFunctional
from .model import MeasureSummary, MKVModel, TimeGrid
from .rng import StreamSpec, dominating_gaussian_coupling
from .simulate import simulate_particle_system
from .validate import CheckResult, ValidationReport


@dataclass(frozen=True)
class QuadratureRule:
    """Expectation rule for a standard normal: E f(Z) ~ sum_k w_k f(z_k)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if z.shape != w.shape or z.ndim != 1:
            raise DimensionError("nodes and weights must be vectors of equal length")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("quadrature weights must sum to 1")
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "weights", w)

    @classmethod
    def gauss_hermite(cls, n: int = 32) -> "QuadratureRule":
        z, w = hermegauss(n)
        w = w / w.sum()
        # enforce exact symmetry so odd moments cancel pairwise
        z = 0.5 * (z - z[::-1])
        w = 0.5 * (w + w[::-1])
        return cls(z, w)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def moment(self, k: int) -> float:
        return float(self.weights @ self.nodes**k)


@dataclass(frozen=True)
class SeparableFunctional:
    """F(x_0..x_M) = sum_{m<M} running(m, x_m) + terminal(x_M), state arrays of shape (N,)."""

    terminal: Callable[[np.ndarray], np.ndarray]
    running: Callable[[int, np.ndarray], np.ndarray] | None = None
    convex: bool = True
    name: str = "separable"

    def run(self, m: int, x: np.ndarray) -> np.ndarray:
        if self.running is None:
            return np.zeros_like(x)
        return np.asarray(self.running(m, x), dtype=float)

    def path_value(self, paths: np.ndarray) -> np.ndarray:
        """paths of shape (N, M+1)."""
        M = paths.shape[1] - 1
        out = np.asarray(self.terminal(paths[:, M]), dtype=float).copy()
        for m in range(M):
            out += self.run(m, paths[:, m])
        return out


def as_separable(F) -> SeparableFunctional:
    if isinstance(F, SeparableFunctional):
        return F
    if isinstance(F, PathFunctional):
        if F.terminal is None:
            raise DomainError(f"{F.name} is not a terminal-value functional")
        term = F.terminal
        return SeparableFunctional(lambda x: term(np.asarray(x, float).reshape(-1, 1)),
                                   convex=bool(F.convex), name=F.name)
    if callable(F):
        return SeparableFunctional(F)
    raise DomainError("unsupported functional type")


@dataclass(frozen=True, eq=False)
class BackwardValueField:
    m: int
    xgrid: np.ndarray
    values: np.ndarray
    tag: str = "Phi"
    flow: tuple = field(default=(), repr=False)
    exact: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        g = np.asarray(self.xgrid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise DimensionError("grid and values must be vectors of equal length")
        if np.any(np.diff(g) <= 0):
            raise DomainError("state grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise RangeError("field values must be finite")

    @property
    def slopes(self) -> tuple[float, float]:
        g, v = self.xgrid, self.values
        return (v[1] - v[0]) / (g[1] - g[0]), (v[-1] - v[-2]) / (g[-1] - g[-2])

    def __call__(self, x) -> np.ndarray:
        if self.exact is not None:
            return np.asarray(self.exact(np.asarray(x, dtype=float)), dtype=float)
        return interpolate_convex(self.xgrid, self.values, x)


def interpolate_convex(g: np.ndarray, v: np.ndarray, x) -> np.ndarray:
    """Piecewise-linear interpolation; linear extrapolation with the end-cell slopes."""
    x = np.asarray(x, dtype=float)
    out = np.interp(x, g, v)
    lo, hi = x < g[0], x > g[-1]
    if lo.any():
        out = np.where(lo, v[0] + (x - g[0]) * (v[1] - v[0]) / (g[1] - g[0]), out)
    if hi.any():
        out = np.where(hi, v[-1] + (x - g[-1]) * (v[-1] - v[-2]) / (g[-1] - g[-2]), out)
    return out


def _summaries(flow, p: float) -> list[MeasureSummary]:
    out = []
    for item in flow:
        if isinstance(item, MeasureSummary):
            out.append(item)
        elif hasattr(item, "summary") and not callable(item.summary):
            out.append(item.summary)
        elif hasattr(item, "support"):
            out.append(MeasureSummary.from_measure(item, p))
        else:
            out.append(MeasureSummary.from_samples(np.asarray(item), p))
    return out


def _flow_items(flow):
    return flow.measures if hasattr(flow, "measures") else flow


def q_operator(phi, x, mu_summary: MeasureSummary, u, rule: QuadratureRule, model: MKVModel,
               m: int, grid: TimeGrid) -> np.ndarray:
    """sum_k w_k phi(b_m(x, mu) + u z_k) with b_m(x, mu) = x + h b(t_m, x, mu)."""
    if m >= grid.M:
        raise DomainError("Q is defined for m < M")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = x.reshape(-1)
    bm = xv + grid.h * model.drift(grid.t(m), xv[:, None], mu_summary.mean)[:, 0]
    uv = np.broadcast_to(np.asarray(u, dtype=float), xv.shape)
    pts = bm[:, None] + uv[:, None] * rule.nodes[None, :]
    vals = np.asarray(phi(pts.reshape(-1)), dtype=float).reshape(pts.shape)
    out = vals @ rule.weights
    return out[0] if scalar else out


def default_state_grid(flows: Sequence, n: int = 513, width: float = 8.0, p: float = 2.0) -> np.ndarray:
    """Uniform grid over pooled mean +/- width * (largest node standard deviation)."""
    means, sds = [], []
    for flow in flows:
        for s in _summaries(_flow_items(flow), p):
            means.append(float(s.mean[0]))
            sds.append(float(np.sqrt(max(s.m2 - float(s.mean[0]) ** 2, 0.0))))
    center = float(np.mean(means))
    sd = max(sds) if sds and max(sds) > 0 else 1.0
    return np.linspace(center - width * sd, center + width * sd, n)


def phi_recursion(F, flow, model: MKVModel, grid: TimeGrid, rule: QuadratureRule | None = None,
                  xgrid: np.ndarray | None = None, coefficient: str = "sigma") -> list[BackwardValueField]:
    """Backward fields indexed by m = 0..M (``fields[m]``), driven by sigma or theta."""
    if model.d != 1 or model.q != 1:
        raise DimensionError("value fields are one-dimensional")
    rule = QuadratureRule.gauss_hermite() if rule is None else rule
    F = as_separable(F)
    summ = _summaries(_flow_items(flow), model.p)
    if len(summ) != grid.M + 1:
        raise DomainError(f"flow has {len(summ)} nodes, grid needs {grid.M + 1}")
    g = default_state_grid([summ]) if xgrid is None else np.asarray(xgrid, dtype=float)
    coef = model.sigma if coefficient == "sigma" else model.theta if coefficient == "theta" else None
    if coef is None:
        raise DomainError("coefficient must be 'sigma' or 'theta'")
    tag = "Phi" if coefficient == "sigma" else "Psi"
    vals = np.asarray(F.terminal(g), dtype=float).reshape(g.shape)
    fields = [None] * (grid.M + 1)
    fields[grid.M] = BackwardValueField(grid.M, g, vals, tag, tuple(summ[grid.M:]), exact=F.terminal)
    nxt = fields[grid.M]
    for m in range(grid.M - 1, -1, -1):
        u = np.sqrt(grid.h) * coef.scalar(grid.t(m), g, summ[m])
        interp = (lambda v, f=nxt: f(v)) if m == grid.M - 1 else (lambda v, f=nxt: interpolate_convex(f.xgrid, f.values, v))
        with np.errstate(over="ignore", invalid="ignore"):
            vals = F.run(m, g) + q_operator(interp, g, summ[m], u, rule, model, m, grid)
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.argmax(bad))
            raise RangeError(f"quadrature overflow at step {m}, grid point x={g[i]!r}")
        nxt = BackwardValueField(m, g, vals, tag, tuple(summ[m:]))
        fields[m] = nxt
    return fields


def psi_recursion(F, flow, model: MKVModel, grid: TimeGrid, rule: QuadratureRule | None = None,
                  xgrid: np.ndarray | None = None) -> list[BackwardValueField]:
    return phi_recursion(F, flow, model, grid, rule, xgrid, coefficient="theta")


def second_differences(field: BackwardValueField) -> np.ndarray:
    g, v = field.xgrid, field.values
    dv = np.diff(v) / np.diff(g)
    return np.diff(dv) * 0.5 * (g[2:] - g[:-2])


def _scale(fields) -> float:
    return max(1.0, max(float(np.abs(f.values).max()) for f in fields))


def verify_structural_lemmas(F, model: MKVModel, grid: TimeGrid, flow_a, flow_b=None,
                             rule: QuadratureRule | None = None, xgrid: np.ndarray | None = None,
                             u_grid: Sequence[float] = (0.0, 0.25, 0.5, 1.0), tol: float = 1e-9) -> ValidationReport:
    """Convexity of every field, Phi <= Psi, monotonicity of Phi in the flow
    (when ``flow_b`` dominating ``flow_a`` is given) and the Jensen-type
    properties of Q: minimal at u = 0 and non-decreasing in |u|."""
    rule = QuadratureRule.gauss_hermite() if rule is None else rule
    flows = [flow_a] + ([flow_b] if flow_b is not None else [])
    g = default_state_grid(flows) if xgrid is None else np.asarray(xgrid, dtype=float)
    phi = phi_recursion(F, flow_a, model, grid, rule, g)
    psi = psi_recursion(F, flow_a, model, grid, rule, g)
    scale = _scale(phi + psi)
    thr = -tol * scale
    checks = []

    for name, fields in (("phi-convex", phi), ("psi-convex", psi)):
        worst, wit = np.inf, {}
        for f in fields:
            sd = second_differences(f)
            i = int(np.argmin(sd))
            if sd[i] < worst:
                worst, wit = float(sd[i]), {"m": f.m, "x": float(g[i + 1])}
        checks.append(CheckResult(name, worst >= thr, worst, thr, wit))

    worst, wit = np.inf, {}
    for a, b in zip(phi, psi):
        d = b.values - a.values
        i = int(np.argmin(d))
        if d[i] < worst:
            worst, wit = float(d[i]), {"m": a.m, "x": float(g[i])}
    checks.append(CheckResult("phi-le-psi", worst >= thr, worst, thr, wit))

    if flow_b is not None:
        phib = phi_recursion(F, flow_b, model, grid, rule, g)
        worst, wit = np.inf, {}
        for a, b in zip(phi, phib):
            d = b.values - a.values
            i = int(np.argmin(d))
            if d[i] < worst:
                worst, wit = float(d[i]), {"m": a.m, "x": float(g[i])}
        checks.append(CheckResult("phi-monotone-in-flow", worst >= thr, worst, thr, wit))

    us = np.sort(np.abs(np.asarray(u_grid, dtype=float)))
    summ = _summaries(_flow_items(flow_a), model.p)
    xs = g[:: max(1, len(g) // 32)]
    worst_mono, wit_mono = np.inf, {}
    worst_min, wit_min = np.inf, {}
    for m in range(grid.M):
        f = phi[m + 1]
        q = np.array([q_operator(f, xs, summ[m], u, rule, model, m, grid) for u in us])
        sc = max(1.0, float(np.abs(q).max()))
        inc = np.diff(q, axis=0) / sc
        if inc.size and inc.min() < worst_mono:
            j = np.unravel_index(np.argmin(inc), inc.shape)
            worst_mono = float(inc.min())
            wit_mono = {"m": m, "x": float(xs[j[1]]), "u": [float(us[j[0]]), float(us[j[0] + 1])]}
        q0 = q_operator(f, xs, summ[m], 0.0, rule, model, m, grid)
        d0 = (q - q0[None, :]).min() / sc
        if d0 < worst_min:
            worst_min, wit_min = float(d0), {"m": m}
    checks.append(CheckResult("q-monotone-in-u", worst_mono >= -tol, worst_mono, -tol, wit_mono))
    checks.append(CheckResult("q-minimal-at-zero", worst_min >= -tol, worst_min, -tol, wit_min))
    return ValidationReport(checks)


def jensen_lemma_mc(phi: Callable[[np.ndarray], np.ndarray], x: np.ndarray, u1: np.ndarray, u2: np.ndarray,
                    n: int, seed: int = 0) -> dict:
    """Monte Carlo check of E phi(x + u1 Z) <= E phi(x + u2 Z) for u1 ⪯ u2 in any dimension."""
    m1, m2 = dominating_gaussian_coupling(u1, u2, StreamSpec(seed, "jensen"), n)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    d = np.asarray(phi(x + m2), dtype=float) - np.asarray(phi(x + m1), dtype=float)
    est = float(d.mean())
    se = float(d.std(ddof=1) / np.sqrt(n))
    return {"margin": est, "stderr": se, "ok": est >= -4.0 * se}


@dataclass
class MartingaleRow:
    m: int
    gap: float
    stderr: float
    within: bool

    def to_dict(self) -> dict:
        return {"m": self.m, "gap": self.gap, "stderr": self.stderr, "within": self.within}


@dataclass
class MartingaleReport:
    rows: list
    k_sigma: float = 4.0
    fields: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.within for r in self.rows)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "k_sigma": self.k_sigma, "rows": [r.to_dict() for r in self.rows]}


def martingale_check(model: MKVModel, grid: TimeGrid, N: int, seed: int, F, rule: QuadratureRule | None = None,
                     xgrid: np.ndarray | None = None, steps: Sequence[int] | None = None,
                     which: str = "X", k_sigma: float = 4.0) -> MartingaleReport:
    """Compare the value process along simulated particles with the realised functional.

    The fields use the simulated empirical flow; each row reports the mean of
    F(X_0..X_M) - Phi_m(X_0..X_m) with its standard error.
    """
    ens = simulate_particle_system(model, grid, N, seed, which)
    F = as_separable(F)
    coefficient = "sigma" if which == "X" else "theta"
    fields = phi_recursion(F, ens, model, grid, rule, xgrid, coefficient)
    paths = np.stack([e.states[:, 0] for e in ens], axis=1)
    target = F.path_value(paths)
    steps = range(grid.M + 1) if steps is None else steps
    rows = []
    past = np.zeros(N)
    running = [F.run(m, paths[:, m]) for m in range(grid.M)]
    cum = np.concatenate([np.zeros((N, 1)), np.cumsum(np.column_stack(running), axis=1)], axis=1) if running else np.zeros((N, 1))
    for m in steps:
        past = cum[:, m]
        val = past + fields[m](paths[:, m])
        diff = target - val
        gap = float(diff.mean())
        se = float(diff.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0
        rows.append(MartingaleRow(int(m), gap, se, abs(gap) <= k_sigma * se or gap == 0.0))
    return MartingaleReport(rows, k_sigma, fields)


def fields_table(phi: Sequence[BackwardValueField], psi: Sequence[BackwardValueField]):
    """Rows (m, x, Phi, Psi) for CSV export."""
    rows = []
    for a, b in zip(phi, psi):
        for x, u, v in zip(a.xgrid, a.values, b.values):
            rows.append((a.m, float(x), float(u), float(v)))
    return ["m", "x", "phi", "psi"], rows

"""Sampled checks of the structural assumptions on a model pair.

Nothing here is a proof.  Each check draws random probe points inside a box,
evaluates the coefficients and records the worst case it saw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measure import DiscreteMeasure, mean_preserving_spread, wasserstein
from .model import DiffusionSpec, MeasureSummary, MKVModel, matrix_order_margin
from .rng import StreamSpec, uniform_block


@dataclass(frozen=True)
class ProbeConfig:
    n_samples: int = 1000
    box: float = 2.0
    seed: int = 0
    n_atoms: int = 6
    T: float = 1.0
    tol: float = 1e-9
    d: int = 1


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    threshold: float | None = None
    witness: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst": float(self.worst),
            "threshold": None if self.threshold is None else float(self.threshold),
            "witness": self.witness,
            "note": self.note,
        }


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


class _Probe:
    """Deterministic supply of probe draws; each call uses a fresh stream step."""

    def __init__(self, cfg: ProbeConfig):
        self.cfg = cfg
        self._step = 0

    def uniform(self, rows: int, cols: int) -> np.ndarray:
        self._step += 1
        return uniform_block(StreamSpec(self.cfg.seed, "validate", "probe", 0, self._step), rows, cols)

    def points(self, n: int, radius: float | None = None) -> np.ndarray:
        r = self.cfg.box if radius is None else radius
        return r * (2.0 * self.uniform(n, self.cfg.d) - 1.0)

    def times(self, n: int) -> np.ndarray:
        return self.cfg.T * self.uniform(n, 1)[:, 0]

    def measure(self, radius: float | None = None) -> DiscreteMeasure:
        k = self.cfg.n_atoms
        x = self.points(k, radius)
        w = self.uniform(k, 1)[:, 0] + 0.1
        return DiscreteMeasure(x, w / w.sum())


def _op_norm(A: np.ndarray) -> np.ndarray:
    if A.shape[-2:] == (1, 1):
        return np.abs(A[..., 0, 0])
    return np.linalg.norm(A, ord=2, axis=(-2, -1))


def _summary(mu: DiscreteMeasure, p: float) -> MeasureSummary:
    return MeasureSummary.from_measure(mu, p)


def _drift_affine(model: MKVModel, pr: _Probe) -> CheckResult:
    n = pr.cfg.n_samples
    x, y = pr.points(n), pr.points(n)
    lam = pr.uniform(n, 1)
    t = pr.times(n)
    worst, wit = 0.0, {}
    for i in range(n):
        mean = pr.points(1)[0]
        xi, yi, li = x[i : i + 1], y[i : i + 1], lam[i, 0]
        mid = model.drift(t[i], li * xi + (1 - li) * yi, mean)
        comb = li * model.drift(t[i], xi, mean) + (1 - li) * model.drift(t[i], yi, mean)
        scale = 1.0 + np.abs(mid).max() + np.abs(comb).max()
        err = float(np.abs(mid - comb).max() / scale)
        if err > worst:
            worst, wit = err, {"t": float(t[i]), "x": xi[0].tolist(), "y": yi[0].tolist(), "lambda": li}
    thr = 1e-12
    return CheckResult("drift-affine-in-x", worst <= thr, worst, thr, wit)


def _convexity(name: str, coef: DiffusionSpec, model: MKVModel, pr: _Probe) -> CheckResult:
    n = pr.cfg.n_samples
    x, y = pr.points(n), pr.points(n)
    lam = pr.uniform(n, 1)
    t = pr.times(n)
    mu = pr.measure()
    summ = _summary(mu, model.p)
    mids = lam * x + (1 - lam) * y
    worst, wit = np.inf, {}
    for i in range(n):
        s_mid = coef.eval(t[i], mids[i : i + 1], summ)
        s_comb = lam[i, 0] * coef.eval(t[i], x[i : i + 1], summ) + (1 - lam[i, 0]) * coef.eval(
            t[i], y[i : i + 1], summ
        )
        marg = float(matrix_order_margin(s_mid, s_comb)[0])
        scale = max(1.0, float(np.sum(s_comb**2)))
        rel = marg / scale
        if rel < worst:
            worst = rel
            wit = {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist(), "lambda": float(lam[i, 0]),
                   "midpoint": mids[i].tolist(), "margin": marg}
    thr = -pr.cfg.tol
    note = "" if coef.convex else "coefficient declared non-convex"
    return CheckResult(f"{name}-convex-in-x", worst >= thr, worst, thr, wit, note)


def _dominance(model: MKVModel, pr: _Probe) -> CheckResult:
    n = pr.cfg.n_samples
    x = pr.points(n)
    t = pr.times(n)
    worst, wit = np.inf, {}
    n_meas = max(1, n // 50)
    for j in range(n_meas):
        mu = pr.measure()
        summ = _summary(mu, model.p)
        sl = slice(j * n // n_meas, (j + 1) * n // n_meas)
        for i in range(sl.start, sl.stop):
            s = model.sigma.eval(t[i], x[i : i + 1], summ)
            th = model.theta.eval(t[i], x[i : i + 1], summ)
            marg = float(matrix_order_margin(s, th)[0]) / max(1.0, float(np.sum(th**2)))
            if marg < worst:
                worst, wit = marg, {"t": float(t[i]), "x": x[i].tolist(), "margin": marg}
    thr = -pr.cfg.tol
    return CheckResult("sigma-dominated-by-theta", worst >= thr, worst, thr, wit)


def dominance_check(model: MKVModel, probe: ProbeConfig | None = None) -> CheckResult:
    """Sampled sigma <= theta in the matrix order, on its own."""
    probe = ProbeConfig(d=model.d) if probe is None else probe
    return _dominance(model, _Probe(probe))


def _monotone_in_measure(name: str, coef: DiffusionSpec, model: MKVModel, pr: _Probe) -> CheckResult:
    worst, wit = np.inf, {}
    n_meas = max(4, pr.cfg.n_samples // 50)
    for j in range(n_meas):
        mu = pr.measure()
        scale = pr.cfg.box * pr.uniform(1, 1)[0, 0]
        nu = mean_preserving_spread(mu, scale, seed=pr.cfg.seed + j)
        sm, sn = _summary(mu, model.p), _summary(nu, model.p)
        x = pr.points(16)
        t = pr.times(16)
        for i in range(16):
            a = coef.eval(t[i], x[i : i + 1], sm)
            b = coef.eval(t[i], x[i : i + 1], sn)
            marg = float(matrix_order_margin(a, b)[0]) / max(1.0, float(np.sum(b**2)))
            if marg < worst:
                worst, wit = marg, {"t": float(t[i]), "x": x[i].tolist(), "spread": scale, "margin": marg}
    thr = -pr.cfg.tol
    note = "partial evidence: only mean-preserving spreads are probed"
    return CheckResult(f"{name}-monotone-in-measure", worst >= thr, worst, thr, wit, note)


def _drift_constant_on_ordered(model: MKVModel, pr: _Probe) -> CheckResult:
    worst, wit = 0.0, {}
    for j in range(max(4, pr.cfg.n_samples // 100)):
        mu = pr.measure()
        nu = mean_preserving_spread(mu, pr.cfg.box * pr.uniform(1, 1)[0, 0], seed=pr.cfg.seed + j)
        x = pr.points(8)
        t = float(pr.times(1)[0])
        diff = float(np.abs(model.drift(t, x, mu.mean) - model.drift(t, x, nu.mean)).max())
        if diff > worst:
            worst, wit = diff, {"t": float(t)}
    thr = 1e-9
    return CheckResult("drift-constant-on-ordered-pairs", worst <= thr, worst, thr, wit)


def _lipschitz(model: MKVModel, pr: _Probe) -> list[CheckResult]:
    out = []
    n = max(50, pr.cfg.n_samples // 5)
    p = model.p

    def drift_fn(t, x, summ):
        return model.drift(t, x, summ.mean)[:, :, None]

    entries = [("drift", drift_fn, model.drift.lipschitz, model.drift.holder)]
    for name, c in (("sigma", model.sigma), ("theta", model.theta)):
        entries.append((name, c.eval, c.lipschitz, c.holder))

    for name, fn, declared, rho in entries:
        x = pr.points(n)
        y = x + 1e-3 * pr.cfg.box * (2 * pr.uniform(n, pr.cfg.d) - 1)
        t = pr.times(n)
        mu = pr.measure()
        summ = _summary(mu, p)
        lx = 0.0
        for i in range(n):
            dx = float(np.linalg.norm(x[i] - y[i]))
            if dx == 0:
                continue
            a = fn(t[i], x[i : i + 1], summ)
            b = fn(t[i], y[i : i + 1], summ)
            lx = max(lx, float(_op_norm(a - b)[0]) / dx)
        lm = 0.0
        for j in range(max(8, n // 10)):
            mu = pr.measure()
            shift = 0.05 * pr.cfg.box * (2 * pr.uniform(mu.size, pr.cfg.d) - 1)
            nu = DiscreteMeasure(mu.support + shift, mu.weights)
            w = wasserstein(mu, nu, p)
            if w == 0:
                continue
            xi = pr.points(1)
            ti = float(pr.times(1)[0])
            a = fn(ti, xi, _summary(mu, p))
            b = fn(ti, xi, _summary(nu, p))
            lm = max(lm, float(_op_norm(a - b)[0]) / w)
        est = max(lx, lm)
        ok = declared is None or est <= declared * (1 + 1e-6) + 1e-9
        out.append(CheckResult(f"{name}-lipschitz", ok, est, declared, {"x": lx, "measure": lm},
                               "" if declared is not None else "no declared constant; estimate only"))
        # time regularity: ratio of increments to (1 + |x| + W_p(mu, delta_0)) |t - s|^rho
        lt = 0.0
        for j in range(max(8, n // 10)):
            xi = pr.points(1)
            mu = pr.measure()
            summ = _summary(mu, p)
            s0 = float(pr.times(1)[0]) * 0.5
            for k in range(1, 9):
                dt = pr.cfg.T * 2.0**-k
                a = fn(s0, xi, summ)
                b = fn(s0 + dt, xi, summ)
                denom = (1 + np.linalg.norm(xi) + summ.wp_to_dirac()) * dt**rho
                lt = max(lt, float(_op_norm(a - b)[0]) / denom)
        out.append(CheckResult(f"{name}-holder-in-time", bool(np.isfinite(lt)), lt, None,
                               {"rho": rho}, "estimate of the time-regularity constant"))
    return out


def _linear_growth(model: MKVModel, pr: _Probe) -> CheckResult:
    ratios = []
    for radius in (pr.cfg.box, 10 * pr.cfg.box, 100 * pr.cfg.box):
        worst = 0.0
        for j in range(max(8, pr.cfg.n_samples // 50)):
            mu = pr.measure(radius)
            summ = _summary(mu, model.p)
            x = pr.points(16, radius)
            t = pr.times(16)
            for i in range(16):
                xi = x[i : i + 1]
                vals = [
                    float(np.linalg.norm(model.drift(t[i], xi, summ.mean))),
                    float(_op_norm(model.sigma.eval(t[i], xi, summ))[0]),
                    float(_op_norm(model.theta.eval(t[i], xi, summ))[0]),
                ]
                denom = 1 + float(np.linalg.norm(xi)) + summ.wp_to_dirac()
                worst = max(worst, max(vals) / denom)
        ratios.append(worst)
    ok = bool(np.all(np.isfinite(ratios))) and ratios[-1] <= 2.0 * max(ratios[0], ratios[1]) + 1e-9
    return CheckResult("linear-growth", ok, ratios[-1], 2.0 * max(ratios[0], ratios[1]),
                       {"ratio_by_radius": ratios})


def _initial_order(model: MKVModel) -> CheckResult:
    a, b = model.init_x.measure(), model.init_y.measure()
    if a is None or b is None:
        return CheckResult("initial-laws-ordered", True, 0.0, None, {},
                           "initial laws not both atomic; not checked")
    from .order import strassen_lp_test

    v = strassen_lp_test(a, b)
    return CheckResult("initial-laws-ordered", v.dominated == "yes", 0.0, None,
                       {} if v.witness is None else {"witness": v.witness.to_dict()})


def validate_assumptions(model: MKVModel, probe: ProbeConfig | None = None) -> ValidationReport:
    """Sampled checks of affinity, convexity, domination, regularity and growth."""
    probe = ProbeConfig(d=model.d) if probe is None else probe
    if probe.d != model.d:
        probe = ProbeConfig(**{**probe.__dict__, "d": model.d})
    pr = _Probe(probe)
    checks = [_drift_affine(model, pr), _drift_constant_on_ordered(model, pr)]
    checks.append(_convexity("sigma", model.sigma, model, pr))
    checks.append(_convexity("theta", model.theta, model, pr))
    checks.append(_dominance(model, pr))
    checks.append(_monotone_in_measure("sigma", model.sigma, model, pr))
    checks.append(_monotone_in_measure("theta", model.theta, model, pr))
    checks.extend(_lipschitz(model, pr))
    checks.append(_linear_growth(model, pr))
    checks.append(_initial_order(model))
    return ValidationReport(checks)

"""Linear-quadratic control: the X-optimal feedback applied to a less volatile Y."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError
from ..interp import modulus_of_continuity
from ..model import DiffusionSpec, DriftSpec, InitialLaw, MKVModel, TimeGrid, preset_lookup
from ..order import bonferroni_z
from ..simulate import simulate_particle_system
from ..validate import ProbeConfig, dominance_check
from .riccati import RiccatiSolution, RiccatiSystem, solve_riccati


@dataclass(frozen=True)
class LQConfig:
    """Dynamics dX = (a X + abar E X + b alpha + beta) dt + vol dB.

    Cost E[ sum_m h/2 ((m X + mbar E X)^2 + n alpha^2) + 1/2 (q X_T + qbar E X_T)^2 ].
    X has constant volatility ``sigma``; Y has ``theta`` (default sigma/2).
    """

    system: RiccatiSystem = field(default_factory=RiccatiSystem)
    sigma: float = 0.5
    theta: DiffusionSpec | None = None
    T: float = 1.0
    M: int = 50
    N: int = 2**14
    seed: int = 0
    x0: float = 1.0
    substeps: int = 20
    conf: float = 0.999
    x_grid: tuple = tuple(np.linspace(-2.0, 2.0, 9))
    crn: bool = True
    mean_k: float = 4.0
    convexity_k: float = 3.0
    null_reps: int = 0
    null_k: float = 3.0
    null_rate: float = 0.95
    threads: int = 1
    experiment: str = "lq"

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.theta is None:
            object.__setattr__(self, "theta", preset_lookup("constant", [0.5 * self.sigma]))
        if self.N < 2 or self.M < 1:
            raise ConfigError("need N >= 2 and M >= 1")
        if len(self.x_grid) < 3:
            raise ConfigError("value convexity needs at least three initial values")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.M)


@dataclass(frozen=True)
class Feedback:
    riccati: RiccatiSolution
    grid: TimeGrid
    gain: np.ndarray  # (b/n) eta at coarse nodes
    offset: np.ndarray  # (b/n) chi at coarse nodes
    coef: dict  # coefficient values at coarse nodes


def _feedback(cfg: LQConfig) -> Feedback:
    grid = cfg.grid
    t = grid.nodes
    names = ("a", "abar", "b", "beta", "m", "mbar", "n")
    coef = {k: np.array([cfg.system.coefficient(k, float(s)) for s in t]) for k in names}
    if np.any(coef["n"] <= 0):
        raise ConfigError("control cost n(t) must be positive on the grid")
    sol = solve_riccati(cfg.system, cfg.T, nodes=cfg.M * cfg.substeps)
    eta = sol.eta[:: cfg.substeps]
    chi = sol.chi[:: cfg.substeps]
    return Feedback(sol, grid, coef["b"] / coef["n"] * eta, coef["b"] / coef["n"] * chi, coef)


def _closed_loop_drift(fb: Feedback) -> DriftSpec:
    grid, c = fb.grid, fb.coef

    def idx(t):
        return int(round(t / grid.h))

    def alpha(t):
        m = idx(t)
        return np.array([[c["a"][m] - c["b"][m] * fb.gain[m]]])

    def beta(t, mean):
        m = idx(t)
        return c["abar"][m] * mean + c["beta"][m] - c["b"][m] * fb.offset[m]

    return DriftSpec(alpha, beta, d=1, holder=1.0, kind="lq-feedback")


def _check_theta(cfg: LQConfig) -> None:
    sig = preset_lookup("constant", [cfg.sigma])
    th = cfg.theta
    if (th.d, th.q) != (1, 1):
        raise ConfigError("the LQ experiment is one-dimensional")
    law = InitialLaw("point", (cfg.x0,))
    zero = MKVModel(_zero_drift(), preset_lookup("constant", [0.0]), th, law, law)
    upper = MKVModel(_zero_drift(), th, sig, law, law)
    probe = ProbeConfig(n_samples=300, box=max(2.0, 2 * max(abs(v) for v in cfg.x_grid)), T=cfg.T)
    if not dominance_check(upper, probe).passed:
        raise ConfigError("theta must not exceed sigma")
    # 0 <= theta: a scalar diffusion is compared through theta^2, so check the sign directly
    from ..model import MeasureSummary

    xs = np.linspace(-probe.box, probe.box, 41)[:, None]
    vals = th.eval(0.0, xs, MeasureSummary.from_samples(xs))
    if np.any(vals < 0) or not dominance_check(zero, probe).passed:
        raise ConfigError("theta must be non-negative")


def _zero_drift() -> DriftSpec:
    from ..model import linear_drift

    return linear_drift()


def _costs(states: np.ndarray, fb: Feedback, cfg: LQConfig) -> np.ndarray:
    """Per-particle cost; states of shape (M + 1, N)."""
    c, h = fb.coef, fb.grid.h
    mean = states.mean(axis=1, keepdims=True)
    X = states[:-1]
    alpha = -(fb.gain[:-1, None] * X + fb.offset[:-1, None])
    run = 0.5 * ((c["m"][:-1, None] * X + c["mbar"][:-1, None] * mean[:-1]) ** 2
                 + c["n"][:-1, None] * alpha**2)
    term = 0.5 * (cfg.system.q * states[-1] + cfg.system.qbar * mean[-1]) ** 2
    return h * run.sum(axis=0) + term


def _simulate(cfg: LQConfig, fb: Feedback, drift: DriftSpec, x0: float, which: str,
              noise_tag: str, experiment) -> np.ndarray:
    law = InitialLaw("point", (x0,))
    sig = preset_lookup("constant", [cfg.sigma])
    model = MKVModel(drift, sig, cfg.theta, law, law)
    ens = simulate_particle_system(model, cfg.grid, cfg.N, cfg.seed, which, noise_tag, "init", experiment)
    return np.stack([e.states[:, 0] for e in ens])


def _margin(cfg: LQConfig, fb: Feedback, drift: DriftSpec, crn: bool, experiment):
    X = _simulate(cfg, fb, drift, cfg.x0, "X", "B", experiment)
    Y = _simulate(cfg, fb, drift, cfg.x0, "Y", "B" if crn else "B-Y", experiment)
    cx, cy = _costs(X, fb, cfg), _costs(Y, fb, cfg)
    est = float(cx.mean() - cy.mean())
    if crn:
        se = float((cx - cy).std(ddof=1) / np.sqrt(cfg.N))
    else:
        se = float(np.sqrt(cx.var(ddof=1) / cfg.N + cy.var(ddof=1) / cfg.N))
    return est, se, X, Y, cx, cy


def _holder_estimate(sol: RiccatiSolution, fb: Feedback, cfg: LQConfig) -> dict:
    t = sol.times
    gain = np.array([cfg.system.coefficient("b", float(s)) / cfg.system.coefficient("n", float(s))
                     for s in t]) * sol.eta
    lags = sol.step * 2.0 ** np.arange(0, 7)
    lags = lags[lags < 0.5 * cfg.T]
    omega = np.array([modulus_of_continuity(gain, t, d) for d in lags])
    pos = omega > 1e-14
    out = {"lags": lags.tolist(), "modulus": omega.tolist(), "rho": None, "constant": None}
    if pos.sum() >= 2:
        A = np.column_stack([np.log(lags[pos]), np.ones(pos.sum())])
        coef, *_ = np.linalg.lstsq(A, np.log(omega[pos]), rcond=None)
        out["rho"] = float(min(coef[0], 1.0))
        out["constant"] = float(np.max(omega[pos] / lags[pos] ** out["rho"]))
    else:
        out["rho"], out["constant"] = 1.0, 0.0
    out["note"] = "empirical estimate on the solver grid; not a certificate"
    return out


@dataclass(frozen=True)
class LQReport:
    JX: float
    JY: float
    margin: float
    stderr: float
    threshold: float
    value_grid: tuple
    values: tuple
    second_differences: tuple
    second_stderr: tuple
    convexity_k: float
    mean_z: tuple
    mean_k: float
    feedback_holder: dict
    riccati: dict
    null: dict | None = None

    @property
    def margin_positive(self) -> bool:
        return self.margin - self.threshold > 0

    @property
    def convex(self) -> bool:
        return all(d >= -self.convexity_k * s for d, s in zip(self.second_differences, self.second_stderr))

    @property
    def means_agree(self) -> bool:
        return all(abs(z) <= self.mean_k for z in self.mean_z)

    @property
    def passed(self) -> bool:
        ok = self.margin - self.threshold >= 0 and self.convex and self.means_agree
        if self.null is not None:
            ok = ok and self.null["passed"]
        return ok

    def to_dict(self) -> dict:
        return {
            "kind": "lq-control", "J_X": self.JX, "J_Y": self.JY, "margin": self.margin,
            "stderr": self.stderr, "threshold": self.threshold,
            "margin_positive": self.margin_positive,
            "value_grid": list(self.value_grid), "values": list(self.values),
            "second_differences": list(self.second_differences),
            "second_stderr": list(self.second_stderr), "convex": self.convex,
            "mean_z": list(self.mean_z), "means_agree": self.means_agree,
            "feedback_holder": self.feedback_holder, "riccati": self.riccati,
            "null": self.null, "passed": self.passed,
        }


def lq_null_calibration(cfg: LQConfig, reps: int = 40) -> dict:
    """theta = sigma with independent noise: |margin| < k se should hold at the nominal rate."""
    null_cfg = replace(cfg, theta=preset_lookup("constant", [cfg.sigma]), null_reps=0)
    fb = _feedback(null_cfg)
    drift = _closed_loop_drift(fb)

    def rep(i):
        est, se, *_ = _margin(null_cfg, fb, drift, False, f"{cfg.experiment}-null-{i}")
        return est, se

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            res = list(pool.map(rep, range(reps)))
    else:
        res = [rep(i) for i in range(reps)]
    z = [e / s if s > 0 else 0.0 for e, s in res]
    inside = float(np.mean([abs(v) < cfg.null_k for v in z]))
    return {"reps": reps, "k": cfg.null_k, "z": z, "fraction_inside": inside,
            "required": cfg.null_rate, "passed": inside >= cfg.null_rate}


def lq_control_experiment(cfg: LQConfig) -> LQReport:
    _check_theta(cfg)
    fb = _feedback(cfg)
    drift = _closed_loop_drift(fb)
    est, se, X, Y, cx, cy = _margin(cfg, fb, drift, cfg.crn, cfg.experiment)
    z = bonferroni_z(cfg.conf, 1)

    # value x -> J^X(x) with common noise across initial values
    xs = np.asarray(cfg.x_grid, dtype=float)
    per = np.stack([_costs(_simulate(cfg, fb, drift, float(x), "X", "B", cfg.experiment), fb, cfg) for x in xs])
    d2 = per[:-2] - 2 * per[1:-1] + per[2:]
    spacing_ok = np.allclose(np.diff(xs), xs[1] - xs[0], rtol=1e-9, atol=1e-12)
    if not spacing_ok:
        raise ConfigError("value convexity grid must be equally spaced")

    if cfg.crn:
        mse = (X - Y).std(axis=1, ddof=1) / np.sqrt(cfg.N)
    else:
        mse = np.sqrt(X.var(axis=1, ddof=1) / cfg.N + Y.var(axis=1, ddof=1) / cfg.N)
    gap = X.mean(axis=1) - Y.mean(axis=1)
    mz = np.where(mse > 0, gap / np.where(mse > 0, mse, 1.0), np.where(np.abs(gap) > 1e-12, np.inf, 0.0))

    null = lq_null_calibration(cfg, cfg.null_reps) if cfg.null_reps > 0 else None
    sol = fb.riccati
    return LQReport(
        JX=float(cx.mean()), JY=float(cy.mean()), margin=est, stderr=se, threshold=z * se,
        value_grid=tuple(xs.tolist()), values=tuple(per.mean(axis=1).tolist()),
        second_differences=tuple(d2.mean(axis=1).tolist()),
        second_stderr=tuple((d2.std(axis=1, ddof=1) / np.sqrt(cfg.N)).tolist()),
        convexity_k=cfg.convexity_k, mean_z=tuple(float(v) for v in mz), mean_k=cfg.mean_k,
        feedback_holder=_holder_estimate(sol, fb, cfg),
        riccati={"step": sol.step, "eta0": float(sol.eta[0]), "chi0": float(sol.chi[0]),
                 "etaT": float(sol.eta[-1]), "chiT": float(sol.chi[-1])},
        null=null,
    )

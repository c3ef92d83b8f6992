"""Strong convergence rate and moment bounds of the Euler particle scheme."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..model import MKVModel, TimeGrid
from ..rng import gaussian_block
from ..simulate import initial_states, noise_spec, run_scheme


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    constant: float
    residual: float

    @classmethod
    def fit(cls, h, err) -> "LogLogFit":
        lh, le = np.log(np.asarray(h, float)), np.log(np.asarray(err, float))
        A = np.column_stack([lh, np.ones_like(lh)])
        coef, *_ = np.linalg.lstsq(A, le, rcond=None)
        resid = le - A @ coef
        return cls(float(coef[0]), float(np.exp(coef[1])), float(np.sqrt(np.mean(resid**2))))


@dataclass(frozen=True)
class ConvergenceReport:
    Ms: tuple
    h: tuple
    errors: tuple
    stderr: tuple
    slope: float
    constant: float
    residual: float
    p: float
    N: int
    seed: int
    reference: dict = field(default_factory=dict)

    def table(self) -> tuple[list[str], list[list]]:
        cols = ["M", "h", "error", "stderr", "fit"]
        rows = [[M, h, e, s, self.constant * h**self.slope]
                for M, h, e, s in zip(self.Ms, self.h, self.errors, self.stderr)]
        return cols, rows

    def to_dict(self) -> dict:
        return {
            "kind": "convergence",
            "M": list(self.Ms),
            "h": list(self.h),
            "errors": list(self.errors),
            "stderr": list(self.stderr),
            "slope": self.slope,
            "constant": self.constant,
            "residual": self.residual,
            "p": self.p,
            "N": self.N,
            "seed": self.seed,
            "reference": self.reference,
        }


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _lp_norm_with_se(values: np.ndarray, p: float) -> tuple[float, float]:
    vp = values**p
    mean = float(vp.mean())
    se_mean = float(vp.std(ddof=1) / np.sqrt(len(vp))) if len(vp) > 1 else 0.0
    est = mean ** (1.0 / p)
    # delta method for x -> x^(1/p)
    se = est ** (1.0 - p) / p * se_mean if est > 0 else 0.0
    return est, se


def convergence_study(
    model: MKVModel,
    N: int,
    Ms=(8, 16, 32, 64, 128),
    p: float = 2.0,
    seed: int = 0,
    M_ref: int | None = None,
    T: float = 1.0,
    which: str = "X",
    experiment="converge",
    threads: int = 1,
) -> ConvergenceReport:
    """(E max_m |X^ref_{t_m} - X^M_{t_m}|^p)^{1/p} against h, with a least-squares slope.

    The reference is the same particle scheme on M_ref steps.  Coarse runs use
    the reference noise summed over each coarse cell, so all runs follow one
    Brownian path per particle and share the initial states.
    """
    Ms = tuple(sorted(int(M) for M in Ms))
    if len(Ms) < 2:
        raise DomainError("a slope needs at least two step counts")
    M_ref = 4 * Ms[-1] if M_ref is None else int(M_ref)
    if not all(_is_pow2(M) for M in Ms + (M_ref,)):
        raise DomainError("step counts must be powers of two")
    if M_ref <= Ms[-1]:
        raise DomainError("reference must be finer than every tested grid")
    fine = TimeGrid(T, M_ref)
    x0 = initial_states(model, which, N, seed, experiment, "init")
    Zf = np.stack([gaussian_block(noise_spec(seed, experiment, "B", j), N, model.q) for j in range(M_ref)])
    ref = np.stack([e.states for e in run_scheme(model, fine, x0, which, lambda j: Zf[j])])

    def cell(M: int):
        r = M_ref // M
        Zc = Zf.reshape(M, r, N, model.q).sum(axis=1) / np.sqrt(r)
        ens = run_scheme(model, TimeGrid(T, M), x0, which, lambda m: Zc[m])
        X = np.stack([e.states for e in ens])
        dev = np.linalg.norm(X - ref[::r], axis=2).max(axis=0)
        return _lp_norm_with_se(dev, p)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            res = list(pool.map(cell, Ms))
    else:
        res = [cell(M) for M in Ms]
    errs = [e for e, _ in res]
    if min(errs) <= 0:
        raise DomainError("zero strong error; the scheme is exact for this model")
    hs = [T / M for M in Ms]
    fit = LogLogFit.fit(hs, errs)
    return ConvergenceReport(Ms, tuple(hs), tuple(errs), tuple(s for _, s in res), fit.slope,
                             fit.constant, fit.residual, float(p), int(N), int(seed),
                             {"M": M_ref, "coupling": "summed fine increments", "process": which})


@dataclass(frozen=True)
class MomentBoundReport:
    Ms: tuple
    moments: tuple
    ratios: tuple
    initial_norm: float
    constant: float
    spread: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.spread <= self.tolerance

    def to_dict(self) -> dict:
        return {"kind": "moment-bound", "M": list(self.Ms), "moments": list(self.moments),
                "ratios": list(self.ratios), "initial_norm": self.initial_norm,
                "constant": self.constant, "spread": self.spread,
                "tolerance": self.tolerance, "passed": self.passed}


def moment_bound_study(
    model: MKVModel,
    N: int,
    Ms=(8, 16, 32, 64, 128, 256, 512),
    p: float = 2.0,
    seed: int = 0,
    T: float = 1.0,
    which: str = "X",
    tolerance: float = 1.5,
    experiment="moments",
) -> MomentBoundReport:
    """Ratio (E max_m |X_m|^p)^{1/p} / (1 + ||X_0||_p) across step counts.

    The fitted constant is the largest ratio; the check passes when the ratios
    do not drift by more than the factor ``tolerance`` as the grid is refined.
    """
    Ms = tuple(sorted(int(M) for M in Ms))
    x0 = initial_states(model, which, N, seed, experiment, "init")
    init_norm = float(np.mean(np.linalg.norm(x0, axis=1) ** p) ** (1.0 / p))
    moments = []
    for M in Ms:
        ens = run_scheme(model, TimeGrid(T, M), x0, which,
                         lambda m, M=M: gaussian_block(noise_spec(seed, experiment, f"B{M}", m), N, model.q))
        S = np.stack([np.linalg.norm(e.states, axis=1) for e in ens]).max(axis=0)
        moments.append(float(np.mean(S**p) ** (1.0 / p)))
    ratios = [m / (1.0 + init_norm) for m in moments]
    return MomentBoundReport(Ms, tuple(moments), tuple(ratios), init_norm, max(ratios),
                             max(ratios) / min(ratios), float(tolerance))

"""Backward RK4 integration of config-supplied Riccati systems for the LQ feedback."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, HorizonError
from ..expr import Expr, compile_expr

BLOWUP = 1e8
COEFFICIENT_NAMES = ("a", "abar", "b", "beta", "m", "mbar", "n")
DEFAULT_COEFFICIENTS = {"a": "0", "abar": "0", "b": "1", "beta": "0", "m": "1", "mbar": "0", "n": "1"}
DEFAULT_ETA_RHS = "-2*a*eta + (b**2/n)*eta**2 - m**2"
DEFAULT_CHI_RHS = "-(a - (b**2/n)*eta)*chi - eta*beta"


@dataclass(frozen=True)
class RiccatiSystem:
    """eta' = f(t, eta, chi), chi' = g(t, eta, chi) with terminal values at T.

    Coefficient paths are expressions in ``t``; the right-hand sides may also
    read every coefficient name and the constants ``q``, ``qbar``.
    """

    coefficients: dict = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    q: float = 1.0
    qbar: float = 0.0
    eta_rhs: str = DEFAULT_ETA_RHS
    chi_rhs: str = DEFAULT_CHI_RHS
    eta_T: str = "q**2"
    chi_T: str = "0"

    def __post_init__(self):
        coefs = {**DEFAULT_COEFFICIENTS, **{k: v for k, v in self.coefficients.items()}}
        unknown = set(coefs) - set(COEFFICIENT_NAMES)
        if unknown:
            raise ConfigError(f"unknown LQ coefficient(s) {sorted(unknown)}")
        object.__setattr__(self, "coefficients", coefs)
        scope = ("t",)
        object.__setattr__(self, "_coef", {k: compile_expr(v, scope) for k, v in coefs.items()})
        full = ("t", "eta", "chi", "q", "qbar") + COEFFICIENT_NAMES
        object.__setattr__(self, "_f", compile_expr(self.eta_rhs, full))
        object.__setattr__(self, "_g", compile_expr(self.chi_rhs, full))
        object.__setattr__(self, "_fT", compile_expr(self.eta_T, full))
        object.__setattr__(self, "_gT", compile_expr(self.chi_T, full))

    def coefficient(self, name: str, t: float) -> float:
        return self._coef[name](t=t)

    def env(self, t: float, eta: float = 0.0, chi: float = 0.0) -> dict:
        e = {k: f(t=t) for k, f in self._coef.items()}
        e.update(t=t, eta=eta, chi=chi, q=self.q, qbar=self.qbar)
        return e

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        e = self.env(t, float(y[0]), float(y[1]))
        return np.array([self._f(e), self._g(e)])

    def terminal(self, T: float) -> np.ndarray:
        e = self.env(T)
        eta = self._fT(e)
        e["eta"] = eta
        return np.array([eta, self._gT(e)])


@dataclass(frozen=True)
class RiccatiSolution:
    times: np.ndarray
    eta: np.ndarray
    chi: np.ndarray
    step: float

    def at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.eta)

    def chi_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.chi)

    def to_dict(self) -> dict:
        return {"step": self.step, "t": self.times, "eta": self.eta, "chi": self.chi}


def solve_riccati(system: RiccatiSystem, T: float, step: float = 1e-3, nodes: int | None = None) -> RiccatiSolution:
    """Classical RK4 from T down to 0.

    With ``nodes`` given the step is T / nodes exactly, so a time grid with a
    divisor of ``nodes`` steps hits stored values without interpolation.
    """
    n = int(nodes) if nodes is not None else max(1, math.ceil(T / step - 1e-9))
    dt = T / n
    times = np.linspace(0.0, T, n + 1)
    Y = np.empty((n + 1, 2))
    Y[n] = system.terminal(T)
    for i in range(n, 0, -1):
        t, y = times[i], Y[i]
        k1 = system.rhs(t, y)
        k2 = system.rhs(t - 0.5 * dt, y - 0.5 * dt * k1)
        k3 = system.rhs(t - 0.5 * dt, y - 0.5 * dt * k2)
        k4 = system.rhs(t - dt, y - dt * k3)
        Y[i - 1] = y - dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(Y[i - 1])) or abs(Y[i - 1, 0]) > BLOWUP:
            raise HorizonError(f"Riccati solution blew up near t = {times[i - 1]:.6g}")
    return RiccatiSolution(times, Y[:, 0].copy(), Y[:, 1].copy(), dt)

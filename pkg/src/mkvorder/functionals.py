"""Path functionals and measure functionals that are monotone for the convex order."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .measure import DiscreteMeasure

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _npdf(z):
    return np.exp(-0.5 * z * z) / SQRT_2PI


def gaussian_call(mean, sd, k):
    """E (m + s Z - k)^+ for Z standard normal; exact at s = 0."""
    mean, sd = np.asarray(mean, float), np.asarray(sd, float)
    gap = mean - k
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, gap / np.where(sd > 0, sd, 1.0), 0.0)
        val = gap * ndtr(z) + sd * _npdf(z)
    return np.where(sd > 0, val, np.maximum(gap, 0.0))


@dataclass(frozen=True)
class PathFunctional:
    """F(paths) for paths of shape (N, K, d) sampled at ``times`` (K,).

    ``convex`` must be declared; order tests refuse undeclared functionals.
    ``terminal`` is set when F only reads the final value, and ``oracle`` when a
    Gaussian closed form E F(m + s Z) is known.
    """

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    convex: bool | None = None
    growth: float = 1.0
    terminal: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    oracle: Callable[[float, float], float] | None = field(default=None, repr=False)

    def __call__(self, paths: np.ndarray, times: np.ndarray) -> np.ndarray:
        P = np.asarray(paths, dtype=float)
        if P.ndim == 2:
            P = P[:, :, None]
        return np.asarray(self.fn(P, np.asarray(times, dtype=float)), dtype=float).reshape(P.shape[0])


def _terminal(name, f, oracle=None, growth=1.0) -> PathFunctional:
    return PathFunctional(name, lambda P, t: f(P[:, -1, :]), True, growth, f, oracle)


def constant(c: float = 0.0) -> PathFunctional:
    return _terminal(f"constant({c})", lambda x: np.full(x.shape[0], float(c)),
                     lambda m, s: float(c), growth=0.0)


def terminal_linear(a: Sequence[float] | float = 1.0) -> PathFunctional:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return _terminal("terminal-linear", lambda x: x @ a if len(a) == x.shape[1] else x[:, 0] * a[0],
                     lambda m, s: float(a[0] * m) if len(a) == 1 else None)


def terminal_call(k: float = 0.0, coord: int = 0) -> PathFunctional:
    return _terminal(f"terminal-call({k})", lambda x: np.maximum(x[:, coord] - k, 0.0),
                     lambda m, s: float(gaussian_call(m, s, k)))


def terminal_abs() -> PathFunctional:
    def oracle(m, s):
        return float(gaussian_call(m, s, 0.0) + gaussian_call(-m, s, 0.0))

    return _terminal("terminal-abs", lambda x: np.linalg.norm(x, axis=1), oracle)


def terminal_square() -> PathFunctional:
    return _terminal("terminal-square", lambda x: np.einsum("ij,ij->i", x, x),
                     lambda m, s: float(m * m + s * s), growth=2.0)


def running_max(coord: int = 0) -> PathFunctional:
    return PathFunctional("running-max", lambda P, t: P[:, :, coord].max(axis=1), True)


def sup_norm() -> PathFunctional:
    return PathFunctional("sup-norm", lambda P, t: np.linalg.norm(P, axis=2).max(axis=1), True)


def path_average(P: np.ndarray, t: np.ndarray, coord: int = 0) -> np.ndarray:
    """Time average of the piecewise-affine path (trapezoid rule is exact for it)."""
    x = P[:, :, coord]
    dt = np.diff(t)
    return (0.5 * (x[:, 1:] + x[:, :-1]) * dt).sum(axis=1) / (t[-1] - t[0])


def average_call(k: float = 0.0, coord: int = 0) -> PathFunctional:
    return PathFunctional(f"average-call({k})",
                          lambda P, t: np.maximum(path_average(P, t, coord) - k, 0.0), True)


def max_affine_nodes(weights: np.ndarray, intercepts: np.ndarray) -> PathFunctional:
    """max_j (sum_m <w_jm, x_m> + c_j) over the node vector; weights of shape (J, K, d)."""
    W = np.asarray(weights, dtype=float)
    c = np.asarray(intercepts, dtype=float)
    if W.ndim == 2:
        W = W[:, :, None]

    def fn(P, t):
        if P.shape[1] != W.shape[1]:
            raise ValueError(f"functional built for {W.shape[1]} nodes, path has {P.shape[1]}")
        return (np.einsum("nkd,jkd->nj", P, W) + c).max(axis=1)

    return PathFunctional("max-affine-nodes", fn, True)


BUILTIN_PATH_FUNCTIONALS = {
    "constant": constant,
    "terminal-linear": terminal_linear,
    "terminal-call": terminal_call,
    "terminal-abs": terminal_abs,
    "terminal-square": terminal_square,
    "running-max": running_max,
    "sup-norm": sup_norm,
    "average-call": average_call,
}


def parse_path_functional(text: str) -> PathFunctional:
    """``name`` or ``name:arg`` as used in config files, e.g. ``terminal-call:1.0``."""
    from .errors import LookupFailure

    name, _, arg = text.partition(":")
    if name not in BUILTIN_PATH_FUNCTIONALS:
        raise LookupFailure(f"unknown path functional {name!r}")
    maker = BUILTIN_PATH_FUNCTIONALS[name]
    return maker(float(arg)) if arg else maker()


# --------------------------------------------------------------------------
# measure functionals


@dataclass(frozen=True)
class MonotoneFunctional:
    kind: str
    value_fn: Callable[[DiscreteMeasure], float] = field(repr=False)
    derivative_fn: Callable[[DiscreteMeasure, np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    growth: float = 2.0
    name: str = ""

    def __call__(self, mu: DiscreteMeasure) -> float:
        return float(self.value_fn(mu))

    @property
    def has_derivative(self) -> bool:
        return self.derivative_fn is not None

    def derivative(self, mu: DiscreteMeasure, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if mu.dim == 1 else x[None, :]
        return np.asarray(self.derivative_fn(mu, x), dtype=float).reshape(x.shape[0])


def chi_psi(
    psis: Sequence[Callable[[np.ndarray], np.ndarray]],
    chi: Callable[[np.ndarray], np.ndarray] = lambda s: s,
    chi_prime: Callable[[np.ndarray], np.ndarray] | None = lambda s: np.ones_like(s),
    weights: Sequence[float] | None = None,
    name: str = "chi-psi",
    growth: float = 2.0,
) -> MonotoneFunctional:
    """Phi(mu) = sum_u pi_u chi(integral psi_u dmu); psi_u convex, chi non-decreasing.

    Derivative: sum_u pi_u chi'(integral psi_u dmu) psi_u(x).
    """
    psis = list(psis)
    pi = np.ones(len(psis)) if weights is None else np.asarray(weights, dtype=float)

    def inner(mu):
        return np.array([mu.expect(f) for f in psis])

    def value(mu):
        return float(pi @ np.asarray(chi(inner(mu)), dtype=float))

    deriv = None
    if chi_prime is not None:
        def deriv(mu, x):
            g = pi * np.asarray(chi_prime(inner(mu)), dtype=float)
            return sum(gi * np.asarray(f(x), dtype=float).reshape(-1) for gi, f in zip(g, psis))

    return MonotoneFunctional("chi-psi", value, deriv, growth, name)


def _sqnorm(x):
    return np.einsum("ij,ij->i", x, x)


def second_moment() -> MonotoneFunctional:
    return chi_psi([_sqnorm], name="second-moment")


def mean_functional(coord: int = 0) -> MonotoneFunctional:
    """Integral of the coordinate; linear, so both monotone and antitone."""
    return chi_psi([lambda x: x[:, coord]], name=f"mean[{coord}]", growth=1.0)


def interaction_energy(W: Callable[[np.ndarray], np.ndarray] = _sqnorm, chunk: int = 2048,
                       name: str = "interaction-energy") -> MonotoneFunctional:
    """Phi(mu) = 1/2 double integral of W(x - y), W convex with quadratic growth."""

    def pair_mean(mu, x):
        # 1/2 integral (W(x - y) + W(y - x)) mu(dy), chunked over x
        out = np.empty(x.shape[0])
        ys, w = mu.support, mu.weights
        for s in range(0, x.shape[0], chunk):
            xc = x[s : s + chunk]
            diff = (xc[:, None, :] - ys[None, :, :]).reshape(-1, ys.shape[1])
            a = np.asarray(W(diff), dtype=float).reshape(len(xc), len(ys))
            b = np.asarray(W(-diff), dtype=float).reshape(len(xc), len(ys))
            out[s : s + chunk] = 0.5 * (a + b) @ w
        return out

    def value(mu):
        return float(0.5 * mu.weights @ pair_mean(mu, mu.support))

    return MonotoneFunctional("interaction-energy", value, pair_mean, 2.0, name)


@dataclass(frozen=True)
class ExtendedFunctional:
    """G(path, flow) = F(path) + sum_m w_m Phi(flow_m); either part may be absent.

    ``node_weights`` defaults to the grid step h at every coarse node.
    """

    path_part: PathFunctional | None = None
    flow_part: MonotoneFunctional | None = None
    node_weights: np.ndarray | None = None
    name: str = "extended"

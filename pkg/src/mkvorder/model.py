"""Model pair, coefficient presets, initial laws and the matrix partial order."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, LookupFailure


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DomainError(f"horizon must be positive and finite, got {self.T}")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"number of steps must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.M + 1, dtype=float) * self.h
        t[-1] = self.T
        return t

    def t(self, m: int) -> float:
        return self.T if m == self.M else m * self.h

    def refine(self, r: int) -> "TimeGrid":
        return TimeGrid(self.T, self.M * r)


@dataclass(frozen=True)
class MeasureSummary:
    """Statistics of a measure that coefficients are allowed to read.

    ``samples``/``weights`` are kept for coefficients of the full-empirical kind.
    """

    mean: np.ndarray
    m2: float
    p: float = 2.0
    pth: float = 0.0
    samples: np.ndarray | None = None
    weights: np.ndarray | None = None

    @classmethod
    def from_samples(cls, x: np.ndarray, p: float = 2.0) -> "MeasureSummary":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        sq = np.einsum("ij,ij->i", x, x)
        return cls(
            mean=x.mean(axis=0),
            m2=float(sq.mean()),
            p=p,
            pth=float(np.mean(sq ** (p / 2.0))),
            samples=x,
        )

    @classmethod
    def from_measure(cls, mu, p: float = 2.0) -> "MeasureSummary":
        x, w = mu.support, mu.weights
        sq = np.einsum("ij,ij->i", x, x)
        return cls(
            mean=w @ x,
            m2=float(w @ sq),
            p=p,
            pth=float(w @ sq ** (p / 2.0)),
            samples=x,
            weights=w,
        )

    @classmethod
    def dirac(cls, point: Sequence[float], p: float = 2.0) -> "MeasureSummary":
        return cls.from_samples(np.atleast_2d(np.asarray(point, dtype=float)), p)

    def wp_to_dirac(self) -> float:
        return self.pth ** (1.0 / self.p)


# --------------------------------------------------------------------------
# matrix order


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A[:, None]
    return A


def matrix_order_margin(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Minimum eigenvalue of B B^T - A A^T, batched over leading axes (..., d, q)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    if A.shape[-2:] == (1, 1):
        return B[..., 0, 0] ** 2 - A[..., 0, 0] ** 2
    D = B @ np.swapaxes(B, -1, -2) - A @ np.swapaxes(A, -1, -2)
    return np.linalg.eigvalsh(0.5 * (D + np.swapaxes(D, -1, -2)))[..., 0]


def matrix_partial_order(A, B, tol: float = 1e-10) -> bool:
    """True iff A ⪯ B, i.e. B B^T - A A^T is positive semi-definite.

    The threshold is ``-tol * max(1, trace(B B^T))`` so that the decision is
    scale aware for large coefficients and exactly ``-tol`` otherwise.
    """
    if tol < 0:
        raise DomainError("tol must be non-negative")
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    scale = max(1.0, float(np.sum(B * B)))
    return bool(matrix_order_margin(A, B) >= -tol * scale)


# --------------------------------------------------------------------------
# drift


@dataclass(frozen=True)
class DriftSpec:
    """Drift alpha(t) x + beta(t, mean), shared by both processes."""

    alpha: Callable[[float], np.ndarray]
    beta: Callable[[float, np.ndarray], np.ndarray]
    d: int = 1
    holder: float = 1.0
    lipschitz: float | None = None
    kind: str = "custom"
    params: tuple = ()

    def __call__(self, t: float, x: np.ndarray, mean: np.ndarray) -> np.ndarray:
        a = np.asarray(self.alpha(t), dtype=float).reshape(self.d, self.d)
        b = np.asarray(self.beta(t, np.asarray(mean, dtype=float)), dtype=float).reshape(self.d)
        if self.d == 1:
            return x * a[0, 0] + b[0]
        return x @ a.T + b


def linear_drift(a: float = 0.0, c: float = 0.0, k: float = 0.0, d: int = 1) -> DriftSpec:
    """b(t, x, mu) = a x + c * mean(mu) + k."""
    eye = np.eye(d)
    return DriftSpec(
        alpha=lambda t: a * eye,
        beta=lambda t, m: c * m + k,
        d=d,
        holder=1.0,
        lipschitz=abs(a) + abs(c),
        kind="linear",
        params=(float(a), float(c), float(k)),
    )


def drift_lookup(name: str, params: Sequence[float] = (), d: int = 1) -> DriftSpec:
    params = [float(v) for v in params]
    if name in ("zero", "none"):
        return linear_drift(0.0, 0.0, 0.0, d)
    if name == "linear":
        if len(params) > 3:
            raise DomainError("linear drift takes at most 3 params [a, c, k]")
        return linear_drift(*(params + [0.0] * (3 - len(params))), d=d)
    raise LookupFailure(f"unknown drift preset {name!r}")


# --------------------------------------------------------------------------
# diffusion presets

SUMMARY_KINDS = ("none", "mean", "p-th-moment", "full-empirical")


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion coefficient with declared structural flags.

    ``fn(t, x, summary)`` takes ``x`` of shape (N, d) and returns (N, d, q).
    """

    kind: str
    params: tuple
    fn: Callable[[float, np.ndarray, MeasureSummary], np.ndarray] = field(repr=False)
    summary_kind: str = "none"
    convex: bool = True
    monotone: bool = True
    holder: float = 1.0
    lipschitz: float | None = None
    d: int = 1
    q: int = 1

    def __post_init__(self):
        if self.summary_kind not in SUMMARY_KINDS:
            raise DomainError(f"unknown summary kind {self.summary_kind!r}")

    def eval(self, t: float, x: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        out = np.asarray(self.fn(t, x, summary), dtype=float)
        out = np.broadcast_to(out, (x.shape[0], self.d, self.q))
        return out[0] if single else out

    def scalar(self, t: float, x: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        """1-d shortcut: x of shape (N,) to sigma values of shape (N,)."""
        if self.d != 1 or self.q != 1:
            raise DimensionError("scalar evaluation needs d = q = 1")
        return self.eval(t, np.asarray(x, dtype=float).reshape(-1, 1), summary)[:, 0, 0]


def _eye_block(n: int, d: int, q: int, scale) -> np.ndarray:
    scale = np.asarray(scale, dtype=float).reshape(-1, 1, 1) if np.ndim(scale) else scale
    return scale * np.broadcast_to(np.eye(d, q), (n, d, q))


def _weierstrass(t, base: float, rho: float, terms: int, T: float) -> np.ndarray:
    # sine form: W(0) = 0 and no seed needed. Phase choice matters for the low modes;
    # golden-angle phases flatten the L2 freeze modulus at coarse steps.
    k = np.arange(terms)
    amp = base ** (-k * rho)
    t = np.asarray(t, dtype=float)
    s = (amp * np.sin(2.0 * np.pi * np.multiply.outer(t, base**k) / T)).sum(axis=-1)
    return s / amp.sum()


ROUGH_BASE = (1.0 + 5.0**0.5) / 2.0
ROUGH_TERMS = 40


def _need(params, n, name):
    if len(params) != n:
        raise DomainError(f"preset {name!r} takes {n} params, got {len(params)}")


def preset_lookup(
    name: str, params: Sequence[float] = (), d: int = 1, q: int | None = None, T: float = 1.0
) -> DiffusionSpec:
    """Registry of diffusion coefficients documented to satisfy the order assumptions.

    =====================  ==========================================  ======  ========
    name                   value                                        convex  monotone
    =====================  ==========================================  ======  ========
    constant [s]           s * I                                        yes     yes
    scaled-linear [s]      s * diag(x)   (d = q)                        yes     yes
    mean-field-vol [a,c]   sqrt(a + |x|^2 + c m2(mu)) * I               yes     yes
    saturating-mean-field  (a + b m2/(1 + m2)) * I                      yes     yes
      [a,b]
    interaction-vol [a,c]  (a + c E|x - X'|) with X' ~ mu, d = 1        yes     yes
    rough-clock [s,a(,r)]  s (1 + a W_r(t)) * I, W_r Weierstrass sum    yes     yes
    tent [s]               s (1 - |x|)   (d = 1, negative control)      no      yes
    =====================  ==========================================  ======  ========
    """
    p = tuple(float(v) for v in params)
    q = d if q is None else q
    if name == "constant":
        _need(p, 1, name)
        s = p[0]
        return DiffusionSpec(name, p, lambda t, x, m: _eye_block(len(x), d, q, s),
                             lipschitz=0.0, d=d, q=q)
    if name == "scaled-linear":
        _need(p, 1, name)
        if d != q:
            raise DomainError("scaled-linear needs q = d")
        s = p[0]

        def fn(t, x, m, s=s):
            out = np.zeros((len(x), d, d))
            idx = np.arange(d)
            out[:, idx, idx] = s * x
            return out

        return DiffusionSpec(name, p, fn, lipschitz=abs(s), d=d, q=q)
    if name == "mean-field-vol":
        _need(p, 2, name)
        a, c = p
        if a < 0 or c < 0:
            raise DomainError("mean-field-vol needs a >= 0 and c >= 0")

        def fn(t, x, m, a=a, c=c):
            r = np.sqrt(a + np.einsum("ij,ij->i", x, x) + c * m.m2)
            return _eye_block(len(x), d, q, r)

        return DiffusionSpec(name, p, fn, summary_kind="p-th-moment",
                             lipschitz=max(1.0, math.sqrt(c)), d=d, q=q)
    if name == "saturating-mean-field":
        _need(p, 2, name)
        a, b = p
        if a < 0 or b < 0:
            raise DomainError("saturating-mean-field needs a >= 0 and b >= 0")

        def fn(t, x, m, a=a, b=b):
            return _eye_block(len(x), d, q, a + b * m.m2 / (1.0 + m.m2))

        # d/dr r^2/(1+r^2) <= 3 sqrt(3)/8
        return DiffusionSpec(name, p, fn, summary_kind="p-th-moment",
                             lipschitz=b * 3.0 * math.sqrt(3.0) / 8.0, d=d, q=q)
    if name == "interaction-vol":
        _need(p, 2, name)
        a, c = p
        if d != 1 or q != 1:
            raise DomainError("interaction-vol is one-dimensional")
        if a < 0 or c < 0:
            raise DomainError("interaction-vol needs a >= 0 and c >= 0")

        def fn(t, x, m, a=a, c=c):
            pts = m.samples[:, 0]
            w = m.weights if m.weights is not None else np.full(len(pts), 1.0 / len(pts))
            order = np.argsort(pts, kind="stable")
            ps, ws = pts[order], w[order]
            cw = np.concatenate([[0.0], np.cumsum(ws)])
            cwx = np.concatenate([[0.0], np.cumsum(ws * ps)])
            xv = x[:, 0]
            k = np.searchsorted(ps, xv, side="left")
            below = xv * cw[k] - cwx[k]
            above = (cwx[-1] - cwx[k]) - xv * (cw[-1] - cw[k])
            return (a + c * (below + above)).reshape(-1, 1, 1)

        return DiffusionSpec(name, p, fn, summary_kind="full-empirical",
                             lipschitz=2.0 * c, d=1, q=1)
    if name == "rough-clock":
        if len(p) not in (2, 3):
            raise DomainError("rough-clock takes params [s, a] or [s, a, rho]")
        s, a = p[0], p[1]
        rho = p[2] if len(p) == 3 else 0.25
        if not (0 < rho <= 1) or s < 0 or not (0 <= a < 1):
            raise DomainError("rough-clock needs s >= 0, 0 <= a < 1, 0 < rho <= 1")

        def fn(t, x, m, s=s, a=a, rho=rho):
            val = s * (1.0 + a * float(_weierstrass(t, ROUGH_BASE, rho, ROUGH_TERMS, T)))
            return _eye_block(len(x), d, q, val)

        return DiffusionSpec(name, p, fn, holder=rho, lipschitz=0.0, d=d, q=q)
    if name == "tent":
        _need(p, 1, name)
        if d != 1 or q != 1:
            raise DomainError("tent is one-dimensional")
        s = p[0]
        return DiffusionSpec(name, p, lambda t, x, m, s=s: (s * (1.0 - np.abs(x))).reshape(-1, 1, 1),
                             convex=False, lipschitz=abs(s), d=1, q=1)
    raise LookupFailure(f"unknown diffusion preset {name!r}")


def custom_diffusion(fn, *, d: int = 1, q: int = 1, summary_kind: str = "none",
                     convex: bool = True, monotone: bool = True, holder: float = 1.0,
                     lipschitz: float | None = None, kind: str = "custom") -> DiffusionSpec:
    return DiffusionSpec(kind, (), fn, summary_kind=summary_kind, convex=convex,
                         monotone=monotone, holder=holder, lipschitz=lipschitz, d=d, q=q)


# --------------------------------------------------------------------------
# initial laws

LAW_KINDS = ("point", "gaussian", "uniform", "two-point", "discrete")


@dataclass(frozen=True)
class InitialLaw:
    """Initial distribution sampled by inverse CDF from uniforms.

    Feeding the same uniforms to two laws gives the quantile coupling, which is
    how coupled runs share their initial source.
    """

    kind: str
    params: tuple = ()
    d: int = 1
    atoms: np.ndarray | None = field(default=None, repr=False)
    probs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise LookupFailure(f"unknown initial law {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "point":
            if len(p) not in (1, self.d):
                raise DomainError("point law takes 1 or d params")
            x = np.broadcast_to(np.asarray(p), (self.d,)).reshape(1, self.d)
            object.__setattr__(self, "atoms", x.copy())
            object.__setattr__(self, "probs", np.ones(1))
        elif self.kind == "two-point":
            if len(p) not in (2, 3):
                raise DomainError("two-point law takes [a, b] or [a, b, P(a)]")
            pa = p[2] if len(p) == 3 else 0.5
            if not 0 <= pa <= 1:
                raise DomainError("two-point probability must be in [0, 1]")
            x = np.array([[p[0]], [p[1]]]).repeat(self.d, axis=1)
            object.__setattr__(self, "atoms", x)
            object.__setattr__(self, "probs", np.array([pa, 1.0 - pa]))
        elif self.kind == "discrete":
            if self.atoms is None or self.probs is None:
                raise DomainError("discrete law needs atoms and probs")
            atoms = np.asarray(self.atoms, dtype=float).reshape(len(self.probs), -1)
            probs = np.asarray(self.probs, dtype=float)
            if atoms.shape[1] != self.d:
                raise DimensionError("atom dimension does not match d")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise DomainError("discrete law weights must be a probability vector")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "probs", probs)
        elif self.kind == "gaussian":
            if len(p) != 2 or p[1] < 0:
                raise DomainError("gaussian law takes [mean, sd] with sd >= 0")
        elif self.kind == "uniform":
            if len(p) != 2 or p[1] < p[0]:
                raise DomainError("uniform law takes [lo, hi] with lo <= hi")

    @classmethod
    def discrete(cls, atoms, probs, d: int | None = None) -> "InitialLaw":
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        return cls("discrete", (), atoms.shape[1] if d is None else d, atoms, np.asarray(probs, float))

    @property
    def is_atomic(self) -> bool:
        return self.atoms is not None

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape (N, d) to samples of shape (N, d)."""
        from scipy.special import ndtri

        u = np.asarray(u, dtype=float).reshape(-1, self.d)
        if self.is_atomic:
            cw = np.cumsum(self.probs)
            cw[-1] = 1.0
            idx = np.searchsorted(cw, u[:, 0], side="right")
            return self.atoms[np.minimum(idx, len(cw) - 1)].copy()
        lo, hi = self.params
        if self.kind == "gaussian":
            return lo + hi * ndtri(u)
        return lo + (hi - lo) * u

    def measure(self):
        from .measure import DiscreteMeasure

        if not self.is_atomic:
            return None
        return DiscreteMeasure(self.atoms, self.probs)

    @property
    def mean(self) -> np.ndarray:
        if self.is_atomic:
            return self.probs @ self.atoms
        lo, hi = self.params
        return np.full(self.d, lo if self.kind == "gaussian" else 0.5 * (lo + hi))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MKVModel:
    drift: DriftSpec
    sigma: DiffusionSpec
    theta: DiffusionSpec
    init_x: InitialLaw
    init_y: InitialLaw
    d: int = 1
    q: int = 1
    p: float = 2.0

    def __post_init__(self):
        if self.p < 2:
            raise DomainError("integrability exponent p must be >= 2")
        for name, c in (("sigma", self.sigma), ("theta", self.theta)):
            if (c.d, c.q) != (self.d, self.q):
                raise DimensionError(f"{name} has shape {(c.d, c.q)}, model needs {(self.d, self.q)}")
        if self.drift.d != self.d:
            raise DimensionError("drift dimension does not match d")
        for law in (self.init_x, self.init_y):
            if law.d != self.d:
                raise DimensionError("initial law dimension does not match d")

    def coefficient(self, which: str) -> DiffusionSpec:
        if which == "X":
            return self.sigma
        if which == "Y":
            return self.theta
        raise DomainError(f"process tag must be 'X' or 'Y', got {which!r}")

    def initial(self, which: str) -> InitialLaw:
        if which == "X":
            return self.init_x
        if which == "Y":
            return self.init_y
        raise DomainError(f"process tag must be 'X' or 'Y', got {which!r}")

    def uses_measure(self) -> bool:
        if self.sigma.summary_kind != "none" or self.theta.summary_kind != "none":
            return True
        # custom drifts may read the mean through beta; only the linear preset is known
        return not (self.drift.kind in ("linear", "zero") and self.drift.params[1:2] in ((), (0.0,)))

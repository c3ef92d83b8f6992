"""Exact and statistical tests of the convex order.

Exact routes work on finite-support measures: the Strassen martingale-kernel
LP in any dimension and the call-function check in dimension 1.  Statistical
routes work on samples; a "yes" there only means that no tested convex
function rejected the order at the stated confidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import ndtri

from .errors import ContractError, DimensionError, TooLargeError
from .functionals import ExtendedFunctional, MonotoneFunctional, PathFunctional
from .measure import EXACT_OT_LIMIT, DiscreteMeasure
from .rng import StreamSpec, gaussian_block, uniform_block
from .validate import CheckResult, ProbeConfig, ValidationReport, _Probe

MODES = ("exact-LP", "exact", "statistical")
VERDICTS = ("yes", "no", "undecided")


@dataclass(frozen=True)
class MaxAffine:
    """phi(x) = max_j (<a_j, x> + c_j)."""

    directions: np.ndarray
    intercepts: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.directions, dtype=float))
        c = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if A.shape[0] != c.shape[0]:
            raise DimensionError("one intercept per direction is required")
        object.__setattr__(self, "directions", A)
        object.__setattr__(self, "intercepts", c)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.directions.shape[1] == 1 else x[None, :]
        return (x @ self.directions.T + self.intercepts).max(axis=1)

    @property
    def growth(self) -> float:
        return float(np.linalg.norm(self.directions, axis=1).max())

    @classmethod
    def call(cls, k: float, d: int = 1, coord: int = 0) -> "MaxAffine":
        e = np.zeros(d)
        e[coord] = 1.0
        return cls(np.vstack([e, np.zeros(d)]), np.array([-k, 0.0]), f"call({k:.6g})")

    @classmethod
    def linear(cls, a: np.ndarray, label: str = "") -> "MaxAffine":
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls(a[None, :], np.zeros(1), label or f"linear({a.tolist()})")

    def to_dict(self) -> dict:
        return {"label": self.label, "directions": self.directions.tolist(),
                "intercepts": self.intercepts.tolist()}


@dataclass(frozen=True)
class NamedWitness:
    """Witness for tests whose separating function is a named path functional."""

    label: str
    kind: str = "path-functional"

    def to_dict(self) -> dict:
        return {"label": self.label, "kind": self.kind}


@dataclass(frozen=True)
class Margin:
    name: str
    estimate: float
    stderr: float
    threshold: float

    @property
    def rejected(self) -> bool:
        return self.estimate < -self.threshold

    @property
    def lower(self) -> float:
        # one-sided lower confidence bound at the verdict's corrected level
        return self.estimate - (self.threshold if self.stderr > 0 else 0.0)

    def to_dict(self) -> dict:
        return {"name": self.name, "estimate": self.estimate, "stderr": self.stderr,
                "threshold": self.threshold, "rejected": self.rejected}


@dataclass(frozen=True)
class OrderVerdict:
    mode: str
    dominated: str
    margins: tuple = ()
    witness: MaxAffine | NamedWitness | None = None
    confidence: float | None = None
    kernel: np.ndarray | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.dominated not in VERDICTS:
            raise ValueError(f"unknown verdict {self.dominated!r}")
        if self.dominated == "no" and self.witness is None:
            raise ValueError("a rejection must carry a witness")
        if self.mode == "exact-LP" and self.margins:
            raise ValueError("exact-LP verdicts carry no margins")
        object.__setattr__(self, "margins", tuple(self.margins))

    @property
    def statistical(self) -> bool:
        return self.mode == "statistical"

    @property
    def not_rejected(self) -> bool:
        return self.dominated != "no"

    def margin(self, name: str) -> Margin:
        for m in self.margins:
            if m.name == name:
                return m
        raise KeyError(name)

    def worst(self) -> Margin | None:
        if not self.margins:
            return None
        return min(self.margins, key=lambda m: m.estimate + m.threshold)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "dominated": self.dominated,
            "semantics": "not rejected" if self.statistical and self.dominated == "yes" else "decided",
            "confidence": self.confidence,
            "margins": [m.to_dict() for m in self.margins],
            "witness": None if self.witness is None else self.witness.to_dict(),
            "info": self.info,
        }


def bonferroni_z(conf: float, k: int, two_sided: bool = False) -> float:
    alpha = (1.0 - conf) / max(k, 1)
    if two_sided:
        alpha /= 2.0
    return float(ndtri(1.0 - alpha))


def _atol(*arrays) -> float:
    scale = max(1.0, *(float(np.abs(a).max()) for a in arrays))
    return 1e-9 * scale


# --------------------------------------------------------------------------
# exact routes


def _linear_witness(diff: np.ndarray) -> MaxAffine:
    # mean(nu) - mean(mu) = diff; phi(x) = -<diff, x> has integral gap |diff|^2 > 0
    return MaxAffine.linear(-diff, "linear (mean mismatch)")


def strassen_lp_test(mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderVerdict:
    """Decide mu ⪯_cv nu by feasibility of a martingale transport plan.

    Variables pi_ij >= 0 with row sums mu_i, column sums nu_j and barycenters
    sum_j pi_ij y_j = mu_i x_i.  If infeasible, a Farkas certificate of the LP
    gives a max-affine convex function separating the two measures.
    """
    if mu.dim != nu.dim:
        raise DimensionError("dimension mismatch")
    if mu.size * nu.size > EXACT_OT_LIMIT:
        raise TooLargeError(f"{mu.size} x {nu.size} plan variables exceed the LP limit")
    mu, nu = mu.merged(), nu.merged()
    x, a = mu.support, mu.weights
    y, b = nu.support, nu.weights
    K1, K2, d = len(a), len(b), mu.dim
    atol = _atol(x, y)
    diff = nu.mean - mu.mean
    if np.linalg.norm(diff) > atol:
        return OrderVerdict("exact-LP", "no", witness=_linear_witness(diff),
                            info={"reason": "means differ", "mean_gap": diff.tolist()})

    n = K1 * K2
    rows = sparse.kron(sparse.eye(K1), np.ones((1, K2)))
    cols = sparse.kron(np.ones((1, K1)), sparse.eye(K2))
    bary = [sparse.kron(sparse.eye(K1), y[:, k][None, :]) for k in range(d)]
    A_eq = sparse.vstack([rows, cols, *bary]).tocsc()
    b_eq = np.concatenate([a, b, *(a * x[:, k] for k in range(d))])
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=opts)
    if res.status == 0:
        pi = res.x.reshape(K1, K2)
        kernel = pi / a[:, None]
        resid = float(np.abs(A_eq @ res.x - b_eq).max())
        return OrderVerdict("exact-LP", "yes", kernel=kernel,
                            info={"residual": resid, "support_x": x.tolist(), "support_y": y.tolist()})
    witness, gap = _farkas_witness(x, a, y, b)
    if res.status != 2 and gap <= atol:
        return OrderVerdict("exact-LP", "undecided", info={"solver_status": int(res.status),
                                                          "message": res.message})
    return OrderVerdict("exact-LP", "no", witness=witness, info={"witness_gap": gap})


def _farkas_witness(x, a, y, b) -> tuple[MaxAffine, float]:
    """Box-normalised dual: min sum a_i u_i + sum b_j v_j + sum a_i <c_i, x_i>
    subject to u_i + v_j + <c_i, y_j> >= 0.  A negative value certifies
    infeasibility and psi(z) = max_i(-u_i - <c_i, z>) is the separating function.
    """
    K1, K2, d = len(a), len(b), x.shape[1]
    nv = K1 + K2 + K1 * d
    cost = np.concatenate([a, b, (a[:, None] * x).reshape(-1)])
    I = np.repeat(np.arange(K1), K2)
    J = np.tile(np.arange(K2), K1)
    r = np.arange(K1 * K2)
    rows = [r, r]
    colsi = [I, K1 + J]
    vals = [np.ones(K1 * K2), np.ones(K1 * K2)]
    for k in range(d):
        rows.append(r)
        colsi.append(K1 + K2 + I * d + k)
        vals.append(y[J, k])
    A = sparse.csr_matrix((-np.concatenate(vals), (np.concatenate(rows), np.concatenate(colsi))),
                          shape=(K1 * K2, nv))
    res = linprog(cost, A_ub=A, b_ub=np.zeros(K1 * K2), bounds=(-1, 1), method="highs")
    u = res.x[:K1]
    c = res.x[K1 + K2 :].reshape(K1, d)
    psi = MaxAffine(-c, -u, "strassen dual witness")
    gap = float(a @ psi(x) - b @ psi(y))
    return psi, gap


def call_margins(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray, strikes: np.ndarray) -> np.ndarray:
    cx = np.maximum(x[:, None] - strikes[None, :], 0.0).T @ wx
    cy = np.maximum(y[:, None] - strikes[None, :], 0.0).T @ wy
    return cy - cx


def _as_samples(obj) -> np.ndarray:
    if hasattr(obj, "states"):
        obj = obj.states
    a = np.asarray(obj, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def call_function_test_1d(
    mu, nu, strikes: Sequence[float] | int | None = None, conf: float = 0.999, paired: bool | None = None
) -> OrderVerdict:
    """Mean equality plus E(X-k)+ <= E(Y-k)+ over a strike grid.

    DiscreteMeasure inputs give an exact decision; with the default strikes
    (union of both supports) the check is also sufficient, because both call
    price curves are piecewise linear between atoms.  Sample inputs (arrays or
    ensembles) give a statistical verdict with Bonferroni-corrected one-sided
    tests; ``paired`` defaults to True when the sample sizes agree.
    """
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        return _call_exact(mu, nu, strikes)
    x = _as_samples(mu)
    y = _as_samples(nu)
    if x.shape[1] != 1 or y.shape[1] != 1:
        raise DimensionError("call_function_test_1d needs one-dimensional samples")
    x, y = x[:, 0], y[:, 0]
    if paired is None:
        paired = len(x) == len(y)
    if paired and len(x) != len(y):
        raise DimensionError("paired test needs equal sample sizes")
    pooled = np.concatenate([x, y])
    if strikes is None or isinstance(strikes, (int, np.integer)):
        n = 33 if strikes is None else int(strikes)
        ks = np.quantile(pooled, np.linspace(0.005, 0.995, n)) if np.ptp(pooled) > 0 else np.array([pooled[0]])
    else:
        ks = np.asarray(strikes, dtype=float)
    ks = np.unique(ks)
    n_tests = len(ks) + 1
    z1 = bonferroni_z(conf, n_tests)
    z2 = bonferroni_z(conf, n_tests, two_sided=True)
    cx = np.maximum(x[:, None] - ks[None, :], 0.0)
    cy = np.maximum(y[:, None] - ks[None, :], 0.0)
    est = cy.mean(axis=0) - cx.mean(axis=0)
    if paired:
        se = (cy - cx).std(axis=0, ddof=1) / np.sqrt(len(x))
        mse = float((y - x).std(ddof=1) / np.sqrt(len(x)))
    else:
        se = np.sqrt(cx.var(axis=0, ddof=1) / len(x) + cy.var(axis=0, ddof=1) / len(y))
        mse = float(np.sqrt(x.var(ddof=1) / len(x) + y.var(ddof=1) / len(y)))
    mgap = float(y.mean() - x.mean())
    margins = [Margin("mean-gap", mgap, mse, z2 * mse)]
    margins += [Margin(f"call({k:.6g})", float(e), float(s), float(z1 * s)) for k, e, s in zip(ks, est, se)]
    mean_bad = abs(mgap) > z2 * mse
    worst = int(np.argmin(est + z1 * se))
    call_bad = est[worst] < -z1 * se[worst]
    witness = None
    if call_bad:
        witness = MaxAffine.call(float(ks[worst]))
    elif mean_bad:
        witness = _linear_witness(np.array([mgap]))
    return OrderVerdict("statistical", "no" if (call_bad or mean_bad) else "yes", margins, witness, conf,
                        info={"paired": bool(paired), "n_strikes": int(len(ks)),
                              "z_call": z1, "z_mean": z2,
                              "witness_strike": float(ks[worst]) if call_bad else None})


def _call_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, strikes) -> OrderVerdict:
    if mu.dim != 1 or nu.dim != 1:
        raise DimensionError("call_function_test_1d needs one-dimensional measures")
    x, wx = mu.support[:, 0], mu.weights
    y, wy = nu.support[:, 0], nu.weights
    union = np.union1d(x, y)
    ks = union if strikes is None else np.unique(np.asarray(strikes, dtype=float))
    sufficient = bool(np.all(np.isin(union, ks)))
    atol = _atol(x, y)
    mgap = float(wy @ y - wx @ x)
    est = call_margins(x, wx, y, wy, ks)
    margins = [Margin("mean-gap", mgap, 0.0, atol)]
    margins += [Margin(f"call({k:.6g})", float(e), 0.0, atol) for k, e in zip(ks, est)]
    worst = int(np.argmin(est))
    witness = None
    if est[worst] < -atol:
        witness = MaxAffine.call(float(ks[worst]))
    elif abs(mgap) > atol:
        witness = _linear_witness(np.array([mgap]))
    if witness is not None:
        verdict = "no"
    else:
        verdict = "yes" if sufficient else "undecided"
    return OrderVerdict("exact", verdict, margins, witness,
                        info={"sufficient": sufficient, "n_strikes": int(len(ks)),
                              "witness_strike": float(ks[worst]) if est[worst] < -atol else None})


# --------------------------------------------------------------------------
# statistical routes


@dataclass(frozen=True)
class ConvexTestFamily:
    """Finite family of convex test functions with linear growth.

    calls-1d:    +/- x and ``size`` call functions at pooled quantiles
    max-affine:  +/- e_i (mean check) and ``size`` hinges max(0, <v, x> - k)
                 with v uniform on the sphere and k a pooled quantile of <v, x>
    custom-list: the given ``members``
    """

    kind: str = "max-affine"
    size: int = 64
    seed: int = 0
    growth: float = 1.0
    members: tuple = ()

    def build(self, pooled: np.ndarray) -> list[MaxAffine]:
        pooled = _as_samples(pooled)
        d = pooled.shape[1]
        eye = np.eye(d)
        if self.kind == "custom-list":
            out = list(self.members)
        else:
            out = [MaxAffine.linear(s * eye[i], f"{'+' if s > 0 else '-'}e{i}") for i in range(d) for s in (1, -1)]
            if self.kind == "calls-1d":
                if d != 1:
                    raise DimensionError("calls-1d family is one-dimensional")
                ks = np.quantile(pooled[:, 0], np.linspace(0.02, 0.98, self.size))
                out += [MaxAffine.call(float(k)) for k in ks]
            elif self.kind == "max-affine":
                v = gaussian_block(StreamSpec(self.seed, tag="family"), self.size, d)
                v /= np.linalg.norm(v, axis=1, keepdims=True)
                lev = 0.05 + 0.9 * uniform_block(StreamSpec(self.seed, tag="family", step=1), self.size, 1)[:, 0]
                proj = pooled @ v.T
                for j in range(self.size):
                    k = float(np.quantile(proj[:, j], lev[j]))
                    out.append(MaxAffine(np.vstack([np.zeros(d), v[j]]), np.array([0.0, -k]), f"hinge{j}"))
            else:
                raise ValueError(f"unknown family kind {self.kind!r}")
        for f in out:
            if f.growth > self.growth * (1 + 1e-12):
                raise ContractError(f"member {f.label} exceeds the declared growth bound {self.growth}")
        return out


def _stat_margins(fx: np.ndarray, fy: np.ndarray, paired: bool):
    est = fy.mean(axis=0) - fx.mean(axis=0)
    if paired:
        se = (fy - fx).std(axis=0, ddof=1) / np.sqrt(fx.shape[0])
    else:
        se = np.sqrt(fx.var(axis=0, ddof=1) / fx.shape[0] + fy.var(axis=0, ddof=1) / fy.shape[0])
    return est, se


def convex_family_test(mu, nu, family: ConvexTestFamily | None = None, conf: float = 0.999,
                       paired: bool | None = None) -> OrderVerdict:
    """One-sided margins of every family member; 'yes' means not rejected."""
    family = ConvexTestFamily() if family is None else family
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        members = family.build(np.vstack([mu.support, nu.support]))
        est = np.array([nu.weights @ f(nu.support) - mu.weights @ f(mu.support) for f in members])
        atol = _atol(mu.support, nu.support)
        margins = [Margin(f.label, float(e), 0.0, atol) for f, e in zip(members, est)]
        worst = int(np.argmin(est))
        bad = est[worst] < -atol
        return OrderVerdict("exact", "no" if bad else "yes", margins, members[worst] if bad else None,
                            info={"finite_family": True, "size": len(members)})
    x, y = _as_samples(mu), _as_samples(nu)
    if paired is None:
        paired = x.shape == y.shape
    members = family.build(np.vstack([x, y]))
    fx = np.column_stack([f(x) for f in members])
    fy = np.column_stack([f(y) for f in members])
    est, se = _stat_margins(fx, fy, paired)
    z = bonferroni_z(conf, len(members))
    margins = [Margin(f.label, float(e), float(s), float(z * s)) for f, e, s in zip(members, est, se)]
    worst = int(np.argmin(est + z * se))
    bad = est[worst] < -z * se[worst]
    return OrderVerdict("statistical", "no" if bad else "yes", margins, members[worst] if bad else None,
                        conf, info={"paired": bool(paired), "z": z, "size": len(members)})


def _paths_of(bundle):
    if hasattr(bundle, "paths"):
        return bundle.paths, bundle.times
    P = np.asarray(bundle, dtype=float)
    return P, np.linspace(0.0, 1.0, P.shape[1])


def _require_convex(F) -> None:
    if not isinstance(F, PathFunctional) or F.convex is not True:
        raise ContractError("path functional must be a PathFunctional declared convex=True")


def functional_order_test(xpaths, ypaths, F: PathFunctional, conf: float = 0.999,
                          paired: bool | None = None) -> OrderVerdict:
    """Margin E F(Y) - E F(X); paired when both bundles share their noise stream."""
    _require_convex(F)
    PX, tx = _paths_of(xpaths)
    PY, ty = _paths_of(ypaths)
    if paired is None:
        paired = hasattr(xpaths, "paired_with") and xpaths.paired_with(ypaths)
    fx, fy = F(PX, tx)[:, None], F(PY, ty)[:, None]
    est, se = _stat_margins(fx, fy, paired)
    z = bonferroni_z(conf, 1)
    m = Margin(F.name, float(est[0]), float(se[0]), float(z * se[0]))
    bad = m.rejected
    witness = NamedWitness(F.name) if bad else None
    return OrderVerdict("statistical", "no" if bad else "yes", (m,), witness, conf,
                        info={"paired": bool(paired), "z": z, "functional": F.name})


def _flow_terms(paths, times, grid, flow, G: ExtendedFunctional, M_nodes: int):
    """Per-particle contribution and flow value for one process."""
    N = paths.shape[0]
    r = (paths.shape[1] - 1) // (M_nodes - 1)
    coarse = paths[:, ::r]
    w = (np.full(M_nodes, grid.T / (M_nodes - 1)) if G.node_weights is None
         else np.asarray(G.node_weights, dtype=float))
    if len(w) != M_nodes:
        raise DimensionError(f"need {M_nodes} node weights, got {len(w)}")
    contrib = np.zeros(N)
    if G.path_part is not None:
        contrib += G.path_part(paths, times)
    flow_value = 0.0
    if G.flow_part is not None:
        empirical = flow is None
        for m in range(M_nodes):
            eta = DiscreteMeasure.from_samples(coarse[:, m]) if empirical else flow[m]
            val = G.flow_part(eta)
            flow_value += w[m] * val
            if empirical and G.flow_part.has_derivative:
                infl = G.flow_part.derivative(eta, coarse[:, m])
                contrib += w[m] * (infl - infl.mean() + val)
            else:
                contrib += w[m] * val
    return contrib, flow_value


def extended_order_test(xpaths, ypaths, xflow=None, yflow=None, G: ExtendedFunctional | None = None,
                        conf: float = 0.999, paired: bool | None = None) -> OrderVerdict:
    """Margin E G(Y, nu-flow) - E G(X, mu-flow).

    Flows default to the empirical flows of the bundles; the flow term's
    standard error then comes from the linear functional derivative used as
    influence function (delta method).  Explicit flows are treated as fixed.
    """
    G = ExtendedFunctional() if G is None else G
    if G.path_part is not None:
        _require_convex(G.path_part)
    if G.flow_part is not None and not isinstance(G.flow_part, MonotoneFunctional):
        raise ContractError("flow part must be a MonotoneFunctional")
    grid = xpaths.grid
    M_nodes = grid.M + 1
    cx, _ = _flow_terms(xpaths.paths, xpaths.times, grid, xflow, G, M_nodes)
    cy, _ = _flow_terms(ypaths.paths, ypaths.times, grid, yflow, G, M_nodes)
    if paired is None:
        paired = xpaths.paired_with(ypaths)
    est, se = _stat_margins(cx[:, None], cy[:, None], paired)
    z = bonferroni_z(conf, 1)
    m = Margin(G.name, float(est[0]), float(se[0]), float(z * se[0]))
    witness = NamedWitness(G.name, "extended-functional") if m.rejected else None
    return OrderVerdict("statistical", "no" if m.rejected else "yes", (m,), witness, conf,
                        info={"paired": bool(paired), "z": z})


# --------------------------------------------------------------------------


def derivative_convexity_check(phi: MonotoneFunctional, probe: ProbeConfig | None = None) -> ValidationReport:
    """Sampled midpoint convexity of x -> dPhi/dm(mu)(x), plus the spread-pair integrals
    of the derivative and the direct monotonicity Phi(mu) <= Phi(spread mu)."""
    if not phi.has_derivative:
        raise ContractError("derivative_convexity_check needs a functional with a derivative")
    from .measure import mean_preserving_spread

    probe = ProbeConfig() if probe is None else probe
    pr = _Probe(probe)
    n = probe.n_samples
    n_meas = max(4, n // 100)
    worst_mid, wit_mid = np.inf, {}
    worst_int, wit_int = np.inf, {}
    worst_val, wit_val = np.inf, {}
    per = max(1, n // n_meas)
    for j in range(n_meas):
        mu = pr.measure()
        x, y = pr.points(per), pr.points(per)
        lam = pr.uniform(per, 1)
        mid = lam * x + (1 - lam) * y
        dm = phi.derivative(mu, mid)
        comb = lam[:, 0] * phi.derivative(mu, x) + (1 - lam[:, 0]) * phi.derivative(mu, y)
        scale = 1.0 + np.abs(comb).max()
        gap = (comb - dm) / scale
        i = int(np.argmin(gap))
        if gap[i] < worst_mid:
            worst_mid = float(gap[i])
            wit_mid = {"x": x[i].tolist(), "y": y[i].tolist(), "lambda": float(lam[i, 0]),
                       "midpoint": mid[i].tolist(), "measure_atoms": mu.support.tolist()}
        s = probe.box * pr.uniform(1, 1)[0, 0]
        nu = mean_preserving_spread(mu, s, seed=probe.seed + j)
        integral = float(nu.weights @ phi.derivative(mu, nu.support) - mu.weights @ phi.derivative(mu, mu.support))
        if integral < worst_int:
            worst_int, wit_int = integral, {"spread": s}
        dv = phi(nu) - phi(mu)
        if dv < worst_val:
            worst_val, wit_val = dv, {"spread": s}
    tol = probe.tol
    return ValidationReport([
        CheckResult("derivative-midpoint-convexity", worst_mid >= -tol, worst_mid, -tol, wit_mid),
        CheckResult("derivative-spread-integral", worst_int >= -tol, worst_int, -tol, wit_int),
        CheckResult("value-monotone-on-spreads", worst_val >= -tol, worst_val, -tol, wit_val,
                    "direct check of the functional on generated pairs"),
    ])

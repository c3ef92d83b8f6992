"""Finite-support measures, Wasserstein distances, mixtures and measure paths."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DimensionError, DomainError, GridError, TooLargeError
from .model import TimeGrid
from .rng import StreamSpec, gaussian_block

DEDUP_TOL = 1e-12
EXACT_OT_LIMIT = 1_000_000


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.support, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if x.shape[0] != w.shape[0]:
            raise DimensionError(f"{x.shape[0]} atoms but {w.shape[0]} weights")
        if x.shape[0] == 0:
            raise DomainError("a measure needs at least one atom")
        if not np.all(np.isfinite(x)):
            raise DomainError("support rows must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "DiscreteMeasure":
        x = np.asarray(samples, dtype=float)
        n = x.shape[0]
        return cls(x, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @classmethod
    def from_atoms(cls, atoms: dict | Sequence) -> "DiscreteMeasure":
        """``{x: w}`` or a list of ``(x, w)`` pairs (1-d convenience)."""
        items = list(atoms.items()) if isinstance(atoms, dict) else list(atoms)
        x = np.array([np.atleast_1d(np.asarray(a, dtype=float)) for a, _ in items])
        w = np.array([float(b) for _, b in items])
        return cls(x, w)

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def size(self) -> int:
        return self.support.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.support

    def expect(self, fn) -> float:
        return float(self.weights @ np.asarray(fn(self.support), dtype=float).reshape(-1))

    @cached_property
    def _sorted_1d(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.support[:, 0], kind="stable")
        return self.support[order, 0], self.weights[order]

    def merged(self, tol: float = DEDUP_TOL) -> "DiscreteMeasure":
        """Merge atoms closer than ``tol`` (Euclidean) and drop zero weights."""
        keep = self.weights > 0
        x, w = self.support[keep], self.weights[keep]
        order = np.lexsort(x.T[::-1])
        x, w = x[order], w[order]
        out_x, out_w = [x[0]], [w[0]]
        for xi, wi in zip(x[1:], w[1:]):
            if np.linalg.norm(xi - out_x[-1]) <= tol:
                out_w[-1] += wi
            else:
                out_x.append(xi)
                out_w.append(wi)
        ww = np.array(out_w)
        return DiscreteMeasure(np.array(out_x), ww / ww.sum())

    def to_csv(self, path: str | os.PathLike) -> None:
        from .io import atomic_write_text

        lines = ["weight," + ",".join(f"x{i}" for i in range(self.dim))]
        for w, row in zip(self.weights, self.support):
            lines.append(",".join(repr(float(v)) for v in (w, *row)))
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "DiscreteMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, 1:], data[:, 0])


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.dim != nu.dim:
        raise DimensionError(f"dimension mismatch {mu.dim} vs {nu.dim}")


def wasserstein_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact W_p in dimension 1 via the quantile coupling on the merged weight partition."""
    if mu.dim != 1 or nu.dim != 1:
        raise DimensionError("wasserstein_1d needs one-dimensional measures")
    if p < 1:
        raise DomainError("p must be >= 1")
    xs, wx = mu._sorted_1d
    ys, wy = nu._sorted_1d
    cx = np.cumsum(wx)
    cy = np.cumsum(wy)
    cx[-1] = cy[-1] = 1.0
    levels = np.union1d(cx, cy)
    lower = np.concatenate([[0.0], levels[:-1]])
    mass = levels - lower
    ix = np.minimum(np.searchsorted(cx, lower, side="right"), len(xs) - 1)
    iy = np.minimum(np.searchsorted(cy, lower, side="right"), len(ys) - 1)
    cost = float(mass @ np.abs(xs[ix] - ys[iy]) ** p)
    return cost ** (1.0 / p)


def _import_ot():
    # the optional array backends of POT are slow to import and unused here
    for name in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot


def transport_cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) ** p


def wasserstein_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact optimal transport cost^(1/p) by network simplex on the bipartite cost matrix."""
    _check_pair(mu, nu)
    if mu.size * nu.size > EXACT_OT_LIMIT:
        raise TooLargeError(
            f"{mu.size} x {nu.size} atoms exceeds the exact-OT limit; use sliced_wasserstein"
        )
    ot = _import_ot()
    C = transport_cost_matrix(mu.support, nu.support, p)
    a = np.ascontiguousarray(mu.weights)
    b = np.ascontiguousarray(nu.weights)
    b = b * (a.sum() / b.sum())
    cost = float(ot.emd2(a, b, C, numItermax=50_000_000))
    return max(cost, 0.0) ** (1.0 / p)


def _sphere_abs_moment(d: int, p: float) -> float:
    # E|v_1|^p for v uniform on the unit sphere of R^d
    return math.exp(gammaln(d / 2) + gammaln((p + 1) / 2) - 0.5 * math.log(math.pi) - gammaln((d + p) / 2))


def sliced_profile(
    mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, n_directions: int, seed: int
) -> np.ndarray:
    """Per-direction W_p^p of the projections, rescaled so a translation is recovered on average."""
    _check_pair(mu, nu)
    d = mu.dim
    v = gaussian_block(StreamSpec(seed, tag="directions"), n_directions, d)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    c = 1.0 / _sphere_abs_moment(d, p)
    out = np.empty(n_directions)
    for i, vi in enumerate(v):
        a = DiscreteMeasure(mu.support @ vi, mu.weights)
        b = DiscreteMeasure(nu.support @ vi, nu.weights)
        out[i] = c * wasserstein_1d(a, b, p) ** p
    return out


def sliced_wasserstein(
    mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0, n_directions: int = 256, seed: int = 0
) -> float:
    """Sliced W_p: p-mean over random directions, normalised by the sphere moment E|v_1|^p.

    With the normalisation a translated pair has expected value equal to the shift
    length in any dimension; the direction sample adds O(n_directions^-1/2) noise.
    """
    if mu.dim < 2:
        raise DimensionError("sliced_wasserstein is meant for d >= 2; use wasserstein_1d")
    return float(np.mean(sliced_profile(mu, nu, p, n_directions, seed))) ** (1.0 / p)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact in 1-d or when the LP fits, sliced otherwise."""
    if mu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    if mu.size * nu.size <= EXACT_OT_LIMIT:
        return wasserstein_exact(mu, nu, p)
    return sliced_wasserstein(mu, nu, p)


def moment(mu: DiscreteMeasure, p: float = 2.0) -> float:
    if p < 1:
        raise DomainError("p must be >= 1")
    r = np.linalg.norm(mu.support, axis=1)
    return float(mu.weights @ r**p) ** (1.0 / p)


def mixture(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float) -> DiscreteMeasure:
    """lam * mu + (1 - lam) * nu."""
    _check_pair(mu, nu)
    if not 0.0 <= lam <= 1.0:
        raise DomainError("mixture weight must lie in [0, 1]")
    if lam == 1.0:
        return mu
    if lam == 0.0:
        return nu
    x = np.vstack([mu.support, nu.support])
    w = np.concatenate([lam * mu.weights, (1.0 - lam) * nu.weights])
    w = w / w.sum()
    return DiscreteMeasure(x, w).merged()


def mean_preserving_spread(mu: DiscreteMeasure, scale: float, seed: int = 0) -> DiscreteMeasure:
    """Split every atom x into x +/- scale * v with half its weight each.

    In dimension 1 the kick direction is +1; otherwise one uniform direction per
    atom.  The symmetric split is a martingale kernel, so mu ⪯_cv result.
    """
    if scale < 0:
        raise DomainError("spread scale must be >= 0")
    if scale == 0:
        return mu
    if mu.dim == 1:
        v = np.ones((mu.size, 1))
    else:
        v = gaussian_block(StreamSpec(seed, tag="spread"), mu.size, mu.dim)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = np.vstack([mu.support + scale * v, mu.support - scale * v])
    w = np.concatenate([mu.weights, mu.weights]) * 0.5
    return DiscreteMeasure(x, w / w.sum())


@dataclass(frozen=True)
class MeasurePath:
    grid: TimeGrid
    measures: tuple

    def __post_init__(self):
        ms = tuple(self.measures)
        if len(ms) != self.grid.M + 1:
            raise GridError(f"need {self.grid.M + 1} measures, got {len(ms)}")
        object.__setattr__(self, "measures", ms)

    def __getitem__(self, m: int) -> DiscreteMeasure:
        return self.measures[m]

    def __len__(self) -> int:
        return len(self.measures)

    @classmethod
    def from_ensembles(cls, ensembles, grid: TimeGrid) -> "MeasurePath":
        return cls(grid, tuple(DiscreteMeasure.from_samples(e.states) for e in ensembles))

    def spread(self, scale: float, seed: int = 0) -> "MeasurePath":
        return MeasurePath(self.grid, tuple(mean_preserving_spread(m, scale, seed) for m in self.measures))

    def to_directory(self, directory: str | os.PathLike) -> list[Path]:
        from .io import atomic_write_text

        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        files = []
        index = ["m,t,file"]
        for m, (t, mu) in enumerate(zip(self.grid.nodes, self.measures)):
            name = f"node_{m:05d}.csv"
            mu.to_csv(root / name)
            files.append(root / name)
            index.append(f"{m},{t!r},{name}")
        atomic_write_text(root / "index.csv", "\n".join(index) + "\n")
        files.append(root / "index.csv")
        return files

    @classmethod
    def from_directory(cls, directory: str | os.PathLike, T: float) -> "MeasurePath":
        root = Path(directory)
        with open(root / "index.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        ms = tuple(DiscreteMeasure.from_csv(root / r["file"]) for r in rows)
        return cls(TimeGrid(T, len(ms) - 1), ms)


def path_distance_dC(a: MeasurePath, b: MeasurePath, p: float = 1.0) -> float:
    """sup over grid nodes of W_p(a_t, b_t)."""
    if a.grid != b.grid:
        raise GridError(f"grid mismatch {a.grid} vs {b.grid}")
    return max(wasserstein(x, y, p) for x, y in zip(a.measures, b.measures))

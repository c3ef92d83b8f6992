"""Piecewise-affine path interpolation and the mixture interpolation of measure paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, RangeError
from .measure import DiscreteMeasure, MeasurePath, mixture
from .model import TimeGrid


@dataclass(frozen=True, eq=False)
class InterpolatedPath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.M + 1:
            raise DimensionError(f"need {self.grid.M + 1} node values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise DomainError("node values must be finite")
        object.__setattr__(self, "values", v)

    def __call__(self, t) -> np.ndarray:
        """Affine interpolation; returns (d,) for scalar t and (n, d) for an array."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.grid.T):
            raise RangeError(f"query outside [0, {self.grid.T}]")
        nodes = self.grid.nodes
        m = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, self.grid.M - 1)
        w = ((t - nodes[m]) / self.grid.h)[:, None]
        out = self.values[m] + w * (self.values[m + 1] - self.values[m])
        # node hits return the stored value bit for bit
        hit_lo = t == nodes[m]
        hit_hi = t == nodes[m + 1]
        out[hit_lo] = self.values[m[hit_lo]]
        out[hit_hi] = self.values[m[hit_hi] + 1]
        return out[0] if scalar else out

    def sample(self, refine: int) -> np.ndarray:
        """Values on a uniform refinement with ``refine`` points per cell."""
        t = self.grid.refine(refine).nodes
        return self(t)

    def sup_norm(self, refine: int | None = None) -> float:
        v = self.values if refine is None else self.sample(refine)
        return float(np.max(np.linalg.norm(v, axis=1)))


def interpolate_path(values: np.ndarray, grid: TimeGrid) -> InterpolatedPath:
    return InterpolatedPath(grid, values)


def functional_interpolator(path: Callable[[np.ndarray], np.ndarray], grid: TimeGrid) -> InterpolatedPath:
    """Interpolate a path given as a callable of time through its values at the grid nodes."""
    vals = np.asarray(path(grid.nodes), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return InterpolatedPath(grid, vals)


def modulus_of_continuity(values: np.ndarray, times: np.ndarray, delta: float) -> float:
    """sup |a(s) - a(t)| over sampled pairs with |s - t| <= delta."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    times = np.asarray(times, dtype=float)
    best = 0.0
    dt = np.min(np.diff(times))
    max_lag = int(np.floor(delta / dt + 1e-9))
    for lag in range(1, min(max_lag, len(times) - 1) + 1):
        ok = times[lag:] - times[:-lag] <= delta + 1e-12
        if ok.any():
            diff = np.linalg.norm(v[lag:] - v[:-lag], axis=1)[ok]
            best = max(best, float(diff.max()))
    return best


def mixture_weight(grid: TimeGrid, t: float) -> tuple[int, float]:
    """Cell index m and weight lam = M (t_{m+1} - t) / T on the left node."""
    if not 0.0 <= t <= grid.T:
        raise RangeError(f"time {t} outside [0, {grid.T}]")
    nodes = grid.nodes
    m = int(min(np.searchsorted(nodes, t, side="right") - 1, grid.M - 1))
    if t == nodes[m]:
        return m, 1.0
    if t == nodes[m + 1]:
        return m, 0.0
    lam = grid.M * (nodes[m + 1] - t) / grid.T
    return m, float(min(max(lam, 0.0), 1.0))


def measure_path_interpolate(flow: MeasurePath, t: float) -> DiscreteMeasure:
    """Mixture (not displacement) interpolation between the two surrounding nodes."""
    m, lam = mixture_weight(flow.grid, t)
    return mixture(flow[m], flow[m + 1], lam)

"""Euler particle scheme, coupled X/Y runs and the genuine (continuous-time) refinement."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DivergenceError, DomainError
from .model import DiffusionSpec, MeasureSummary, MKVModel, TimeGrid
from .rng import StreamSpec, gaussian_block, uniform_block

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    m: int
    t: float
    states: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        x = np.asarray(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] < 1:
            raise DomainError("an ensemble needs at least one particle")
        object.__setattr__(self, "states", x)

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @cached_property
    def summary(self) -> MeasureSummary:
        return MeasureSummary.from_samples(self.states, self.p)

    def measure(self):
        from .measure import DiscreteMeasure

        return DiscreteMeasure.from_samples(self.states)


def _check_finite(x: np.ndarray, step: int) -> None:
    bad = ~np.isfinite(x) | (np.abs(x) > DIVERGENCE_LIMIT)
    if bad.any():
        i = int(np.argwhere(bad)[0, 0])
        raise DivergenceError(
            f"particle {i} left the finite range at step {step} (value {x[i].tolist()})", i, step
        )


def _advance(x, t, h, model: MKVModel, coef: DiffusionSpec, summ: MeasureSummary, noise):
    drift = model.drift(t, x, summ.mean)
    sig = coef.eval(t, x, summ)
    if sig.shape[1:] == (1, 1):
        diff = sig[:, :, 0] * noise
    else:
        diff = np.einsum("ndq,nq->nd", sig, noise)
    return x + h * drift + np.sqrt(h) * diff


def euler_step(
    ens: ParticleEnsemble, model: MKVModel, which: str, grid: TimeGrid, noise: np.ndarray
) -> ParticleEnsemble:
    """One step of the particle scheme; coefficients read the ensemble's own empirical law."""
    if ens.m >= grid.M:
        raise DomainError(f"ensemble already at the final step {grid.M}")
    noise = np.asarray(noise, dtype=float).reshape(ens.N, -1)
    if noise.shape[1] != model.q:
        raise DimensionError(f"noise has {noise.shape[1]} columns, model needs q={model.q}")
    coef = model.coefficient(which)
    t = grid.t(ens.m)
    x = _advance(ens.states, t, grid.h, model, coef, ens.summary, noise)
    _check_finite(x, ens.m + 1)
    return ParticleEnsemble(ens.m + 1, grid.t(ens.m + 1), x, ens.p)


def run_scheme(
    model: MKVModel,
    grid: TimeGrid,
    x0: np.ndarray,
    which: str,
    noise_fn: Callable[[int], np.ndarray],
) -> list[ParticleEnsemble]:
    """Iterate the scheme from ``x0``; ``noise_fn(m)`` gives the N x q noise for step m -> m+1."""
    ens = ParticleEnsemble(0, 0.0, np.array(x0, dtype=float), model.p)
    _check_finite(ens.states, 0)
    out = [ens]
    for m in range(grid.M):
        ens = euler_step(ens, model, which, grid, noise_fn(m))
        out.append(ens)
    return out


def noise_spec(seed: int, experiment, tag, m: int) -> StreamSpec:
    """Stream of the noise Z_{m+1} driving step m -> m+1."""
    return StreamSpec(seed, experiment, tag, 0, m + 1)


def initial_states(model: MKVModel, which: str, N: int, seed: int, experiment=0, tag=None) -> np.ndarray:
    tag = f"init-{which}" if tag is None else tag
    u = uniform_block(StreamSpec(seed, experiment, tag, 0, 0), N, model.d)
    return model.initial(which).sample(u)


def simulate_particle_system(
    model: MKVModel,
    grid: TimeGrid,
    N: int,
    seed: int,
    which: str = "X",
    noise_tag: str | None = None,
    init_tag: str | None = None,
    experiment=0,
) -> list[ParticleEnsemble]:
    """Simulate one process; returns ensembles for m = 0..M."""
    if N < 1:
        raise DomainError("N must be >= 1")
    if N < 2 and model.uses_measure():
        raise DomainError("N >= 2 is required when coefficients read the empirical measure")
    model.coefficient(which)
    tag = which if noise_tag is None else noise_tag
    x0 = initial_states(model, which, N, seed, experiment, init_tag)
    return run_scheme(
        model, grid, x0, which, lambda m: gaussian_block(noise_spec(seed, experiment, tag, m), N, model.q)
    )


def coupled_simulate(
    model: MKVModel, grid: TimeGrid, N: int, seed: int, coupled_init: bool = True, experiment=0
) -> tuple[list[ParticleEnsemble], list[ParticleEnsemble]]:
    """X and Y driven by the same noise per step (common random numbers).

    With ``coupled_init`` both initial laws read one shared uniform source.
    """
    init = "init" if coupled_init else None
    xs = simulate_particle_system(model, grid, N, seed, "X", "B", init, experiment)
    ys = simulate_particle_system(model, grid, N, seed, "Y", "B", init, experiment)
    return xs, ys


@dataclass(frozen=True, eq=False)
class PathBundle:
    grid: TimeGrid
    r: int
    paths: np.ndarray
    process_tag: str
    noise_key: tuple | None = None

    def __post_init__(self):
        P = np.asarray(self.paths, dtype=float)
        if P.ndim == 2:
            P = P[:, :, None]
        if P.shape[1] != self.r * self.grid.M + 1:
            raise DimensionError(f"expected {self.r * self.grid.M + 1} path nodes, got {P.shape[1]}")
        object.__setattr__(self, "paths", P)

    @property
    def N(self) -> int:
        return self.paths.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.refine(self.r).nodes

    def coarse(self) -> np.ndarray:
        return self.paths[:, :: self.r]

    @classmethod
    def from_ensembles(cls, ensembles: Sequence[ParticleEnsemble], grid: TimeGrid,
                       process_tag: str, noise_key: tuple | None = None) -> "PathBundle":
        P = np.stack([e.states for e in ensembles], axis=1)
        return cls(grid, 1, P, process_tag, noise_key)

    def paired_with(self, other: "PathBundle") -> bool:
        return self.noise_key is not None and self.noise_key == other.noise_key and self.N == other.N


def genuine_euler_refine(
    discrete: Sequence[ParticleEnsemble],
    model: MKVModel,
    grid: TimeGrid,
    r: int,
    seed: int,
    which: str = "X",
    noise_tag: str | None = None,
    experiment=0,
) -> PathBundle:
    """Fill each step with r sub-nodes of the frozen-coefficient Euler path.

    The step's noise is regenerated from its stream and the sub-increments are
    Brownian-bridge draws conditioned to sum to sqrt(h) Z_{m+1}.  The bridge
    stream depends on the noise tag, so X and Y refined from a coupled run
    follow the same Brownian path.
    """
    if r < 1 or int(r) != r:
        raise DomainError("refinement factor must be a positive integer")
    tag = which if noise_tag is None else noise_tag
    coef = model.coefficient(which)
    N = discrete[0].N
    h = grid.h
    P = np.empty((N, r * grid.M + 1, model.d))
    P[:, 0] = discrete[0].states
    frac = (np.arange(1, r + 1) / r)[None, :, None]
    for m in range(grid.M):
        ens = discrete[m]
        x = ens.states
        t = grid.t(m)
        drift = model.drift(t, x, ens.summary.mean)
        sig = coef.eval(t, x, ens.summary)
        z = gaussian_block(noise_spec(seed, experiment, tag, m), N, model.q)
        sl = slice(m * r + 1, (m + 1) * r + 1)
        if r > 1:
            w = gaussian_block(StreamSpec(seed, experiment, f"bridge-{tag}", 0, m + 1), N, r * model.q)
            w = w.reshape(N, r, model.q)
            dB = np.sqrt(h / r) * (w - w.mean(axis=1, keepdims=True)) + np.sqrt(h) * z[:, None, :] / r
            B = np.cumsum(dB, axis=1)
            P[:, sl] = x[:, None, :] + frac * h * drift[:, None, :] + np.einsum("ndq,nkq->nkd", sig, B)
            _check_finite(P[:, sl].reshape(N, -1), m + 1)
        P[:, (m + 1) * r] = discrete[m + 1].states
    return PathBundle(grid, int(r), P, which, (seed, experiment, tag))


def simulate_paths(
    model: MKVModel, grid: TimeGrid, N: int, seed: int, which: str = "X", r: int = 1,
    noise_tag: str | None = None, init_tag: str | None = None, experiment=0,
) -> tuple[PathBundle, list[ParticleEnsemble]]:
    ens = simulate_particle_system(model, grid, N, seed, which, noise_tag, init_tag, experiment)
    bundle = genuine_euler_refine(ens, model, grid, r, seed, which, noise_tag, experiment)
    return bundle, ens


def coupled_paths(
    model: MKVModel, grid: TimeGrid, N: int, seed: int, r: int = 1, coupled_init: bool = True, experiment=0
):
    """Coupled run plus refinement; returns (xbundle, ybundle, xens, yens)."""
    xs, ys = coupled_simulate(model, grid, N, seed, coupled_init, experiment)
    xb = genuine_euler_refine(xs, model, grid, r, seed, "X", "B", experiment)
    yb = genuine_euler_refine(ys, model, grid, r, seed, "Y", "B", experiment)
    return xb, yb, xs, ys

"""Counter-based random streams, PSD square roots and the dominating Gaussian coupling.

Every draw is addressed by a tuple ``(master_seed, experiment, tag, step)``
that selects a Philox key, plus a particle index that selects the counter
offset inside that keyed stream.  Row ``i`` of a block therefore depends only
on the tuple and on ``particle + i``: splitting a block across threads, or
drawing a sub-range of particles, reproduces the same numbers bit for bit.

Layout (frozen, golden files depend on it):

* key   = ``SeedSequence([seed, code(experiment), code(tag), step]).generate_state(2, uint64)``
* value ``j`` of row ``r`` consumes raw output ``(particle + r) * cols + j``
* uniform = ``((raw >> 11) + 0.5) * 2**-53``, open interval (0, 1)
* normal  = inverse normal CDF of that uniform (one raw word per normal)
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .errors import DimensionError, NotPSDError, OrderViolationError

_PHILOX_WORDS = 4
_MASK64 = (1 << 64) - 1

# Fixed codes for the tags used internally; anything else is hashed.
TAG_CODES = {
    "X": 1,
    "Y": 2,
    "B": 3,
    "init": 10,
    "init-X": 11,
    "init-Y": 12,
    "Z": 20,
    "Ztilde": 21,
    "directions": 30,
    "family": 31,
    "spread": 32,
    "probe": 33,
}


def stream_code(value: int | str) -> int:
    if isinstance(value, (int, np.integer)):
        v = int(value)
        if v < 0:
            raise ValueError("stream identifiers must be non-negative")
        return v & _MASK64
    if value in TAG_CODES:
        return TAG_CODES[value]
    # offset keeps hashed strings clear of the small fixed codes
    return (1 << 32) + zlib.crc32(str(value).encode("utf-8"))


@dataclass(frozen=True)
class StreamSpec:
    master_seed: int
    experiment: int | str = 0
    tag: int | str = 0
    particle: int = 0
    step: int = 0

    def derive(self, **changes) -> "StreamSpec":
        return replace(self, **changes)

    def key(self) -> np.ndarray:
        entropy = [
            int(self.master_seed) & _MASK64,
            stream_code(self.experiment),
            stream_code(self.tag),
            int(self.step),
        ]
        return np.random.SeedSequence(entropy).generate_state(2, np.uint64)


def raw_block(spec: StreamSpec, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    start = int(spec.particle) * cols
    total = rows * cols
    counter = np.array([start // _PHILOX_WORDS, 0, 0, 0], dtype=np.uint64)
    gen = np.random.Philox(key=spec.key(), counter=counter)
    skip = start % _PHILOX_WORDS
    out = gen.random_raw(skip + total)
    return out[skip:].reshape(rows, cols)


def uniform_block(spec: StreamSpec, rows: int, cols: int) -> np.ndarray:
    raw = raw_block(spec, rows, cols)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian_block(spec: StreamSpec, rows: int, cols: int) -> np.ndarray:
    """Block of i.i.d. N(0, 1) draws; rows are particles, columns are noise coordinates."""
    return ndtri(uniform_block(spec, rows, cols))


def psd_sqrt(S: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    ``tol`` is relative to ``max(1, ||S||_F)``.  Eigenvalues in ``[-tol, 0)``
    are clamped to zero; anything more negative raises ``NotPSDError``.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"psd_sqrt needs a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.linalg.norm(S)))
    atol = tol * scale
    if np.max(np.abs(S - S.T)) > atol:
        raise NotPSDError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    if w.min() < -atol:
        raise NotPSDError(f"minimum eigenvalue {w.min():.3e} below -{atol:.1e}")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def dominating_gaussian_coupling(
    u1: np.ndarray, u2: np.ndarray, spec: StreamSpec, n: int, tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Martingale coupling of N(0, u1 u1^T) and N(0, u2 u2^T).

    M1 = u1 Z and M2 = M1 + sqrt(u2 u2^T - u1 u1^T) Z' with Z, Z' independent,
    so E[M2 | M1] = M1.  Returns two ``n x d`` arrays.
    """
    from .model import matrix_partial_order

    u1 = np.atleast_2d(np.asarray(u1, dtype=float))
    u2 = np.atleast_2d(np.asarray(u2, dtype=float))
    if u1.shape != u2.shape:
        raise DimensionError(f"shape mismatch {u1.shape} vs {u2.shape}")
    if not matrix_partial_order(u1, u2, tol):
        raise OrderViolationError("u1 is not dominated by u2 in the matrix order")
    d, q = u1.shape
    z = gaussian_block(spec.derive(tag="Z"), n, q)
    zt = gaussian_block(spec.derive(tag="Ztilde"), n, d)
    root = psd_sqrt(u2 @ u2.T - u1 @ u1.T, tol=max(tol, 1e-10))
    m1 = z @ u1.T
    m2 = m1 + zt @ root.T
    return m1, m2

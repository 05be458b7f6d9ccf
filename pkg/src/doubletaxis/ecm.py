"""Initial conditions and the randomly structured tissue generator."""
from __future__ import annotations

import numpy as np

from .grid import Grid2D, SimState

__all__ = ["SplitMix64", "stripes_profile", "ic_stripes", "generate_random_ecm", "rescale", "ic_random"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """SplitMix64 stream; the same seed gives the same numbers on every platform.

    Draws are produced in vectorised blocks: the k-th output depends only on
    ``seed + k * golden``, so a block is a closed-form function of the counter.
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK

    @staticmethod
    def _mix(z: np.ndarray) -> np.ndarray:
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def next_u64(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(_GOLDEN)
            out = self._mix(z)
        self.state = (self.state + n * _GOLDEN) & _MASK
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)`` built from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def stripes_profile(x, y, eps: float = 0.3):
    """Pointwise ``(m0, p0, v0)`` of the tumour blob cut by a vertical and a diagonal stripe.

    Near the centre ``1.05 p0`` exceeds one; the tissue is floored at zero there.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.exp(-(x ** 2 + y ** 2) / eps)
    p0 = np.where((np.abs(x) < 0.05) | (np.abs(y - x) < 0.1), 0.0, p0)
    m0 = 0.05 * p0
    v0 = np.maximum(1.0 - m0 - p0, 0.0)
    return m0, p0, v0


def ic_stripes(grid: Grid2D, eps: float = 0.3) -> SimState:
    m0, p0, v0 = stripes_profile(*grid.centers(), eps=eps)
    return SimState(grid, m0, p0, v0)


def _refine(c: np.ndarray, r: np.ndarray, noise: float) -> np.ndarray:
    n = c.shape[0]
    idx = np.arange(2 * n) // 2
    nxt = (idx + 1) % n
    # c[row=j, col=i]; average the 2x2 periodic neighbourhood anchored at (i//2, j//2)
    mean = 0.25 * (c[np.ix_(idx, idx)] + c[np.ix_(idx, nxt)]
                   + c[np.ix_(nxt, idx)] + c[np.ix_(nxt, nxt)])
    return (1.0 + noise * (r - 0.5)) * mean


def generate_random_ecm(seed: int, target_n: int, coarse_n: int = 8,
                        noise: float = 0.002, coarse: np.ndarray | None = None) -> np.ndarray:
    """Random coarse hills and valleys refined by noisy periodic averaging.

    Returns a ``(target_n, target_n)`` array indexed ``[j, i]`` (x fastest).
    ``coarse`` replaces the random level-0 matrix; with ``noise=0`` the
    refinement is a pure averaging cascade.
    """
    if coarse_n < 1 or target_n < coarse_n:
        raise ValueError(f"cannot refine {coarse_n} to {target_n}")
    levels = 0
    n = coarse_n
    while n < target_n:
        n *= 2
        levels += 1
    if n != target_n:
        raise ValueError(f"{target_n} is not {coarse_n} times a power of two")

    rng = SplitMix64(seed)
    c = rng.uniform(coarse_n * coarse_n).reshape(coarse_n, coarse_n)
    if coarse is not None:
        c = np.array(coarse, dtype=float).reshape(coarse_n, coarse_n)
    for _ in range(levels):
        fine = 2 * c.shape[0]
        r = rng.uniform(fine * fine).reshape(fine, fine)
        c = _refine(c, r, noise)
    return c


def rescale(a: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Affine map of ``[min a, max a]`` onto ``[lo, hi]``; a constant input maps to ``lo``."""
    amin, amax = float(np.min(a)), float(np.max(a))
    if amax == amin:
        return np.full_like(a, lo, dtype=float)
    return lo + (a - amin) * ((hi - lo) / (amax - amin))


def _sample_nearest(mat: np.ndarray, grid: Grid2D) -> np.ndarray:
    n = mat.shape[0]
    ii = np.minimum((np.arange(grid.nx) + 0.5) * n / grid.nx, n - 1).astype(int)
    jj = np.minimum((np.arange(grid.ny) + 0.5) * n / grid.ny, n - 1).astype(int)
    return mat[np.ix_(jj, ii)]


def ic_random(grid: Grid2D, seed: int, eps: float = 0.3,
              v_range: tuple[float, float] = (0.0, 1.0), coarse_n: int = 8) -> SimState:
    """Gaussian tumour on a randomly structured tissue.

    The tissue is capped by the room the cells leave, ``1 - m0 - p0``, and
    floored at zero.
    """
    x, y = grid.centers()
    p0 = np.exp(-(x ** 2 + y ** 2) / eps)
    m0 = 0.05 * p0

    n = coarse_n
    while n < max(grid.nx, grid.ny):
        n *= 2
    mat = generate_random_ecm(seed, n, coarse_n)
    if mat.shape != grid.shape:
        mat = _sample_nearest(mat, grid)
    v_raw = rescale(mat, *v_range)
    v0 = np.maximum(np.minimum(v_raw, 1.0 - m0 - p0), 0.0)
    return SimState(grid, m0, p0, v0)

"""Finite-volume operators: limited reconstruction, upwind taxis fluxes, diffusion matrices.

The taxis part of the migrating-cell equation is written as ``-div(m a)`` with
face velocity ``a = chi1 grad v - chi2 grad q`` (``q`` is ``p`` or the acidity
``h``). Because the flux is linear in ``m`` for a frozen velocity, the
central-upwind flux reduces to upwinding of MC-limited interface values.
Walls carry no flux.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid2D, SimState
from .kinetics import ModelConfig, diffusion_coeff, reaction_terms, taxis_sensitivities

__all__ = [
    "EdgeField",
    "minmod3",
    "mc_slope",
    "mc_slopes",
    "interface_velocity",
    "advective_flux",
    "advection_divergence",
    "diffusion_operator",
    "explicit_rhs",
]


@dataclass
class EdgeField:
    """Face-centred values. ``x_edges[j, i]`` sits on the face left of cell ``i``."""

    grid: Grid2D
    x_edges: np.ndarray  # (ny, nx + 1)
    y_edges: np.ndarray  # (ny + 1, nx)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.x_edges)), np.max(np.abs(self.y_edges))))


def minmod3(a, b, c):
    a, b, c = np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)
    s = np.sign(a)
    same = (s == np.sign(b)) & (s == np.sign(c))
    mag = np.minimum(np.minimum(np.abs(a), np.abs(b)), np.abs(c))
    return np.where(same, s * mag, 0.0)


def mc_slope(u_l, u_c, u_r, h: float):
    """Monotonized-central limited slope of the middle cell."""
    if h <= 0:
        raise ValueError("h must be positive")
    return minmod3(2.0 * (u_c - u_l) / h, (u_r - u_l) / (2.0 * h), 2.0 * (u_r - u_c) / h)


def mc_slopes(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Limited x- and y-slopes of a whole field; walls mirror the boundary cell."""
    ux = np.concatenate([u[:, :1], u, u[:, -1:]], axis=1)
    uy = np.concatenate([u[:1, :], u, u[-1:, :]], axis=0)
    sx = mc_slope(ux[:, :-2], u, ux[:, 2:], h)
    sy = mc_slope(uy[:-2, :], u, uy[2:, :], h)
    return sx, sy


def _face_velocities(m, p, v, q, h, cfg):
    def faces(L, R):
        chi1, chi2 = taxis_sensitivities(0.5 * (m[L] + m[R]), 0.5 * (p[L] + p[R]),
                                         0.5 * (v[L] + v[R]), cfg)
        return (chi1 * (v[R] - v[L]) - chi2 * (q[R] - q[L])) / h

    ax = faces((slice(None), slice(None, -1)), (slice(None), slice(1, None)))
    ay = faces((slice(None, -1), slice(None)), (slice(1, None), slice(None)))
    return ax, ay


def _pad_walls(ax: np.ndarray, ay: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ny, nxm1 = ax.shape
    nx = ay.shape[1]
    fx = np.zeros((ny, nxm1 + 2))
    fx[:, 1:-1] = ax
    fy = np.zeros((ay.shape[0] + 2, nx))
    fy[1:-1, :] = ay
    return fx, fy


def _repellent(state: SimState, cfg: ModelConfig) -> np.ndarray:
    if cfg.repellent_target == "Acidity":
        if state.h is None:
            raise ValueError("acidity model needs the h field")
        return state.h
    return state.p


def interface_velocity(state: SimState, cfg: ModelConfig) -> EdgeField:
    ax, ay = _face_velocities(state.m, state.p, state.v, _repellent(state, cfg), state.grid.h, cfg)
    fx, fy = _pad_walls(ax, ay)
    return EdgeField(state.grid, fx, fy)


def advective_flux(a, m_minus, m_plus):
    """Upwind flux ``a+ m_minus + a- m_plus`` for velocity ``a``."""
    return np.maximum(a, 0.0) * m_minus + np.minimum(a, 0.0) * m_plus


def _divergence_from_velocity(m: np.ndarray, ax: np.ndarray, ay: np.ndarray, h: float) -> np.ndarray:
    sx, sy = mc_slopes(m, h)
    half = 0.5 * h
    east = m + half * sx  # value at right face of each cell
    west = m - half * sx
    north = m + half * sy
    south = m - half * sy
    Fx = advective_flux(ax, east[:, :-1], west[:, 1:])
    Fy = advective_flux(ay, north[:-1, :], south[1:, :])
    fx, fy = _pad_walls(Fx, Fy)
    return -(fx[:, 1:] - fx[:, :-1]) / h - (fy[1:, :] - fy[:-1, :]) / h


def advection_divergence(state: SimState, cfg: ModelConfig, velocity: EdgeField | None = None) -> np.ndarray:
    """Taxis contribution to ``dm/dt``; telescopes to zero total mass."""
    if velocity is None:
        velocity = interface_velocity(state, cfg)
    ax = velocity.x_edges[:, 1:-1]
    ay = velocity.y_edges[1:-1, :]
    return _divergence_from_velocity(state.m, ax, ay, state.grid.h)


@lru_cache(maxsize=16)
def _stencil_pattern(nx: int, ny: int):
    """CSR skeleton of the 5-point stencil and the permutation that fills it.

    Entries are generated in the order diag, east, west, north, south (each
    restricted to existing neighbours) and ``order`` sorts them into CSR order.
    """
    k = np.arange(nx * ny).reshape(ny, nx)
    rows = [k.ravel(), k[:, :-1].ravel(), k[:, 1:].ravel(), k[:-1, :].ravel(), k[1:, :].ravel()]
    cols = [k.ravel(), k[:, 1:].ravel(), k[:, :-1].ravel(), k[1:, :].ravel(), k[:-1, :].ravel()]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    order = np.lexsort((cols, rows))
    indptr = np.zeros(nx * ny + 1, dtype=np.int32)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr).astype(np.int32)
    return indptr, cols[order].astype(np.int32), order


def _laplacian(grid: Grid2D, D: np.ndarray) -> sp.csr_matrix:
    nx, ny = grid.nx, grid.ny
    n = nx * ny
    inv_h2 = 1.0 / grid.h ** 2
    dx = (0.5 * inv_h2) * (D[:, :-1] + D[:, 1:])  # (ny, nx-1) faces between i and i+1
    dy = (0.5 * inv_h2) * (D[:-1, :] + D[1:, :])  # (ny-1, nx)

    diag = np.zeros((ny, nx))
    diag[:, :-1] -= dx
    diag[:, 1:] -= dx
    diag[:-1, :] -= dy
    diag[1:, :] -= dy
    fx = dx.ravel()
    fy = dy.ravel()
    data = np.concatenate([diag.ravel(), fx, fx, fy, fy])
    indptr, indices, order = _stencil_pattern(nx, ny)
    return sp.csr_matrix((data[order], indices, indptr), shape=(n, n))


def diffusion_operator(state: SimState, cfg: ModelConfig, species: str = "m") -> sp.csr_matrix:
    """Symmetric 5-point matrix ``L`` with ``(L u)_c = sum_faces D_f (u_nbr - u_c) / h^2``.

    Face coefficients are arithmetic means of the two adjacent cells; wall
    faces are dropped, which gives zero row sums.
    """
    if species == "m":
        D = diffusion_coeff(state.m, state.p, state.v, cfg)
    elif species == "h" and cfg.has_acidity:
        D = np.full(state.grid.shape, cfg.D_h)
    else:
        raise ValueError(f"species {species!r} does not diffuse in this model")
    return _laplacian(state.grid, D)


def diffusing_species(cfg: ModelConfig) -> tuple[str, ...]:
    return ("m", "h") if cfg.has_acidity else ("m",)


def explicit_rhs(state: SimState, cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Taxis plus reactions for every species; diffusion is handled implicitly."""
    rates = reaction_terms(state.m, state.p, state.v, cfg, h=state.h)
    out = dict(zip(state.species, rates))
    out["m"] = out["m"] + advection_divergence(state, cfg)
    return out

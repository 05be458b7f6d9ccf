"""Additive IMEX Runge-Kutta time stepping (ARK3(2)4L[2]SA).

Taxis and reactions go through the explicit tableau; diffusion goes through the
L-stable, stiffly accurate ESDIRK tableau. The motility coefficient is frozen
at each stage's explicit predictor, so every stage needs one *linear* solve per
diffusing species.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as F
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from .discretization import (
    diffusing_species,
    diffusion_operator,
    explicit_rhs,
    interface_velocity,
)
from .grid import SimState
from .kinetics import ModelConfig
from .linsolve import SolverError, bicgstab

__all__ = [
    "ButcherTableauPair",
    "StepControls",
    "StepStats",
    "tableau",
    "ark_step",
    "imex_step",
    "select_dt",
]

_GAMMA = F(1767732205903, 4055673282236)

_A_EXP = (
    (0, 0, 0, 0),
    (F(1767732205903, 2027836641118), 0, 0, 0),
    (F(5535828885825, 10492691773637), F(788022342437, 10882634858940), 0, 0),
    (F(6485989280629, 16251701735622), F(-4246266847089, 9704473918619),
     F(10755448449292, 10357097424841), 0),
)
_A_IMP = (
    (0, 0, 0, 0),
    (_GAMMA, _GAMMA, 0, 0),
    (F(2746238789719, 10658868560708), F(-640167445237, 6845629431997), _GAMMA, 0),
    (F(1471266399579, 7840856788654), F(-4482444167858, 7529755066697),
     F(11266239266428, 11593286722821), _GAMMA),
)
_B = (F(1471266399579, 7840856788654), F(-4482444167858, 7529755066697),
      F(11266239266428, 11593286722821), _GAMMA)
_C = (F(0), F(1767732205903, 2027836641118), F(3, 5), F(1))


@dataclass(frozen=True)
class ButcherTableauPair:
    """Explicit/implicit coefficient pair sharing weights ``b`` and nodes ``c``."""

    A_exp: np.ndarray
    A_imp: np.ndarray
    b: np.ndarray
    c: np.ndarray
    exact: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def gamma(self) -> float:
        return float(self.A_imp[1, 1])


def tableau() -> ButcherTableauPair:
    """Coefficients of ARK3(2)4L[2]SA as doubles (exact rationals in ``.exact``)."""
    as_arr = lambda rows: np.array([[float(x) for x in row] for row in rows])  # noqa: E731
    return ButcherTableauPair(
        A_exp=as_arr(_A_EXP),
        A_imp=as_arr(_A_IMP),
        b=np.array([float(x) for x in _B]),
        c=np.array([float(x) for x in _C]),
        exact={"A_exp": _A_EXP, "A_imp": _A_IMP, "b": _B, "c": _C},
    )


@dataclass
class StepControls:
    cfl: float = 0.4
    dt_max: float = 0.01
    dt_fixed: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.dt_fixed is not None and self.dt_fixed <= 0:
            raise ValueError("dt_fixed must be positive")


@dataclass
class StepStats:
    solver_iterations: int = 0
    solves: int = 0


_TABLEAU = tableau()

Fields = Mapping[str, np.ndarray]


def ark_step(w: Fields, dt: float,
             explicit: Callable[[dict], dict],
             implicit_ops: Callable[[dict], dict],
             tol: float = 1e-10, max_iter: int = 500,
             stats: Optional[StepStats] = None) -> dict[str, np.ndarray]:
    """One additive RK step on a dict of species arrays.

    ``explicit(W)`` returns the explicit tendency of every species.
    ``implicit_ops(W_star)`` returns, per implicitly treated species, the
    sparse matrix ``L`` (acting on the flattened array) assembled from the
    stage predictor.
    """
    tab = _TABLEAU
    s = tab.stages
    E: list[dict] = []
    I: list[dict] = []
    guess: dict[str, np.ndarray] = {}
    for i in range(s):
        W_star = {}
        for k, wk in w.items():
            acc = wk
            for j in range(i):
                if tab.A_exp[i, j] != 0.0:
                    acc = acc + (dt * tab.A_exp[i, j]) * E[j][k]
            W_star[k] = acc
        ops = implicit_ops(W_star)
        W = dict(W_star)
        I_i = {}
        for k, L in ops.items():
            shape = W_star[k].shape
            rhs = W_star[k].ravel()
            for j in range(i):
                rhs = rhs + (dt * tab.A_imp[i, j]) * I[j][k]
            a_ii = tab.A_imp[i, i]
            if a_ii == 0.0:
                sol = rhs
            else:
                M = _shifted_identity(L, -dt * a_ii)
                sol, report = bicgstab(M, rhs, x0=guess.get(k, rhs), tol=tol, max_iter=max_iter)
                if stats is not None:
                    stats.solver_iterations += report.iterations
                    stats.solves += 1
                if not report.converged:
                    raise SolverError(report, f"stage {i + 1} solve for {k}")
            guess[k] = sol
            W[k] = sol.reshape(shape)
            I_i[k] = L @ sol
        E.append(explicit(W))
        I.append(I_i)

    out = {}
    for k, wk in w.items():
        acc = wk
        for i in range(s):
            incr = E[i][k]
            if k in I[i]:
                incr = incr + I[i][k].reshape(wk.shape)
            acc = acc + (dt * tab.b[i]) * incr
        out[k] = acc
    return out


def _shifted_identity(L, coef: float):
    if sp.issparse(L):
        M = (L * coef).tocsr()
        M.setdiag(M.diagonal() + 1.0)
        return M
    return np.eye(L.shape[0]) + coef * np.asarray(L)


def imex_step(state: SimState, dt: float, cfg: ModelConfig,
              tol: float = 1e-10, max_iter: int = 500,
              stats: Optional[StepStats] = None) -> SimState:
    """Advance the full PDE system by ``dt``; raises :class:`SolverError` on a failed solve."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    implicit = diffusing_species(cfg)

    def explicit(W):
        return explicit_rhs(state.replace(**W), cfg)

    def implicit_ops(W_star):
        st = state.replace(**W_star)
        return {k: diffusion_operator(st, cfg, k) for k in implicit}

    new = ark_step(state.fields(), dt, explicit, implicit_ops, tol, max_iter, stats)
    return SimState(grid, new["m"], new["p"], new["v"], new.get("h"), state.t + dt)


def select_dt(state: SimState, cfg: ModelConfig, controls: StepControls) -> float:
    """Advective CFL step capped at ``dt_max``; ``dt_fixed`` overrides both."""
    if controls.dt_fixed is not None:
        return controls.dt_fixed
    amax = interface_velocity(state, cfg).max_abs()
    if amax == 0.0:
        return controls.dt_max
    return min(controls.dt_max, controls.cfl * state.grid.h / amax)

"""Jacobi-preconditioned BiCGSTAB for the stage-implicit diffusion systems."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["SolveReport", "SolverError", "bicgstab"]

logger = logging.getLogger(__name__)

CONVERGED = "Converged"
BREAKDOWN = "Breakdown"
MAX_ITERATIONS = "MaxIterations"

_TINY = 1e-30


@dataclass
class SolveReport:
    iterations: int
    residual_norm: float
    status: str

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


class SolverError(RuntimeError):
    def __init__(self, report: SolveReport, what: str = "linear solve"):
        super().__init__(f"{what} failed: {report.status} after {report.iterations} iterations "
                         f"(relative residual {report.residual_norm:.3e})")
        self.report = report


def _diagonal(A) -> np.ndarray:
    if sp.issparse(A):
        return np.asarray(A.diagonal(), dtype=float)
    return np.diag(np.asarray(A, dtype=float)).copy()


def bicgstab(A, b, x0=None, tol: float = 1e-10, max_iter: int = 500):
    """Solve ``A x = b`` to relative residual ``tol``.

    Right Jacobi preconditioning is used when the diagonal has no zeros, so the
    monitored residual is the true one. A numerically vanishing ``rho`` or
    ``omega`` triggers one restart with the shadow residual reset; a second
    breakdown is reported as such.

    Returns ``(x, SolveReport)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match rhs of length {n}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    if x.size != n:
        raise ValueError("initial guess has wrong length")

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, CONVERGED)

    diag = _diagonal(A)
    if np.all(diag != 0):
        inv_diag = 1.0 / diag
        precond = lambda u: inv_diag * u  # noqa: E731
    else:
        precond = lambda u: u  # noqa: E731

    r = b - A @ x
    rnorm = float(np.linalg.norm(r))
    if rnorm <= tol * bnorm:
        return x, SolveReport(0, rnorm / bnorm, CONVERGED)

    target = tol * bnorm
    r_hat = r.copy()
    p = np.zeros(n)
    v = np.zeros(n)
    rho_prev = alpha = omega = 1.0
    restarts = 0
    it = 0
    while it < max_iter:
        it += 1
        rho = float(r_hat @ r)
        if abs(rho) < _TINY * float(np.linalg.norm(r_hat)) * rnorm or rho == 0.0:
            if restarts:
                return x, SolveReport(it, rnorm / bnorm, BREAKDOWN)
            restarts += 1
            logger.debug("bicgstab: rho breakdown at iteration %d, restarting", it)
            r = b - A @ x
            r_hat = r.copy()
            rnorm = float(np.linalg.norm(r))
            p[:] = 0.0
            v[:] = 0.0
            rho_prev = alpha = omega = 1.0
            continue
        if it == 1:
            p = r.copy()
        else:
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
        p_hat = precond(p)
        v = A @ p_hat
        denom = float(r_hat @ v)
        if denom == 0.0:
            return x, SolveReport(it, rnorm / bnorm, BREAKDOWN)
        alpha = rho / denom
        s = r - alpha * v
        snorm = float(np.linalg.norm(s))
        if snorm <= target:
            x = x + alpha * p_hat
            r = b - A @ x
            rnorm = float(np.linalg.norm(r))
            if rnorm <= target:
                return x, SolveReport(it, rnorm / bnorm, CONVERGED)
            # recurrence drifted from the true residual: start a fresh cycle
            r_hat = r.copy()
            p[:] = 0.0
            v[:] = 0.0
            rho_prev = alpha = omega = 1.0
            continue
        s_hat = precond(s)
        t = A @ s_hat
        tt = float(t @ t)
        if tt == 0.0:
            return x, SolveReport(it, rnorm / bnorm, BREAKDOWN)
        omega = float(t @ s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            r = b - A @ x
            rnorm = float(np.linalg.norm(r))
            if rnorm <= target:
                return x, SolveReport(it, rnorm / bnorm, CONVERGED)
        if abs(omega) < _TINY:
            if restarts:
                return x, SolveReport(it, rnorm / bnorm, BREAKDOWN)
            restarts += 1
            r = b - A @ x
            r_hat = r.copy()
            rnorm = float(np.linalg.norm(r))
            p[:] = 0.0
            v[:] = 0.0
            rho_prev = alpha = omega = 1.0
            continue
        rho_prev = rho
    return x, SolveReport(it, rnorm / bnorm, MAX_ITERATIONS)

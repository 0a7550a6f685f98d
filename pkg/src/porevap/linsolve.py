"""Matrix-free linear-system contract and Krylov solve.

Systems are defined by a stencil-application callable over the active cells
of a grid.  Symmetric systems are solved with conjugate gradients (optional
Jacobi preconditioning); a declared constants null space is verified on a
probe vector, removed from the right-hand side by projection, and pinned by
zeroing the solution mean.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, bicgstab, cg


class SolverError(RuntimeError):
    """Non-convergence; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class SolveInfo:
    def __init__(self, iterations, residual, history):
        self.iterations = iterations
        self.residual = residual
        self.history = history

    def __repr__(self):
        return f"SolveInfo(iterations={self.iterations}, residual={self.residual:.3e})"


class LinearSystem:
    """Matrix-free operator + right-hand side over the active cells.

    Parameters
    ----------
    geom : UnitCellGeometry
    apply : callable(ndarray) -> ndarray
        Stencil application on full-grid arrays; values on inactive cells
        are ignored (kept zero).
    rhs : ndarray
        Full-grid right-hand side.
    mask : ndarray of bool, optional
        Active cells (default: all).
    symmetric : bool
    nullspace : None or "constants"
    diag : ndarray, optional
        Operator diagonal for Jacobi preconditioning.
    """

    def __init__(self, geom, apply, rhs, mask=None, symmetric=True,
                 nullspace=None, diag=None):
        self.geom = geom
        self.apply = apply
        self.rhs = np.asarray(rhs, dtype=float)
        self.mask = np.ones(geom.shape, dtype=bool) if mask is None else mask
        self.symmetric = symmetric
        self.nullspace = nullspace
        self.diag = diag
        self.n_active = int(self.mask.sum())

    def _embed(self, flat):
        full = np.zeros(self.geom.shape)
        full[self.mask] = flat
        return full

    def _matvec(self, flat):
        return self.apply(self._embed(flat))[self.mask]

    def verify_nullspace(self, tol=1e-10):
        """Check A @ 1 vanishes relative to the operator scale."""
        if self.nullspace != "constants":
            return 0.0
        ones = np.ones(self.n_active)
        rng = np.random.default_rng(12345)
        probe = rng.standard_normal(self.n_active)
        scale = np.linalg.norm(self._matvec(probe)) / (np.linalg.norm(probe) + 1e-300)
        resid = np.linalg.norm(self._matvec(ones)) / (
            np.linalg.norm(ones) * (scale + 1e-300)
        )
        if resid > tol:
            raise ValueError(
                f"declared constants null space violated: |A 1| relative {resid:.2e} > {tol:g}"
            )
        return float(resid)


def solve_linear(system: LinearSystem, rel_tol=1e-9, x0=None, maxiter=None):
    """Iteratively solve to ``|residual| <= rel_tol * |rhs|``.

    Returns ``(solution, info)`` with the solution embedded on the full
    grid (zeros on inactive cells).  The iteration cap follows
    ``50 * n_active**(1/dim)`` unless overridden.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0,1), got {rel_tol}")
    system.verify_nullspace()
    b = system.rhs[system.mask].astype(float).copy()
    if system.nullspace == "constants":
        b -= b.mean()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return system._embed(np.zeros(system.n_active)), SolveInfo(0, 0.0, [0.0])
    if maxiter is None:
        maxiter = max(200, int(50 * system.n_active ** (1.0 / system.geom.dim)))
    op = LinearOperator(
        (system.n_active, system.n_active), matvec=system._matvec, dtype=float
    )
    M = None
    if system.diag is not None:
        d = np.asarray(system.diag, dtype=float)[system.mask]
        inv = np.where(np.abs(d) > 0, 1.0 / np.where(d == 0, 1.0, d), 1.0)
        M = LinearOperator(
            (system.n_active, system.n_active), matvec=lambda v: inv * v, dtype=float
        )
    history = []

    def callback(xk):
        history.append(np.linalg.norm(system._matvec(xk) - b) / bnorm)

    x0v = None if x0 is None else np.asarray(x0, dtype=float)[system.mask]
    solver = cg if system.symmetric else bicgstab
    x, code = solver(op, b, x0=x0v, rtol=rel_tol, atol=0.0, maxiter=maxiter,
                     M=M, callback=callback)
    resid = np.linalg.norm(system._matvec(x) - b) / bnorm
    if code != 0 and resid > rel_tol:
        raise SolverError(
            f"linear solve failed to reach rel_tol={rel_tol:g} in {maxiter} "
            f"iterations (final residual {resid:.3e})",
            history,
        )
    if system.nullspace == "constants":
        x = x - x.mean()
    return system._embed(x), SolveInfo(len(history), float(resid), history)

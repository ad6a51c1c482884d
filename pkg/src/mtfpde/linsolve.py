"""Jacobi-preconditioned conjugate gradients for the SPD systems of the scheme."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float  # true relative residual ||A x - b|| / ||b|| of the returned x
    converged: bool

    @property
    def flag(self):
        return "converged" if self.converged else "maxiter"

    def __str__(self):
        return f"{self.flag} after {self.iterations} its, relres={self.residual:.2e}"


def solve_spd(A, b, tol=1e-12, maxiter=None, x0=None):
    """Solve ``A x = b``; on non-convergence the best iterate is returned with ``converged=False``."""
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match rhs length {n}")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    if maxiter is None:
        maxiter = 10 * n
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    M = sp.diags(1.0 / diag)
    count = [0]

    def _tick(_):
        count[0] += 1

    x = x0
    for _ in range(3):
        x, info = spla.cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=_tick)
        res = float(np.linalg.norm(b - A @ x)) / bnorm
        # scipy stops on the recursive residual; restart if the true one lags
        if info != 0 or res <= tol:
            break
    return x, SolveReport(count[0], res, res <= tol)

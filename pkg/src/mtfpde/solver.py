"""Fully discrete L2-1sigma / P1 Galerkin time stepper."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_scalar
from .exceptions import ConfigurationError, NumericalFailure
from .kernel import build_kernel_table
from .linsolve import solve_spd
from .space import (
    assemble_mass,
    assemble_stiffness,
    build_spatial_mesh,
    evaluate,
    h1_error,
    hat_integrals,
    interpolate,
    l2_error,
    l2_norm,
    load_vector,
    ritz_projection,
)
from .tmesh import build_graded_mesh, check_stepsize_criterion

logger = logging.getLogger(__name__)

FIRST_STEP_MAXITER = 100
FIRST_STEP_TOL = 1e-12
# a linear solve that misses its tolerance by more than this aborts the run
ABORT_RESIDUAL = 1e-8

INIT_MODES = ("interpolate", "ritz")


@dataclass
class StepContext:
    """Everything a step needs besides the history: meshes, kernel, matrices."""

    problem: object
    tmesh: object
    smesh: object
    table: object
    M: object
    S: object
    hats: np.ndarray
    cg_tol: float = 1e-12

    def coefficient(self, lval, n):
        val = self.problem.coefficient(lval)
        if val is None:
            raise NumericalFailure(
                f"a(l)={self.problem.a(lval)!r} at l={lval:.6g} outside [{self.problem.m1}, {self.problem.m2}]",
                step=n,
            )
        return val

    def load(self, n):
        return load_vector(self.smesh, self.problem.f, float(self.table.t_offset[n]))

    def solve(self, A, rhs, n, x0=None):
        U, rep = solve_spd(A, rhs, tol=self.cg_tol, x0=x0)
        if not rep.converged:
            if rep.residual > ABORT_RESIDUAL:
                raise NumericalFailure(f"linear solve failed: {rep}", step=n)
            logger.debug("step %d: linear solve stopped short (%s)", n, rep)
        if not np.all(np.isfinite(U)):
            raise NumericalFailure("non-finite solution", step=n)
        return U, rep


@dataclass
class SolutionHistory:
    """``U[n]`` holds the interior coefficients at ``t_n``; index 0 is the initial value."""

    problem: object
    tmesh: object
    smesh: object
    table: object
    U: np.ndarray = field(repr=False)
    l_values: np.ndarray = field(repr=False)
    a_values: np.ndarray = field(repr=False)
    first_step_iterations: int = 0
    solve_reports: list = field(default_factory=list, repr=False)
    stepsize: object = None

    @property
    def N(self):
        return self.tmesh.N

    def l2_errors(self):
        """``||u(t_n) - U^n||`` for ``n = 0..N``."""
        ex = self._need_exact("exact")
        t = self.tmesh.t
        return np.array([l2_error(self.smesh, self.U[n], ex, float(t[n])) for n in range(self.N + 1)])

    def h1_errors(self):
        """``|u(t_n) - U^n|_1`` for ``n = 0..N``."""
        gex = self._need_exact("grad_exact")
        t = self.tmesh.t
        return np.array([h1_error(self.smesh, self.U[n], gex, float(t[n])) for n in range(self.N + 1)])

    def l2_norms(self, mass=None):
        M = assemble_mass(self.smesh) if mass is None else mass
        return np.array([l2_norm(self.smesh, u, M) for u in self.U])

    def _need_exact(self, attr):
        fn = getattr(self.problem, attr)
        if fn is None:
            raise ConfigurationError(f"problem {self.problem.name!r} has no {attr.replace('_', ' ')}")
        return fn


def initialize(problem, smesh, mode="interpolate", stiffness=None):
    if mode == "interpolate":
        return interpolate(smesh, problem.u0)
    if mode == "ritz":
        if problem.grad_exact is None:
            raise ConfigurationError("ritz initialization needs the gradient of u0 (grad_exact)")
        return ritz_projection(smesh, lambda x: problem.grad_exact(x, 0.0), stiffness=stiffness)
    raise ConfigurationError(f"unknown init mode {mode!r}; choose from {INIT_MODES}")


def step_first(ctx, U0):
    """Nonlinear first step by fixed-point iteration on the scalar ``a(l(U^{1,sigma}))``.

    Returns ``(U1, iterations, last report, coefficient used)``.
    """
    g11 = ctx.table.g[1, 1]
    sig = float(ctx.table.sigma[1])
    M, S, hats = ctx.M, ctx.S, ctx.hats
    F = ctx.load(1)
    MU0 = M @ U0
    SU0 = S @ U0
    l0 = float(hats @ U0)

    def lshift(U):
        return (1.0 - sig) * float(hats @ U) + sig * l0

    U = U0
    lcur = lshift(U)
    w = ctx.coefficient(lcur, 1)
    for it in range(1, FIRST_STEP_MAXITER + 1):
        A = g11 * M + ((1.0 - sig) * w) * S
        rhs = g11 * MU0 - (sig * w) * SU0 + F
        U, rep = ctx.solve(A, rhs, 1, x0=U)
        lnew = lshift(U)
        wnew = ctx.coefficient(lnew, 1)
        if wnew == w or abs(lnew - lcur) <= FIRST_STEP_TOL * (1.0 + abs(lnew)):
            return U, it, rep, w
        lcur, w = lnew, wnew
    raise NumericalFailure(
        f"first-step fixed point did not converge in {FIRST_STEP_MAXITER} iterations "
        f"(last l change {abs(lnew - lcur):.3e})",
        step=1,
    )


def history_rhs(table, U, n, form="telescoped"):
    """Known part of ``D_N U^{n-sigma_n}`` with ``U^n`` removed: ``sum_j c_j U^j`` over ``j < n``.

    ``U`` holds at least levels ``0..n-1`` along its first axis.
    """
    w = table.row(n)
    if form == "telescoped":
        c = np.empty(n)
        c[0] = w[0]
        c[1:] = np.diff(w)
        return c @ U[:n]
    if form == "difference":
        out = w[-1] * U[n - 1]
        if n >= 2:
            out = out - w[:-1] @ np.diff(U[:n], axis=0)
        return out
    raise ValueError(f"unknown form {form!r}")


def extrapolate(tmesh, sigma_n, U_prev, U_prev2, n):
    """Linear extrapolation of ``U^{n-1}, U^{n-2}`` to ``t_{n-sigma_n}``."""
    tau = tmesh.tau
    tau_prev, tau_n = tau[n - 2], tau[n - 1]
    c = (1.0 - sigma_n) * tau_n / tau_prev
    return (1.0 + c) * U_prev - c * U_prev2


def step_n(ctx, U, n):
    """Linearized step ``n >= 2``; ``U`` holds levels ``0..n-1``."""
    table = ctx.table
    sig = float(table.sigma[n])
    gnn = table.g[n, n]
    Uhat = extrapolate(ctx.tmesh, sig, U[n - 1], U[n - 2], n)
    lhat = float(ctx.hats @ Uhat)
    w = ctx.coefficient(lhat, n)
    A = gnn * ctx.M + ((1.0 - sig) * w) * ctx.S
    rhs = ctx.M @ history_rhs(table, U, n) - (sig * w) * (ctx.S @ U[n - 1]) + ctx.load(n)
    Un, rep = ctx.solve(A, rhs, n, x0=U[n - 1])
    return Un, rep, w


def make_context(problem, N, Ms, r=None, T=1.0, cg_tol=1e-12):
    if r is None:
        r = 2.0 / problem.orders.alpha1
    tmesh = build_graded_mesh(T, N, r)
    smesh = build_spatial_mesh(problem.domain, Ms)
    table = build_kernel_table(problem.orders, tmesh)
    return StepContext(
        problem=problem,
        tmesh=tmesh,
        smesh=smesh,
        table=table,
        M=assemble_mass(smesh),
        S=assemble_stiffness(smesh),
        hats=hat_integrals(smesh),
        cg_tol=cg_tol,
    )


def run(problem, N, Ms, r=None, init="interpolate", T=1.0, cg_tol=1e-12, Lambda=1.0, U0=None):
    """Solve on ``[0, T]`` with ``N`` graded steps and ``Ms`` spatial subdivisions.

    ``r`` defaults to ``2 / alpha_1``. ``U0`` overrides the initializer.
    """
    N = check_scalar(N, "N", lo=1, integer=True)
    ctx = make_context(problem, N, Ms, r=r, T=T, cg_tol=cg_tol)
    stepsize = check_stepsize_criterion(ctx.tmesh, problem.orders, Lambda)
    if not stepsize.passed:
        logger.info("step-size criterion not met (advisory): %s", stepsize)

    nint = ctx.smesh.n_interior
    U = np.zeros((N + 1, nint))
    U[0] = initialize(problem, ctx.smesh, init, stiffness=ctx.S) if U0 is None else U0
    if not np.all(np.isfinite(U[0])):
        raise NumericalFailure("non-finite initial value", step=0)
    l_values = np.full(N + 1, np.nan)
    a_values = np.full(N + 1, np.nan)
    l_values[0] = ctx.hats @ U[0]
    reports = []

    U[1], iters, rep, w = step_first(ctx, U[0])
    a_values[1] = w
    l_values[1] = ctx.hats @ U[1]
    reports.append(rep)
    for n in range(2, N + 1):
        U[n], rep, w = step_n(ctx, U, n)
        a_values[n] = w
        l_values[n] = ctx.hats @ U[n]
        reports.append(rep)
    U.flags.writeable = False
    return SolutionHistory(
        problem=problem,
        tmesh=ctx.tmesh,
        smesh=ctx.smesh,
        table=ctx.table,
        U=U,
        l_values=l_values,
        a_values=a_values,
        first_step_iterations=iters,
        solve_reports=reports,
        stepsize=stepsize,
    )


class FractionalNonlocalSolver(BaseEstimator):
    """Estimator-style front end: ``fit`` runs the time stepper on a problem.

    Parameters mirror :func:`run`; ``Ms`` defaults to ``N`` and ``r`` to
    ``2 / alpha_1`` of the fitted problem.
    """

    def __init__(self, N=64, Ms=None, r=None, T=1.0, init="interpolate", cg_tol=1e-12):
        self.N = N
        self.Ms = Ms
        self.r = r
        self.T = T
        self.init = init
        self.cg_tol = cg_tol

    def fit(self, problem, y=None):
        if self.init not in INIT_MODES:
            raise ConfigurationError(f"unknown init mode {self.init!r}")
        Ms = self.N if self.Ms is None else self.Ms
        self.history_ = run(
            problem, self.N, Ms, r=self.r, init=self.init, T=self.T, cg_tol=self.cg_tol
        )
        self.problem_ = problem
        self.r_ = self.history_.tmesh.r
        self.t_ = self.history_.tmesh.t
        return self

    def _check_fitted(self):
        if not hasattr(self, "history_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("call fit(problem) first")

    def predict(self, X, level=-1):
        """Discrete solution at points ``X`` (shape ``(npts, dim)``) and time level ``level``."""
        self._check_fitted()
        h = self.history_
        return evaluate(h.smesh, h.U[level], X)

    def error(self, norm="linf-l2"):
        """Scalar error of the fitted run; see :func:`mtfpde.harness.reduce_error`."""
        self._check_fitted()
        from .harness import reduce_error

        return reduce_error(self.history_, norm)

    def score(self, problem=None, y=None):
        """Negative ``L^inf(L^2)`` error (larger is better)."""
        return -self.error("linf-l2")


"""Graded temporal mesh ``t_n = T (n/N)**r``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_scalar
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAX_STEP_RATIO = 7.0 / 4.0


@dataclass(frozen=True)
class GradedTimeMesh:
    T: float
    N: int
    r: float
    t: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)

    @property
    def max_tau(self):
        return float(self.tau.max())

    @property
    def max_step_ratio(self):
        """``max_{2<=n<=N} tau_{n-1} / tau_n`` (0 for a single step)."""
        if self.N < 2:
            return 0.0
        return float(np.max(self.tau[:-1] / self.tau[1:]))


def build_graded_mesh(T, N, r):
    T = check_scalar(T, "T", lo=0.0, lo_open=True)
    N = check_scalar(N, "N", lo=1, integer=True)
    r = check_scalar(r, "r", lo=1.0)
    n = np.arange(N + 1, dtype=float)
    t = T * (n / N) ** r
    t[0], t[-1] = 0.0, T
    tau = np.diff(t)
    t.flags.writeable = False
    tau.flags.writeable = False
    mesh = GradedTimeMesh(T=T, N=N, r=r, t=t, tau=tau)
    _check_mesh(mesh)
    return mesh


def _check_mesh(mesh):
    if not np.all(mesh.tau > 0):
        raise ConfigurationError("graded mesh has a nonpositive step (N too large for double precision?)")
    if mesh.max_step_ratio > MAX_STEP_RATIO:
        raise ConfigurationError(
            f"step ratio {mesh.max_step_ratio:.4g} exceeds {MAX_STEP_RATIO}; kernel bounds do not apply"
        )
    t = mesh.t
    # equality at n = 2 in exact arithmetic, so allow rounding there
    if mesh.N >= 2 and not np.all(t[2:] <= 2.0**mesh.r * t[1:-1] * (1 + 1e-12)):
        raise ConfigurationError("graded mesh violates t_n <= 2**r t_{n-1}")


@dataclass(frozen=True)
class StepsizeReport:
    passed: bool
    max_tau: float
    bound: float

    def __str__(self):
        verdict = "ok" if self.passed else "VIOLATED"
        return f"max tau = {self.max_tau:.6e}, bound = {self.bound:.6e} ({verdict})"


def check_stepsize_criterion(mesh, orders, Lambda):
    """Step-size condition ``max tau_n <= (11/2 mu Lambda)**(-1/alpha_1)``.

    Advisory: callers log a warning instead of aborting when it fails.
    """
    Lambda = check_scalar(Lambda, "Lambda", lo=0.0, lo_open=True)
    base = 5.5 * orders.mu * Lambda
    with np.errstate(over="ignore", divide="ignore"):
        bound = float(np.power(base, -1.0 / orders.alpha1))
    return StepsizeReport(passed=mesh.max_tau <= bound, max_tau=mesh.max_tau, bound=bound)

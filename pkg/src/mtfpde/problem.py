"""Problem data for the nonlocal multi-term subdiffusion equation and the manufactured examples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigurationError
from .space import Interval, Rectangle
from .specfun import FractionalOrders, exact_multiterm_caputo

EXAMPLE_ORDERS = {
    "example1": (0.4, 0.37, 0.35, 0.33),
    "example2": (0.5, 0.47, 0.45, 0.43),
}


@dataclass(frozen=True)
class ProblemSpec:
    """``sum_s mu_s D^alpha_s u - a(l(u)) Lap u = f`` with ``u = 0`` on the boundary.

    ``a`` maps the scalar ``l(u) = int u dx`` to the diffusion coefficient and
    must satisfy ``m1 <= a <= m2`` with Lipschitz constant ``L``.
    """

    domain: object
    orders: FractionalOrders
    a: Callable[[float], float]
    f: Callable
    u0: Callable
    m1: float
    m2: float
    L: float = math.inf
    exact: Optional[Callable] = None
    grad_exact: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if not 0 < self.m1 <= self.m2:
            raise ConfigurationError(f"need 0 < m1 <= m2, got m1={self.m1}, m2={self.m2}")

    def coefficient(self, w):
        """``a(w)``, checked against its declared bounds.

        Returns ``None`` on a bound violation so callers can attach the step index.
        """
        val = float(self.a(w))
        if not self.m1 <= val <= self.m2 or not math.isfinite(val):
            return None
        return val


def _time_factor(orders):
    a1 = orders.alpha1
    powers = [(1.0, 3.0), (1.0, a1)]

    def g(t):
        return t**3 + t**a1

    def dg(t):
        return exact_multiterm_caputo(orders, powers, t)

    return g, dg


def manufactured_problem(example, orders=None):
    """Example problems with exact solution ``(t**3 + t**alpha_1) * phi(x)``.

    ``example1``: ``phi = sin x`` on ``(0, pi)``; ``example2``:
    ``phi = (x - x**2)(y - y**2)`` on the unit square; both with
    ``a(w) = 3 + sin w``.
    """
    key = str(example).lower().replace("-", "").replace("_", "")
    if key in ("1", "ex1"):
        key = "example1"
    if key in ("2", "ex2"):
        key = "example2"
    if key not in EXAMPLE_ORDERS:
        raise ConfigurationError(f"unknown example {example!r}")
    if orders is None:
        orders = FractionalOrders.from_lists(EXAMPLE_ORDERS[key])
    g, dg = _time_factor(orders)

    def a(w):
        return 3.0 + math.sin(w)

    if key == "example1":

        def exact(x, t):
            return g(t) * np.sin(x[:, 0])

        def grad_exact(x, t):
            return (g(t) * np.cos(x[:, 0]))[:, None]

        def f(x, t):
            gt = g(t)
            return (dg(t) + (3.0 + math.sin(2.0 * gt)) * gt) * np.sin(x[:, 0])

        domain = Interval(0.0, math.pi)
    else:

        def _phi(x):
            return (x[:, 0] - x[:, 0] ** 2) * (x[:, 1] - x[:, 1] ** 2)

        def exact(x, t):
            return g(t) * _phi(x)

        def grad_exact(x, t):
            X, Y = x[:, 0], x[:, 1]
            return g(t) * np.column_stack([(1 - 2 * X) * (Y - Y**2), (X - X**2) * (1 - 2 * Y)])

        def f(x, t):
            gt = g(t)
            X, Y = x[:, 0], x[:, 1]
            lap = -2.0 * ((X - X**2) + (Y - Y**2))
            return dg(t) * _phi(x) - (3.0 + math.sin(gt / 36.0)) * gt * lap

        domain = Rectangle(0.0, 1.0, 0.0, 1.0)

    def u0(x):
        return exact(x, 0.0)

    return ProblemSpec(
        domain=domain,
        orders=orders,
        a=a,
        f=f,
        u0=u0,
        m1=2.0,
        m2=4.0,
        L=1.0,
        exact=exact,
        grad_exact=grad_exact,
        name=key,
    )

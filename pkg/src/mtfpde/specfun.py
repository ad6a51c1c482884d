"""Special functions and exact Caputo derivatives of power functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar
from .exceptions import ConfigurationError, NumericalFailure

ML_MAX_TERMS = 10_000
ML_REL_STOP = 1e-18


@dataclass(frozen=True)
class FractionalOrders:
    """Weights and orders of the multi-term Caputo operator.

    ``terms`` holds ``(mu_s, alpha_s)`` pairs with strictly decreasing orders
    in (0, 1) and positive weights.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(mu), float(alpha)) for mu, alpha in self.terms)
        if not terms:
            raise ConfigurationError("at least one fractional term is required")
        for mu, alpha in terms:
            check_scalar(mu, "mu", lo=0.0, lo_open=True)
            check_scalar(alpha, "alpha", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
        alphas = [a for _, a in terms]
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigurationError(f"orders must be strictly decreasing, got {alphas}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_lists(cls, alphas, mus=None):
        alphas = [float(a) for a in alphas]
        if mus is None:
            mus = [1.0] * len(alphas)
        if len(mus) != len(alphas):
            raise ConfigurationError(f"got {len(mus)} weights for {len(alphas)} orders")
        return cls(tuple(zip(mus, alphas)))

    @property
    def m(self):
        return len(self.terms)

    @property
    def mus(self):
        return np.array([mu for mu, _ in self.terms])

    @property
    def alphas(self):
        return np.array([a for _, a in self.terms])

    @property
    def alpha1(self):
        return self.terms[0][1]

    @property
    def mu1(self):
        return self.terms[0][0]

    @property
    def b1(self):
        return 1.0 - self.alpha1 / 2.0

    @property
    def b2(self):
        return 1.0 - self.terms[-1][1] / 2.0

    @property
    def mu(self):
        """``min_s mu_s / Gamma(2 - alpha_s)``, the constant of the kernel lower bound."""
        return min(mu / gamma(2.0 - a) for mu, a in self.terms)


def gamma(x):
    if x <= 0:
        raise ValueError(f"gamma is only defined here for x > 0, got {x}")
    return math.gamma(x)


def mittag_leffler(alpha, z):
    """One-parameter Mittag-Leffler function ``E_alpha(z)`` for real ``z >= 0``.

    Power series with compensated summation. Terms are formed in log space so
    that ``Gamma(1 + k alpha)`` never overflows; the sum itself overflows (and
    raises) for very large ``z``, e.g. ``E_0.4(50)``.
    """
    check_scalar(alpha, "alpha", lo=0.0, hi=1.0, lo_open=True)
    check_scalar(z, "z", lo=0.0)
    if z == 0.0:
        return 1.0
    logz = math.log(z)
    total, comp = 1.0, 0.0
    peaked = False
    prev = 1.0
    for k in range(1, ML_MAX_TERMS + 1):
        log_term = k * logz - math.lgamma(1.0 + k * alpha)
        if log_term > 709.0:
            raise OverflowError(f"E_{alpha}({z}) overflows double precision")
        term = math.exp(log_term)
        # Kahan summation
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if term < prev:
            peaked = True
        prev = term
        if peaked and term < ML_REL_STOP * total:
            return total
    raise NumericalFailure(
        f"Mittag-Leffler series for alpha={alpha}, z={z} did not converge in {ML_MAX_TERMS} terms"
    )


def caputo_power(alpha, gamma_exp, t):
    """Caputo derivative of order ``alpha`` of ``t**gamma_exp``; ``t`` may be an array."""
    if gamma_exp <= 0:
        raise ValueError(f"exponent must be positive, got {gamma_exp}")
    c = gamma(1.0 + gamma_exp) / gamma(1.0 + gamma_exp - alpha)
    return c * np.power(t, gamma_exp - alpha)


def exact_multiterm_caputo(orders, powers, t):
    """Multi-term Caputo derivative of ``sum_k c_k t**gamma_k`` at ``t``.

    ``powers`` is a sequence of ``(coeff, exponent)``; exponent ``0`` denotes
    a constant and contributes nothing.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for mu, alpha in orders.terms:
        for coeff, gexp in powers:
            if gexp == 0:
                continue
            out = out + mu * coeff * caputo_power(alpha, gexp, t)
    return out if out.ndim else float(out)

"""Complementary discrete kernel ``p[n, i]`` and the Groenwall-type checks built on it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_scalar
from .exceptions import ConfigurationError
from .specfun import gamma, mittag_leffler

SLACK = 1e-10


def _verdict(lhs, rhs, slack=SLACK):
    if lhs <= rhs:
        return "pass"
    if lhs <= rhs + slack:
        return "pass (marginal)"
    return "fail"


@dataclass(frozen=True)
class GronwallTable:
    """``p[i - 1] = p_{n,i}`` for ``i = 1..n``; built against ``table``."""

    n: int
    p: np.ndarray = field(repr=False)
    table: object = field(repr=False)

    def identity_residuals(self):
        """``sum_{k=j}^n p_{n,k} g_{k,j} - 1`` for ``j = 1..n``."""
        n = self.n
        G = self.table.g[1 : n + 1, 1 : n + 1]
        return self.p @ G - 1.0

    def max_identity_residual(self):
        return float(np.max(np.abs(self.identity_residuals())))


def build_p(table, n):
    """Backward recurrence from ``p_{n,n} = 1 / g_{n,n}``; ``O(n**2)``."""
    n = check_scalar(n, "n", lo=1, hi=table.N, integer=True)
    g = table.g
    p = np.zeros(n + 1)  # index k holds p_{n,k}; index 0 unused
    p[n] = 1.0 / g[n, n]
    for i in range(n - 1, 0, -1):
        k = slice(i + 1, n + 1)
        p[i] = np.dot(g[k, i + 1] - g[k, i], p[k]) / g[i, i]
    out = p[1:]
    out.flags.writeable = False
    return GronwallTable(n=n, p=out, table=table)


@dataclass(frozen=True)
class LemmaReport:
    lhs: float
    rhs: float
    status: str

    @property
    def passed(self):
        return self.status != "fail"

    @property
    def margin(self):
        return self.rhs - self.lhs


def check_weighted_sum_lemma(table, orders, gamma_list, n, gt=None):
    """``sum_i (sum_s mu_s G(1+g_s)/G(1+g_s-a_s) t_i**(g_s-a_s)) p_{n,i} <= 11/4 sum_s t_n**g_s``."""
    gamma_list = [float(g_) for g_ in gamma_list]
    if len(gamma_list) != orders.m:
        raise ConfigurationError(f"need one exponent per term ({orders.m}), got {len(gamma_list)}")
    for g_ in gamma_list:
        check_scalar(g_, "gamma_s", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    gt = gt if gt is not None else build_p(table, n)
    t = table.mesh.t
    ti = t[1 : n + 1]
    weights = np.zeros(n)
    for (mu, a), g_ in zip(orders.terms, gamma_list):
        weights += mu * gamma(1.0 + g_) / gamma(1.0 + g_ - a) * ti ** (g_ - a)
    lhs = float(np.dot(weights, gt.p))
    rhs = 11.0 / 4.0 * sum(t[n] ** g_ for g_ in gamma_list)
    return LemmaReport(lhs, rhs, _verdict(lhs, rhs))


@dataclass(frozen=True)
class MLSumReport:
    """The Mittag-Leffler sum against both readings of its bound.

    ``statement`` compares ``S`` itself with the bound; ``scaled`` compares
    ``K * S`` with the same bound.
    """

    S: float
    K: float
    bound: float
    statement: LemmaReport
    scaled: LemmaReport


def check_ml_sum_lemma(table, orders, K, n, gt=None):
    """``S = sum_{j<n} p_{n,j} E_a1(K t_j**a1)`` vs ``11/(4 mu_1 K) (E_a1(K t_n**a1) - 1)``."""
    K = check_scalar(K, "K", lo=0.0, lo_open=True)
    a1, mu1 = orders.alpha1, orders.mu1
    t = table.mesh.t
    gt = gt if gt is not None else build_p(table, n)
    S = 0.0
    for j in range(1, n):
        S += gt.p[j - 1] * mittag_leffler(a1, K * t[j] ** a1)
    bound = 11.0 / (4.0 * mu1 * K) * (mittag_leffler(a1, K * t[n] ** a1) - 1.0)
    return MLSumReport(
        S=S,
        K=K,
        bound=bound,
        statement=LemmaReport(S, bound, _verdict(S, bound)),
        scaled=LemmaReport(K * S, bound, _verdict(K * S, bound)),
    )


@dataclass(frozen=True)
class GronwallBoundParams:
    """Data of the discrete Groenwall inequality.

    ``xi[j - 1]`` and ``zeta[j - 1]`` hold ``xi^j`` and ``zeta^j``.
    """

    lam: np.ndarray
    Lambda: float
    xi: np.ndarray
    zeta: np.ndarray
    v0: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        zeta = np.asarray(self.zeta, dtype=float)
        if np.any(lam < 0) or np.any(xi < 0) or np.any(zeta < 0) or self.v0 < 0:
            raise ConfigurationError("Groenwall data must be nonnegative")
        if lam.sum() > self.Lambda * (1 + 1e-14):
            raise ConfigurationError(f"sum(lambda)={lam.sum()} exceeds Lambda={self.Lambda}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "Lambda", float(self.Lambda))
        object.__setattr__(self, "v0", float(self.v0))


def gronwall_rhs(params, table, orders, n):
    """Right-hand side of the discrete fractional Groenwall bound at level ``n``.

    ``Lambda = 0`` is accepted as the limit case.
    """
    a1, mu1 = orders.alpha1, orders.mu1
    tn = table.mesh.t[n]
    growth = 2.0 * mittag_leffler(a1, 5.5 / mu1 * params.Lambda * tn**a1)
    forcing = params.xi[:n] + params.zeta[:n]
    best = 0.0
    if np.any(forcing > 0):
        for k in range(1, n + 1):
            gt = build_p(table, k)
            best = max(best, float(np.dot(gt.p, forcing[:k])))
    zmax = float(params.zeta[:n].max()) if n > 0 and params.zeta.size else 0.0
    return growth * (params.v0 + best + zmax)

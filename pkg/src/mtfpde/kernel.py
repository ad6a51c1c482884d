"""L2-1sigma weights on a nonuniform mesh for the multi-term Caputo operator.

For every step ``n`` the shift ``sigma_n`` is chosen so that the multi-term
local truncation error on the last subinterval vanishes to second order; the
kernel weights ``g[n, j]`` multiply the history differences ``v^j - v^{j-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalFailure
from .specfun import exact_multiterm_caputo, gamma
from .tmesh import build_graded_mesh

SIGMA_TOL = 1e-15
SIGMA_MAXITER = 200

# Series for the b-integral is used when the half-interval is at most this
# fraction of the distance from the interval midpoint to t_{n-sigma}.
_SERIES_EPS = 0.5
_SERIES_TERMS = 30


def _G(orders, sigma, tau):
    val = 0.0
    der = 0.0
    for mu, a in orders.terms:
        c = mu / gamma(3.0 - a) * tau ** (2.0 - a)
        beta = 1.0 - a / 2.0
        val += c * sigma ** (1.0 - a) * (sigma - beta)
        der += c * sigma ** (-a) * ((2.0 - a) * sigma - (1.0 - a) * beta)
    return val, der


def solve_sigma(orders, tau_n):
    """Root ``sigma*`` of the shift equation in ``[b1, b2]``; returns ``(sigma*, 1 - sigma*)``.

    Newton's method started at ``b2``; an iterate leaving the bracket triggers
    bisection on the current sign-change bracket.
    """
    lo, hi = orders.b1, orders.b2
    if lo == hi:
        return lo, 1.0 - lo
    g_lo, _ = _G(orders, lo, tau_n)
    g_hi, _ = _G(orders, hi, tau_n)
    x = hi
    for _ in range(SIGMA_MAXITER):
        gx, dg = _G(orders, x, tau_n)
        if gx == 0.0:
            return x, 1.0 - x
        # keep a bracket [lo, hi] with G(lo) <= 0 <= G(hi)
        if gx < 0:
            lo = x
        else:
            hi = x
        step = gx / dg if dg > 0 else math.inf
        x_new = x - step
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= SIGMA_TOL:
            return x_new, 1.0 - x_new
        x = x_new
    raise NumericalFailure(
        f"sigma root not found for tau={tau_n}: G(b1)={g_lo:.3e}, G(b2)={g_hi:.3e}, last x={x}"
    )


def _pow_diff(A, B, p, tau):
    """``A**p - B**p`` for ``A - B = tau > 0`` without cancellation (``B = 0`` allowed)."""
    with np.errstate(divide="ignore"):
        return -(A**p) * np.expm1(p * np.log1p(-tau / A))


def _series_coeffs(alpha):
    # c_i = (alpha)_{2i+1} / (2i+1)! * 2 / (2i+3)
    coeffs = np.empty(_SERIES_TERMS)
    poch = 1.0  # (alpha)_k / k!
    for k in range(1, 2 * _SERIES_TERMS + 1):
        poch *= (alpha + k - 1) / k
        if k % 2 == 1:
            coeffs[(k - 1) // 2] = poch * 2.0 / (k + 2)
    return coeffs


def _moment_integral(t_star, left, right, alpha):
    """``int_left^right (t_star - eta)**(-alpha) (eta - mid) d eta`` with ``right < t_star``.

    Vectorized over intervals. Short intervals far from ``t_star`` use the
    odd-power series in ``h / D`` (``h`` the half width, ``D`` the distance of
    the midpoint from ``t_star``); the rest use the two-power antiderivative.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    width = right - left
    h = 0.5 * width
    A = t_star - left
    B = t_star - right
    D = B + h
    eps = h / D
    out = np.empty_like(A)

    near = eps > _SERIES_EPS
    if np.any(near):
        An, Bn, Dn, wn = A[near], B[near], D[near], width[near]
        out[near] = Dn * _pow_diff(An, Bn, 1.0 - alpha, wn) / (1.0 - alpha) - _pow_diff(
            An, Bn, 2.0 - alpha, wn
        ) / (2.0 - alpha)
    far = ~near
    if np.any(far):
        e = eps[far]
        e2 = e * e
        coeffs = _series_coeffs(alpha)
        acc = np.full_like(e, coeffs[-1])
        for c in coeffs[-2::-1]:
            acc = acc * e2 + c
        out[far] = h[far] ** 2 * D[far] ** (-alpha) * e * acc
    return out


def _a_row(t, tau, n, t_star, sigma_star, alpha):
    """``a[n, 1..n]`` for one order (index 0 of the result is ``j = 1``)."""
    g2 = gamma(2.0 - alpha)
    out = np.empty(n)
    if n > 1:
        A = t_star - t[: n - 1]
        B = t_star - t[1:n]
        out[: n - 1] = _pow_diff(A, B, 1.0 - alpha, tau[: n - 1]) / g2
    out[n - 1] = (sigma_star * tau[n - 1]) ** (1.0 - alpha) / g2
    return out


def _b_row(t, n, t_star, alpha):
    """``b[n, 1..n-1]`` for one order."""
    if n < 2:
        return np.empty(0)
    j = np.arange(1, n)
    I = _moment_integral(t_star, t[j - 1], t[j], alpha)
    return 2.0 * I / (gamma(1.0 - alpha) * (t[j + 1] - t[j - 1]))


def coeff_a(mesh, n, j, alpha, sigma_star):
    """Scalar ``a^{(alpha, sigma_n)}_{n,j}`` for ``1 <= j <= n``."""
    if not 1 <= j <= n <= mesh.N:
        raise IndexError(f"need 1 <= j <= n <= N, got n={n}, j={j}")
    t_star = mesh.t[n - 1] + sigma_star * mesh.tau[n - 1]
    return float(_a_row(mesh.t, mesh.tau, n, t_star, sigma_star, alpha)[j - 1])


def coeff_b(mesh, n, j, alpha, sigma_star):
    """Scalar ``b^{(alpha, sigma_n)}_{n,j}`` for ``1 <= j <= n - 1``."""
    if not 1 <= j < n <= mesh.N:
        raise IndexError(f"need 1 <= j < n <= N, got n={n}, j={j}")
    t_star = mesh.t[n - 1] + sigma_star * mesh.tau[n - 1]
    jj = np.array([j])
    I = _moment_integral(t_star, mesh.t[jj - 1], mesh.t[jj], alpha)[0]
    return float(2.0 * I / (gamma(1.0 - alpha) * (mesh.t[j + 1] - mesh.t[j - 1])))


def _g_row_single(t, tau, n, t_star, sigma_star, alpha):
    a = _a_row(t, tau, n, t_star, sigma_star, alpha)
    if n == 1:
        return a / tau[:1]
    b = _b_row(t, n, t_star, alpha)
    num = a.copy()
    num[: n - 1] -= b
    num[1:] += b
    return num / tau[:n]


@dataclass(frozen=True)
class KernelTable:
    """Per-step shifts and aggregated weights.

    ``g`` is a dense ``(N+1, N+1)`` array with ``g[n, j]`` set for
    ``1 <= j <= n <= N`` and zero elsewhere. Arrays indexed by step have a
    NaN placeholder at index 0.
    """

    orders: object
    mesh: object
    sigma_star: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    t_offset: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    components: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self):
        return self.mesh.N

    def row(self, n):
        return self.g[n, 1 : n + 1]


def build_kernel_table(orders, mesh, keep_components=False):
    N = mesh.N
    t, tau = mesh.t, mesh.tau
    sigma_star = np.full(N + 1, np.nan)
    cache = {}
    for n in range(1, N + 1):
        key = float(tau[n - 1])
        if key not in cache:
            cache[key] = solve_sigma(orders, key)[0]
        sigma_star[n] = cache[key]
    sigma = 1.0 - sigma_star
    t_offset = np.full(N + 1, np.nan)
    t_offset[1:] = t[:-1] + sigma_star[1:] * tau

    g = np.zeros((N + 1, N + 1))
    comps = np.zeros((orders.m, N + 1, N + 1)) if keep_components else None
    for n in range(1, N + 1):
        for s, (mu, alpha) in enumerate(orders.terms):
            row = _g_row_single(t, tau, n, t_offset[n], sigma_star[n], alpha)
            g[n, 1 : n + 1] += mu * row
            if comps is not None:
                comps[s, n, 1 : n + 1] = row
    for arr in (sigma_star, sigma, t_offset, g):
        arr.flags.writeable = False
    return KernelTable(orders, mesh, sigma_star, sigma, t_offset, g, comps)


def apply_DN(table, history, n, form="difference"):
    """Discrete multi-term Caputo operator at ``t_{n - sigma_n}``.

    ``history`` holds ``v^0 .. v^n`` along its first axis (scalars or vectors).
    """
    v = np.asarray(history, dtype=float)
    if v.shape[0] != n + 1:
        raise ValueError(f"history must hold n+1={n + 1} levels, got {v.shape[0]}")
    w = table.row(n)
    if form == "difference":
        return np.tensordot(w, np.diff(v, axis=0), axes=1)
    if form == "telescoped":
        out = w[-1] * v[n] - w[0] * v[0]
        if n >= 2:
            out = out - np.tensordot(np.diff(w), v[1:n], axes=1)
        return out
    raise ValueError(f"unknown form {form!r}")


@dataclass(frozen=True)
class KernelReport:
    """Outcome of the weight checks.

    ``bound_holds`` is the tau-form bound ``g[n,j] tau_j**alpha_1 >= 4 mu / 11``
    over every ``j <= n``; ``diagonal_bound_holds`` restricts it to ``j = n``;
    ``integral_bound_holds`` is the averaged-kernel bound
    ``g[n,j] >= 4/(11 tau_j) sum_s mu_s int (t_n - eta)**(-alpha_s) / Gamma(1 - alpha_s)``.
    """

    monotone: bool
    monotone_violations: int
    positive: bool
    lower_bound: float
    min_scaled_weight: float
    bound_holds: bool
    bound_violations: int
    min_scaled_diagonal: float
    diagonal_bound_holds: bool
    min_integral_ratio: float
    integral_bound_holds: bool
    max_sigma_residual: float

    @property
    def passed(self):
        return self.monotone and self.positive and self.bound_holds


def _averaged_kernel_row(orders, mesh, n):
    t, tau = mesh.t, mesh.tau
    A = t[n] - t[:n]
    B = t[n] - t[1 : n + 1]
    out = np.zeros(n)
    for mu, a in orders.terms:
        out += mu * _pow_diff(A, B, 1.0 - a, tau[:n]) / gamma(2.0 - a)
    return 4.0 / 11.0 * out / tau[:n]


def check_kernel_properties(table):
    """Row monotonicity, positivity and the lower bounds on ``g``."""
    orders, mesh = table.orders, table.mesh
    N = mesh.N
    bound = 4.0 * orders.mu / 11.0
    violations = 0
    bound_violations = 0
    positive = True
    min_scaled = math.inf
    min_diag = math.inf
    min_ratio = math.inf
    tau_pow = mesh.tau ** orders.alpha1
    for n in range(1, N + 1):
        row = table.row(n)
        violations += int(np.count_nonzero(np.diff(row) < 0))
        positive &= bool(row[0] > 0)
        scaled = row * tau_pow[:n]
        bound_violations += int(np.count_nonzero(scaled < bound))
        min_scaled = min(min_scaled, float(scaled.min()))
        min_diag = min(min_diag, float(scaled[-1]))
        min_ratio = min(min_ratio, float(np.min(row / _averaged_kernel_row(orders, mesh, n))))
    resid = 0.0
    for n in range(1, N + 1):
        tau_n = mesh.tau[n - 1]
        val, _ = _G(orders, table.sigma_star[n], tau_n)
        ref, _ = _G(orders, orders.b2, tau_n)
        scale = abs(ref) if ref != 0 else 1.0
        resid = max(resid, abs(val) / scale)
    return KernelReport(
        monotone=violations == 0,
        monotone_violations=violations,
        positive=positive,
        lower_bound=bound,
        min_scaled_weight=min_scaled,
        bound_holds=bound_violations == 0,
        bound_violations=bound_violations,
        min_scaled_diagonal=min_diag,
        diagonal_bound_holds=min_diag >= bound,
        min_integral_ratio=min_ratio,
        integral_bound_holds=min_ratio >= 1.0,
        max_sigma_residual=resid,
    )


def truncation_experiment(orders, T, N_list, r, powers=None):
    """Weighted truncation error of ``D_N`` for a sum of powers.

    The default test function is ``t**3 + t**alpha_1``. Returns a list of
    ``(N, max weighted error, observed rate)``; the rate of the last row is None.
    """
    if powers is None:
        powers = [(1.0, 3.0), (1.0, orders.alpha1)]
    rows = []
    for N in N_list:
        mesh = build_graded_mesh(T, N, r)
        table = build_kernel_table(orders, mesh)
        t = mesh.t
        v = np.zeros_like(t)
        for c, p in powers:
            v = v + c * t**p
        dn = table.g[1:, 1:] @ np.diff(v)
        ts = table.t_offset[1:]
        exact = exact_multiterm_caputo(orders, powers, ts)
        weight = sum(mu * ts ** (-a) for mu, a in orders.terms)
        rows.append([N, float(np.max(np.abs(dn - exact) / weight)), None])
    for k in range(len(rows) - 1):
        e0, e1 = rows[k][1], rows[k + 1][1]
        if e0 > 0 and e1 > 0:
            rows[k][2] = math.log(e0 / e1) / math.log(rows[k + 1][0] / rows[k][0])
    return [tuple(r_) for r_ in rows]

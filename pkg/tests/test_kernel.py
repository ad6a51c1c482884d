import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from _oracles import a_quad as _a_oracle, b_quad as _b_oracle
from mtfpde.kernel import (
    apply_DN,
    build_kernel_table,
    check_kernel_properties,
    coeff_a,
    coeff_b,
    solve_sigma,
    truncation_experiment,
)
from mtfpde.specfun import FractionalOrders
from mtfpde.tmesh import build_graded_mesh

EX1 = FractionalOrders.from_lists([0.4, 0.37, 0.35, 0.33])
EX2 = FractionalOrders.from_lists([0.5, 0.47, 0.45, 0.43])


def _G_oracle(orders, sigma, tau):
    return sum(
        mu / math.gamma(3 - a) * sigma ** (1 - a) * (sigma - (1 - a / 2)) * tau ** (2 - a)
        for mu, a in orders.terms
    )


@pytest.mark.parametrize("alpha", [0.5, 0.9, 0.1])
def test_sigma_single_term(alpha):
    orders = FractionalOrders.from_lists([alpha])
    for tau in np.logspace(-6, 0, 13):
        s_star, s = solve_sigma(orders, tau)
        assert abs(s_star - (1 - alpha / 2)) <= 1e-14
        assert s == pytest.approx(alpha / 2, abs=1e-14)


def test_sigma_multiterm_bisection_oracle():
    for tau in (0.1, 1e-3, 1e-6, 0.7):
        s_star, s = solve_sigma(EX1, tau)
        ref = brentq(lambda x: _G_oracle(EX1, x, tau) / tau ** (2 - 0.33), EX1.b1, EX1.b2, xtol=1e-15, rtol=1e-15)
        assert EX1.b1 <= s_star <= EX1.b2
        assert s_star == pytest.approx(ref, abs=1e-12)
        assert s_star + s == 1.0
    s_star, _ = solve_sigma(EX1, 0.1)
    assert 0.8 <= s_star <= 0.835


def _sample_entries(mesh, orders, count, seed):
    table = build_kernel_table(orders, mesh)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, mesh.N + 1))
        j = int(rng.integers(1, n))
        s = int(rng.integers(0, orders.m))
        out.append((n, j, orders.alphas[s], table.sigma_star[n]))
    return out


@pytest.mark.parametrize(
    "mesh,orders,seed",
    [
        (build_graded_mesh(1, 64, 5), EX1, 1),
        (build_graded_mesh(1, 32, 4), EX2, 2),
        (build_graded_mesh(2, 16, 1), EX1, 3),
    ],
)
def test_coefficients_against_quadrature(mesh, orders, seed):
    entries = _sample_entries(mesh, orders, 30, seed)
    for n, j, alpha, ss in entries:
        a = coeff_a(mesh, n, j, alpha, ss)
        b = coeff_b(mesh, n, j, alpha, ss)
        assert a == pytest.approx(_a_oracle(mesh, n, j, alpha, ss), rel=1e-10)
        assert b == pytest.approx(_b_oracle(mesh, n, j, alpha, ss), rel=1e-10)
    n, alpha = entries[0][0], entries[0][2]
    ss = entries[0][3]
    assert coeff_a(mesh, n, n, alpha, ss) == pytest.approx(_a_oracle(mesh, n, n, alpha, ss), rel=1e-12)


def test_coefficient_spot_values():
    cases = [
        (build_graded_mesh(1, 4, 2), 3, 2, 0.5, "a"),
        (build_graded_mesh(1, 4, 2), 2, 1, 0.5, "b"),
        (build_graded_mesh(1, 8, 3), 5, 3, 0.7, "b"),
    ]
    for mesh, n, j, alpha, kind in cases:
        ss = 1 - alpha / 2
        if kind == "a":
            assert coeff_a(mesh, n, j, alpha, ss) == pytest.approx(_a_oracle(mesh, n, j, alpha, ss), rel=1e-12)
        else:
            assert coeff_b(mesh, n, j, alpha, ss) == pytest.approx(_b_oracle(mesh, n, j, alpha, ss), rel=1e-12)
    with pytest.raises(IndexError):
        coeff_b(build_graded_mesh(1, 4, 2), 2, 2, 0.5, 0.75)


def test_b_on_extremely_fine_first_steps():
    # tau_1 ~ 1e-15: the naive closed form loses every digit here
    mesh = build_graded_mesh(1, 512, 2 / 0.33)
    for n, j in [(2, 1), (3, 1), (50, 2), (512, 1), (512, 511)]:
        ss = solve_sigma(EX1, mesh.tau[n - 1])[0]
        assert coeff_b(mesh, n, j, 0.33, ss) == pytest.approx(_b_oracle(mesh, n, j, 0.33, ss), rel=1e-10)


def test_g11_closed_form():
    for orders in (FractionalOrders.from_lists([0.6]), EX2):
        mesh = build_graded_mesh(1, 1, 1)
        table = build_kernel_table(orders, mesh)
        tau = mesh.tau[0]
        ss = table.sigma_star[1]
        ref = sum(mu * (ss * tau) ** (1 - a) / math.gamma(2 - a) for mu, a in orders.terms) / tau
        assert table.g[1, 1] == pytest.approx(ref, rel=1e-14)
        assert table.t_offset[1] == pytest.approx(ss * tau, rel=1e-15)


def test_table_layout():
    mesh = build_graded_mesh(1, 8, 2)
    table = build_kernel_table(EX2, mesh, keep_components=True)
    assert np.isnan(table.sigma_star[0])
    assert np.all(np.triu(table.g, 1) == 0)
    assert np.all(table.g[0] == 0)
    agg = np.tensordot(EX2.mus, table.components, axes=1)
    np.testing.assert_allclose(agg, table.g, rtol=1e-14, atol=0)
    np.testing.assert_allclose(table.t_offset[1:], mesh.t[:-1] + table.sigma_star[1:] * mesh.tau)
    assert not table.g.flags.writeable


def test_rows_monotone_and_positive():
    orders = FractionalOrders.from_lists([0.4, 0.33])
    mesh = build_graded_mesh(1, 16, 2)
    table = build_kernel_table(orders, mesh)
    for n in range(1, 17):
        row = table.row(n)
        assert row[0] > 0
        assert np.all(np.diff(row) >= 0)
    rep = check_kernel_properties(table)
    assert rep.monotone and rep.positive
    assert rep.diagonal_bound_holds and rep.integral_bound_holds
    assert rep.max_sigma_residual <= 1e-14


def test_tau_form_bound_counterexample():
    # g_{N,1} tau_1^alpha decays with N on a uniform mesh, so the tau form
    # cannot hold for all j <= n; it does hold on the diagonal
    orders = FractionalOrders.from_lists([0.4])
    bound = 4 * orders.mu / 11
    mesh = build_graded_mesh(1, 16, 1)
    table = build_kernel_table(orders, mesh)
    assert table.g[16, 1] * mesh.tau[0] ** 0.4 < bound
    assert all(table.g[n, n] * mesh.tau[n - 1] ** 0.4 >= bound for n in range(1, 17))
    rep = check_kernel_properties(table)
    assert not rep.bound_holds and rep.bound_violations > 0


def test_apply_DN_forms():
    mesh = build_graded_mesh(1, 12, 3)
    table = build_kernel_table(EX1, mesh)
    rng = np.random.default_rng(0)
    for n in range(1, 13):
        v = rng.standard_normal((n + 1, 5))
        d1 = apply_DN(table, v, n, "difference")
        d2 = apply_DN(table, v, n, "telescoped")
        np.testing.assert_allclose(d1, d2, rtol=1e-13, atol=1e-13 * np.abs(d1).max())
        assert np.all(apply_DN(table, np.full((n + 1, 3), 2.5), n) == 0.0)
    assert apply_DN(table, [1.0, 4.0], 1) == pytest.approx(table.g[1, 1] * 3.0)
    with pytest.raises(ValueError):
        apply_DN(table, [1.0, 2.0, 3.0], 1)


def test_apply_DN_linear_function():
    orders = FractionalOrders.from_lists([0.5])
    mesh = build_graded_mesh(1, 8, 2)
    table = build_kernel_table(orders, mesh)
    for n in range(1, 9):
        ts = table.t_offset[n]
        exact = ts**0.5 / math.gamma(1.5)
        # linear data is reproduced exactly by the interpolants
        assert apply_DN(table, mesh.t[: n + 1], n) == pytest.approx(exact, rel=1e-12)


def test_truncation_rates():
    rows = truncation_experiment(EX1, 1.0, [64, 128, 256], 2 / 0.4)
    assert [r[0] for r in rows] == [64, 128, 256]
    assert rows[-1][2] is None
    assert all(r[2] >= 1.85 for r in rows[:-1])
    single = FractionalOrders.from_lists([0.5])
    rows = truncation_experiment(single, 1.0, [64, 128, 256], 1.0)
    assert all(0.4 <= r[2] <= 0.6 for r in rows[:-1])


def test_truncation_constant():
    rows = truncation_experiment(EX2, 1.0, [8, 16], 4.0, powers=[(3.0, 0.0)])
    assert all(r[1] == 0.0 for r in rows)


@st.composite
def _orders(draw):
    m = draw(st.integers(1, 4))
    alphas = sorted(draw(st.lists(st.floats(0.05, 0.95), min_size=m, max_size=m, unique=True)), reverse=True)
    if any(a - b < 1e-3 for a, b in zip(alphas, alphas[1:])):
        alphas = alphas[:1]
    mus = draw(st.lists(st.floats(0.1, 5.0), min_size=len(alphas), max_size=len(alphas)))
    return FractionalOrders.from_lists(alphas, mus)


@settings(max_examples=40, deadline=None)
@given(orders=_orders(), N=st.integers(2, 40), r=st.floats(1.0, 8.0), T=st.floats(0.1, 5.0))
def test_kernel_invariants_property(orders, N, r, T):
    table = build_kernel_table(orders, build_graded_mesh(T, N, r))
    rep = check_kernel_properties(table)
    assert rep.monotone and rep.positive
    assert rep.diagonal_bound_holds
    assert rep.max_sigma_residual <= 1e-14
    assert np.all((orders.b1 <= table.sigma_star[1:]) & (table.sigma_star[1:] <= orders.b2))

"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed in the summary."""

import math

import numpy as np
import pytest

from _oracles import a_quad, b_quad, linear_problem, reference_uniform
from conftest import record
from mtfpde.gronwall import build_p
from mtfpde.harness import compute_eoc, reduce_error
from mtfpde.kernel import build_kernel_table, check_kernel_properties, coeff_a, coeff_b, truncation_experiment
from mtfpde.problem import ProblemSpec, manufactured_problem
from mtfpde.solver import run
from mtfpde.space import Rectangle
from mtfpde.specfun import FractionalOrders, mittag_leffler
from mtfpde.tmesh import build_graded_mesh

EX1_A = (0.4, 0.37, 0.35, 0.33)
EX1_B = (0.7, 0.68, 0.66, 0.64, 0.62)
EX2_A = (0.5, 0.47, 0.45, 0.43)
EX2_B = (0.9, 0.88, 0.86, 0.84, 0.82)

_CACHE = {}


def _study(example, alphas, levels, r):
    key = (example, alphas, levels, r)
    if key not in _CACHE:
        prob = manufactured_problem(example, FractionalOrders.from_lists(alphas))
        l2, h1 = [], []
        for N in levels:
            hist = run(prob, N, N, r=r)
            l2.append(reduce_error(hist, "linf-l2"))
            h1.append(reduce_error(hist, "h1"))
        _CACHE[key] = (l2, h1)
    return _CACHE[key]


def _table_check(errors, eocs, ref_err, ref_eoc, err_tol=0.3, eoc_tol=0.1):
    err_ok = all(abs(e / r - 1) <= err_tol for e, r in zip(errors, ref_err))
    eoc_ok = all(abs(e - r) <= eoc_tol for e, r in zip(eocs, ref_eoc))
    return err_ok and eoc_ok


def _fmt(values, spec):
    return "[" + ", ".join(format(v, spec) for v in values) + "]"


def test_criterion_1_example1_tables():
    cases = [
        (EX1_A, 5.0, [1.50e-2, 3.97e-3, 1.01e-3, 2.56e-4], [1.918, 1.968, 1.983]),
        (EX1_B, 2 / 0.7, [2.42e-3, 6.14e-4, 1.54e-4, 3.85e-5], [1.979, 1.994, 2.001]),
    ]
    ok, details = True, []
    for alphas, r, ref_err, ref_eoc in cases:
        l2, _ = _study("example1", alphas, (64, 128, 256, 512), r)
        eoc = compute_eoc(l2)
        ok &= _table_check(l2, eoc, ref_err, ref_eoc)
        details.append(f"a1={alphas[0]}: err {_fmt(l2, '.3e')} eoc {_fmt(eoc, '.3f')}")
    assert record(1, ok, "; ".join(details))


def test_criterion_2_h1_study():
    _, h1 = _study("example1", EX1_A, (64, 128, 256, 512), 5.0)
    eoc = compute_eoc(h1)
    ok = all(abs(e - r) <= 0.1 for e, r in zip(eoc, [1.078, 1.024, 1.007]))
    assert record(2, ok, f"H1 err {_fmt(h1, '.3e')} eoc {_fmt(eoc, '.3f')}")


def test_criterion_3_example2_tables():
    cases = [
        (EX2_A, 4.0, [1.37e-3, 3.56e-4, 9.05e-5, 2.28e-5], [1.943, 1.976, 1.989]),
        (EX2_B, 2 / 0.9, [1.01e-3, 2.53e-4, 6.35e-5, 1.59e-5], [1.991, 1.998, 2.000]),
    ]
    ok, details = True, []
    for alphas, r, ref_err, ref_eoc in cases:
        l2, _ = _study("example2", alphas, (16, 32, 64, 128), r)
        eoc = compute_eoc(l2)
        ok &= _table_check(l2, eoc, ref_err, ref_eoc)
        details.append(f"a1={alphas[0]}: err {_fmt(l2, '.3e')} eoc {_fmt(eoc, '.3f')}")
    assert record(3, ok, "; ".join(details))


def _acceptance_meshes():
    for alphas in (EX1_A, EX2_A):
        orders = FractionalOrders.from_lists(alphas)
        for r in (1.0, 2 / orders.alpha1):
            for N in (16, 64, 256):
                yield orders, build_graded_mesh(1.0, N, r)


@pytest.fixture(scope="module")
def acceptance_tables():
    return [(orders, mesh, build_kernel_table(orders, mesh)) for orders, mesh in _acceptance_meshes()]


def test_criterion_4_kernel_properties(acceptance_tables):
    monotone = True
    tau_bound = True
    violations = total = 0
    min_scaled = math.inf
    diag_ok = integral_ok = True
    for orders, mesh, table in acceptance_tables:
        rep = check_kernel_properties(table)
        monotone &= rep.monotone and rep.positive
        tau_bound &= rep.bound_holds
        violations += rep.bound_violations
        total += mesh.N * (mesh.N + 1) // 2
        min_scaled = min(min_scaled, rep.min_scaled_weight / rep.lower_bound)
        diag_ok &= rep.diagonal_bound_holds
        integral_ok &= rep.integral_bound_holds

    # closed-form a, b against high-precision quadrature on two meshes
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for orders, mesh, table in (acceptance_tables[4], acceptance_tables[10]):
        for _ in range(30):
            n = int(rng.integers(2, mesh.N + 1))
            j = int(rng.integers(1, n))
            alpha = float(orders.alphas[rng.integers(0, orders.m)])
            ss = table.sigma_star[n]
            for got, ref in (
                (coeff_a(mesh, n, j, alpha, ss), a_quad(mesh, n, j, alpha, ss)),
                (coeff_b(mesh, n, j, alpha, ss), b_quad(mesh, n, j, alpha, ss)),
            ):
                worst = max(worst, abs(got / ref - 1))
            checked += 1
    oracle_ok = checked >= 50 and worst <= 1e-10

    ok = monotone and tau_bound and oracle_ok
    detail = (
        f"monotone={monotone}; tau-form bound g*tau_j^a1 >= 4mu/11 for all (n,j): {tau_bound} "
        f"({violations}/{total} entries below, min ratio {min_scaled:.2e}); "
        f"diagonal form={diag_ok}; averaged-kernel form={integral_ok}; "
        f"a/b vs quadrature on {checked} entries, max rel {worst:.1e}"
    )
    assert record(4, ok, detail)


def test_criterion_5_gronwall_identity(acceptance_tables):
    worst = 0.0
    bounds_ok = True
    for orders, mesh, table in acceptance_tables:
        N = mesh.N
        diag = np.diag(table.g)
        for n in (1, N // 2, N):
            gt = build_p(table, n)
            worst = max(worst, gt.max_identity_residual())
            bounds_ok &= bool(np.all(gt.p > 0) and np.all(gt.p <= 1 / diag[1 : n + 1]))
    ok = worst <= 1e-11 and bounds_ok
    assert record(5, ok, f"max |sum p g - 1| = {worst:.2e}; 0 < p <= 1/g_ii: {bounds_ok}")


def test_criterion_6_truncation_rate():
    rates = []
    for alphas in (EX1_A, EX2_A):
        orders = FractionalOrders.from_lists(alphas)
        rows = truncation_experiment(orders, 1.0, [64, 128, 256], 2 / orders.alpha1)
        rates += [r[2] for r in rows[:-1]]
    single = truncation_experiment(FractionalOrders.from_lists([0.5]), 1.0, [64, 128, 256], 1.0)
    low = [r[2] for r in single[:-1]]
    ok = all(r >= 1.85 for r in rates) and all(0.4 <= r <= 0.6 for r in low)
    assert record(6, ok, f"graded rates {_fmt(rates, '.3f')}; r=1, alpha=0.5 rates {_fmt(low, '.3f')}")


def test_criterion_7_single_term_and_superposition():
    worst = 0.0
    for alpha in (0.3, 0.5, 0.8):
        prob = linear_problem(alpha)
        U = run(prob, 8, 8, r=1.0).U
        ref = reference_uniform(alpha, math.pi, 8, 8, prob.f, prob.u0)
        worst = max(worst, np.abs(U - ref).max() / max(1.0, np.abs(ref).max()))

    orders = FractionalOrders.from_lists([0.6, 0.45, 0.2])

    def make(u0s, fs):
        return ProblemSpec(
            domain=Rectangle(), orders=orders, a=lambda w: 1.0,
            f=lambda x, t: fs * np.exp(t) * np.sin(3 * x[:, 0]) * x[:, 1],
            u0=lambda x: u0s * np.sin(np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1]),
            m1=1.0, m2=1.0,
        )

    U1 = run(make(1.0, 0.0), 8, 8, r=2.0).U
    U2 = run(make(0.0, 1.0), 8, 8, r=2.0).U
    U3 = run(make(2.0, -3.0), 8, 8, r=2.0).U
    sup = np.abs(U3 - (2 * U1 - 3 * U2)).max() / max(1.0, np.abs(U3).max())
    ok = worst <= 1e-11 and sup <= 1e-11
    assert record(7, ok, f"vs dense reference {worst:.1e}; superposition defect {sup:.1e}")


def _zero_forcing_problem(example, alphas):
    base = manufactured_problem(example, FractionalOrders.from_lists(alphas))
    if example == "example1":
        u0 = lambda x: np.sin(x[:, 0]) + 0.3 * np.sin(3 * x[:, 0])  # noqa: E731
    else:
        u0 = lambda x: 16 * (x[:, 0] - x[:, 0] ** 2) * (x[:, 1] - x[:, 1] ** 2)  # noqa: E731
    return ProblemSpec(
        domain=base.domain, orders=base.orders, a=base.a, f=lambda x, t: np.zeros(len(x)),
        u0=u0, m1=base.m1, m2=base.m2, L=base.L,
    )


def test_criterion_8_stability():
    cases = [("example1", EX1_A, 128, 128, 1.0), ("example1", EX1_A, 512, 64, 5.0),
             ("example2", EX2_A, 64, 16, 1.0), ("example1", EX1_B, 64, 64, 2 / 0.7)]
    ok, details = True, []
    for example, alphas, N, Ms, r in cases:
        prob = _zero_forcing_problem(example, alphas)
        hist = run(prob, N, Ms, r=r)
        assert hist.stepsize.passed, f"step-size criterion must hold for this case: {hist.stepsize}"
        norms = hist.l2_norms()
        a1, mu1 = prob.orders.alpha1, prob.orders.mu1
        t = hist.tmesh.t
        bounds = np.array([2 * mittag_leffler(a1, 5.5 / mu1 * t[n] ** a1) * norms[0] for n in range(N + 1)])
        ratio = float(np.max(norms / bounds))
        ok &= ratio <= 1.0
        details.append(f"{example} a1={a1} N={N}: max ||U^n||/bound = {ratio:.3f}")
    assert record(8, ok, "; ".join(details))

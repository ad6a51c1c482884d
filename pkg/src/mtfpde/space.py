"""Piecewise-linear Galerkin finite elements on an interval or a rectangle.

Unknowns live on interior nodes only (homogeneous Dirichlet data). Callables
take points of shape ``(npts, dim)``; time-dependent ones take ``(x, t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._validation import check_points, check_scalar, check_vector
from .exceptions import ConfigurationError, NumericalFailure
from .linsolve import solve_spd


@dataclass(frozen=True)
class Interval:
    a: float = 0.0
    b: float = 1.0
    dim = 1

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigurationError(f"empty interval ({self.a}, {self.b})")

    @property
    def measure(self):
        return self.b - self.a


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    dim = 2

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigurationError("degenerate rectangle")

    @property
    def measure(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


# Quadrature rules in barycentric coordinates; weights sum to one.
_GAUSS3 = (
    np.array([[0.5 + 0.5 * math.sqrt(0.6)], [0.5], [0.5 - 0.5 * math.sqrt(0.6)]]),
    np.array([5.0, 8.0, 5.0]) / 18.0,
)
_MIDEDGE = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.full(3, 1.0 / 3.0),
)


def _dunavant5():
    s = math.sqrt(15.0)
    a1, b1 = (9 - 2 * s) / 21, (6 + s) / 21
    a2, b2 = (9 + 2 * s) / 21, (6 - s) / 21
    w1, w2 = (155 + s) / 1200, (155 - s) / 1200
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9 / 40]
    for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
        pts += [[a, b, b], [b, a, b], [b, b, a]]
        wts += [w] * 3
    return np.array(pts), np.array(wts)


_DUNAVANT5 = _dunavant5()


def _bary(rule, dim):
    """Full barycentric coordinates (nq, dim + 1) of a rule."""
    pts, wts = rule
    if dim == 1:
        return np.hstack([1.0 - pts, pts]), wts
    return pts, wts


@dataclass(frozen=True)
class SpatialMesh:
    """Structured P1 mesh; ``interior`` lists the unknown nodes in order.

    In 2D each grid cell is split along its lower-left to upper-right diagonal.
    """

    domain: object
    Ms: int
    nodes: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)
    h: float
    measures: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)  # (ne, dim+1, dim) gradients of barycentric coords

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_interior(self):
        return self.interior.size

    def to_full(self, U):
        full = np.zeros(self.nodes.shape[0])
        full[self.interior] = U
        return full


def build_spatial_mesh(domain, Ms):
    Ms = check_scalar(Ms, "Ms", lo=2, integer=True)
    if domain.dim == 1:
        x = np.linspace(domain.a, domain.b, Ms + 1)
        nodes = x[:, None]
        elements = np.column_stack([np.arange(Ms), np.arange(1, Ms + 1)])
        hx = x[1] - x[0]
        measures = np.full(Ms, (domain.b - domain.a) / Ms)
        g = np.empty((Ms, 2, 1))
        g[:, 0, 0] = -1.0 / measures
        g[:, 1, 0] = 1.0 / measures
        interior = np.arange(1, Ms)
        h = hx
    elif domain.dim == 2:
        xs = np.linspace(domain.x0, domain.x1, Ms + 1)
        ys = np.linspace(domain.y0, domain.y1, Ms + 1)
        X, Y = np.meshgrid(xs, ys)  # node k = i + j (Ms + 1)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(Ms), np.arange(Ms))
        i, j = i.ravel(), j.ravel()
        n00 = i + j * (Ms + 1)
        n10, n01, n11 = n00 + 1, n00 + Ms + 1, n00 + Ms + 2
        elements = np.vstack([np.column_stack([n00, n10, n11]), np.column_stack([n00, n11, n01])])
        P = nodes[elements]  # (ne, 3, 2)
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        measures = 0.5 * np.abs(det)
        # grad(lambda_k) = rot90(opposite edge) / det
        g = np.empty((elements.shape[0], 3, 2))
        for k in range(3):
            a, b = P[:, (k + 1) % 3], P[:, (k + 2) % 3]
            g[:, k, 0] = (a[:, 1] - b[:, 1]) / det
            g[:, k, 1] = (b[:, 0] - a[:, 0]) / det
        on_bdry = (
            np.isclose(nodes[:, 0], domain.x0)
            | np.isclose(nodes[:, 0], domain.x1)
            | np.isclose(nodes[:, 1], domain.y0)
            | np.isclose(nodes[:, 1], domain.y1)
        )
        interior = np.flatnonzero(~on_bdry)
        h = math.hypot(xs[1] - xs[0], ys[1] - ys[0])
    else:
        raise ConfigurationError(f"unsupported dimension {domain.dim}")
    for arr in (nodes, elements, interior, measures, g):
        arr.flags.writeable = False
    return SpatialMesh(domain, Ms, nodes, elements, interior, h, measures, g)


def _scatter(mesh, local):
    """Sparse matrix from per-element ``(ne, k, k)`` blocks over all nodes."""
    el = mesh.elements
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    nn = mesh.nodes.shape[0]
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(nn, nn))


def _restrict(mesh, A):
    idx = mesh.interior
    return A[idx][:, idx].tocsr()


def assemble_mass(mesh, full=False):
    k = mesh.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / ((k + 1) * k)  # 1D: [[2,1],[1,2]]/6, 2D: /12
    local = mesh.measures[:, None, None] * ref[None]
    A = _scatter(mesh, local)
    return A if full else _restrict(mesh, A)


def assemble_stiffness(mesh, full=False):
    G = mesh.grads
    local = mesh.measures[:, None, None] * np.einsum("eid,ejd->eij", G, G)
    A = _scatter(mesh, local)
    return A if full else _restrict(mesh, A)


def hat_integrals(mesh):
    """``int phi_i dx`` for interior nodes."""
    k = mesh.dim + 1
    w = np.zeros(mesh.nodes.shape[0])
    np.add.at(w, mesh.elements, np.repeat((mesh.measures / k)[:, None], k, axis=1))
    return w[mesh.interior]


def _quad_points(mesh, rule):
    lam, wts = _bary(rule, mesh.dim)
    P = mesh.nodes[mesh.elements]  # (ne, k, dim)
    X = np.einsum("qk,ekd->eqd", lam, P)
    return lam, wts, X


def _load_rule(mesh):
    return _GAUSS3 if mesh.dim == 1 else _MIDEDGE


def _norm_rule(mesh):
    return _GAUSS3 if mesh.dim == 1 else _DUNAVANT5


def load_vector(mesh, f, t=None, rule=None):
    """``(f(., t), phi_i)`` by a quadratic-exact element rule."""
    lam, wts, X = _quad_points(mesh, rule or _load_rule(mesh))
    ne, nq, dim = X.shape
    pts = X.reshape(-1, dim)
    vals = np.asarray(f(pts) if t is None else f(pts, t), dtype=float).reshape(ne, nq)
    local = mesh.measures[:, None] * np.einsum("eq,q,qk->ek", vals, wts, lam)
    b = np.zeros(mesh.nodes.shape[0])
    np.add.at(b, mesh.elements, local)
    return b[mesh.interior]


def nonlocal_l(mesh, U, weights=None):
    """``l(U_h) = int U_h dx`` (exact for P1)."""
    w = hat_integrals(mesh) if weights is None else weights
    return float(np.dot(w, U))


def interpolate(mesh, g):
    return np.asarray(g(mesh.nodes[mesh.interior]), dtype=float).reshape(-1).copy()


def ritz_projection(mesh, grad_w, stiffness=None):
    """Stiffness-orthogonal projection of ``w`` given its gradient ``grad_w(x)``."""
    lam, wts, X = _quad_points(mesh, _load_rule(mesh))
    ne, nq, dim = X.shape
    gw = np.asarray(grad_w(X.reshape(-1, dim)), dtype=float).reshape(ne, nq, dim)
    # int grad(w) . grad(phi_k) over each element; grad(phi_k) is constant
    mean_grad = np.einsum("eqd,q->ed", gw, wts)
    local = mesh.measures[:, None] * np.einsum("ed,ekd->ek", mean_grad, mesh.grads)
    b = np.zeros(mesh.nodes.shape[0])
    np.add.at(b, mesh.elements, local)
    b = b[mesh.interior]
    S = assemble_stiffness(mesh) if stiffness is None else stiffness
    R, report = solve_spd(S, b, tol=1e-13)
    resid = np.max(np.abs(S @ R - b))
    if resid > 1e-10 * max(np.max(np.abs(b)), np.finfo(float).tiny):
        raise NumericalFailure(f"Ritz projection residual {resid:.3e} too large ({report})")
    return R


def _fe_at_quad(mesh, U, lam):
    full = mesh.to_full(U)
    return full[mesh.elements] @ lam.T  # (ne, nq)


def l2_error(mesh, U, u_exact, t=None):
    U = check_vector(U, "U", mesh.n_interior)
    lam, wts, X = _quad_points(mesh, _norm_rule(mesh))
    ne, nq, dim = X.shape
    pts = X.reshape(-1, dim)
    exact = np.asarray(u_exact(pts) if t is None else u_exact(pts, t), dtype=float).reshape(ne, nq)
    diff = exact - _fe_at_quad(mesh, U, lam)
    return math.sqrt(float(np.sum(mesh.measures * (diff**2 @ wts))))


def h1_error(mesh, U, grad_exact, t=None):
    """H^1 seminorm of ``u - U_h``."""
    U = check_vector(U, "U", mesh.n_interior)
    lam, wts, X = _quad_points(mesh, _norm_rule(mesh))
    ne, nq, dim = X.shape
    pts = X.reshape(-1, dim)
    gex = np.asarray(grad_exact(pts) if t is None else grad_exact(pts, t), dtype=float)
    gex = gex.reshape(ne, nq, dim)
    full = mesh.to_full(U)
    gh = np.einsum("ek,ekd->ed", full[mesh.elements], mesh.grads)
    diff = gex - gh[:, None, :]
    return math.sqrt(float(np.sum(mesh.measures * (np.sum(diff**2, axis=2) @ wts))))


def l2_norm(mesh, U, mass=None):
    M = assemble_mass(mesh) if mass is None else mass
    return math.sqrt(max(float(U @ (M @ U)), 0.0))


def evaluate(mesh, U, points):
    """Value of the P1 function with interior coefficients ``U`` at ``points``."""
    pts = check_points(points, mesh.dim)
    full = mesh.to_full(U)
    d = mesh.domain
    if mesh.dim == 1:
        return np.interp(pts[:, 0], mesh.nodes[:, 0], full)
    Ms = mesh.Ms
    hx = (d.x1 - d.x0) / Ms
    hy = (d.y1 - d.y0) / Ms
    fx = (pts[:, 0] - d.x0) / hx
    fy = (pts[:, 1] - d.y0) / hy
    if np.any((fx < -1e-12) | (fx > Ms + 1e-12) | (fy < -1e-12) | (fy > Ms + 1e-12)):
        raise ConfigurationError("evaluation point outside the domain")
    i = np.clip(np.floor(fx).astype(int), 0, Ms - 1)
    j = np.clip(np.floor(fy).astype(int), 0, Ms - 1)
    xi, eta = fx - i, fy - j
    n00 = i + j * (Ms + 1)
    u00, u10, u01, u11 = full[n00], full[n00 + 1], full[n00 + Ms + 1], full[n00 + Ms + 2]
    lower = xi >= eta
    return np.where(
        lower,
        u00 + xi * (u10 - u00) + eta * (u11 - u10),
        u00 + xi * (u11 - u01) + eta * (u01 - u00),
    )

"""Two-level error indicators and the classical residual estimator.

All indicators live on a coarse mesh and judge a discrete solution computed
on its uniform refinement.  Integrals of discrete quantities are evaluated
with quadrature that is exact for the polynomial degrees involved; only
terms containing the load ``f`` carry quadrature error.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mesh import LineageError, RefineMode
from .quadrature import edge_rule, quadrature
from .solve import CoefficientField
from .space import (
    barycentric_coordinates,
    build_space,
    element_gradients,
    element_gradients_at,
    element_hessians,
    nodal_interpolate,
)


class EstimatorVariant(Enum):
    """Pairing of a two-level term with a data term."""

    LAMBDA_RES = "lambda-res"
    LAMBDA_OSC = "lambda-osc"
    LAMBDA_APX = "lambda-apx"
    MU_RES = "mu-res"
    MU_OSC = "mu-osc"
    MU_APX = "mu-apx"

    @property
    def base(self):
        return self.value.split("-")[0]

    @property
    def data(self):
        return self.value.split("-")[1]

    @property
    def required_mode(self):
        return RefineMode.M3P if self.data == "osc" else RefineMode.M3

    def validate(self, p, mode):
        if self.data == "apx" and p < 2:
            raise ValueError(f"{self.value} needs polynomial degree >= 2")
        if mode is not None and mode != self.required_mode:
            raise ValueError(
                f"{self.value} pairs with refinement {self.required_mode.value}"
            )


@dataclass(frozen=True)
class IndicatorVector:
    """Per-element indicator split into its two-level and data parts."""

    base: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        for part in (self.base, self.data):
            if not np.all(np.isfinite(part)) or np.any(part < 0):
                raise ValueError("indicator entries must be finite and >= 0")
        if self.base.shape != self.data.shape:
            raise ValueError("base and data parts must align")

    @property
    def squared(self):
        return self.base**2 + self.data**2

    @property
    def entries(self):
        return np.sqrt(self.squared)

    @property
    def total(self):
        return float(np.sqrt(self.squared.sum()))

    def __len__(self):
        return len(self.base)


@dataclass(frozen=True)
class EstimatorReport:
    """All six overall estimators of one two-level solve.

    ``totals[k]`` pairs the two-level part (lambda for k<3, mu otherwise)
    with the data terms res, osc, apx in turn; the apx entries are ``None``
    for first-order elements.  ``c_hh2`` is the largest observed elementwise
    ratio mu/lambda.
    """

    totals: tuple
    lam: float
    mu: float
    res: float
    osc: float
    apx: float | None
    c_hh2: float
    mu_tilde: float | None = None


def _as_field(coefficient, n=1):
    if coefficient is None:
        return CoefficientField.identity(n)
    return coefficient


def _children_of(uhat):
    """(nc, K) fine element ids per coarse element; validates the lineage."""
    fine = uhat.space.mesh
    coarse = fine.parent
    if coarse is None:
        raise LineageError("solution must live on a refined mesh")
    ntf, nc = fine.num_triangles, coarse.num_triangles
    if ntf % nc:
        raise LineageError("refinement is not uniform")
    k = ntf // nc
    parents = fine.parent_tris
    if not np.array_equal(parents, np.repeat(np.arange(nc), k)):
        order = np.argsort(parents, kind="stable")
        if not np.array_equal(parents[order], np.repeat(np.arange(nc), k)):
            raise LineageError("refinement is not uniform")
        return coarse, order.reshape(nc, k)
    return coarse, np.arange(ntf).reshape(nc, k)


def _child_quadrature(fine, blocks, order):
    """Physical points and weights of a composite rule over child blocks."""
    rule = quadrature(order)
    children = blocks.ravel()
    pts = rule.physical_points(fine.corners[children])
    w = rule.weights[None, :] * fine.areas[children][:, None]
    nc, k = blocks.shape
    nq = len(rule.weights)
    return rule, pts.reshape(nc, k * nq, 2), w.reshape(nc, k * nq)


def _project_block(pts, w, values, centers, degree):
    """Blockwise weighted least-squares polynomial fit.

    pts (n, m, 2), w (n, m), values (n, m, c): returns the fitted values at
    ``pts``.  With weights from a quadrature rule that integrates products
    of the basis exactly, this is the L2-orthogonal projection.
    """
    rel = pts - centers[:, None, :]
    cols = [np.ones(pts.shape[:2])]
    if degree >= 1:
        cols += [rel[..., 0], rel[..., 1]]
    mono = np.stack(cols, axis=-1)  # (n, m, nb)
    gram = np.einsum("nma,nmb,nm->nab", mono, mono, w)
    rhs = np.einsum("nma,nmc,nm->nac", mono, values, w)
    sol = np.linalg.solve(gram, rhs)
    return np.einsum("nma,nac->nmc", mono, sol)


def _two_level_parts(uhat, coefficient, need_mu):
    """Squared lambda (and mu) indicators per coarse element."""
    fine_space = uhat.space
    fine = fine_space.mesh
    coarse, blocks = _children_of(uhat)
    p = fine_space.p
    field = _as_field(coefficient)
    root = field.sqrt_on_elements(coarse)  # constant per coarse element

    rule, pts, w = _child_quadrature(fine, blocks, order=2)
    nc, m = w.shape
    grads = element_gradients(fine_space, uhat.coeffs, blocks.ravel(), rule.points)
    grads = grads.reshape(nc, m, 2)
    flux = np.einsum("nij,nmj->nmi", root, grads)

    centers = coarse.corners.mean(axis=1)
    proj = _project_block(pts, w, flux, centers, degree=p - 1)
    lam_sq = np.einsum("nmc,nm->n", (flux - proj) ** 2, w)

    mu_sq = None
    if need_mu:
        coarse_space = build_space(coarse, p)
        interp = nodal_interpolate(coarse_space, fine_space, uhat.coeffs)
        lam_pts = barycentric_coordinates(coarse.corners, pts)
        cgrads = element_gradients_at(
            coarse_space, interp, np.arange(nc), lam_pts
        )
        diff = np.einsum("nij,nmj->nmi", root, grads - cgrads)
        mu_sq = np.einsum("nmc,nm->n", diff**2, w)
    return np.maximum(lam_sq, 0.0), None if mu_sq is None else np.maximum(mu_sq, 0.0)


def lambda_indicators(uhat, coefficient=None):
    """Projection residual of the flux onto elementwise P^(p-1), per element."""
    lam_sq, _ = _two_level_parts(uhat, coefficient, need_mu=False)
    return np.sqrt(lam_sq)


def mu_indicators(uhat, coefficient=None):
    """Energy distance to the coarse nodal interpolant, per element."""
    _, mu_sq = _two_level_parts(uhat, coefficient, need_mu=True)
    return np.sqrt(mu_sq)


def _divergence_term(space, coeffs, elems, field):
    """div(A grad u) per element (constant; zero for p=1)."""
    if space.p == 1:
        return np.zeros(len(elems))
    H = element_hessians(space, coeffs, elems)  # (n, 3): uxx, uxy, uyy
    A = field.on_elements(space.mesh)[elems]
    return A[:, 0, 0] * H[:, 0] + 2.0 * A[:, 0, 1] * H[:, 1] + A[:, 1, 1] * H[:, 2]


def res_indicators(uhat, f, coefficient=None):
    """Volume residual over the children of each coarse element."""
    fine_space = uhat.space
    fine = fine_space.mesh
    coarse, blocks = _children_of(uhat)
    field = _as_field(coefficient)
    order = 2 * fine_space.p + 4
    rule = quadrature(order)
    children = blocks.ravel()
    pts = rule.physical_points(fine.corners[children])
    vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    vals = vals + _divergence_term(fine_space, uhat.coeffs, children, field)[:, None]
    per_child = (rule.weights[None, :] * vals**2).sum(axis=1) * fine.areas[children]
    res_sq = coarse.areas * per_child.reshape(blocks.shape).sum(axis=1)
    return np.sqrt(np.maximum(res_sq, 0.0))


def _data_oscillation(mesh, f, degree, order):
    rule = quadrature(order)
    pts = rule.physical_points(mesh.corners)  # (n, nq, 2)
    w = rule.weights[None, :] * mesh.areas[:, None]
    vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    proj = _project_block(pts, w, vals[..., None], mesh.corners.mean(axis=1), degree)
    osc_sq = mesh.areas * np.einsum("nm,nm->n", (vals - proj[..., 0]) ** 2, w)
    return np.sqrt(np.maximum(osc_sq, 0.0))


def osc_indicators(mesh, f, p):
    """Scaled oscillation of f with respect to elementwise P^(p-1)."""
    return _data_oscillation(mesh, f, degree=p - 1, order=2 * p + 4)


def apx_indicators(mesh, f, p):
    """Scaled oscillation of f with respect to elementwise P^max(p-2,0)."""
    return _data_oscillation(mesh, f, degree=max(p - 2, 0), order=2 * p + 4)


def _scalar(vec, t):
    return float(vec[t])


def lambda_indicator(t, uhat, coefficient=None):
    return _scalar(lambda_indicators(uhat, coefficient), t)


def mu_indicator(t, uhat, coefficient=None):
    return _scalar(mu_indicators(uhat, coefficient), t)


def res_indicator(t, uhat, f, coefficient=None):
    return _scalar(res_indicators(uhat, f, coefficient), t)


def osc_indicator(t, mesh, f, p):
    return _scalar(osc_indicators(mesh, f, p), t)


def apx_indicator(t, mesh, f, p):
    return _scalar(apx_indicators(mesh, f, p), t)


def eta_indicators(variant, uhat, f, coefficient=None):
    """Marking indicators: two-level part paired with one data term."""
    if not isinstance(variant, EstimatorVariant):
        variant = EstimatorVariant(variant)
    coarse, blocks = _children_of(uhat)
    mode = RefineMode.M3 if blocks.shape[1] == 4 else RefineMode.M3P
    variant.validate(uhat.space.p, mode)
    lam_sq, mu_sq = _two_level_parts(
        uhat, coefficient, need_mu=variant.base == "mu"
    )
    base = np.sqrt(mu_sq if variant.base == "mu" else lam_sq)
    p = uhat.space.p
    if variant.data == "res":
        data = res_indicators(uhat, f, coefficient)
    elif variant.data == "osc":
        data = osc_indicators(coarse, f, p)
    else:
        data = apx_indicators(coarse, f, p)
    return IndicatorVector(base=base, data=data)


def estimator_report(uhat, f, coefficient=None, mu_tilde=None):
    """All six overall estimators for one fine solution."""
    lam_sq, mu_sq = _two_level_parts(uhat, coefficient, need_mu=True)
    coarse = uhat.space.mesh.parent
    p = uhat.space.p
    res_sq = res_indicators(uhat, f, coefficient) ** 2
    osc_sq = osc_indicators(coarse, f, p) ** 2
    apx_sq = apx_indicators(coarse, f, p) ** 2 if p >= 2 else None
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.sqrt(mu_sq / lam_sq)
    c_hh2 = float(ratios[lam_sq > 0].max()) if np.any(lam_sq > 0) else float("nan")
    totals = []
    for base_sq in (lam_sq, mu_sq):
        for data_sq in (res_sq, osc_sq, apx_sq):
            totals.append(
                None if data_sq is None
                else float(np.sqrt(base_sq.sum() + data_sq.sum()))
            )
    return EstimatorReport(
        totals=tuple(totals),
        lam=float(np.sqrt(lam_sq.sum())),
        mu=float(np.sqrt(mu_sq.sum())),
        res=float(np.sqrt(res_sq.sum())),
        osc=float(np.sqrt(osc_sq.sum())),
        apx=None if apx_sq is None else float(np.sqrt(apx_sq.sum())),
        c_hh2=c_hh2,
        mu_tilde=mu_tilde,
    )


# -- classical residual estimator (reference tool) ---------------------------


@dataclass(frozen=True)
class ResidualEstimate:
    """Volume and interior-jump contributions of the residual estimator."""

    element: np.ndarray        # squared volume terms per element
    facet: np.ndarray          # squared jump terms per interior edge
    interior_edges: np.ndarray  # edge ids the facet entries refer to

    @property
    def total(self):
        return float(np.sqrt(self.element.sum() + self.facet.sum()))


def residual_estimator(u, f, coefficient=None):
    """Residual estimator of a (single-mesh) discrete solution.

    Element terms are |T| ||f + div(A grad u)||_T^2; facet terms are
    |E| ||[A grad u . n]||_E^2 over interior edges only.
    """
    space = u.space
    mesh = space.mesh
    field = _as_field(coefficient)
    elems = np.arange(mesh.num_triangles)

    rule = quadrature(2 * space.p + 4)
    pts = rule.physical_points(mesh.corners)
    vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    vals = vals + _divergence_term(space, u.coeffs, elems, field)[:, None]
    element = mesh.areas**2 * (rule.weights[None, :] * vals**2).sum(axis=1)

    interior = np.flatnonzero(mesh.edge_tris[:, 1] >= 0)
    left, right = mesh.edge_tris[interior, 0], mesh.edge_tris[interior, 1]
    a = mesh.vertices[mesh.edges[interior, 0]]
    b = mesh.vertices[mesh.edges[interior, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    normal = np.stack([b[:, 1] - a[:, 1], a[:, 0] - b[:, 0]], axis=1) / lengths[:, None]

    t, w = edge_rule(1 if space.p == 1 else 2)
    epts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    A = field.on_elements(mesh)
    jump = None
    for side in (left, right):
        lam = barycentric_coordinates(mesh.corners[side], epts)
        grads = element_gradients_at(space, u.coeffs, side, lam)
        fluxn = np.einsum("nij,nqj,ni->nq", A[side], grads, normal)
        jump = fluxn if jump is None else jump - fluxn
    facet = lengths**2 * (w[None, :] * jump**2).sum(axis=1)
    return ResidualEstimate(element=element, facet=facet, interior_edges=interior)

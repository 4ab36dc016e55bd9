"""Continuous P1/P2 Lagrange spaces on triangle meshes.

Degrees of freedom sit at vertices (p=1) or at vertices and edge midpoints
(p=2); dof ids reuse vertex ids, with edge-midpoint dofs appended in the
mesh's edge order.  All evaluation helpers are vectorized over elements and
work in barycentric coordinates.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import LineageError, ancestor_map
from .quadrature import quadrature


@dataclass
class FeSpace:
    mesh: object
    p: int
    element_dofs: np.ndarray  # (nt, 3) for p=1, (nt, 6) for p=2
    dof_coords: np.ndarray    # (ndof, 2)
    boundary_dofs: np.ndarray  # (ndof,) bool

    @property
    def ndof(self):
        return len(self.dof_coords)


def build_space(mesh, p):
    if p == 1:
        return FeSpace(
            mesh=mesh,
            p=1,
            element_dofs=mesh.triangles,
            dof_coords=mesh.vertices,
            boundary_dofs=mesh.boundary_vertices,
        )
    if p == 2:
        nv = mesh.num_vertices
        eldofs = np.hstack([mesh.triangles, nv + mesh.tri_edges])
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        coords = np.vstack([mesh.vertices, mids])
        bnd = np.concatenate([mesh.boundary_vertices, mesh.boundary_edges])
        return FeSpace(mesh=mesh, p=2, element_dofs=eldofs,
                       dof_coords=coords, boundary_dofs=bnd)
    raise ValueError(f"unsupported polynomial degree p={p}")


# -- barycentric basis tables ----------------------------------------------


def basis_values(p, lam):
    """Shape functions at barycentric points ``lam`` (nq, 3) -> (nq, nloc)."""
    lam = np.asarray(lam, dtype=float)
    if p == 1:
        return lam.copy()
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
         4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def basis_bary_grads(p, lam):
    """d(phi_i)/d(lambda_j) at points: (nq, nloc, 3)."""
    lam = np.asarray(lam, dtype=float)
    nq = lam.shape[0]
    if p == 1:
        return np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
    out = np.zeros((nq, 6, 3))
    for i in range(3):
        out[:, i, i] = 4 * lam[:, i] - 1
    pairs = [(0, 1), (1, 2), (2, 0)]
    for k, (a, b) in enumerate(pairs):
        out[:, 3 + k, a] = 4 * lam[:, b]
        out[:, 3 + k, b] = 4 * lam[:, a]
    return out


# second derivatives wrt barycentric coordinates (constant): (nloc, 3, 3)
_P2_D2 = np.zeros((6, 3, 3))
for _i in range(3):
    _P2_D2[_i, _i, _i] = 4.0
for _k, (_a, _b) in enumerate([(0, 1), (1, 2), (2, 0)]):
    _P2_D2[3 + _k, _a, _b] = 4.0
    _P2_D2[3 + _k, _b, _a] = 4.0


def lambda_gradients(mesh, elems=None):
    """Gradients of the barycentric coordinates, shape (n, 3, 2)."""
    corners = mesh.corners if elems is None else mesh.corners[elems]
    areas = mesh.signed_areas if elems is None else mesh.signed_areas[elems]
    p0, p1, p2 = corners[:, 0], corners[:, 1], corners[:, 2]
    g = np.empty(corners.shape)
    g[:, 0, 0] = p1[:, 1] - p2[:, 1]
    g[:, 0, 1] = p2[:, 0] - p1[:, 0]
    g[:, 1, 0] = p2[:, 1] - p0[:, 1]
    g[:, 1, 1] = p0[:, 0] - p2[:, 0]
    g[:, 2, 0] = p0[:, 1] - p1[:, 1]
    g[:, 2, 1] = p1[:, 0] - p0[:, 0]
    return g / (2.0 * areas)[:, None, None]


def element_values(space, coeffs, elems, lam):
    """Function values at barycentric points per element: (n, nq)."""
    phi = basis_values(space.p, lam)         # (nq, nloc)
    u_loc = coeffs[space.element_dofs[elems]]  # (n, nloc)
    return np.einsum("ql,nl->nq", phi, u_loc)


def element_gradients(space, coeffs, elems, lam):
    """Function gradients at barycentric points per element: (n, nq, 2)."""
    dlam = lambda_gradients(space.mesh, elems)        # (n, 3, 2)
    dphi = basis_bary_grads(space.p, lam)             # (nq, nloc, 3)
    u_loc = coeffs[space.element_dofs[elems]]         # (n, nloc)
    return np.einsum("nl,qlb,nbd->nqd", u_loc, dphi, dlam)


def element_gradients_at(space, coeffs, elems, lam):
    """Like :func:`element_gradients` with per-element points ``lam`` (n, nq, 3)."""
    dlam = lambda_gradients(space.mesh, elems)
    n, nq = lam.shape[:2]
    dphi = basis_bary_grads(space.p, lam.reshape(-1, 3)).reshape(n, nq, -1, 3)
    u_loc = coeffs[space.element_dofs[elems]]
    return np.einsum("nl,nqlb,nbd->nqd", u_loc, dphi, dlam)


def element_hessians(space, coeffs, elems):
    """Constant Hessian per element for p=2: returns (n, 3) = (uxx, uxy, uyy)."""
    if space.p != 2:
        n = len(np.atleast_1d(elems))
        return np.zeros((n, 3))
    dlam = lambda_gradients(space.mesh, elems)  # (n, 3, 2)
    u_loc = coeffs[space.element_dofs[elems]]   # (n, 6)
    # H = sum_l u_l sum_{ab} D2[l,a,b] dlam_a (x) dlam_b
    H = np.einsum("nl,lab,nad,nbe->nde", u_loc, _P2_D2, dlam, dlam)
    return np.stack([H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]], axis=1)


def barycentric_coordinates(corners, points):
    """Barycentric coordinates of ``points`` (n, k, 2) wrt triangles (n, 3, 2)."""
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    rel = points - corners[:, None, 0]
    l1 = (rel[..., 0] * d2[:, None, 1] - rel[..., 1] * d2[:, None, 0]) / det[:, None]
    l2 = (d1[:, None, 0] * rel[..., 1] - d1[:, None, 1] * rel[..., 0]) / det[:, None]
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


# -- element polynomials ----------------------------------------------------


@dataclass
class ElementPoly:
    """Polynomial on one triangle in centered monomials 1, x-cx, y-cy, ...."""

    center: np.ndarray
    degree: int
    coeffs: np.ndarray

    def __call__(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        mono = monomials(pts - self.center, self.degree)
        return mono @ self.coeffs


def monomials(rel, degree):
    """Centered monomial basis values: (n, ncoef) for degree 0, 1 or 2."""
    n = len(rel)
    cols = [np.ones(n)]
    if degree >= 1:
        cols += [rel[:, 0], rel[:, 1]]
    if degree >= 2:
        cols += [rel[:, 0] ** 2, rel[:, 0] * rel[:, 1], rel[:, 1] ** 2]
    if degree > 2:
        raise ValueError("monomial basis implemented up to degree 2")
    return np.column_stack(cols)


def project_scalar(mesh, t, f, degree, order=6):
    """L2-project ``f`` onto polynomials of ``degree`` on element ``t``.

    The projection is computed in the quadrature inner product of the given
    order, which makes it exact whenever f is a polynomial the rule
    integrates exactly.
    """
    tri = mesh.corners[t]
    area = mesh.areas[t]
    rule = quadrature(order)
    pts = rule.physical_points(tri)
    center = tri.mean(axis=0)
    mono = monomials(pts - center, degree)
    w = rule.weights * area
    gram = (mono * w[:, None]).T @ mono
    rhs = (mono * w[:, None]).T @ np.asarray(f(pts), dtype=float)
    return ElementPoly(center=center, degree=degree, coeffs=np.linalg.solve(gram, rhs))


def project_gradient(coarse_mesh, t, fine_space, coeffs, degree):
    """Componentwise L2(T) projection of a refined function's gradient.

    ``fine_space`` must live on a refinement of ``coarse_mesh``; the gradient
    of the discrete function is piecewise polynomial on the descendants of
    element ``t`` and is projected exactly onto P_degree(T).  Returns one
    :class:`ElementPoly` per component.
    """
    anc = ancestor_map(coarse_mesh, fine_space.mesh)
    children = np.flatnonzero(anc == t)
    order = max(2 * degree, degree + fine_space.p - 1)
    rule = quadrature(order)
    pts = rule.physical_points(fine_space.mesh.corners[children])  # (k, nq, 2)
    grads = element_gradients(fine_space, coeffs, children, rule.points)
    center = coarse_mesh.corners[t].mean(axis=0)
    mono = monomials((pts - center).reshape(-1, 2), degree)
    w = (rule.weights[None, :] * fine_space.mesh.areas[children][:, None]).ravel()
    gram = (mono * w[:, None]).T @ mono
    rhs = (mono * w[:, None]).T @ grads.reshape(-1, 2)
    sol = np.linalg.solve(gram, rhs)
    return (
        ElementPoly(center=center, degree=degree, coeffs=sol[:, 0]),
        ElementPoly(center=center, degree=degree, coeffs=sol[:, 1]),
    )


# -- interpolation and prolongation -----------------------------------------


def _edge_midpoint_dofs(coarse_space, fine_mesh):
    """Fine dof ids carrying the values at the coarse edge midpoints (p=2)."""
    coarse = coarse_space.mesh
    midv = fine_mesh.parent_edge_midpoint
    out = np.empty(len(coarse.edges), dtype=np.int64)
    split = midv >= 0
    out[split] = midv[split]  # midpoint became a fine vertex; dof id = vertex id
    if not split.all():
        # surviving coarse edges are fine edges; locate them by vertex pair
        keys_f = fine_mesh.edges[:, 0] * fine_mesh.num_vertices + fine_mesh.edges[:, 1]
        pairs = coarse.edges[~split]
        keys_c = pairs[:, 0] * fine_mesh.num_vertices + pairs[:, 1]
        pos = np.searchsorted(keys_f, keys_c)
        if np.any(pos >= len(keys_f)) or np.any(keys_f[pos] != keys_c):
            raise LineageError("coarse edge missing from fine mesh")
        out[~split] = fine_mesh.num_vertices + pos
    return out


def nodal_interpolate(coarse_space, fine_space, coeffs):
    """Interpolate a refined discrete function at the coarse Lagrange nodes.

    Every Lagrange node of the coarse space is also a Lagrange node of any
    refinement (vertices persist; an edge midpoint either became a vertex or
    is still an edge midpoint), so interpolation can be chained one
    generation at a time and stays exact.
    """
    if fine_space.p != coarse_space.p:
        raise ValueError("spaces must share the polynomial degree")
    if fine_space.mesh is coarse_space.mesh:
        return coeffs.copy()
    chain = [fine_space.mesh]
    while chain[-1] is not coarse_space.mesh:
        if chain[-1].parent is None:
            raise LineageError("fine mesh does not descend from coarse mesh")
        chain.append(chain[-1].parent)
    values = np.asarray(coeffs, dtype=float)
    for fine_mesh, coarse_mesh in zip(chain[:-1], chain[1:]):
        cs = build_space(coarse_mesh, coarse_space.p)
        if coarse_space.p == 1:
            values = values[: coarse_mesh.num_vertices]
        else:
            vert = values[: coarse_mesh.num_vertices]
            mid = values[_edge_midpoint_dofs(cs, fine_mesh)]
            values = np.concatenate([vert, mid])
    return values


def prolongate(coarse_space, fine_space, coeffs):
    """Represent a coarse discrete function exactly in a one-step refinement."""
    fine = fine_space.mesh
    if fine.parent is not coarse_space.mesh:
        raise LineageError("prolongation expects a direct refinement")
    # locate an incident fine element for every fine dof
    nloc = fine_space.element_dofs.shape[1]
    owner = np.empty(fine_space.ndof, dtype=np.int64)
    for k in range(nloc):
        owner[fine_space.element_dofs[:, k]] = np.arange(fine.num_triangles)
    parent = fine.parent_tris[owner]
    corners = coarse_space.mesh.corners[parent]
    lam = barycentric_coordinates(corners, fine_space.dof_coords[:, None, :])[:, 0]
    phi = basis_values(coarse_space.p, lam)  # (ndof_f, nloc)
    u_loc = coeffs[coarse_space.element_dofs[parent]]
    return (phi * u_loc).sum(axis=1)

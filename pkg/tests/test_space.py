import numpy as np
import pytest

from hh2fem.mesh import (
    LineageError,
    Mesh,
    initial_lshape,
    refine,
    uniform_refine,
)
from hh2fem.quadrature import quadrature
from hh2fem.space import (
    ElementPoly,
    barycentric_coordinates,
    basis_values,
    build_space,
    element_gradients,
    element_hessians,
    element_values,
    monomials,
    nodal_interpolate,
    project_gradient,
    project_scalar,
    prolongate,
)


def test_dof_counts_initial_mesh():
    m = initial_lshape()
    s1 = build_space(m, 1)
    assert s1.ndof == 11
    assert s1.boundary_dofs.sum() == 8
    s2 = build_space(m, 2)
    # Euler: edges = vertices + elements - 1 = 22 on this simply connected mesh
    assert s2.ndof == 11 + 22
    assert s2.boundary_dofs.sum() == 16


def test_build_space_rejects_p3():
    with pytest.raises(ValueError):
        build_space(initial_lshape(), 3)


def test_basis_partition_of_unity_and_lagrange_property():
    rng = np.random.default_rng(1)
    lam = rng.dirichlet([1, 1, 1], size=20)
    for p in (1, 2):
        vals = basis_values(p, lam)
        np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-13)
    nodes = np.array(
        [[1, 0, 0], [0, 1, 0], [0, 0, 1],
         [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]]
    )
    np.testing.assert_allclose(basis_values(2, nodes), np.eye(6), atol=1e-14)


def test_element_values_and_gradients_reproduce_polynomials():
    mesh = uniform_refine(initial_lshape())
    rng = np.random.default_rng(3)
    lam = rng.dirichlet([1, 1, 1], size=5)
    elems = np.arange(mesh.num_triangles)
    for p, fun, grad in [
        (1, lambda x: 2 * x[:, 0] - x[:, 1] + 0.5, lambda x: np.array([2.0, -1.0])),
        (2, lambda x: x[:, 0] ** 2 - 3 * x[:, 0] * x[:, 1],
         lambda x: np.stack([2 * x[:, 0] - 3 * x[:, 1], -3 * x[:, 0]], axis=-1)),
    ]:
        s = build_space(mesh, p)
        coeffs = fun(s.dof_coords)
        pts = np.einsum("qi,nid->nqd", lam, mesh.corners)
        vals = element_values(s, coeffs, elems, lam)
        np.testing.assert_allclose(vals, fun(pts.reshape(-1, 2)).reshape(vals.shape), atol=1e-12)
        grads = element_gradients(s, coeffs, elems, lam)
        expected = grad(pts.reshape(-1, 2))
        expected = np.broadcast_to(expected, grads.reshape(-1, 2).shape)
        np.testing.assert_allclose(grads.reshape(-1, 2), expected, atol=1e-12)


def test_element_hessians():
    mesh = initial_lshape()
    s = build_space(mesh, 2)
    coeffs = 3 * s.dof_coords[:, 0] ** 2 + s.dof_coords[:, 0] * s.dof_coords[:, 1]
    H = element_hessians(s, coeffs, np.arange(mesh.num_triangles))
    np.testing.assert_allclose(H, np.tile([6.0, 1.0, 0.0], (12, 1)), atol=1e-12)


def test_barycentric_coordinates_roundtrip():
    mesh = initial_lshape()
    rng = np.random.default_rng(5)
    lam = rng.dirichlet([1, 1, 1], size=(12, 4))
    pts = np.einsum("nqi,nid->nqd", lam, mesh.corners)
    back = barycentric_coordinates(mesh.corners, pts)
    np.testing.assert_allclose(back, lam, atol=1e-13)


# -- projections ------------------------------------------------------------


def test_project_scalar_constant_oracle():
    # mean of f(x, y) = x over the unit right triangle is 1/3
    m = Mesh.from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    poly = project_scalar(m, 0, lambda x: x[:, 0], degree=0)
    assert poly.coeffs == pytest.approx([1.0 / 3.0], rel=1e-14)


def test_project_scalar_idempotent_on_polynomials():
    m = refine(initial_lshape(), [3])
    rng = np.random.default_rng(11)
    for degree in (0, 1, 2):
        c = rng.standard_normal(6)

        def f(x, c=c, degree=degree):
            mono = monomials(x - 0.25, 2)
            keep = {0: 1, 1: 3, 2: 6}[degree]
            return mono[:, :keep] @ c[:keep]

        for t in (0, 7):
            poly = project_scalar(m, t, f, degree=degree)
            probe = m.corners[t].mean(axis=0) + rng.standard_normal((10, 2)) * 0.05
            np.testing.assert_allclose(poly(probe), f(probe), rtol=1e-10, atol=1e-12)


def test_project_scalar_orthogonality_and_best_approximation():
    m = initial_lshape()
    t = 5
    area = m.areas[t]
    rule = quadrature(8)
    pts = rule.physical_points(m.corners[t])
    f = lambda x: np.exp(x[:, 0] - 0.3 * x[:, 1])
    fvals = f(pts)
    rng = np.random.default_rng(2)
    for degree in (0, 1):
        poly = project_scalar(m, t, f, degree=degree, order=8)
        resid = fvals - poly(pts)
        center = m.corners[t].mean(axis=0)
        mono = monomials(pts - center, degree)
        # quadrature-inner-product orthogonality of the residual
        orth = np.abs((mono * (rule.weights * area)[:, None]).T @ resid)
        assert orth.max() < 1e-10 * max(1.0, np.abs(fvals).max())
        err2 = rule.integrate(resid**2, area)
        for _ in range(20):
            q = mono @ rng.standard_normal(mono.shape[1])
            other = rule.integrate((fvals - q) ** 2, area)
            assert err2 <= other * (1 + 1e-12)


def test_project_gradient_matches_per_component_projection():
    coarse = initial_lshape()
    fine = uniform_refine(coarse)
    s = build_space(fine, 2)
    rng = np.random.default_rng(4)
    coeffs = rng.standard_normal(s.ndof)
    gx, gy = project_gradient(coarse, 2, s, coeffs, degree=1)
    # orthogonality: residual of the projection is L2(T)-orthogonal to P1
    rule = quadrature(4)
    children = np.flatnonzero(fine.parent_tris == 2)
    pts = rule.physical_points(fine.corners[children])
    grads = element_gradients(s, coeffs, children, rule.points)
    w = rule.weights[None, :] * fine.areas[children][:, None]
    center = coarse.corners[2].mean(axis=0)
    mono = monomials((pts - center).reshape(-1, 2), 1)
    for comp, poly in enumerate((gx, gy)):
        resid = grads[..., comp].ravel() - poly(pts.reshape(-1, 2))
        orth = np.abs((mono * w.ravel()[:, None]).T @ resid)
        assert orth.max() < 1e-10


def test_project_gradient_reproduces_coarse_polynomial_gradient():
    coarse = initial_lshape()
    fine = uniform_refine(coarse)
    s = build_space(fine, 2)
    coeffs = s.dof_coords[:, 0] ** 2 + 2 * s.dof_coords[:, 1]
    gx, gy = project_gradient(coarse, 8, s, coeffs, degree=1)
    probe = coarse.corners[8].mean(axis=0)[None, :] + 0.01
    np.testing.assert_allclose(gx(probe), 2 * probe[:, 0], rtol=1e-12)
    np.testing.assert_allclose(gy(probe), [2.0], rtol=1e-12)


def test_element_poly_eval():
    poly = ElementPoly(center=np.array([1.0, 2.0]), degree=1, coeffs=np.array([3.0, 1.0, -1.0]))
    val = poly(np.array([[2.0, 2.5]]))
    assert val == pytest.approx([3.0 + 1.0 * 1.0 - 1.0 * 0.5])


# -- interpolation / prolongation -------------------------------------------


@pytest.mark.parametrize("p", [1, 2])
def test_prolongation_is_exact(p):
    coarse_mesh = uniform_refine(initial_lshape())
    fine_mesh = refine(coarse_mesh, [0, 5, 17])
    cs, fs = build_space(coarse_mesh, p), build_space(fine_mesh, p)
    rng = np.random.default_rng(6)
    coeffs = rng.standard_normal(cs.ndof)
    fine_coeffs = prolongate(cs, fs, coeffs)
    lam = rng.dirichlet([1, 1, 1], size=4)
    anc = fine_mesh.parent_tris
    pts = np.einsum("qi,nid->nqd", lam, fine_mesh.corners)
    fine_vals = element_values(fs, fine_coeffs, np.arange(fine_mesh.num_triangles), lam)
    bary = barycentric_coordinates(coarse_mesh.corners[anc], pts)
    coarse_vals = np.einsum(
        "nql,nl->nq", basis_values(p, bary.reshape(-1, 3)).reshape(*bary.shape[:2], -1),
        coeffs[cs.element_dofs[anc]],
    )
    np.testing.assert_allclose(fine_vals, coarse_vals, atol=1e-11)


@pytest.mark.parametrize("p", [1, 2])
def test_nodal_interpolate_recovers_coarse_function(p):
    coarse_mesh = uniform_refine(initial_lshape())
    fine_mesh = uniform_refine(refine(coarse_mesh, [1, 2, 30]))
    cs = build_space(coarse_mesh, p)
    ms = build_space(fine_mesh.parent, p)
    fs = build_space(fine_mesh, p)
    rng = np.random.default_rng(8)
    coeffs = rng.standard_normal(cs.ndof)
    fine_coeffs = prolongate(ms, fs, prolongate(cs, ms, coeffs))
    back = nodal_interpolate(cs, fs, fine_coeffs)
    np.testing.assert_allclose(back, coeffs, atol=1e-12)


def test_nodal_interpolate_matches_point_values(p=2):
    coarse_mesh = initial_lshape()
    fine_mesh = uniform_refine(uniform_refine(coarse_mesh))
    cs, fs = build_space(coarse_mesh, p), build_space(fine_mesh, p)
    f = lambda x: np.sin(x[:, 0]) * np.cosh(x[:, 1])
    fine_coeffs = f(fs.dof_coords)
    vals = nodal_interpolate(cs, fs, fine_coeffs)
    np.testing.assert_allclose(vals, f(cs.dof_coords), atol=1e-13)


def test_nodal_interpolate_identity_and_errors():
    m = initial_lshape()
    s = build_space(m, 1)
    coeffs = np.arange(s.ndof, dtype=float)
    np.testing.assert_array_equal(nodal_interpolate(s, s, coeffs), coeffs)
    other = build_space(initial_lshape(), 1)
    with pytest.raises(LineageError):
        nodal_interpolate(s, other, coeffs)
    s2 = build_space(uniform_refine(m), 2)
    with pytest.raises(ValueError):
        nodal_interpolate(s, s2, np.zeros(s2.ndof))

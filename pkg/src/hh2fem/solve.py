"""Assembly and linear solves for -div(A grad u) = f with Dirichlet data.

The diffusion tensor A is constant on each element of the initial mesh and
inherited through refinement.  Assembled stiffness matrices are kept in full
(unconstrained) form; Dirichlet conditions are attached separately and
eliminated symmetrically inside the solver, so that energy norms can always
be evaluated with the untouched matrix.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import quadrature
from .space import basis_values, element_gradients, lambda_gradients


class SolverError(RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric positive definite 2x2 tensor per generation-0 element."""

    tensors: np.ndarray  # (nregions, 2, 2)

    def __post_init__(self):
        t = np.asarray(self.tensors, dtype=float)
        if t.ndim != 3 or t.shape[1:] != (2, 2):
            raise ValueError("coefficient tensors must have shape (n, 2, 2)")
        if not np.allclose(t, np.swapaxes(t, 1, 2), rtol=0, atol=1e-14):
            raise ValueError("coefficient tensors must be symmetric")
        if np.any(np.linalg.eigvalsh(t)[:, 0] <= 0):
            raise ValueError("coefficient tensors must be positive definite")
        object.__setattr__(self, "tensors", t)

    @classmethod
    def identity(cls, nregions):
        return cls(np.broadcast_to(np.eye(2), (nregions, 2, 2)).copy())

    def _region_index(self, mesh):
        if len(self.tensors) == 1:
            return np.zeros(mesh.num_triangles, dtype=np.int64)
        if mesh.region.max(initial=-1) >= len(self.tensors):
            raise ValueError("mesh region id exceeds the number of tensors")
        return mesh.region

    def on_elements(self, mesh):
        """Tensor per element; a single tensor is treated as constant."""
        return self.tensors[self._region_index(mesh)]

    def sqrt_on_elements(self, mesh):
        """Symmetric square roots A^(1/2), one per element."""
        w, v = np.linalg.eigh(self.tensors)
        roots = np.einsum("nij,nj,nkj->nik", v, np.sqrt(w), v)
        return roots[self._region_index(mesh)]


@dataclass
class SparseSystem:
    """Assembled system; ``matrix`` is the full stiffness without constraints."""

    space: object
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_mask: "np.ndarray | None" = None
    dirichlet_values: "np.ndarray | None" = None


@dataclass
class DiscreteSolution:
    space: object
    coeffs: np.ndarray
    method: str = ""
    iterations: int = 0
    residual: float = 0.0


def assemble(space, f=None, coefficient=None, f_order=None):
    """Assemble stiffness matrix and load vector.

    f : vectorized callable (n, 2) -> (n,), or None for a zero load.
    coefficient : CoefficientField, or None for the identity tensor.
    f_order : quadrature order for the load; defaults to 2p + 4.
    """
    mesh = space.mesh
    p = space.p
    if coefficient is None:
        coefficient = CoefficientField.identity(int(mesh.region.max()) + 1)
    A = coefficient.on_elements(mesh)
    dlam = lambda_gradients(mesh)
    areas = mesh.areas

    if p == 1:
        local = np.einsum("nid,nde,nje->nij", dlam, A, dlam) * areas[:, None, None]
    else:
        rule = quadrature(2)
        from .space import basis_bary_grads

        dphi = basis_bary_grads(2, rule.points)            # (nq, 6, 3)
        grads = np.einsum("qlb,nbd->nqld", dphi, dlam)     # (nt, nq, 6, 2)
        local = np.einsum(
            "q,nqid,nde,nqje->nij", rule.weights, grads, A, grads
        ) * areas[:, None, None]
    local = 0.5 * (local + np.swapaxes(local, 1, 2))

    eldofs = space.element_dofs
    nloc = eldofs.shape[1]
    rows = np.repeat(eldofs, nloc, axis=1).ravel()
    cols = np.tile(eldofs, (1, nloc)).ravel()
    matrix = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.ndof, space.ndof)
    ).tocsr()

    rhs = np.zeros(space.ndof)
    if f is not None:
        rule = quadrature(f_order if f_order is not None else 2 * p + 4)
        pts = rule.physical_points(mesh.corners)           # (nt, nq, 2)
        fvals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
        phi = basis_values(p, rule.points)                 # (nq, nloc)
        cell = np.einsum("q,nq,ql->nl", rule.weights, fvals, phi) * areas[:, None]
        np.add.at(rhs, eldofs.ravel(), cell.ravel())
    return SparseSystem(space=space, matrix=matrix, rhs=rhs)


def apply_dirichlet(system, g):
    """Attach Dirichlet data on the boundary dofs (nodal interpolation of g).

    ``g`` may be a vectorized callable, a scalar, or a full dof array; the
    returned system shares the assembled matrix with the input.
    """
    space = system.space
    mask = space.boundary_dofs.copy()
    values = np.zeros(space.ndof)
    if callable(g):
        values[mask] = np.asarray(g(space.dof_coords[mask]), dtype=float)
    else:
        g = np.asarray(g, dtype=float)
        if g.ndim != 0 and g.shape != (space.ndof,):
            raise ValueError("dirichlet array must cover every dof")
        values[mask] = g if g.ndim == 0 else g[mask]
    return replace(system, dirichlet_mask=mask, dirichlet_values=values)


_DENSE_MAX = 2000
_SPARSE_LU_MAX = 250_000


def _solve_free(K, b, method, ndof_total):
    n = K.shape[0]
    if method == "auto":
        if n <= _DENSE_MAX:
            method = "dense"
        elif n <= _SPARSE_LU_MAX:
            method = "sparse-lu"
        else:
            method = "amg"
    if method == "dense":
        c, low = scipy.linalg.cho_factor(K.toarray())
        return scipy.linalg.cho_solve((c, low), b), method, 1
    if method == "sparse-lu":
        lu = spla.splu(K.tocsc())
        x = lu.solve(b)
        x += lu.solve(b - K @ x)  # one refinement step keeps the residual tiny
        return x, method, 2
    if method == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(K, max_coarse=500)
        residuals = []
        x = ml.solve(b, tol=1e-12, accel="cg", maxiter=400, residuals=residuals)
        return x, method, len(residuals)
    if method == "pcg":
        diag = K.diagonal()
        M = sp.diags(1.0 / diag)
        maxiter = int(20 * math.sqrt(max(ndof_total, 1))) + 1
        iters = 0

        def count(_):
            nonlocal iters
            iters += 1

        x, info = spla.cg(K, b, rtol=1e-11, atol=0.0, maxiter=maxiter, M=M,
                          callback=count)
        if info != 0:
            raise SolverError(
                f"pcg did not converge within {iters} iterations", iterations=iters
            )
        return x, method, iters
    raise ValueError(f"unknown solver method {method!r}")


def solve_system(system, method="auto"):
    """Solve the constrained system; deterministic for identical inputs.

    Eliminates Dirichlet dofs symmetrically, solves the reduced SPD system
    (dense Cholesky for small problems, sparse LU with a refinement step in
    the mid range, AMG-preconditioned CG for large ones; plain diagonally
    preconditioned CG on request) and verifies that the relative residual of
    the reduced system is below 1e-10.
    """
    space = system.space
    if system.dirichlet_mask is None:
        raise SolverError("system has no Dirichlet data attached")
    fixed = system.dirichlet_mask
    free = ~fixed
    K = system.matrix
    x = system.dirichlet_values.copy()
    b = system.rhs[free] - K[free][:, fixed] @ x[fixed]
    Kff = K[free][:, free]
    if b.size:
        sol, used, iters = _solve_free(Kff.tocsr(), b, method, space.ndof)
        x[free] = sol
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(Kff @ sol - b) / (bnorm if bnorm > 0 else 1.0)
        if not np.isfinite(res) or res > 1e-10:
            raise SolverError(
                f"solver residual {res:.3e} above tolerance", iterations=iters
            )
    else:
        used, iters, res = "none", 0, 0.0
    return DiscreteSolution(
        space=space, coeffs=x, method=used, iterations=iters, residual=float(res)
    )


def energy_norm(system, coeffs):
    """Energy norm sqrt(c^T K c) with the full (unconstrained) matrix."""
    c = np.asarray(coeffs, dtype=float)
    return math.sqrt(max(float(c @ (system.matrix @ c)), 0.0))


def energy_norm_by_quadrature(space, coeffs, coefficient=None):
    """Independent energy norm via elementwise quadrature (test oracle)."""
    mesh = space.mesh
    if coefficient is None:
        coefficient = CoefficientField.identity(int(mesh.region.max()) + 1)
    A = coefficient.on_elements(mesh)
    rule = quadrature(2 * (space.p - 1))
    elems = np.arange(mesh.num_triangles)
    grads = element_gradients(space, coeffs, elems, rule.points)  # (nt, nq, 2)
    dens = np.einsum("nqd,nde,nqe->nq", grads, A, grads)
    return math.sqrt(max(float(rule.integrate(dens, mesh.areas).sum()), 0.0))

"""Inverse potential benchmark: identify c in -Laplace(u) + c u = f.

Piecewise linear finite elements on uniform meshes of [-1, 1] (1-D) and
[-1, 1]^2 (2-D) with homogeneous Neumann boundary (natural, no row
modification).  The coefficient-to-solution map, its derivative and its
adjoint are discretized consistently so that the adjoint identity
<F'(c) q, w> = <q, F'(c)* w> holds to round-off in the plain Euclidean
inner product on nodal vectors.

Weighted mass terms integrate the piecewise linear interpolant of the
coefficient exactly in 1-D and by the three-point edge-midpoint rule on
triangles in 2-D; both choices keep the matrices symmetric and preserve
the exactly checkable constant solution u == 1 for c == 1, f == 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .numkernel import Vec, DIRECT_LIMIT, CG_TOL, norm
from .operator import ForwardOperator

# Assembly rejects coefficients dipping below this nodal floor.  Small
# negative excursions keep the operator positive definite (the stiffness
# part dominates locally), so iterates that briefly undershoot zero are
# tolerated; uniformly negative fields are rejected.
ADMISSIBILITY_FLOOR = -0.5


class MeshError(ValueError):
    pass


class AdmissibilityError(ValueError):
    """Coefficient field outside the admissible set (negative nodal values)."""


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of [-1, 1]^dim with lexicographic node ordering.

    1-D: N elements, N + 1 nodes.  2-D: N x N cells on a (N+1)^2 tensor
    lattice (x index fastest), each cell split into two triangles along
    the same diagonal.
    """

    dim: int
    N: int
    nodes: np.ndarray            # (n,) in 1-D, (n, 2) in 2-D
    elements: np.ndarray         # (num_elems, 2) segments or (num_elems, 3) triangles

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def h(self) -> float:
        """Uniform grid spacing."""
        return 2.0 / self.N


def make_mesh(dim: int, N: int) -> Mesh:
    if dim not in (1, 2):
        raise MeshError(f"dimension must be 1 or 2, got {dim}")
    if N < 2:
        raise MeshError(f"need N >= 2, got {N}")
    if dim == 1:
        nodes = np.linspace(-1.0, 1.0, N + 1)
        elems = np.column_stack([np.arange(N), np.arange(1, N + 1)])
        return Mesh(1, N, nodes, elems)

    coords_1d = np.linspace(-1.0, 1.0, N + 1)
    X, Y = np.meshgrid(coords_1d, coords_1d, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    ll = (j * (N + 1) + i).ravel()
    lr = ll + 1
    ul = ll + (N + 1)
    ur = ul + 1
    # Both triangles of every cell use the lower-left -> upper-right diagonal.
    tris = np.vstack([
        np.column_stack([ll, lr, ur]),
        np.column_stack([ll, ur, ul]),
    ])
    return Mesh(2, N, nodes, tris)


def true_coefficient(mesh: Mesh) -> Vec:
    """Nodal interpolation of the benchmark's exact coefficient."""
    if mesh.dim == 1:
        return 1.0 - np.cos(np.pi * mesh.nodes)
    x1, x2 = mesh.nodes[:, 0], mesh.nodes[:, 1]
    chi = np.maximum(np.abs(x1), np.abs(x2)) < 0.5
    return 1.0 + np.cos(np.pi * x1) * np.cos(np.pi * x2) * chi


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Stiffness matrix of piecewise linear elements (Neumann, row sums zero)."""
    n = mesh.n_nodes
    if mesh.dim == 1:
        h = mesh.h
        main = np.full(n, 2.0 / h)
        main[0] = main[-1] = 1.0 / h
        off = np.full(n - 1, -1.0 / h)
        return sp.diags([off, main, off], [-1, 0, 1], format="csr")

    p = mesh.nodes[mesh.elements]          # (ne, 3, 2)
    b = p[:, [1, 2, 0], 1] - p[:, [2, 0, 1], 1]   # y_j - y_k per local basis
    c = p[:, [2, 0, 1], 0] - p[:, [1, 2, 0], 0]   # x_k - x_j
    area = 0.5 * np.abs(b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    K_loc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    return sp.coo_matrix((K_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def quadrature_weights(mesh: Mesh) -> Vec:
    """Per-node quadrature weight, the integral of each hat function.

    Interior nodes carry the full cell weight h^dim; nodes on the
    boundary own only part of a cell and weigh less.
    """
    if mesh.dim == 1:
        omega = np.full(mesh.n_nodes, mesh.h)
        omega[0] = omega[-1] = 0.5 * mesh.h
        return omega
    area = 0.5 * mesh.h ** 2
    omega = np.zeros(mesh.n_nodes)
    np.add.at(omega, mesh.elements.ravel(), area / 3.0)
    return omega


def weighted_mass(mesh: Mesh, w: Vec) -> sp.csr_matrix:
    """Boundary-corrected mass matrix weighted by the interpolant of w.

    Entry (i, j) approximates the integral of w_h * phi_i * phi_j.
    1-D element integration is exact for the cubic integrand; 2-D uses
    the three-point edge-midpoint rule.  A diagonal correction tops up
    every node to the uniform quadrature weight h^dim, as if boundary
    nodes owned a full reflected cell.  This keeps the row sums of the
    matrix proportional to the nodal values of w at every node, so
    adjoint-based gradients treat boundary and interior nodes alike;
    without it the half-weight boundary rows freeze the boundary values
    of reconstructed coefficients.  The perturbation is O(h^2) relative
    to the operator scale and preserves symmetry, the weight-swap
    identity M(q) u = M(u) q, and the exact constant solution.
    """
    w = np.asarray(w, dtype=float)
    n = mesh.n_nodes
    ghost = sp.diags((mesh.h ** mesh.dim - quadrature_weights(mesh)) * w)
    if mesh.dim == 1:
        h = mesh.h
        wa = w[mesh.elements[:, 0]]
        wb = w[mesh.elements[:, 1]]
        m_aa = h * (wa / 4.0 + wb / 12.0)
        m_ab = h * (wa + wb) / 12.0
        m_bb = h * (wa / 12.0 + wb / 4.0)
        loc = np.stack(
            [np.stack([m_aa, m_ab], axis=1), np.stack([m_ab, m_bb], axis=1)], axis=1
        )
        rows = np.repeat(mesh.elements, 2, axis=1).ravel()
        cols = np.tile(mesh.elements, (1, 2)).ravel()
        base = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        return (base + ghost).tocsr()

    area = 0.5 * mesh.h ** 2
    wq = area / 3.0
    w_elem = w[mesh.elements]              # (ne, 3)
    # Edge midpoints (a, b): basis values are 1/2 at a and b, 0 opposite.
    loc = np.zeros((mesh.elements.shape[0], 3, 3))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        w_mid = 0.5 * (w_elem[:, a] + w_elem[:, b])
        contrib = wq * w_mid * 0.25
        for i in (a, b):
            for j in (a, b):
                loc[:, i, j] += contrib
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    base = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return (base + ghost).tocsr()


def load_vector(mesh: Mesh, f_nodal: Vec) -> Vec:
    """Consistent load of the interpolated source, same quadrature as the mass."""
    return weighted_mass(mesh, f_nodal) @ np.ones(mesh.n_nodes)


@dataclass
class AssembledSystem:
    K: sp.csr_matrix
    M_c: sp.csr_matrix
    A: sp.csr_matrix
    load: Vec


def check_admissible(c: Vec):
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise AdmissibilityError("coefficient contains non-finite values")
    if c.min() < ADMISSIBILITY_FLOOR:
        raise AdmissibilityError(
            f"coefficient min {c.min():.3e} below admissibility floor"
        )


def assemble(mesh: Mesh, c: Vec, f_nodal: Vec) -> AssembledSystem:
    """Assemble A(c) = K + M(c) and the load of f; rejects inadmissible c."""
    check_admissible(c)
    K = stiffness_matrix(mesh)
    M_c = weighted_mass(mesh, c)
    return AssembledSystem(K, M_c, K + M_c, load_vector(mesh, f_nodal))


class InversePotentialOperator(ForwardOperator):
    """Coefficient-to-solution map c -> u of -Laplace(u) + c u = f.

    derivative_apply and adjoint_apply share the factorization of A(c)
    and the solution-weighted mass matrix, so they are exactly mutually
    adjoint in the Euclidean nodal inner product.
    """

    def __init__(self, mesh: Mesh, f=1.0, eta: float = 0.1, c_F: float = 0.1):
        self.mesh = mesh
        if np.isscalar(f):
            self.f_nodal = np.full(mesh.n_nodes, float(f))
        elif callable(f):
            pts = mesh.nodes
            self.f_nodal = np.asarray(
                f(pts) if mesh.dim == 1 else f(pts[:, 0], pts[:, 1]), dtype=float
            )
        else:
            self.f_nodal = np.asarray(f, dtype=float)
        self.n = self.m = mesh.n_nodes
        self.eta = eta
        self.c_F = c_F
        self.K = stiffness_matrix(mesh)
        self.load = load_vector(mesh, self.f_nodal)
        self._cache_key = None
        self._cache = None

    def _setup(self, c: Vec):
        """Factorize A(c), solve the state and build M(u); cached per c."""
        c = np.asarray(c, dtype=float)
        key = c.tobytes()
        if key == self._cache_key:
            return self._cache
        check_admissible(c)
        A = (self.K + weighted_mass(self.mesh, c)).tocsc()
        if self.n <= DIRECT_LIMIT:
            solve = spla.splu(A).solve
        else:
            def solve(rhs, A=A):
                u, info = spla.cg(A, rhs, rtol=CG_TOL, atol=0.0, maxiter=10 * self.n)
                if info != 0:
                    raise RuntimeError(f"CG failed (info={info})")
                return u
        u = solve(self.load)
        if not np.all(np.isfinite(u)):
            raise AdmissibilityError("state solve produced non-finite values")
        M_u = weighted_mass(self.mesh, u)
        self._cache_key = key
        self._cache = (solve, u, M_u)
        return self._cache

    def apply(self, c: Vec) -> Vec:
        _, u, _ = self._setup(c)
        return u.copy()

    def derivative_apply(self, c: Vec, q: Vec) -> Vec:
        solve, _, M_u = self._setup(c)
        return -solve(M_u @ np.asarray(q, dtype=float))

    def adjoint_apply(self, c: Vec, w: Vec) -> Vec:
        solve, _, M_u = self._setup(c)
        return -(M_u @ solve(np.asarray(w, dtype=float)))


def forward(mesh: Mesh, c: Vec, f=1.0) -> Vec:
    """One-shot forward solve (convenience wrapper for tests and the CLI)."""
    return InversePotentialOperator(mesh, f).apply(c)


def to_csv_rows(mesh: Mesh, values: Vec):
    """(coordinates..., value) rows for serializing fields as CSV."""
    if mesh.dim == 1:
        return [(float(x), float(v)) for x, v in zip(mesh.nodes, values)]
    return [
        (float(x), float(y), float(v))
        for (x, y), v in zip(mesh.nodes, values)
    ]

"""P1 Galerkin assembly: mass, Laplace-Beltrami and Helmholtz boundary operators."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import CoincidentSurfaces, DimensionMismatch
from .mesh import SurfaceMesh
from .quadrature import QuadratureConfig, reference_to_barycentric, singular_rule, triangle_rule

# running totals used to audit that preconditioners never trigger assembly
ASSEMBLY_STATS = {"dense_blocks": 0, "seconds": 0.0}


@dataclass(frozen=True, eq=False)
class P1Space:
    """Continuous piecewise linear functions, one dof per mesh vertex."""

    mesh: SurfaceMesh

    @property
    def dof_count(self) -> int:
        return self.mesh.n_vertices

    @property
    def element_dofs(self) -> np.ndarray:
        return self.mesh.triangles

    def surface_gradients(self) -> np.ndarray:
        """Gradients of the three local basis functions, ``(t, 3, 3)``."""
        p = self.mesh.vertices[self.mesh.triangles]
        n = self.mesh.normals
        two_area = 2.0 * self.mesh.areas[:, None]
        grads = np.empty_like(p)
        for a in range(3):
            e = p[:, (a + 2) % 3] - p[:, (a + 1) % 3]
            grads[:, a] = np.cross(n, e) / two_area
        return grads

    def surface_curls(self) -> np.ndarray:
        """``n x grad`` of the three local basis functions, ``(t, 3, 3)``."""
        return np.cross(self.mesh.normals[:, None, :], self.surface_gradients())

    def interpolate(self, fun) -> np.ndarray:
        """Nodal interpolant of ``fun(points) -> values``."""
        return np.asarray(fun(self.mesh.vertices))


_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _scatter(space, local):
    t = space.element_dofs
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = space.dof_count
    return sp.csc_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def mass_matrix(space: P1Space) -> sp.csc_matrix:
    """Exact P1 mass matrix, ``M_ij = int phi_i phi_j``."""
    local = space.mesh.areas[:, None, None] * _LOCAL_MASS[None]
    return _scatter(space, local)


def laplace_beltrami(space: P1Space) -> sp.csc_matrix:
    """Stiffness matrix ``S_ij = int grad_G phi_i . grad_G phi_j``.

    Equivalent to the cotangent formula; the weak form of the surface
    Laplacian is ``-S``.
    """
    g = space.surface_gradients()
    local = np.einsum("tad,tbd->tab", g, g) * space.mesh.areas[:, None, None]
    return _scatter(space, local)


# --------------------------------------------------------------------------
# dense boundary operators


@dataclass(eq=False)
class DenseOperatorBlock:
    """Weak-form Galerkin matrix ``<Op phi_j, phi_i>`` of one operator."""

    matrix: np.ndarray
    kind: str
    wavenumber: complex

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(eq=False)
class CalderonBlocks:
    """The four operators of one Calderon operator at one wavenumber.

    ``T`` is the transpose of ``K``, which is exact for the Galerkin pairing:
    ``<T phi_j, phi_i> = <phi_j, K phi_i>``.
    """

    V: DenseOperatorBlock
    K: DenseOperatorBlock
    D: DenseOperatorBlock
    wavenumber: complex
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def T(self) -> DenseOperatorBlock:
        return DenseOperatorBlock(self.K.matrix.T, "T", self.wavenumber)

    def get(self, kind):
        return {"V": self.V, "K": self.K, "T": self.T, "D": self.D}[kind]


def _mesh_arrays(space: P1Space):
    m = space.mesh
    diam = np.linalg.norm(m.vertices[m.triangles] - m.vertices[np.roll(m.triangles, 1, axis=1)], axis=2).max(axis=1)
    return (m.vertices, m.triangles, np.ascontiguousarray(m.normals), m.areas, diam,
            np.ascontiguousarray(space.surface_curls()))


# Relabelings of the local vertices that keep the shared vertices in front.
# Averaging the singular rules over them makes the result independent of the
# vertex order within each triangle (mirror images assemble identically).
_RELABEL = {
    3: [((0, 1, 2), (0, 1, 2)), ((1, 2, 0), (1, 2, 0)), ((2, 0, 1), (2, 0, 1)),
        ((0, 2, 1), (0, 2, 1)), ((2, 1, 0), (2, 1, 0)), ((1, 0, 2), (1, 0, 2))],
    2: [((0, 1, 2), (0, 1, 2)), ((1, 0, 2), (1, 0, 2))],
    1: [((0, 1, 2), (0, 1, 2)), ((0, 2, 1), (0, 1, 2)), ((0, 1, 2), (0, 2, 1)), ((0, 2, 1), (0, 2, 1))],
}


def _singular_tables(order):
    xs, ys, ws, off = [], [], [], [0]
    for n_shared in (1, 2, 3):
        x, y, w = singular_rule(n_shared, order)
        bx, by = reference_to_barycentric(x), reference_to_barycentric(y)
        pairs = [(bx, by)]
        if n_shared == 2:
            # the edge rule is not symmetric in test and trial
            pairs.append((by, bx))
        perms = _RELABEL[n_shared]
        count = len(perms) * len(pairs)
        for px, py in perms:
            for u, v in pairs:
                xs.append(u[:, np.argsort(px)])
                ys.append(v[:, np.argsort(py)])
                ws.append(w / count)
        off.append(off[-1] + w.size * count)
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws), np.asarray(off, dtype=np.int64)


def _boxes_intersect(a: SurfaceMesh, b: SurfaceMesh) -> bool:
    lo = np.maximum(a.vertices.min(axis=0), b.vertices.min(axis=0))
    hi = np.minimum(a.vertices.max(axis=0), b.vertices.max(axis=0))
    return bool(np.all(hi >= lo))


def assemble_vkd(test: P1Space, trial: P1Space, k: complex, quad: QuadratureConfig | None = None):
    """Single-layer, double-layer and hypersingular matrices in one sweep.

    Singular rules are used whenever ``test`` and ``trial`` live on the same
    mesh object; otherwise the meshes must be disjoint.
    """
    quad = quad or QuadratureConfig()
    same = test.mesh is trial.mesh
    if not same and _boxes_intersect(test.mesh, trial.mesh):
        raise CoincidentSurfaces("distinct interfaces overlap; cross operators need disjoint meshes")
    reg_b, reg_w = triangle_rule(quad.regular_order)
    near_b, near_w = triangle_rule(quad.near_order)
    sx, sy, sw, soff = _singular_tables(quad.singular_order)
    t0 = time.perf_counter()
    V, K, D = _kernels.assemble_vkd(
        *_mesh_arrays(test), *_mesh_arrays(trial), complex(k), same,
        reg_b, reg_w, near_b, near_w, float(quad.near_threshold),
        sx, sy, sw, soff,
    )
    dt = time.perf_counter() - t0
    ASSEMBLY_STATS["dense_blocks"] += 3
    ASSEMBLY_STATS["seconds"] += dt
    k = complex(k)
    return CalderonBlocks(
        DenseOperatorBlock(V, "V", k), DenseOperatorBlock(K, "K", k), DenseOperatorBlock(D, "D", k), k, dt
    )


def boundary_operator(kind: str, test: P1Space, trial: P1Space, k: complex,
                      quad: QuadratureConfig | None = None) -> DenseOperatorBlock:
    """Weak-form matrix of ``V``, ``K``, ``T`` or ``D`` between two spaces.

    The hypersingular operator uses the integration-by-parts form
    ``<D phi, v> = int int G curl phi . curl v - k^2 int int G (n_x . n_y) phi v``.
    """
    if kind not in ("V", "K", "T", "D"):
        raise ValueError(f"unknown operator kind {kind!r}")
    if kind == "T":
        K = assemble_vkd(trial, test, k, quad).K
        return DenseOperatorBlock(K.matrix.T.copy(), "T", complex(k))
    return assemble_vkd(test, trial, k, quad).get(kind)


# --------------------------------------------------------------------------
# strong form


class StrongForm:
    """``M^{-1} B`` applied lazily through a sparse factorisation of ``M``."""

    def __init__(self, block, mass, solver=None):
        matrix = block.matrix if isinstance(block, DenseOperatorBlock) else block
        if matrix.shape[0] != mass.shape[0]:
            raise DimensionMismatch(f"operator has {matrix.shape[0]} rows, mass matrix {mass.shape[0]}")
        self.matrix = matrix
        self.mass = mass
        self._solve = solver or mass_solver(mass)
        self.shape = matrix.shape

    def __matmul__(self, x):
        return self._solve(self.matrix @ x)

    def matvec(self, x):
        return self @ x


def strong_form(block, mass, solver=None) -> StrongForm:
    return StrongForm(block, mass, solver)


def mass_solver(mass):
    """Factorised real mass matrix usable on complex right-hand sides."""
    solve = spla.factorized(sp.csc_matrix(mass))

    def apply(y):
        y = np.asarray(y)
        if np.iscomplexobj(y):
            return solve(np.ascontiguousarray(y.real)) + 1j * solve(np.ascontiguousarray(y.imag))
        return solve(y)

    return apply

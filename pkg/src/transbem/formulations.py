"""Block boundary integral systems for multi-object acoustic transmission.

Unknowns on interface ``m`` are the exterior traces ``phi_m`` (Dirichlet) and
``psi_m`` (Neumann); the interior Neumann trace is ``(rho_m / rho_0) psi_m``.
Every system stores weighted references to the assembled operator blocks
instead of a summed matrix, so preconditioners can reuse them for free.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import CalderonBlocks, P1Space, assemble_vkd, mass_matrix, mass_solver
from .medium import PlaneWave, incident_traces, material, wavenumber
from .mesh import Scene
from .quadrature import QuadratureConfig

PHI, PSI = "phi", "psi"
DIRICHLET_ROW, NEUMANN_ROW = "D", "N"


@dataclass(eq=False)
class SceneOperators:
    """Everything assembled for one scene at one frequency."""

    scene: Scene
    frequency: float
    k0: complex
    k_int: list
    rho0: float
    rho_int: list
    exterior: CalderonBlocks
    interior: list
    spaces: list
    masses: list
    mass_solvers: list
    assembly_seconds: float = 0.0

    @property
    def offsets(self):
        return self.scene.offsets

    def exterior_block(self, kind, m, n):
        """Cross or self block ``<Op_{0,mn}>`` as a view into the union matrix."""
        off = self.offsets
        return self.exterior.get(kind).matrix[off[m] : off[m + 1], off[n] : off[n + 1]]


def assemble_operators(scene: Scene, f: float, quad: QuadratureConfig | None = None,
                       materials=None) -> SceneOperators:
    """Assemble the exterior operators on all interfaces and each interior set.

    ``materials`` optionally overrides the scene's ``(exterior, [interiors])``.
    """
    quad = quad or QuadratureConfig()
    ext, ints = materials if materials is not None else (scene.exterior_material, scene.interior_materials)
    ext = material(ext)
    ints = [material(m) for m in ints]
    k0 = wavenumber(ext, f)
    k_int = [wavenumber(m, f) for m in ints]
    t0 = time.perf_counter()
    union = P1Space(scene.union())
    exterior = assemble_vkd(union, union, k0, quad)
    spaces = [P1Space(m) for m in scene.meshes] if len(scene) > 1 else [union]
    interior = []
    for space, k in zip(spaces, k_int):
        if len(scene) == 1 and k == k0:
            interior.append(exterior)  # identical assembly, reuse the same bits
        else:
            interior.append(assemble_vkd(space, space, k, quad))
    masses = [mass_matrix(s) for s in spaces]
    return SceneOperators(
        scene, f, k0, k_int, ext.rho, [m.rho for m in ints], exterior, interior, spaces,
        masses, [mass_solver(m) for m in masses], time.perf_counter() - t0,
    )


@dataclass
class SurfaceSolution:
    """Exterior traces per interface plus the incident wave that produced them."""

    phi: list
    psi: list
    wave: PlaneWave | None = None
    frequency: float | None = None

    def scaled(self, alpha) -> "SurfaceSolution":
        return SurfaceSolution([alpha * p for p in self.phi], [alpha * p for p in self.psi],
                               self.wave, self.frequency)

    def __add__(self, other: "SurfaceSolution") -> "SurfaceSolution":
        return SurfaceSolution([a + b for a, b in zip(self.phi, other.phi)],
                               [a + b for a, b in zip(self.psi, other.psi)], self.wave, self.frequency)

    def stacked(self) -> np.ndarray:
        return np.concatenate([np.concatenate([a, b]) for a, b in zip(self.phi, self.psi)])


@dataclass(eq=False)
class BlockSystem:
    """A ``2l x 2l`` grid of weighted operator references.

    ``terms`` holds ``(row_block, col_block, weight, matrix)``; ``rows`` and
    ``unknowns`` record which trace each block row and column refers to.
    """

    formulation: str
    operators: SceneOperators
    rows: list
    unknowns: list
    terms: list
    rhs_traces: np.ndarray
    wave: PlaneWave
    density_ratios: list = field(default_factory=list)

    def __post_init__(self):
        sizes = [self.operators.spaces[m].dof_count for m, _ in self.unknowns]
        self.block_offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.shape = (int(self.block_offsets[-1]),) * 2

    @property
    def n_interfaces(self) -> int:
        return len(self.operators.spaces)

    def _slice(self, b):
        return slice(self.block_offsets[b], self.block_offsets[b + 1])

    def block_terms(self, r, c):
        return [(w, a) for (i, j, w, a) in self.terms if i == r and j == c]

    def matvec(self, x, diagonal_only=False):
        """Weak-form product; ``diagonal_only`` keeps the per-interface superblocks."""
        x = np.asarray(x)
        y = np.zeros(self.shape[0], dtype=np.result_type(x, np.complex128))
        for r, c, w, a in self.terms:
            if diagonal_only and self.rows[r][0] != self.unknowns[c][0]:
                continue
            y[self._slice(r)] += w * (a @ x[self._slice(c)])
        return y

    def __matmul__(self, x):
        return self.matvec(x)

    def mass_solve(self, y):
        """Blockwise ``M^{-1}`` on the rows (test spaces)."""
        out = np.empty_like(y, dtype=np.result_type(y, np.complex128))
        for r, (m, _) in enumerate(self.rows):
            s = self._slice(r)
            out[s] = self.operators.mass_solvers[m](y[s])
        return out

    def mass_apply(self, x):
        out = np.empty_like(x, dtype=np.result_type(x, np.complex128))
        for r, (m, _) in enumerate(self.rows):
            s = self._slice(r)
            out[s] = self.operators.masses[m] @ x[s]
        return out

    @property
    def rhs(self) -> np.ndarray:
        """Weak right-hand side ``M f``."""
        return self.mass_apply(self.rhs_traces)

    def to_dense(self) -> np.ndarray:
        A = np.zeros(self.shape, dtype=np.complex128)
        for r, c, w, a in self.terms:
            a = a.toarray() if hasattr(a, "toarray") else a
            A[self._slice(r), self._slice(c)] += w * a
        return A

    def solution(self, x) -> SurfaceSolution:
        ell = self.n_interfaces
        phi, psi = [None] * ell, [None] * ell
        for b, (m, trace) in enumerate(self.unknowns):
            (phi if trace == PHI else psi)[m] = np.asarray(x[self._slice(b)])
        return SurfaceSolution(phi, psi, self.wave, self.operators.frequency)

    def vector(self, solution: SurfaceSolution) -> np.ndarray:
        parts = [(solution.phi if t == PHI else solution.psi)[m] for m, t in self.unknowns]
        return np.concatenate(parts)

    def permutation_to(self, other: "BlockSystem") -> np.ndarray:
        """Index array ``p`` with ``x_other = x_self[p]`` for the same traces."""
        idx = {}
        for b, key in enumerate(self.unknowns):
            idx[key] = np.arange(self.block_offsets[b], self.block_offsets[b + 1])
        return np.concatenate([idx[key] for key in other.unknowns])


def _incident(ops: SceneOperators, wave):
    if wave is None:
        wave = PlaneWave((1.0, 0.0, 0.0), ops.k0)
    elif complex(wave.wavenumber) != ops.k0:
        wave = PlaneWave(wave.direction, ops.k0, wave.amplitude)
    traces = [incident_traces(wave, s.mesh) for s in ops.spaces]
    return wave, traces


def _build(kind, scene, materials, f, quad, wave, operators):
    if operators is None:
        if f is None:
            raise ValueError("a frequency is required unless prebuilt operators are given")
        operators = assemble_operators(scene, f, quad, materials)
    ops = operators
    ell = len(ops.spaces)
    wave, traces = _incident(ops, wave)
    ratios = [ops.rho0 / r for r in ops.rho_int]

    permuted = kind == "pmchwt-permuted"
    rows, unknowns = [], []
    for m in range(ell):
        rows += [(m, DIRICHLET_ROW), (m, NEUMANN_ROW)]
        unknowns += [(m, PSI), (m, PHI)] if permuted else [(m, PHI), (m, PSI)]
    col = {key: b for b, key in enumerate(unknowns)}

    terms = []
    for m in range(ell):
        rD, rN = 2 * m, 2 * m + 1
        for n in range(ell):
            cphi, cpsi = col[(n, PHI)], col[(n, PSI)]
            # exterior Calderon operator [-K, V; D, T] (self and cross blocks)
            terms += [
                (rD, cphi, -1.0, ops.exterior_block("K", m, n)),
                (rD, cpsi, 1.0, ops.exterior_block("V", m, n)),
                (rN, cphi, 1.0, ops.exterior_block("D", m, n)),
                (rN, cpsi, 1.0, ops.exterior_block("T", m, n)),
            ]
        inner = ops.interior[m]
        ratio = ratios[m]
        sign = -1.0 if kind == "muller" else 1.0
        cphi, cpsi = col[(m, PHI)], col[(m, PSI)]
        # interior operator with density scalings [-K, (rho_m/rho_0) V; (rho_0/rho_m) D, T]
        terms += [
            (rD, cphi, -sign, inner.K.matrix),
            (rD, cpsi, sign / ratio, inner.V.matrix),
            (rN, cphi, sign * ratio, inner.D.matrix),
            (rN, cpsi, sign, inner.K.matrix.T),
        ]
        if kind == "muller":
            terms += [(rD, cphi, 1.0, ops.masses[m]), (rN, cpsi, 1.0, ops.masses[m])]

    rhs = np.concatenate([np.concatenate(t) for t in traces])
    return BlockSystem(kind, ops, rows, unknowns, terms, rhs, wave, ratios)


def build_pmchwt(scene, materials=None, f=None, quad=None, *, wave=None, operators=None) -> BlockSystem:
    """Sum of exterior and interior Calderon equations (first kind)."""
    return _build("pmchwt", scene, materials, f, quad, wave, operators)


def build_muller(scene, materials=None, f=None, quad=None, *, wave=None, operators=None) -> BlockSystem:
    """Difference of the Calderon equations plus identity (second kind)."""
    return _build("muller", scene, materials, f, quad, wave, operators)


def build_pmchwt_permuted(scene, materials=None, f=None, quad=None, *, wave=None, operators=None) -> BlockSystem:
    """PMCHWT with unknowns ordered ``(psi_m, phi_m)``, pairing V with the
    Dirichlet row and D with the Neumann row on the block diagonal."""
    return _build("pmchwt-permuted", scene, materials, f, quad, wave, operators)


BUILDERS = {
    "pmchwt": build_pmchwt,
    "muller": build_muller,
    "pmchwt-permuted": build_pmchwt_permuted,
}


def calderon_apply(blocks: CalderonBlocks, solve, x, scale: float = 1.0) -> np.ndarray:
    """Strong-form Calderon operator ``M^-1 [-K, V; D, T]`` applied to ``(phi, psi)``.

    ``scale`` conjugates the operator with ``diag(1, scale)``, so the Neumann
    half is measured in units of ``scale``; ``A^2`` is unchanged. Taking
    ``scale = |k|`` makes both halves dimensionless.
    """
    n = blocks.V.shape[0]
    phi, psi = x[:n], x[n:] * scale
    top = solve(-(blocks.K.matrix @ phi) + blocks.V.matrix @ psi)
    bottom = solve(blocks.D.matrix @ phi + blocks.K.matrix.T @ psi)
    return np.concatenate([top, bottom / scale])

import numpy as np
import pytest

from transbem.errors import DimensionMismatch
from transbem.formulations import (
    BUILDERS,
    SurfaceSolution,
    assemble_operators,
    build_muller,
    build_pmchwt,
    build_pmchwt_permuted,
    calderon_apply,
)
from transbem.medium import PlaneWave
from transbem.mesh import Scene, generate_icosphere
from transbem.precond import make_preconditioner
from transbem.solver import gmres


def test_identical_media_pmchwt_is_twice_exterior(null_ops):
    sys = build_pmchwt(null_ops.scene, operators=null_ops)
    ext = null_ops.exterior
    A = np.block([[-ext.K.matrix, ext.V.matrix], [ext.D.matrix, ext.K.matrix.T]])
    assert np.array_equal(sys.to_dense(), 2 * A)


def test_identical_media_muller_is_identity(null_ops):
    sys = build_muller(null_ops.scene, operators=null_ops)
    M = null_ops.masses[0].toarray()
    n = M.shape[0]
    expected = np.zeros((2 * n, 2 * n), dtype=complex)
    expected[:n, :n] = expected[n:, n:] = M
    assert np.array_equal(sys.to_dense(), expected)
    x, rep = gmres(sys.matvec, make_preconditioner("mass", sys), sys.rhs)
    assert rep.converged and rep.iterations <= 2
    assert np.allclose(x, sys.rhs_traces, rtol=0, atol=1e-10)


def test_incident_traces_satisfy_interior_calderon(null_ops, fat_ops_fine):
    # (-1/2 + A) gamma u_inc = 0 for the interior operator; the defect shrinks with h
    defects = []
    for ops in (null_ops, assemble_operators(Scene(fat_ops_fine.scene.meshes, "water", ["water"]), 250e3)):
        sys = build_pmchwt(ops.scene, operators=ops)
        f = sys.rhs_traces
        n = f.size // 2
        Af = calderon_apply(ops.exterior, ops.mass_solvers[0], f)
        scale = np.concatenate([np.ones(n), np.full(n, 1 / abs(ops.k0))])
        defects.append(np.linalg.norm((Af - 0.5 * f) * scale) / np.linalg.norm(f * scale))
    assert defects[1] < defects[0] / 2


def test_two_interface_dimension():
    a = generate_icosphere(0.005, 1, center=(-0.008, 0, 0))
    b = generate_icosphere(0.005, 0, center=(0.008, 0, 0))
    scene = Scene([a, b], "water", ["fat", "bone"])
    ops = assemble_operators(scene, 125e3)
    for build in BUILDERS.values():
        sys = build(scene, operators=ops)
        assert sys.shape == (2 * (42 + 12),) * 2
        assert sys.to_dense().shape == sys.shape
    # off-diagonal superblocks only reference exterior operators
    sys = build_pmchwt(scene, operators=ops)
    off = [a for r, c, _, a in sys.terms if sys.rows[r][0] != sys.unknowns[c][0]]
    assert off and all(np.shares_memory(a, ops.exterior.V.matrix) or np.shares_memory(a, ops.exterior.K.matrix)
                       or np.shares_memory(a, ops.exterior.D.matrix) or np.shares_memory(a, ops.exterior.K.matrix.T)
                       for a in off)


@pytest.mark.parametrize("kind", sorted(BUILDERS))
def test_zero_incident_wave(fat_ops, kind):
    sys = BUILDERS[kind](fat_ops.scene, operators=fat_ops, wave=PlaneWave((1, 0, 0), fat_ops.k0, amplitude=0.0))
    assert not np.any(sys.rhs)
    x, rep = gmres(sys.matvec, make_preconditioner("mass", sys), sys.rhs)
    assert rep.converged and rep.iterations == 0 and not np.any(x)


def test_permuted_system_is_a_permutation(fat_ops, rng):
    a = build_pmchwt(fat_ops.scene, operators=fat_ops)
    b = build_pmchwt_permuted(fat_ops.scene, operators=fat_ops)
    p = a.permutation_to(b)
    x = rng.standard_normal(a.shape[0]) + 1j * rng.standard_normal(a.shape[0])
    assert np.array_equal(a.matvec(x), b.matvec(x[p]))
    assert np.array_equal(a.rhs, b.rhs)
    n = fat_ops.spaces[0].dof_count
    # first block row: V-type then K-type, second: T-type then D-type
    assert b.unknowns == [(0, "psi"), (0, "phi")]
    ratio = fat_ops.rho_int[0] / fat_ops.rho0
    row0 = b.block_terms(0, 0)
    assert [w for w, _ in row0] == [1.0, ratio]
    assert row0[1][1] is fat_ops.interior[0].V.matrix
    row1 = b.block_terms(1, 1)
    assert row1[1][1] is fat_ops.interior[0].D.matrix and row1[1][0] == 1 / ratio
    sa = a.solution(x)
    sb = b.solution(x[p])
    assert all(np.array_equal(u, v) for u, v in zip(sa.phi + sa.psi, sb.phi + sb.psi))
    assert np.array_equal(b.vector(sb), x[p]) and sb.phi[0].size == n


def test_permuted_and_plain_solutions_agree(fat_ops):
    a = build_pmchwt(fat_ops.scene, operators=fat_ops)
    b = build_pmchwt_permuted(fat_ops.scene, operators=fat_ops)
    xa, _ = gmres(a.matvec, make_preconditioner("mass", a), a.rhs, tol=1e-10)
    xb, _ = gmres(b.matvec, make_preconditioner("mass", b), b.rhs, tol=1e-10)
    # same Krylov spaces up to ordering; only rounding separates the two
    assert np.linalg.norm(xa[a.permutation_to(b)] - xb) <= 1e-5 * np.linalg.norm(xa)


def _formulation_gap(ops):
    sols = []
    for build in (build_pmchwt, build_muller):
        sys = build(ops.scene, operators=ops)
        x, rep = gmres(sys.matvec, make_preconditioner("mass", sys), sys.rhs, tol=1e-10)
        assert rep.converged
        sols.append(sys.solution(x))
    # Neumann half in units of k so both traces weigh alike
    s = [np.concatenate([u.phi[0], u.psi[0] / abs(ops.k0)]) for u in sols]
    return np.linalg.norm(s[0] - s[1]) / np.linalg.norm(s[1])


def test_pmchwt_and_muller_converge_together(fat_ops, fat_ops_fine):
    coarse, fine = _formulation_gap(fat_ops), _formulation_gap(fat_ops_fine)
    assert fine < coarse / 3  # second order in h


@pytest.mark.xfail(strict=True, reason="P1 discretisations differ by about 3% at six elements per wavelength")
def test_pmchwt_and_muller_within_two_percent(fat_ops_fine):
    assert _formulation_gap(fat_ops_fine) < 0.02


def test_surface_solution_algebra():
    a = SurfaceSolution([np.array([1.0, 2.0])], [np.array([3.0j])])
    b = a.scaled(2.0) + a
    assert np.array_equal(b.stacked(), [3.0, 6.0, 9.0j])


def test_calderon_apply_rejects_bad_scale_length(fat_ops):
    with pytest.raises((ValueError, DimensionMismatch)):
        calderon_apply(fat_ops.exterior, fat_ops.mass_solvers[0], np.ones(3))

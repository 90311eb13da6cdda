import numpy as np
import pytest
import scipy.special as ss

from transbem.assembly import (
    P1Space,
    assemble_vkd,
    boundary_operator,
    laplace_beltrami,
    mass_matrix,
    strong_form,
)
from transbem.errors import CoincidentSurfaces, DimensionMismatch
from transbem.mesh import SurfaceMesh, generate_icosphere
from transbem.quadrature import QuadratureConfig, triangle_rule

SQ3 = np.sqrt(3.0)


def _triangle(offset=(0, 0, 0), scale=1.0):
    v = np.array([[0, 0, 0], [1, 0, 0], [0.3, 0.8, 0]]) * scale + np.asarray(offset)
    return SurfaceMesh(v, np.array([[0, 1, 2]]))


def test_local_mass_matrix():
    m = _triangle(scale=0.01)
    A = m.areas[0]
    M = mass_matrix(P1Space(m)).toarray()
    assert np.allclose(M, A / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), rtol=1e-14)


def test_mass_partition_of_unity_and_symmetry():
    m = generate_icosphere(0.005, 2)
    M = mass_matrix(P1Space(m))
    assert M.sum() == pytest.approx(m.areas.sum(), rel=1e-13)
    assert (M - M.T).nnz == 0


def test_stiffness_kernel_and_symmetry():
    m = generate_icosphere(0.005, 2)
    S = laplace_beltrami(P1Space(m))
    assert np.abs(S @ np.ones(m.n_vertices)).max() < 1e-12 * abs(S).max()
    assert abs(S - S.T).max() < 1e-12 * abs(S).max()
    assert np.all(np.linalg.eigvalsh(S.toarray()) > -1e-9 * abs(S).max())


def test_stiffness_equilateral_cotangent_weight():
    v = np.array([[0, 0, 0], [1, 0, 0], [0.5, SQ3 / 2, 0], [0.5, -SQ3 / 2, 0]])
    m = SurfaceMesh(v, np.array([[0, 1, 2], [1, 0, 3]]))
    S = laplace_beltrami(P1Space(m)).toarray()
    assert S[0, 1] == pytest.approx(-(1 / np.tan(np.pi / 3)), rel=1e-12)
    assert S[0, 1] == pytest.approx(-0.57735, abs=1e-5)


def test_stiffness_matches_planar_fem():
    # a tilted planar patch: compare with the textbook 2D P1 stiffness in plane coordinates
    rng = np.random.default_rng(3)
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.45, 0.55]]) + rng.normal(0, 0.02, (5, 2))
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    e1, e2 = np.array([1, 0, 1]) / np.sqrt(2), np.array([0, 1, 0])
    m = SurfaceMesh(uv[:, :1] * e1 + uv[:, 1:] * e2, tris)
    S = laplace_beltrami(P1Space(m)).toarray()
    ref = np.zeros((5, 5))
    for t in tris:
        P = np.column_stack([np.ones(3), uv[t]])
        G = np.linalg.inv(P)[1:]  # gradients of the barycentric functions
        ref[np.ix_(t, t)] += 0.5 * abs(np.linalg.det(P)) * G.T @ G
    assert np.allclose(S, ref, atol=1e-12)


def _brute_v(t1, t2, k, n=20):
    # tensor Gauss reference for well separated triangles
    b, w = triangle_rule(n * n)
    X = b @ t1.vertices[t1.triangles[0]]
    Y = b @ t2.vertices[t2.triangles[0]]
    r = np.linalg.norm(X[:, None] - Y[None], axis=2)
    G = np.exp(1j * k * r) / (4 * np.pi * r)
    return (b * w[:, None]).T @ G @ (b * w[:, None]) * t1.areas[0] * t2.areas[0]


def test_far_separated_single_layer():
    t1, t2 = _triangle(scale=1e-3), _triangle(offset=(0.05, 0.01, 0.02), scale=1e-3)
    k = 500.0
    V = boundary_operator("V", P1Space(t1), P1Space(t2), k).matrix
    assert np.allclose(V, _brute_v(t1, t2, k), rtol=1e-2)
    R = np.linalg.norm(t1.centroids[0] - t2.centroids[0])
    approx = np.exp(1j * k * R) / (4 * np.pi * R) * t1.areas[0] * t2.areas[0] / 9
    assert np.allclose(V, approx, rtol=5e-2)


def test_overlapping_distinct_meshes_rejected():
    a = P1Space(generate_icosphere(0.005, 0))
    b = P1Space(generate_icosphere(0.005, 0, center=(0.001, 0, 0)))
    with pytest.raises(CoincidentSurfaces):
        boundary_operator("V", a, b, 100.0)


@pytest.fixture(scope="module")
def level1():
    return P1Space(generate_icosphere(0.005, 1))


def test_laplace_single_layer_positive(level1):
    V = boundary_operator("V", level1, level1, 1e-8).matrix
    assert np.all(V.real > 0)


def test_hypersingular_kills_constants_at_zero_frequency(level1):
    D = boundary_operator("D", level1, level1, 0.0).matrix
    assert np.abs(D @ np.ones(level1.dof_count)).max() < 1e-12 * np.abs(D).max()


def test_galerkin_symmetries(level1):
    k = 1200.0 + 3.0j
    B = assemble_vkd(level1, level1, k)
    for A in (B.V.matrix, B.D.matrix):
        assert np.abs(A - A.T).max() <= 1e-8 * np.abs(A).max()
    T = boundary_operator("T", level1, level1, k).matrix
    assert np.abs(T - B.K.matrix.T).max() <= 1e-8 * np.abs(T).max()


def test_singular_order_convergence(level1):
    # near the static limit, so the comparison isolates the singular rules
    # from the oscillation of the kernel across a coarse (kh ~ 3 at 250 kHz) mesh
    k = 1.0
    V3 = boundary_operator("V", level1, level1, k, QuadratureConfig(singular_order=3)).matrix
    V5 = boundary_operator("V", level1, level1, k, QuadratureConfig(singular_order=5)).matrix
    assert np.abs(V3 - V5).max() / np.abs(V5).max() < 1e-4


def test_assembly_is_bitwise_reproducible(level1):
    a = assemble_vkd(level1, level1, 900.0)
    b = assemble_vkd(level1, level1, 900.0)
    assert np.array_equal(a.V.matrix, b.V.matrix) and np.array_equal(a.D.matrix, b.D.matrix)


@pytest.fixture(scope="module")
def sphere3():
    space = P1Space(generate_icosphere(0.005, 3))
    k = 2 * np.pi * 250e3 / 1500
    return space, k, assemble_vkd(space, space, k)


def test_sphere_constant_mode(sphere3):
    # Galerkin entries against the spherical-harmonic eigenvalues of each operator
    space, k, B = sphere3
    a, ka = 0.005, 0.005 * k
    one = np.ones(space.dof_count)
    area = 4 * np.pi * a**2
    j, dj = ss.spherical_jn(0, ka), ss.spherical_jn(0, ka, True)
    h, dh = j + 1j * ss.spherical_yn(0, ka), dj + 1j * ss.spherical_yn(0, ka, True)
    assert one @ B.V.matrix @ one / area == pytest.approx(1j * k * a**2 * j * h, rel=0.03)
    assert one @ B.K.matrix @ one / area == pytest.approx(1j * k**2 * a**2 * j * dh + 0.5, abs=0.03)
    assert one @ B.D.matrix @ one / area == pytest.approx(-1j * k**3 * a**2 * dj * dh, rel=0.05)


def test_strong_form(sphere3, rng):
    space, _, B = sphere3
    M = mass_matrix(space)
    x = rng.standard_normal(space.dof_count) + 1j * rng.standard_normal(space.dof_count)
    assert np.allclose(strong_form(M.toarray(), M) @ x, x, atol=1e-12 * np.abs(x).max())
    once = strong_form(B.V, M) @ x
    twice = strong_form(B.V.matrix, M) @ (strong_form(np.eye(space.dof_count), M) @ x)
    assert not np.allclose(once, twice)
    assert np.all(strong_form(np.zeros((space.dof_count,) * 2), M) @ x == 0)
    with pytest.raises(DimensionMismatch):
        strong_form(np.zeros((3, 3)), M)

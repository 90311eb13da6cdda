import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transbem.errors import (
    DanglingNodeReference,
    EmptyMesh,
    MalformedHeader,
    OpenBoundary,
    ResolutionOverflow,
    SceneError,
)
from transbem.mesh import (
    Scene,
    SurfaceMesh,
    dump_off,
    generate_icosphere,
    icosphere_max_edge,
    load_off,
    parse_msh,
    subdivisions_for_density,
    validate,
    write_msh,
)


@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_icosphere_counts(s):
    m = generate_icosphere(0.005, s)
    assert m.n_vertices == 10 * 4**s + 2
    assert m.n_triangles == 20 * 4**s


def test_icosphere_level0_and_level2():
    assert (generate_icosphere(0.005, 0).n_vertices, generate_icosphere(0.005, 0).n_triangles) == (12, 20)
    assert (generate_icosphere(0.005, 2).n_vertices, generate_icosphere(0.005, 2).n_triangles) == (162, 320)


@given(st.floats(1e-3, 10.0), st.integers(0, 3))
@settings(max_examples=20, deadline=None)
def test_icosphere_vertices_on_sphere(radius, s):
    m = generate_icosphere(radius, s)
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), radius, rtol=1e-12, atol=0)


def test_unit_sphere_norms():
    m = generate_icosphere(1.0, 0)
    assert np.all(np.abs(np.linalg.norm(m.vertices, axis=1) - 1.0) < 1e-15)


def test_icosphere_normals_outward_and_unit():
    m = generate_icosphere(0.005, 2, center=(0.01, 0, 0))
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0, atol=1e-12)
    outward = np.einsum("ij,ij->i", m.normals, m.centroids - m.center)
    assert np.all(outward > 0)
    assert m.signed_volume() > 0


def test_area_converges_from_below():
    gaps = []
    for s in range(4):
        area = generate_icosphere(1.0, s).areas.sum()
        assert area < 4 * np.pi
        gaps.append((4 * np.pi - area) / (4 * np.pi))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[3] < 0.01


def test_subdivisions_for_density():
    r = 0.005
    e0 = icosphere_max_edge(r, 0)
    assert subdivisions_for_density(r, e0) == 0
    assert subdivisions_for_density(r, 2 * e0) == 0
    # reprojected midpoints make level-1 edges slightly longer than e0 / 2
    assert icosphere_max_edge(r, 1) > e0 / 2
    assert subdivisions_for_density(r, e0 / 2) == 2
    assert subdivisions_for_density(r, icosphere_max_edge(r, 1)) == 1
    with pytest.raises(ResolutionOverflow):
        subdivisions_for_density(r, 1e-9)


@given(st.floats(1e-5, 1e-2))
@settings(max_examples=30, deadline=None)
def test_subdivisions_is_smallest_sufficient_level(h):
    r = 0.005
    s = subdivisions_for_density(r, h, cap=12)
    assert icosphere_max_edge(r, s) <= h
    if s > 0:
        assert icosphere_max_edge(r, s - 1) > h


def test_mesh_width_matches_generated_mesh():
    for s in range(4):
        assert generate_icosphere(0.005, s).h == pytest.approx(icosphere_max_edge(0.005, s), rel=1e-12)


# MSH fixtures


def test_parse_minimal(fixtures):
    m = parse_msh((fixtures / "minimal.msh").read_bytes())
    assert m.n_triangles == 1 and m.n_vertices == 3
    assert np.array_equal(m.vertices, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    assert np.array_equal(m.triangles, [[0, 1, 2]])


def test_parse_mixed_elements_keeps_triangles(fixtures):
    m = parse_msh((fixtures / "mixed.msh").read_text())
    assert m.n_triangles == 1
    assert m.n_vertices == 3  # the node used only by the line element is dropped
    assert np.array_equal(m.vertices, [[0.0, 0.0, 0.0], [0.125, 0.0, 0.0], [0.0, 0.25, 0.0]])


def test_parse_bad_header(fixtures):
    with pytest.raises(MalformedHeader):
        parse_msh((fixtures / "bad_header.msh").read_bytes())


def test_parse_dangling(fixtures):
    with pytest.raises(DanglingNodeReference):
        parse_msh((fixtures / "dangling.msh").read_bytes())


def test_parse_no_triangles():
    text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n" \
           "$Elements\n1\n1 1 2 0 1 1 2\n$EndElements\n"
    with pytest.raises(EmptyMesh):
        parse_msh(text)


def test_parse_binary_flag_rejected(fixtures):
    text = (fixtures / "minimal.msh").read_text().replace("2.2 0 8", "2.2 1 8")
    with pytest.raises(MalformedHeader):
        parse_msh(text)


def test_msh_round_trip_is_bit_exact():
    m = generate_icosphere(0.0037, 2, center=(1e-3, -2e-3, 0.5))
    back = parse_msh(write_msh(m))
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


def test_off_round_trip():
    m = generate_icosphere(0.005, 1)
    back = load_off(dump_off(m))
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


# validation


def test_validate_clean_icosphere():
    m, diag = validate(generate_icosphere(0.005, 1))
    assert diag.violations == [] and diag.notes == []


def test_validate_open_boundary():
    m = generate_icosphere(0.005, 1)
    holed = SurfaceMesh(m.vertices, m.triangles[1:])
    _, diag = validate(holed)
    assert any(v.startswith("open-boundary") for v in diag.violations)
    with pytest.raises(OpenBoundary):
        validate(holed, strict=True)


def test_validate_flips_inward_winding():
    m = generate_icosphere(0.005, 1)
    inward = SurfaceMesh(m.vertices, m.triangles[:, ::-1])
    assert inward.signed_volume() < 0
    fixed, diag = validate(inward)
    assert diag.valid
    assert diag.notes == ["orientation flipped"]
    assert fixed.signed_volume() > 0


def test_validate_degenerate_and_nonmanifold():
    m = generate_icosphere(0.005, 0)
    squashed = m.vertices.copy()
    a, b, c = m.triangles[0]
    squashed[c] = squashed[a]
    _, diag = validate(SurfaceMesh(squashed, m.triangles))
    assert any(v.startswith("degenerate-triangle") for v in diag.violations)
    extra = np.vstack([m.triangles, m.triangles[:1]])
    _, diag = validate(SurfaceMesh(m.vertices, extra))
    assert any(v.startswith("non-manifold-edge") for v in diag.violations)


def test_validate_idempotent():
    m = generate_icosphere(0.005, 1)
    inward = SurfaceMesh(m.vertices, m.triangles[:, ::-1])
    once, _ = validate(inward)
    twice, d2 = validate(once)
    thrice, d3 = validate(twice)
    assert d2 == d3
    assert np.array_equal(twice.triangles, thrice.triangles)
    assert np.array_equal(once.triangles, twice.triangles)


# scenes


def test_scene_rejects_overlap_and_empty():
    a = generate_icosphere(0.005, 0)
    b = generate_icosphere(0.005, 0, center=(0.004, 0, 0))
    with pytest.raises(SceneError):
        Scene([a, b])
    with pytest.raises(SceneError):
        Scene([])


def test_scene_offsets_and_union():
    a = generate_icosphere(0.005, 1, center=(-0.01, 0, 0))
    b = generate_icosphere(0.005, 0, center=(0.01, 0, 0))
    s = Scene([a, b], "water", ["fat", "bone"])
    assert list(s.offsets) == [0, 42, 54]
    u = s.union()
    assert u.n_vertices == 54 and u.n_triangles == 80 + 20
    assert np.array_equal(u.vertices[42:], b.vertices)
    assert [m.interface_id for m in s.meshes] == [1, 2]

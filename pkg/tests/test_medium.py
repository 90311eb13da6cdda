import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transbem.errors import ConfigError, NonPositiveKR
from transbem.medium import (
    PRESETS,
    Material,
    PlaneWave,
    damped_wavenumber,
    incident_traces,
    material,
    osrc_params,
    wavenumber,
)
from transbem.mesh import SurfaceMesh, generate_icosphere


def test_water_and_bone_at_1mhz():
    k = wavenumber(PRESETS["water"], 1e6)
    assert k.real == pytest.approx(4188.7902, abs=5e-5)
    assert k.imag == pytest.approx(0.015, abs=1e-15)
    k = wavenumber(PRESETS["bone"], 1e6)
    assert k.real == pytest.approx(1539.996, abs=5e-4)
    assert k.imag == pytest.approx(47.20, abs=1e-12)


def test_presets_match_table():
    assert (PRESETS["water"].rho, PRESETS["water"].c, PRESETS["water"].alpha, PRESETS["water"].b) == (1000, 1500, 0.015, 2)
    assert (PRESETS["fat"].rho, PRESETS["fat"].c, PRESETS["fat"].alpha, PRESETS["fat"].b) == (917, 1412, 9.334, 1)
    assert (PRESETS["bone"].rho, PRESETS["bone"].c, PRESETS["bone"].alpha, PRESETS["bone"].b) == (1912, 4080, 47.20, 1)


def test_lossless_is_real():
    k = wavenumber(Material(1000, 1500), 3e5)
    assert k.imag == 0 and k.real == pytest.approx(2 * np.pi * 3e5 / 1500)


@given(st.floats(1e3, 1e7), st.floats(0.1, 10))
@settings(max_examples=40)
def test_lossless_homogeneous_degree_one(f, c):
    mat = Material(1000.0, 1500.0)
    assert wavenumber(mat, c * f).real / wavenumber(mat, f).real == pytest.approx(c, rel=1e-14)


def test_material_resolution():
    assert material("Bone") is PRESETS["bone"]
    assert material((1.0, 2.0, 0.0, 0.0)) == Material(1.0, 2.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        material("granite")
    with pytest.raises(ValueError):
        Material(-1.0, 1500.0)


def test_damped_wavenumber_examples():
    k = 2094.395
    assert damped_wavenumber(k, 0.005) / k == pytest.approx(1 + 0.08357j, abs=1e-5)
    assert damped_wavenumber(k, 0.0005) / k == pytest.approx(1 + 0.38789j, abs=1e-5)
    assert damped_wavenumber(k, 1e12) / k == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(NonPositiveKR):
        damped_wavenumber(k, 0.0)


def test_damping_uses_real_part_only():
    k = 2000 + 30j
    assert damped_wavenumber(k, 0.001) == pytest.approx(k * (1 + 0.4j * 2.0 ** (-2 / 3)))


@given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0))
@settings(max_examples=40)
def test_damping_decreases_with_radius(r1, r2):
    if r1 == r2:
        return
    lo, hi = sorted((r1, r2))
    assert damped_wavenumber(2000.0, lo).imag > damped_wavenumber(2000.0, hi).imag


def test_osrc_defaults():
    p = osrc_params(1000.0, 0.005)
    assert p.r_eff == pytest.approx(0.0005)
    assert p.n_pade == 4 and p.theta == pytest.approx(np.pi / 3)
    assert p.k_eps.imag > 0
    assert osrc_params(1000.0, 0.005, r_eff=1e-5).r_eff == 1e-5


def test_plane_wave_traces():
    wave = PlaneWave((0, 0, 2.0), 1000.0)
    assert np.allclose(wave.direction, (0, 0, 1), atol=1e-15)
    assert wave(np.zeros((1, 3)))[0] == 1
    assert wave(np.array([[0, 0, np.pi / 1000.0]]))[0] == pytest.approx(-1, abs=1e-12)
    flat = SurfaceMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]))
    dirichlet, neumann = incident_traces(wave, flat)
    assert dirichlet[0] == 1
    assert neumann[0] == pytest.approx(1000j)


def test_incident_traces_on_sphere():
    m = generate_icosphere(0.005, 2)
    wave = PlaneWave((1, 0, 0), 1047.0 + 0.5j)
    d, n = incident_traces(wave, m)
    assert np.allclose(d, np.exp(1j * wave.wavenumber * m.vertices[:, 0]))
    assert np.allclose(n, 1j * wave.wavenumber * m.vertex_normals[:, 0] * d)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(0, 0.1))
@settings(max_examples=40)
def test_incident_bounded_in_forward_halfspace(x, s):
    wave = PlaneWave((0.3, -0.4, 0.5), 2000.0 + 5.0j)
    p = np.array(x) * s
    if p @ np.asarray(wave.direction) >= 0:
        assert abs(wave(p[None])[0]) <= 1.0 + 1e-15

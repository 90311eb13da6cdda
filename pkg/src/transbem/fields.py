"""Volume fields from surface traces, region classification and grid error norms."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analytic import series_field, sphere_coefficients
from .errors import MaskMismatch
from .formulations import SurfaceSolution
from .medium import PlaneWave, material, wavenumber
from .mesh import Scene
from .quadrature import triangle_rule

EXTERIOR = 0
EXCLUDED = -1

# fixed, deliberately irrational ray direction for the parity test
_RAY = np.array([0.5773502691896258, 0.5345224838248488, 0.6172133998483676])
_RAY = _RAY / np.linalg.norm(_RAY)


def region_name(tag: int) -> str:
    if tag == EXTERIOR:
        return "exterior"
    if tag == EXCLUDED:
        return "excluded"
    return f"interior {tag}"


def classify_points(scene: Scene, points, band: float = 0.5) -> np.ndarray:
    """Region tag per point: 0 exterior, ``m`` inside interface ``m``, -1 excluded.

    Points closer than ``band`` times the longest edge of the nearest
    triangle are excluded.
    """
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    tags = np.zeros(len(pts), dtype=np.int64)
    for m, mesh in enumerate(scene.meshes, start=1):
        reach = mesh.h
        lo = mesh.vertices.min(axis=0) - reach
        hi = mesh.vertices.max(axis=0) + reach
        cand = np.nonzero(np.all((pts >= lo) & (pts <= hi), axis=1))[0]
        if cand.size == 0:
            continue
        sub = pts[cand]
        dist, tri = _kernels.nearest_triangle(mesh.vertices, mesh.triangles, sub)
        edges = np.linalg.norm(
            mesh.vertices[mesh.triangles] - mesh.vertices[np.roll(mesh.triangles, 1, axis=1)], axis=2
        ).max(axis=1)
        inside = _kernels.ray_crossings(mesh.vertices, mesh.triangles, sub, _RAY) % 2 == 1
        tags[cand[inside]] = m
        tags[cand[dist < band * edges[tri]]] = EXCLUDED
    return tags


def classify_point(scene: Scene, x, band: float = 0.5) -> int:
    return int(classify_points(scene, [x], band)[0])


@dataclass
class FieldGrid:
    """Field values on a point set; excluded points carry NaN."""

    points: np.ndarray
    values: np.ndarray
    regions: np.ndarray
    shape: tuple | None = None

    @property
    def mask(self) -> np.ndarray:
        return self.regions != EXCLUDED

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "re", "im", "region"])
            for p, v, r in zip(self.points, self.values, self.regions):
                w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                            repr(float(v.real)), repr(float(v.imag)), region_name(int(r))])

    def summary(self) -> dict:
        return {
            "n_points": int(len(self.points)),
            "n_excluded": int(np.sum(~self.mask)),
            "shape": list(self.shape) if self.shape else None,
        }


def square_grid(n: int = 101, size: float = 0.03, z: float = 0.0) -> np.ndarray:
    """``n x n`` points on the ``size x size`` square in the x-y plane, centred at the origin."""
    s = np.linspace(-size / 2, size / 2, n)
    X, Y = np.meshgrid(s, s, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z)])


def _composite_rules(order, levels):
    base_b, base_w = triangle_rule(order)
    rows, offsets = [], [0]
    for level in range(levels + 1):
        n = 2**level
        tris = []
        for i in range(n):
            for j in range(n - i):
                tris.append([(i, j), (i + 1, j), (i, j + 1)])
                if i + j < n - 1:
                    tris.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
        for tri in tris:
            # lattice point (i, j) has barycentric coordinates (1 - (i+j)/n, i/n, j/n)
            corners = np.array([[1 - (i + j) / n, i / n, j / n] for i, j in tri])
            b = base_b @ corners
            rows.append(np.column_stack([b, base_w / n**2]))
        offsets.append(offsets[-1] + len(tris) * len(base_w))
    return np.vstack(rows), np.asarray(offsets, dtype=np.int64)


def layer_potentials(mesh, k, points, sl_density, dl_density, order: int = 6, levels: int = 5,
                     near_factor: float = 2.0):
    """Single- and double-layer potentials of P1 densities at off-surface points.

    Elements within ``near_factor`` diameters of a point are integrated with
    up to ``levels`` uniform refinements.
    """
    rules, offsets = _composite_rules(order, levels)
    diam = np.linalg.norm(
        mesh.vertices[mesh.triangles] - mesh.vertices[np.roll(mesh.triangles, 1, axis=1)], axis=2
    ).max(axis=1)
    return _kernels.potentials(
        mesh.vertices, mesh.triangles, np.ascontiguousarray(mesh.normals), mesh.areas, diam,
        rules, offsets, float(near_factor), complex(k),
        np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64),
        np.asarray(sl_density, dtype=np.complex128), np.asarray(dl_density, dtype=np.complex128),
    )


def evaluate_potentials(solution: SurfaceSolution, scene: Scene, points, materials=None,
                        wave: PlaneWave | None = None, f: float | None = None,
                        regions=None, **quad) -> FieldGrid:
    """Total field from the representation formulas.

    Outside all objects ``u = u_inc + sum_n (K_{0,n} phi_n - V_{0,n} psi_n)``;
    inside object ``m``, ``u = V_m[(rho_m/rho_0) psi_m] - K_m[phi_m]``. The
    incident wave defaults to the one stored on the solution.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    wave = wave or solution.wave
    if wave is None:
        raise ValueError("an incident wave is required")
    ext, ints = materials if materials is not None else (scene.exterior_material, scene.interior_materials)
    ext = material(ext)
    ints = [material(m) for m in ints]
    freq = f if f is not None else solution.frequency
    k0 = complex(wave.wavenumber)
    tags = classify_points(scene, pts) if regions is None else np.asarray(regions)
    values = np.full(len(pts), np.nan + 0j)

    sel = np.nonzero(tags == EXTERIOR)[0]
    if sel.size:
        u = wave(pts[sel])
        for n, mesh in enumerate(scene.meshes):
            sl, dl = layer_potentials(mesh, k0, pts[sel], solution.psi[n], solution.phi[n], **quad)
            u = u + dl - sl
        values[sel] = u
    for m, mesh in enumerate(scene.meshes, start=1):
        sel = np.nonzero(tags == m)[0]
        if not sel.size:
            continue
        if freq is None:
            raise ValueError("the frequency is needed for interior fields")
        km = wavenumber(ints[m - 1], freq)
        ratio = ints[m - 1].rho / ext.rho
        sl, dl = layer_potentials(mesh, km, pts[sel], ratio * solution.psi[m - 1], solution.phi[m - 1], **quad)
        values[sel] = sl - dl
    return FieldGrid(pts, values, tags)


def relative_error_grid(computed: FieldGrid, reference: FieldGrid, amplitude: bool = True) -> float:
    """``|| |c| - |r| ||_2 / || |r| ||_2`` over the non-excluded points.

    With ``amplitude=False`` the complex difference is used instead.
    """
    if computed.points.shape != reference.points.shape or not np.array_equal(computed.mask, reference.mask):
        raise MaskMismatch("grids differ in points or exclusion mask")
    m = computed.mask
    c, r = computed.values[m], reference.values[m]
    if amplitude:
        return float(np.linalg.norm(np.abs(c) - np.abs(r)) / np.linalg.norm(np.abs(r)))
    return float(np.linalg.norm(c - r) / np.linalg.norm(r))


def series_reference(solution: SurfaceSolution, scene: Scene, points=None, regions=None,
                     **quad) -> tuple[FieldGrid, FieldGrid]:
    """BEM field and the exact series field on the same points for a one-sphere scene.

    ``points`` defaults to the 101 x 101 grid of :func:`square_grid`. Returns
    ``(computed, reference)`` sharing one exclusion mask.
    """
    if len(scene) != 1:
        raise ValueError("the series solution covers a single sphere")
    if solution.wave is None or solution.frequency is None:
        raise ValueError("the solution must carry its incident wave and frequency")
    pts = square_grid() if points is None else np.atleast_2d(np.asarray(points, dtype=np.float64))
    tags = classify_points(scene, pts) if regions is None else np.asarray(regions)
    computed = evaluate_potentials(solution, scene, pts, regions=tags, **quad)
    ext, inner = material(scene.exterior_material), material(scene.interior_materials[0])
    f = solution.frequency
    series = sphere_coefficients(scene.radii[0], wavenumber(ext, f), wavenumber(inner, f), ext.rho, inner.rho)
    ref = np.full(len(pts), np.nan + 0j)
    keep = tags != EXCLUDED
    ref[keep] = series_field(series, pts[keep], solution.wave.direction, scene.meshes[0].center)
    ref[keep] *= solution.wave.amplitude
    return computed, FieldGrid(pts, ref, tags)


def write_summary(path, grid: FieldGrid, **extra):
    with open(path, "w") as fh:
        json.dump({**grid.summary(), **extra}, fh, indent=2)

"""Closed triangulated interfaces: generation, MSH 2.2 reading and validation."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DanglingNodeReference,
    DegenerateTriangle,
    EmptyMesh,
    MalformedHeader,
    NonManifoldEdge,
    OpenBoundary,
    ResolutionOverflow,
    SceneError,
)

DEGENERATE_AREA = 1e-16
SUBDIVISION_CAP = 9


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """A closed triangulated surface with outward per-triangle normals.

    ``vertices`` is ``(n, 3)`` float, ``triangles`` is ``(t, 3)`` int.
    Normals and areas are derived from the winding, so a consistently
    counter-clockwise (seen from outside) winding gives outward normals.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    interface_id: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def _cross(self):
        if "cross" not in self._cache:
            p = self.vertices[self.triangles]
            self._cache["cross"] = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return self._cache["cross"]

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross(), axis=1)

    @property
    def normals(self) -> np.ndarray:
        c = self._cross()
        return c / np.linalg.norm(c, axis=1)[:, None]

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals, normalised."""
        acc = np.zeros_like(self.vertices)
        c = self._cross()  # |c| = 2 * area, direction = face normal
        for j in range(3):
            np.add.at(acc, self.triangles[:, j], c)
        return acc / np.linalg.norm(acc, axis=1)[:, None]

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @property
    def h(self) -> float:
        """Mesh width: the maximum edge length."""
        return float(self.edge_lengths().max())

    def signed_volume(self) -> float:
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    @property
    def bounding_radius(self) -> float:
        c = self.center
        return float(np.linalg.norm(self.vertices - c, axis=1).max())

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))

    def translated(self, offset) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices + np.asarray(offset, float), self.triangles, self.interface_id)

    def with_id(self, interface_id: int) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices, self.triangles, interface_id)

    def flipped(self) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices, self.triangles[:, ::-1], self.interface_id)


# --------------------------------------------------------------------------
# icosphere

_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def _subdivide(verts, faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    nt = faces.shape[0]
    m01 = inv[:nt] + verts.shape[0]
    m12 = inv[nt : 2 * nt] + verts.shape[0]
    m20 = inv[2 * nt :] + verts.shape[0]
    a, b, c = faces.T
    new_faces = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([verts, mid]), new_faces


def generate_icosphere(radius: float, subdivisions: int, center=(0.0, 0.0, 0.0),
                       interface_id: int = 1) -> SurfaceMesh:
    """Recursively subdivided icosahedron with vertices projected onto the sphere."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if subdivisions < 0:
        raise ValueError("subdivisions must be non-negative")
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1)[:, None]
    faces = _ICO_FACES
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return SurfaceMesh(verts, faces, interface_id)


@lru_cache(maxsize=None)
def _unit_max_edge(level: int) -> float:
    # All icosahedron faces are congruent and midpoint reprojection is local,
    # so subdividing a single face as a triangle soup gives the global maximum.
    v = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1)[:, None]
    tri = v[_ICO_FACES[:1]]  # (1, 3, 3)
    for _ in range(level):
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]

        def mid(p, q):
            m = p + q
            return m / np.linalg.norm(m, axis=1)[:, None]

        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tri = np.concatenate(
            [
                np.stack([a, ab, ca], axis=1),
                np.stack([b, bc, ab], axis=1),
                np.stack([c, ca, bc], axis=1),
                np.stack([ab, bc, ca], axis=1),
            ]
        )
    d = np.linalg.norm(tri - np.roll(tri, 1, axis=1), axis=2)
    return float(d.max())


def icosphere_max_edge(radius: float, subdivisions: int) -> float:
    return radius * _unit_max_edge(subdivisions)


def subdivisions_for_density(radius: float, h_target: float, cap: int = SUBDIVISION_CAP) -> int:
    """Smallest subdivision level whose maximum edge length is at most ``h_target``."""
    if h_target <= 0:
        raise ValueError("h_target must be positive")
    for s in range(cap + 1):
        if icosphere_max_edge(radius, s) <= h_target:
            return s
    raise ResolutionOverflow(
        f"mesh width {h_target:g} m needs more than {cap} subdivisions of a radius-{radius:g} m sphere"
    )


# --------------------------------------------------------------------------
# MSH 2.2 ASCII and the plain-text dump format


def parse_msh(text, interface_id: int = 1) -> SurfaceMesh:
    """Read the 3-node triangles of an ASCII Gmsh 2.2 file.

    Accepts ``str``, ``bytes`` or a file-like object. Other element types are
    skipped and node ids are remapped to dense 0-based indices in order of
    first appearance in ``$Nodes``. Unreferenced nodes are dropped.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]

    def section(name):
        try:
            start = lines.index(f"${name}")
            end = lines.index(f"$End{name}", start)
        except ValueError:
            return None
        return lines[start + 1 : end]

    fmt = section("MeshFormat")
    if not fmt or fmt[0].split()[0] != "2.2":
        raise MalformedHeader("expected '$MeshFormat' version 2.2")
    if fmt[0].split()[1] != "0":
        raise MalformedHeader("only ASCII MSH files are supported")

    nodes = section("Nodes")
    elements = section("Elements")
    if nodes is None or elements is None:
        raise MalformedHeader("missing $Nodes or $Elements section")

    n_nodes = int(nodes[0])
    ids = {}
    coords = np.empty((n_nodes, 3))
    for i, ln in enumerate(nodes[1 : 1 + n_nodes]):
        parts = ln.split()
        ids[int(parts[0])] = i
        coords[i] = [float(x) for x in parts[1:4]]

    n_elem = int(elements[0])
    tris = []
    for ln in elements[1 : 1 + n_elem]:
        parts = [int(x) for x in ln.split()]
        if parts[1] != 2:
            continue
        ntags = parts[2]
        refs = parts[3 + ntags : 6 + ntags]
        try:
            tris.append([ids[r] for r in refs])
        except KeyError as exc:
            raise DanglingNodeReference(f"element {parts[0]} references unknown node {exc.args[0]}") from None
    if not tris:
        raise EmptyMesh("no triangle elements found")

    tris = np.asarray(tris, dtype=np.int64)
    used = np.unique(tris)
    remap = np.full(n_nodes, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return SurfaceMesh(coords[used], remap[tris], interface_id)


def write_msh(mesh: SurfaceMesh) -> str:
    """Serialise to ASCII MSH 2.2 with full float round-trip precision."""
    out = io.StringIO()
    out.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n")
    out.write(f"{mesh.n_vertices}\n")
    for i, p in enumerate(mesh.vertices, start=1):
        out.write(f"{i} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
    out.write("$EndNodes\n$Elements\n")
    out.write(f"{mesh.n_triangles}\n")
    for i, t in enumerate(mesh.triangles, start=1):
        out.write(f"{i} 2 2 {mesh.interface_id} {mesh.interface_id} {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
    out.write("$EndElements\n")
    return out.getvalue()


def dump_off(mesh: SurfaceMesh) -> str:
    """Plain-text dump: counts line, coordinate rows, index rows."""
    out = io.StringIO()
    out.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
    for p in mesh.vertices:
        out.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
    for t in mesh.triangles:
        out.write(f"{t[0]} {t[1]} {t[2]}\n")
    return out.getvalue()


def load_off(text: str, interface_id: int = 1) -> SurfaceMesh:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    nv, nt = int(rows[0][0]), int(rows[0][1])
    verts = np.array([[float(x) for x in r] for r in rows[1 : 1 + nv]])
    tris = np.array([[int(x) for x in r] for r in rows[1 + nv : 1 + nv + nt]], dtype=np.int64)
    return SurfaceMesh(verts, tris, interface_id)


# --------------------------------------------------------------------------
# validation


@dataclass
class Diagnostics:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __eq__(self, other):
        return self.violations == other.violations and self.notes == other.notes


_ERRORS = {
    "open-boundary": OpenBoundary,
    "non-manifold-edge": NonManifoldEdge,
    "degenerate-triangle": DegenerateTriangle,
}


def validate(mesh: SurfaceMesh, strict: bool = False):
    """Check the closed-manifold invariants and fix a globally inverted winding.

    Returns ``(mesh, diagnostics)``. The returned mesh has outward normals if
    the input was consistently wound. With ``strict=True`` the first
    violation is raised as its exception type instead of being returned.
    """
    diag = Diagnostics()
    t = mesh.triangles
    if t.size and (t.min() < 0 or t.max() >= mesh.n_vertices):
        diag.violations.append("index-out-of-range")
    else:
        bad = np.flatnonzero(mesh.areas <= DEGENERATE_AREA)
        if bad.size:
            diag.violations.append(f"degenerate-triangle: {bad.size} triangles with area <= {DEGENERATE_AREA:g}")

        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        undirected = np.sort(directed, axis=1)
        _, counts = np.unique(undirected, axis=0, return_counts=True)
        if np.any(counts == 1):
            diag.violations.append(f"open-boundary: {int(np.sum(counts == 1))} edges with one incident face")
        if np.any(counts > 2):
            diag.violations.append(f"non-manifold-edge: {int(np.sum(counts > 2))} edges with more than two faces")
        if not diag.violations:
            _, dcounts = np.unique(directed, axis=0, return_counts=True)
            if np.any(dcounts > 1):
                diag.violations.append("inconsistent-orientation: neighbouring faces wound in opposite senses")

        if not diag.violations and mesh.signed_volume() < 0:
            mesh = mesh.flipped()
            diag.notes.append("orientation flipped")

    if strict and diag.violations:
        kind = diag.violations[0].split(":")[0]
        raise _ERRORS.get(kind, NonManifoldEdge)(diag.violations[0])
    return mesh, diag


# --------------------------------------------------------------------------
# scenes


@dataclass(frozen=True, eq=False)
class Scene:
    """Disjoint closed interfaces embedded in one exterior medium."""

    meshes: tuple
    exterior_material: object = "water"
    interior_materials: tuple = ()
    radii: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        meshes = tuple(self.meshes)
        if not meshes:
            raise SceneError("a scene needs at least one interface")
        meshes = tuple(m.with_id(i + 1) if m.interface_id != i + 1 else m for i, m in enumerate(meshes))
        object.__setattr__(self, "meshes", meshes)
        mats = tuple(self.interior_materials) or ("water",) * len(meshes)
        if len(mats) != len(meshes):
            raise SceneError("one interior material per interface is required")
        object.__setattr__(self, "interior_materials", mats)
        radii = tuple(self.radii) or tuple(m.bounding_radius for m in meshes)
        object.__setattr__(self, "radii", tuple(float(r) for r in radii))
        boxes = [(m.vertices.min(axis=0), m.vertices.max(axis=0)) for m in meshes]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                lo = np.maximum(boxes[i][0], boxes[j][0])
                hi = np.minimum(boxes[i][1], boxes[j][1])
                if np.all(hi > lo):
                    raise SceneError(f"interfaces {i + 1} and {j + 1} have overlapping bounding boxes")

    def __len__(self):
        return len(self.meshes)

    @property
    def offsets(self) -> np.ndarray:
        """Start index of each interface's vertices in the stacked numbering."""
        return np.concatenate([[0], np.cumsum([m.n_vertices for m in self.meshes])])

    @property
    def n_dofs(self) -> int:
        return int(self.offsets[-1])

    def union(self) -> SurfaceMesh:
        """All interfaces as one (disconnected) mesh with stacked numbering."""
        if len(self.meshes) == 1:
            return self.meshes[0]
        if "union" not in self._cache:
            off = self.offsets
            verts = np.vstack([m.vertices for m in self.meshes])
            tris = np.vstack([m.triangles + off[i] for i, m in enumerate(self.meshes)])
            self._cache["union"] = SurfaceMesh(verts, tris, 0)
        return self._cache["union"]

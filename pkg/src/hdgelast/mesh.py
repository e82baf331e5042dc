"""Simplicial meshes: face topology with dual indexing, outward normals,
boundary tags, structured generators and an ASCII import/export format.

Faces are numbered deterministically by their sorted global vertex ids.
Interior faces carry exactly two (element, local-face) incidences; boundary
faces one, plus a tag in {D, N, R} (Dirichlet, Neumann, Robin).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .exceptions import InputError, MeshValidationError

INTERIOR = "I"
DIRICHLET = "D"
NEUMANN = "N"
ROBIN = "R"

_FACE_TAGS = (DIRICHLET, NEUMANN, ROBIN)


def _local_faces(dim: int):
    """Local face -> tuple of local vertex slots (face l is opposite vertex l)."""
    nvert = dim + 1
    return [tuple(i for i in range(nvert) if i != l) for l in range(nvert)]


class Mesh:
    """Immutable simplicial mesh (triangles in 2D, tetrahedra in 3D)."""

    def __init__(self, vertices, elements, boundary_tags=None,
                 fix_orientation: bool = True):
        self.vertices = np.asarray(vertices, dtype=float)
        self.elements = np.asarray(elements, dtype=int)
        self.dim = self.vertices.shape[1]
        if self.dim not in (2, 3):
            raise MeshValidationError(f"mesh dimension must be 2 or 3, got {self.dim}")
        if self.elements.shape[1] != self.dim + 1:
            raise MeshValidationError("element tuples do not match the dimension")
        if self.elements.size and (self.elements.min() < 0
                                   or self.elements.max() >= len(self.vertices)):
            raise MeshValidationError("element vertex index out of range")
        seen = set()
        for e, el in enumerate(self.elements):
            key = tuple(sorted(el))
            if len(set(el)) != len(el):
                raise MeshValidationError(f"element {e} repeats a vertex")
            if key in seen:
                raise MeshValidationError(f"duplicated element {key}")
            seen.add(key)
        if fix_orientation:
            self._orient_positive()
        # boundary tags keyed by sorted vertex tuples
        self.boundary_tags = dict(boundary_tags or {})
        for key, tag in self.boundary_tags.items():
            if tag not in _FACE_TAGS:
                raise MeshValidationError(f"unknown boundary tag {tag!r}")
        self.n_faces_per_element = self.dim + 1

    def _orient_positive(self):
        v = self.vertices
        for e, el in enumerate(self.elements):
            j = (v[el[1:]] - v[el[0]]).T
            if np.linalg.det(j) < 0.0:
                self.elements[e, -2], self.elements[e, -1] = el[-1], el[-2]

    # -- geometry -----------------------------------------------------------

    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def jacobian(self, e: int):
        """(J, detJ, inv(J)^T) of the affine map from the unit simplex."""
        verts = self.element_vertices(e)
        j = (verts[1:] - verts[0]).T
        det = np.linalg.det(j)
        return j, det, np.linalg.inv(j).T

    def map_to_phys(self, e: int, ref_pts: np.ndarray) -> np.ndarray:
        ref_pts = np.asarray(ref_pts, dtype=float).reshape(-1, self.dim)
        verts = self.element_vertices(e)
        lam0 = 1.0 - ref_pts.sum(axis=1)
        return lam0[:, None] * verts[0] + ref_pts @ verts[1:]

    def map_to_ref(self, e: int, phys_pts: np.ndarray) -> np.ndarray:
        phys_pts = np.asarray(phys_pts, dtype=float).reshape(-1, self.dim)
        verts = self.element_vertices(e)
        j = (verts[1:] - verts[0]).T
        return np.linalg.solve(j, (phys_pts - verts[0]).T).T

    def centroid(self, e: int) -> np.ndarray:
        return self.element_vertices(e).mean(axis=0)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def volume(self, e: int) -> float:
        _, det, _ = self.jacobian(e)
        fact = 2.0 if self.dim == 2 else 6.0
        return abs(det) / fact

    def __len__(self):
        return len(self.elements)


@dataclass
class FaceMap:
    """Dual face indexing: global face id k <-> local incidences (e, l).

    elem_face[e, l] is the global face id; normals[e, l] the outward unit
    normal of that element side.  Face vertex tuples are stored sorted
    (canonical orientation), which makes the trace-dof gather a pure index
    lookup with no runtime search.
    """

    mesh: Mesh
    face_vertices: np.ndarray          # (n_faces, dim) sorted vertex ids
    elem_face: np.ndarray              # (n_elements, n_f)
    normals: np.ndarray                # (n_elements, n_f, dim)
    face_tag: list                     # per face: I, D, N or R
    face_sides: list                   # per face: [(e, l)] with 1 or 2 entries
    face_measure: np.ndarray = field(default=None)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    def interior_faces(self):
        return [k for k, t in enumerate(self.face_tag) if t == INTERIOR]

    def boundary_faces(self):
        return [k for k, t in enumerate(self.face_tag) if t != INTERIOR]

    def face_map_to_phys(self, k: int, ref_pts: np.ndarray) -> np.ndarray:
        """Map reference-face points into physical space (canonical frame)."""
        ref_pts = np.asarray(ref_pts, dtype=float).reshape(-1, self.mesh.dim - 1)
        verts = self.mesh.vertices[self.face_vertices[k]]
        lam0 = 1.0 - ref_pts.sum(axis=1)
        return lam0[:, None] * verts[0] + ref_pts @ verts[1:]

    def side_node_permutation(self, order: int, k: int, side: int) -> np.ndarray:
        """Permutation aligning one side's local face-node layout with the
        canonical (sorted-vertex) layout, matched by physical position."""
        from .basis import simplex_nodes

        e, l = self.face_sides[k][side]
        local = _local_faces(self.mesh.dim)[l]
        verts_local = self.mesh.vertices[self.mesh.elements[e][list(local)]]
        nodes = simplex_nodes(order, self.mesh.dim - 1)
        lam0 = 1.0 - nodes.sum(axis=1)
        pts_local = lam0[:, None] * verts_local[0] + nodes @ verts_local[1:]
        pts_canon = self.face_map_to_phys(k, nodes)
        perm = np.empty(len(nodes), dtype=int)
        scale = max(np.abs(pts_canon).max(), 1.0)
        for i, p in enumerate(pts_local):
            d = np.linalg.norm(pts_canon - p, axis=1)
            j = int(np.argmin(d))
            if d[j] > 1e-12 * scale:
                raise MeshValidationError(
                    f"face {k} side {side}: node mismatch {d[j]:.3e}")
            perm[i] = j
        return perm


def build_faces(mesh: Mesh) -> FaceMap:
    """Construct the global face table, classification and outward normals."""
    dim = mesh.dim
    local = _local_faces(dim)
    incid: dict[tuple, list] = {}
    for e, el in enumerate(mesh.elements):
        for l, slots in enumerate(local):
            key = tuple(sorted(int(el[s]) for s in slots))
            incid.setdefault(key, []).append((e, l))

    keys = sorted(incid.keys())
    face_id = {k: i for i, k in enumerate(keys)}
    n_f = len(local)
    elem_face = np.full((len(mesh), n_f), -1, dtype=int)
    normals = np.zeros((len(mesh), n_f, dim))
    face_tag = []
    face_sides = []
    measures = np.zeros(len(keys))

    for key in keys:
        sides = incid[key]
        if len(sides) > 2:
            raise MeshValidationError(f"face {key} has {len(sides)} incidences")
        face_sides.append(sides)
        if len(sides) == 2:
            face_tag.append(INTERIOR)
        else:
            face_tag.append(mesh.boundary_tags.get(key, DIRICHLET))

    for key, tag in mesh.boundary_tags.items():
        k = face_id.get(tuple(sorted(key)))
        if k is None or len(incid[tuple(sorted(key))]) != 1:
            raise MeshValidationError(f"tagged face {key} is not a boundary face")

    for k, key in enumerate(keys):
        verts = mesh.vertices[list(key)]
        if dim == 2:
            t = verts[1] - verts[0]
            n = np.array([t[1], -t[0]])
            measures[k] = np.linalg.norm(t)
        else:
            n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
            measures[k] = 0.5 * np.linalg.norm(n)
        n = n / np.linalg.norm(n)
        mid = verts.mean(axis=0)
        for e, l in incid[key]:
            elem_face[e, l] = k
            sign = 1.0 if np.dot(n, mid - mesh.centroid(e)) > 0.0 else -1.0
            normals[e, l] = sign * n

    return FaceMap(mesh, np.array(keys), elem_face, normals, face_tag,
                   face_sides, measures)


# ---------------------------------------------------------------------------
# Generators


def generate_box(extent, n: int, dim: int = 2, tag: str = DIRICHLET) -> Mesh:
    """Structured simplicial mesh of a box: 2 n^2 triangles or 6 n^3 tets.

    extent is one (lo, hi) interval per axis.  All boundary faces carry the
    same tag (Dirichlet by default).
    """
    if n < 1:
        raise InputError("n must be >= 1")
    extent = np.asarray(extent, dtype=float).reshape(dim, 2)
    axes = [np.linspace(extent[d, 0], extent[d, 1], n + 1) for d in range(dim)]

    if dim == 2:
        xx, zz = np.meshgrid(axes[0], axes[1], indexing="ij")
        verts = np.stack([xx.ravel(), zz.ravel()], axis=1)
        vid = lambda i, j: i * (n + 1) + j
        elems = []
        for i in range(n):
            for j in range(n):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                elems.append((v00, v10, v11))
                elems.append((v00, v11, v01))
    elif dim == 3:
        xx, yy, zz = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
        verts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
        stride = ((n + 1) ** 2, n + 1, 1)
        vid = lambda i, j, k: i * stride[0] + j * stride[1] + k
        elems = []
        unit = np.eye(3, dtype=int)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    base = np.array([i, j, k])
                    # Kuhn subdivision: one tet per axis permutation
                    for perm in permutations(range(3)):
                        p0 = base
                        p1 = p0 + unit[perm[0]]
                        p2 = p1 + unit[perm[1]]
                        p3 = base + 1
                        elems.append(tuple(vid(*p) for p in (p0, p1, p2, p3)))
    else:
        raise InputError("dim must be 2 or 3")

    mesh = Mesh(verts, np.array(elems, dtype=int))
    tags = {}
    fm = build_faces(mesh)
    for k in fm.boundary_faces():
        tags[tuple(fm.face_vertices[k])] = tag
    return Mesh(mesh.vertices, mesh.elements, tags)


def generate_disk(radius: float = 1.0, n_layers: int = 8, ratio: float = 0.7,
                  n_theta0: int = 8, tag: str = ROBIN) -> Mesh:
    """Layered triangulation of a disk, graded toward the boundary.

    Radial spacings follow a geometric progression with the given ratio
    (< 1 refines toward the boundary); the angular resolution doubles
    whenever ring edges grow too long relative to the local layer height,
    using a 3-triangle transition pattern.
    """
    if n_layers < 2:
        raise InputError("n_layers must be >= 2")
    if not 0.0 < ratio <= 1.0:
        raise InputError("ratio must be in (0, 1]")
    steps = ratio ** np.arange(n_layers)
    radii = radius * np.cumsum(steps) / steps.sum()
    radii[-1] = radius

    verts = [np.zeros(2)]
    rings = []
    m = n_theta0
    prev_r = 0.0
    for i, r in enumerate(radii):
        dr = r - prev_r
        next_dr = (radii[i + 1] - r) if i + 1 < len(radii) else dr
        if i > 0 and 2.0 * np.pi * r / m > 1.5 * max(dr, next_dr):
            m *= 2
        theta = 2.0 * np.pi * np.arange(m) / m
        ring = [len(verts) + j for j in range(m)]
        verts.extend(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
        rings.append(ring)
        prev_r = r

    elems = []
    inner = rings[0]
    m0 = len(inner)
    for j in range(m0):
        elems.append((0, inner[j], inner[(j + 1) % m0]))
    for a, b in zip(rings[:-1], rings[1:]):
        ma, mb = len(a), len(b)
        if mb == ma:
            for j in range(ma):
                jn = (j + 1) % ma
                elems.append((a[j], b[j], b[jn]))
                elems.append((a[j], b[jn], a[jn]))
        elif mb == 2 * ma:
            for j in range(ma):
                jn = (j + 1) % ma
                elems.append((a[j], b[2 * j], b[2 * j + 1]))
                elems.append((a[j], b[2 * j + 1], a[jn]))
                elems.append((a[jn], b[2 * j + 1], b[(2 * j + 2) % mb]))
        else:
            raise MeshValidationError("unsupported ring refinement jump")

    mesh = Mesh(np.array(verts), np.array(elems, dtype=int))
    tags = {}
    fm = build_faces(mesh)
    for k in fm.boundary_faces():
        tags[tuple(fm.face_vertices[k])] = tag
    return Mesh(mesh.vertices, mesh.elements, tags)


# ---------------------------------------------------------------------------
# ASCII format: header `dim n_vertices n_elements n_tagged_faces`, vertex
# lines `x y [z]`, element lines of one-based vertex ids, tagged-face lines
# `tag v1 v2 [v3]`.


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"{mesh.dim} {len(mesh.vertices)} {len(mesh.elements)} "
             f"{len(mesh.boundary_tags)}"]
    for v in mesh.vertices:
        lines.append(" ".join(repr(float(x)) for x in v))
    for el in mesh.elements:
        lines.append(" ".join(str(int(i) + 1) for i in el))
    for key in sorted(mesh.boundary_tags):
        tag = mesh.boundary_tags[key]
        lines.append(tag + " " + " ".join(str(int(i) + 1) for i in key))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        raw = fh.readlines()

    def fail(lineno, msg):
        raise MeshValidationError(f"{path}:{lineno}: {msg}")

    rows = [(i + 1, ln.split()) for i, ln in enumerate(raw) if ln.strip()]
    if not rows:
        raise MeshValidationError(f"{path}: empty mesh file")
    lineno, head = rows[0]
    if len(head) != 4:
        fail(lineno, "header must be 'dim n_vertices n_elements n_tagged_faces'")
    try:
        dim, n_v, n_e, n_t = (int(x) for x in head)
    except ValueError:
        fail(lineno, "non-integer header entry")
    if dim not in (2, 3):
        fail(lineno, f"dimension must be 2 or 3, got {dim}")
    need = 1 + n_v + n_e + n_t
    if len(rows) != need:
        raise MeshValidationError(
            f"{path}: expected {need} non-empty lines, found {len(rows)}")

    verts = np.empty((n_v, dim))
    for i in range(n_v):
        lineno, parts = rows[1 + i]
        if len(parts) != dim:
            fail(lineno, f"expected {dim} coordinates")
        try:
            verts[i] = [float(x) for x in parts]
        except ValueError:
            fail(lineno, "bad coordinate")

    elems = np.empty((n_e, dim + 1), dtype=int)
    for i in range(n_e):
        lineno, parts = rows[1 + n_v + i]
        if len(parts) != dim + 1:
            fail(lineno, f"expected {dim + 1} vertex ids")
        try:
            elems[i] = [int(x) - 1 for x in parts]
        except ValueError:
            fail(lineno, "bad vertex id")

    tags = {}
    for i in range(n_t):
        lineno, parts = rows[1 + n_v + n_e + i]
        if len(parts) != dim + 1:
            fail(lineno, f"expected tag + {dim} vertex ids")
        tag = parts[0]
        if tag not in _FACE_TAGS:
            fail(lineno, f"unknown tag {tag!r}")
        try:
            key = tuple(sorted(int(x) - 1 for x in parts[1:]))
        except ValueError:
            fail(lineno, "bad vertex id")
        tags[key] = tag

    mesh = Mesh(verts, elems, tags)
    build_faces(mesh)  # validates topology and tag placement
    return mesh

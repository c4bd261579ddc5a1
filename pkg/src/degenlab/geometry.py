"""Conforming triangular meshes of the disk, the annulus and the truncated plane.

Coarse meshes are built from concentric rings of 16 vertices whose radii
are geometric with ratio sqrt(2), anchored at the outer radius, so that
meshes of nested domains share their rings. Consecutive rings are rotated
by half a sector. Disks and truncated planes carry a vertex at the origin.
Refinement is uniform quadrisection; new vertices on an edge joining two
vertices of the same ring are pushed back onto that ring's circle, which
keeps boundary circles exact and meshes nested.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

SECTORS = 16
RING_RATIO = np.sqrt(2.0)
INNERMOST_RING = 1.0 / 32.0
MAX_LEVEL = 10


class MeshError(ValueError):
    """Invalid domain specification or mesh request."""


@dataclass(frozen=True)
class DomainSpec:
    """Domain description.

    ``kind`` is ``"disk"``, ``"annulus"`` or ``"truncated_plane"``. For the
    annulus ``inner_radius`` is the excluded ball radius r. The truncated
    plane is the ball of radius R = ``radius`` about the origin.
    """

    kind: str
    radius: float
    inner_radius: float = 0.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("disk", "annulus", "truncated_plane"):
            raise MeshError(f"unknown domain kind {self.kind!r}")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise MeshError(f"radius must be positive, got {self.radius}")
        if tuple(self.center) != (0.0, 0.0):
            raise MeshError("domains are centred at the origin (the zero of sigma)")
        if self.kind == "annulus":
            if not 0 < self.inner_radius < self.radius:
                raise MeshError(
                    f"annulus requires 0 < r < outer radius, got r={self.inner_radius}, "
                    f"outer={self.radius}")
        elif self.inner_radius != 0.0:
            raise MeshError(f"{self.kind} takes no inner radius")

    @classmethod
    def disk(cls, radius=1.0):
        return cls("disk", float(radius))

    @classmethod
    def annulus(cls, outer_radius, inner_radius):
        return cls("annulus", float(outer_radius), float(inner_radius))

    @classmethod
    def truncated_plane(cls, outer_radius):
        return cls("truncated_plane", float(outer_radius))

    @property
    def area(self):
        return np.pi * (self.radius ** 2 - self.inner_radius ** 2)

    @property
    def boundary_radii(self):
        if self.kind == "annulus":
            return (self.radius, self.inner_radius)
        return (self.radius,)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    spec: DomainSpec
    circles: tuple
    level: int = 0
    h: float = field(init=False)
    origin_distance: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(np.asarray(self.vertices, dtype=float)))
        object.__setattr__(self, "triangles", _frozen(np.asarray(self.triangles, dtype=np.int64)))
        object.__setattr__(self, "boundary_flags", _frozen(np.asarray(self.boundary_flags, dtype=bool)))
        object.__setattr__(self, "origin_distance", _frozen(np.hypot(*self.vertices.T)))
        object.__setattr__(self, "h", float(self.edge_lengths().max()))

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @property
    def interior(self):
        return np.flatnonzero(~self.boundary_flags)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def areas(self):
        return np.abs(self.signed_areas())

    def edges(self):
        """Unique undirected edges and, per edge, the number of adjacent triangles."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def edge_lengths(self):
        e, _ = self.edges()
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_edges(self):
        e, counts = self.edges()
        return e[counts == 1]


def _ring_radii(spec):
    """Ring radii from the outside in; the last entry is the inner boundary for an annulus."""
    R = spec.radius
    if spec.kind == "annulus":
        n = max(1, int(round(np.log(R / spec.inner_radius) / np.log(RING_RATIO))))
        radii = [R * 2.0 ** (-k / 2.0) for k in range(n)] + [spec.inner_radius]
        parity = list(range(n + 1))
    else:
        n = max(2, int(np.ceil(2.0 * np.log2(R / INNERMOST_RING) - 1e-9)))
        radii = [R * 2.0 ** (-k / 2.0) for k in range(n + 1)]
        parity = list(range(n + 1))
    # stagger parity is tied to the absolute ring radius so nested domains agree
    shift = int(round(2.0 * np.log2(R))) if np.isclose(2.0 * np.log2(R), round(2.0 * np.log2(R))) else 0
    return radii, [(p - shift) % 2 for p in parity]


def _coarse_mesh(spec):
    radii, parity = _ring_radii(spec)
    dtheta = 2.0 * np.pi / SECTORS
    verts = []
    rings = []
    for rho, par in zip(radii, parity):
        theta = (np.arange(SECTORS) + 0.5 * par) * dtheta
        start = len(verts)
        verts.extend(np.column_stack([rho * np.cos(theta), rho * np.sin(theta)]))
        rings.append(np.arange(start, start + SECTORS))
    tris = []
    for k in range(len(rings) - 1):
        outer, inner = rings[k], rings[k + 1]
        # inner vertex lying angularly between outer j and j+1
        off = 0 if parity[k + 1] > parity[k] else 1
        for j in range(SECTORS):
            b0 = inner[(j + off) % SECTORS]
            b1 = inner[(j + off + 1) % SECTORS]
            o0, o1 = outer[j], outer[(j + 1) % SECTORS]
            tris.append((o0, o1, b0))
            tris.append((b0, o1, b1))
    if spec.kind != "annulus":
        centre = len(verts)
        verts.append([0.0, 0.0])
        last = rings[-1]
        for j in range(SECTORS):
            tris.append((centre, last[j], last[(j + 1) % SECTORS]))
    verts = np.array(verts)
    tris = np.array(tris, dtype=np.int64)
    tris = _orient(verts, tris)
    boundary = _boundary_flags(verts, spec)
    return Mesh(verts, tris, boundary, spec, tuple(radii), 0)


def _orient(verts, tris):
    p = verts[tris]
    s = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
         - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    tris = tris.copy()
    neg = s < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _boundary_flags(verts, spec):
    rho = np.hypot(verts[:, 0], verts[:, 1])
    tol = 1e-12 * spec.radius
    flags = np.zeros(len(verts), dtype=bool)
    for r in spec.boundary_radii:
        flags |= np.abs(rho - r) <= tol
    return flags


def _ring_index(mesh):
    """Index into ``mesh.circles`` for vertices lying on a ring, else -1."""
    rho = mesh.origin_distance
    idx = np.full(mesh.nv, -1)
    tol = 1e-12 * mesh.spec.radius
    for k, r in enumerate(mesh.circles):
        idx[np.abs(rho - r) <= tol] = k
    return idx


def refine(mesh):
    """Uniform quadrisection with projection of new ring vertices onto their circles."""
    tri = mesh.triangles
    e = np.sort(tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 3)
    mid = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    ring = _ring_index(mesh)
    same = (ring[uniq[:, 0]] >= 0) & (ring[uniq[:, 0]] == ring[uniq[:, 1]])
    if same.any():
        target = np.asarray(mesh.circles)[ring[uniq[same, 0]]]
        m = mid[same]
        mid[same] = m * (target / np.hypot(m[:, 0], m[:, 1]))[:, None]
    nv = mesh.nv
    verts = np.vstack([mesh.vertices, mid])
    m01, m12, m20 = inv[:, 0] + nv, inv[:, 1] + nv, inv[:, 2] + nv
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    children = np.stack([
        np.column_stack([v0, m01, m20]),
        np.column_stack([m01, v1, m12]),
        np.column_stack([m20, m12, v2]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    boundary = _boundary_flags(verts, mesh.spec)
    return Mesh(verts, children, boundary, mesh.spec, mesh.circles, mesh.level + 1)


def build_mesh(spec, level=0):
    """Mesh of ``spec`` after ``level`` uniform refinements (0 <= level <= 10)."""
    if not isinstance(spec, DomainSpec):
        raise MeshError("spec must be a DomainSpec")
    if int(level) != level or not 0 <= level <= MAX_LEVEL:
        raise MeshError(f"level must be an integer in [0, {MAX_LEVEL}], got {level}")
    mesh = _coarse_mesh(spec)
    for _ in range(int(level)):
        mesh = refine(mesh)
    return mesh


def truncation_family(spec_base, radii, level):
    """Meshes of the inner (annulus) or outer (truncated plane) truncations.

    A disk base yields annuli ``Omega minus B_r`` for strictly decreasing
    radii; a truncated-plane base yields balls ``B_R`` for strictly
    increasing radii. All members share ``level``.
    """
    radii = [float(r) for r in radii]
    if len(radii) == 0:
        raise MeshError("empty radius list")
    d = np.diff(radii)
    if spec_base.kind == "disk":
        if np.any(d >= 0):
            raise MeshError(f"inner radii must be strictly decreasing, got {radii}")
        specs = [DomainSpec.annulus(spec_base.radius, r) for r in radii]
    elif spec_base.kind == "truncated_plane":
        if np.any(d <= 0):
            raise MeshError(f"outer radii must be strictly increasing, got {radii}")
        specs = [DomainSpec.truncated_plane(R) for R in radii]
    else:
        raise MeshError("family base must be a disk or a truncated plane")
    return [build_mesh(s, level) for s in specs]


class PointLocator:
    """Barycentric point location on a mesh (KD-tree on centroids)."""

    def __init__(self, mesh, candidates=12):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self._tree = cKDTree(p.mean(axis=1))
        self._k = min(candidates, mesh.nt)
        self._p = p

    def locate(self, points, tol=1e-10):
        """Return (triangle index or -1, barycentric coordinates) per point."""
        points = np.atleast_2d(points)
        _, cand = self._tree.query(points, k=self._k)
        cand = np.atleast_2d(cand)
        found = np.full(len(points), -1)
        bary = np.zeros((len(points), 3))
        best = np.full(len(points), -np.inf)
        for c in cand.T:
            lam = _barycentric(self._p[c], points)
            score = lam.min(axis=1)
            better = (score > best)
            best = np.where(better, score, best)
            found = np.where(better, c, found)
            bary = np.where(better[:, None], lam, bary)
        found[best < -tol] = -1
        return found, bary

    def interpolate(self, values, points, outside=np.nan, tol=1e-10):
        """P1 interpolation of nodal ``values`` at ``points``."""
        tri, lam = self.locate(points, tol)
        out = np.full(len(lam), outside, dtype=float)
        ok = tri >= 0
        out[ok] = np.einsum("ij,ij->i", values[self.mesh.triangles[tri[ok]]], lam[ok])
        return out


def _barycentric(p, x):
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    d = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    l1 = ((x[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (x[:, 1] - a[:, 1])) / d
    l2 = ((b[:, 0] - a[:, 0]) * (x[:, 1] - a[:, 1]) - (x[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / d
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def transfer(values, source, target, outside=0.0):
    """Nodal transfer of a field from ``source`` to the vertices of ``target``.

    Target vertices outside the source mesh get ``outside``; with the default
    this is extension by zero of a truncated-domain field.
    """
    loc = PointLocator(source)
    out = loc.interpolate(np.asarray(values, dtype=float), target.vertices, outside=outside)
    return out


def write_mesh(mesh, path=None):
    """ASCII dump: ``MESH nv nt`` then ``x y flag`` rows then ``i j k`` rows.

    Returns the text; also writes it when ``path`` is given.
    """
    lines = [f"MESH {mesh.nv} {mesh.nt}"]
    lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(mesh.vertices.tolist(), mesh.boundary_flags)]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_mesh(text):
    """Parse a mesh dump into (vertices, triangles, boundary_flags)."""
    rows = text.strip().splitlines()
    head = rows[0].split()
    if head[0] != "MESH":
        raise MeshError("not a mesh dump")
    nv, nt = int(head[1]), int(head[2])
    vrows = [r.split() for r in rows[1:1 + nv]]
    verts = np.array([[float(a), float(b)] for a, b, _ in vrows])
    flags = np.array([bool(int(f)) for _, _, f in vrows])
    tris = np.array([[int(t) for t in r.split()] for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64)
    return verts, tris, flags

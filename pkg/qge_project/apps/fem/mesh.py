"""
Structured triangulations of rectangles, red refinement and parent lookup.

Triangles are stored counterclockwise. Local edge ``e`` of a triangle is the
edge opposite local vertex ``e``; it runs from vertex ``(e + 1) % 3`` to vertex
``(e + 2) % 3``.
"""

import enum
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgument, LookupFailure, OutputFailure

logger = logging.getLogger(__name__)

# Barycentric tolerance of the closed point-in-triangle test.
CONTAINMENT_TOL = 1e-12

LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


class Side(enum.IntEnum):
    BOTTOM = 0
    RIGHT = 1
    TOP = 2
    LEFT = 3


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgument(f"Point coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self):
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Triangle:
    vertex_ids: tuple

    def __post_init__(self):
        if len(self.vertex_ids) != 3 or len(set(self.vertex_ids)) != 3:
            raise InvalidArgument(f"A triangle needs three distinct vertices, got {self.vertex_ids}")


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidArgument(f"Degenerate rectangle [{self.x0}, {self.x1}] x [{self.y0}, {self.y1}]")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    @property
    def diameter(self):
        return math.hypot(self.width, self.height)

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)


UNIT_SQUARE = Rectangle(0.0, 0.0, 1.0, 1.0)


def _frozen(array, dtype):
    array = np.ascontiguousarray(array, dtype=dtype)
    array.setflags(write=False)
    return array


class Mesh:
    """
    A conforming triangulation of a rectangle.

    ``vertices`` is an (n, 2) float array, ``triangles`` an (m, 3) int array of
    counterclockwise vertex ids, ``boundary_edges`` a (k, 2) int array and
    ``boundary_sides`` the matching :class:`Side` markers. Arrays are read-only.
    """

    def __init__(self, vertices, triangles, boundary_edges, boundary_sides, domain):
        self.vertices = _frozen(vertices, float)
        self.triangles = _frozen(triangles, np.int64)
        self.boundary_edges = _frozen(boundary_edges, np.int64).reshape(-1, 2)
        self.boundary_sides = _frozen(boundary_sides, np.int64)
        self.domain = domain

        if not np.all(np.isfinite(self.vertices)):
            raise InvalidArgument("Mesh vertices must be finite")
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmin(self.signed_areas))
            raise InvalidArgument(f"Triangle {bad} is not counterclockwise or is degenerate")

    def __repr__(self):
        return (
            f"<Mesh {len(self.vertices)} vertices, {len(self.triangles)} triangles, "
            f"h={self.mesh_size:.6g}>"
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def point(self, index):
        x, y = self.vertices[index]
        return Point2(float(x), float(y))

    def triangle(self, index):
        return Triangle(tuple(int(v) for v in self.triangles[index]))

    @cached_property
    def corners(self):
        """(m, 3, 2) array of triangle vertex coordinates."""
        return _frozen(self.vertices[self.triangles], float)

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(np.sum(self.signed_areas))

    @cached_property
    def centroids(self):
        return _frozen(self.corners.mean(axis=1), float)

    @cached_property
    def mesh_size(self):
        p = self.corners
        lengths = np.stack(
            [np.linalg.norm(p[:, b] - p[:, a], axis=1) for a, b in LOCAL_EDGES], axis=1
        )
        return float(lengths.max())

    @cached_property
    def _edge_topology(self):
        local = np.stack([self.triangles[:, list(pair)] for pair in LOCAL_EDGES], axis=1)
        keys = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self):
        """(n_edges, 2) array of unique edges, lower vertex id first."""
        return self._edge_topology[0]

    @property
    def triangle_edges(self):
        """(m, 3) array: global edge id of each local edge."""
        return self._edge_topology[1]

    @property
    def edge_multiplicity(self):
        """Number of triangles sharing each edge."""
        return self._edge_topology[2]

    @cached_property
    def boundary_edge_ids(self):
        keys = np.sort(self.boundary_edges, axis=1)
        lookup = {tuple(edge): i for i, edge in enumerate(self.edges.tolist())}
        try:
            return np.array([lookup[tuple(key)] for key in keys.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise InvalidArgument(f"Boundary edge {exc.args[0]} is not an edge of the mesh") from None

    @cached_property
    def vertex_sides(self):
        """(n, 4) boolean array: vertex lies on side ``Side(k)``."""
        sides = np.zeros((self.n_vertices, 4), dtype=bool)
        for (a, b), side in zip(self.boundary_edges.tolist(), self.boundary_sides.tolist()):
            sides[a, side] = True
            sides[b, side] = True
        return sides

    def check_conformity(self):
        """Raise InvalidArgument unless interior edges have 2 triangles and boundary edges 1."""
        counts = self.edge_multiplicity
        if np.any(counts > 2):
            raise InvalidArgument(f"{int(np.sum(counts > 2))} edges are shared by more than two triangles")
        on_boundary = np.zeros(len(counts), dtype=bool)
        on_boundary[self.boundary_edge_ids] = True
        if np.any(counts[on_boundary] != 1):
            raise InvalidArgument("A marked boundary edge is shared by two triangles")
        if np.any(counts[~on_boundary] != 2):
            raise InvalidArgument("An unmarked edge belongs to a single triangle")
        if not math.isclose(self.area, self.domain.area, rel_tol=1e-12):
            raise InvalidArgument(f"Triangles cover area {self.area}, domain area is {self.domain.area}")

    @cached_property
    def locator(self):
        return ParentIndex(self)


@dataclass(frozen=True)
class MeshHierarchy:
    coarse: Mesh
    fine: Mesh
    parent_of: np.ndarray
    levels: int = 1

    def check_containment(self):
        """Raise LookupFailure if a fine triangle is not inside its parent."""
        parents = self.parent_of
        inside = barycentric_inside(self.coarse, parents, self.fine.centroids)
        for k in range(3):
            inside &= barycentric_inside(self.coarse, parents, self.fine.corners[:, k])
        if not np.all(inside):
            raise LookupFailure(f"{int(np.sum(~inside))} fine triangles leave their parent")


def generate_rect_mesh(domain, target_h):
    """
    Structured right-triangle mesh of ``domain`` with cells no wider than ``target_h``.

    Every grid cell is split along the diagonal from its lower-left to its
    upper-right corner.
    """
    if not (isinstance(target_h, (int, float)) and math.isfinite(target_h) and target_h > 0):
        raise InvalidArgument(f"target_h must be positive, got {target_h!r}")
    if not isinstance(domain, Rectangle):
        domain = Rectangle(*domain)

    nx = max(1, math.ceil(domain.width / target_h - 1e-9))
    ny = max(1, math.ceil(domain.height / target_h - 1e-9))
    xs = np.linspace(domain.x0, domain.x1, nx + 1)
    ys = np.linspace(domain.y0, domain.y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    bx, by = np.arange(nx), np.arange(ny)
    boundary_edges = np.concatenate([
        np.column_stack([vid(bx, 0), vid(bx + 1, 0)]),
        np.column_stack([vid(nx, by), vid(nx, by + 1)]),
        np.column_stack([vid(bx + 1, ny), vid(bx, ny)]),
        np.column_stack([vid(0, by + 1), vid(0, by)]),
    ])
    boundary_sides = np.repeat([Side.BOTTOM, Side.RIGHT, Side.TOP, Side.LEFT], [nx, ny, nx, ny])

    mesh = Mesh(vertices, triangles, boundary_edges, boundary_sides, domain)
    logger.debug("Generated %s cells (%d x %d) on %s", mesh, nx, ny, domain)
    return mesh


def red_refine(mesh):
    """Split every triangle into four congruent children through its edge midpoints."""
    n_vertices = mesh.n_vertices
    edges = mesh.edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate([mesh.vertices, midpoints])

    a, b, c = mesh.triangles.T
    m0, m1, m2 = (n_vertices + mesh.triangle_edges).T
    children = np.stack(
        [
            np.column_stack([a, m2, m1]),
            np.column_stack([m2, b, m0]),
            np.column_stack([m1, m0, c]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent_of = np.repeat(np.arange(mesh.n_triangles), 4)

    mid = n_vertices + mesh.boundary_edge_ids
    p, q = mesh.boundary_edges.T
    boundary_edges = np.stack([np.column_stack([p, mid]), np.column_stack([mid, q])], axis=1).reshape(-1, 2)
    boundary_sides = np.repeat(mesh.boundary_sides, 2)

    fine = Mesh(vertices, children, boundary_edges, boundary_sides, mesh.domain)
    return MeshHierarchy(coarse=mesh, fine=fine, parent_of=_frozen(parent_of, np.int64), levels=1)


def refine_levels(mesh, levels):
    """Hierarchy obtained by ``levels`` successive red refinements (0 gives the identity)."""
    if levels < 0:
        raise InvalidArgument(f"Refinement levels must be non-negative, got {levels}")
    fine = mesh
    parent_of = np.arange(mesh.n_triangles)
    for _ in range(levels):
        step = red_refine(fine)
        parent_of = parent_of[step.parent_of]
        fine = step.fine
    return MeshHierarchy(coarse=mesh, fine=fine, parent_of=_frozen(parent_of, np.int64), levels=levels)


def _affine_inverse(mesh, triangle_ids):
    p = mesh.corners[triangle_ids]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    return p[:, 0], np.linalg.inv(jac)


def barycentric_coordinates(mesh, triangle_ids, points):
    """(n, 3) barycentric coordinates of ``points[k]`` in triangle ``triangle_ids[k]``."""
    origin, inverse = _affine_inverse(mesh, triangle_ids)
    local = np.einsum("nij,nj->ni", inverse, np.asarray(points, dtype=float) - origin)
    return np.column_stack([1.0 - local.sum(axis=1), local])


def barycentric_inside(mesh, triangle_ids, points, tol=CONTAINMENT_TOL):
    return np.all(barycentric_coordinates(mesh, triangle_ids, points) >= -tol, axis=1)


def point_in_triangle(p, t, mesh):
    """True iff ``p`` lies in the closed triangle ``t`` (a Triangle or a triangle id)."""
    if isinstance(t, Triangle):
        corners = mesh.vertices[list(t.vertex_ids)]
        d1, d2 = corners[1] - corners[0], corners[2] - corners[0]
        local = np.linalg.solve(np.column_stack([d1, d2]), p.as_array() - corners[0])
        lam = np.array([1.0 - local.sum(), local[0], local[1]])
        return bool(np.all(lam >= -CONTAINMENT_TOL))
    return bool(barycentric_inside(mesh, np.array([int(t)]), p.as_array()[None, :])[0])


class ParentIndex:
    """
    Coarse triangles sorted by centroid x, for locating points.

    A query binary-searches the sorted centroids for the strip of triangles whose
    centroid x lies within the coarse mesh size of the point, then tests them
    nearest strip first until one contains the point.
    """

    def __init__(self, coarse):
        self.mesh = coarse
        self.window = coarse.mesh_size
        centroid_x = coarse.centroids[:, 0]
        self.order = np.argsort(centroid_x, kind="stable")
        self.sorted_x = centroid_x[self.order]

    def locate(self, points, chunk_size=20000):
        """
        Return ``(triangle_ids, tests)`` for an (n, 2) array of points.

        ``tests[k]`` counts the point-in-triangle tests spent on point ``k``.
        Raises LookupFailure if a point lies in no triangle.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        ids = np.empty(len(points), dtype=np.int64)
        tests = np.empty(len(points), dtype=np.int64)
        for start in range(0, len(points), chunk_size):
            stop = start + chunk_size
            ids[start:stop], tests[start:stop] = self._locate_chunk(points[start:stop])
        return ids, tests

    def _locate_chunk(self, points):
        qx = points[:, 0]
        lo = np.searchsorted(self.sorted_x, qx - self.window, side="right")
        hi = np.searchsorted(self.sorted_x, qx + self.window, side="left")
        counts = np.maximum(hi - lo, 0)
        if np.any(counts == 0):
            self._fail(points, counts == 0)

        query = np.repeat(np.arange(len(points)), counts)
        starts = np.cumsum(counts) - counts
        position = np.arange(counts.sum()) - np.repeat(starts, counts) + np.repeat(lo, counts)
        candidate = self.order[position]
        distance = np.abs(self.sorted_x[position] - qx[query])

        scan = np.lexsort((position, distance, query))
        query, candidate = query[scan], candidate[scan]
        rank = np.arange(len(scan)) - np.repeat(starts, counts)
        inside = barycentric_inside(self.mesh, candidate, points[query])

        first = np.where(inside, rank, np.iinfo(np.int64).max)
        best = np.minimum.reduceat(first, starts)
        missing = best == np.iinfo(np.int64).max
        if np.any(missing):
            self._fail(points, missing)
        return candidate[starts + best], best + 1

    def _fail(self, points, mask):
        bad = points[np.argmax(mask)]
        raise LookupFailure(
            f"{int(np.sum(mask))} point(s) lie outside the mesh, first at ({bad[0]:.6g}, {bad[1]:.6g})"
        )


def find_parent(fine_centroid, coarse, sorted_index=None):
    """Coarse triangle id containing ``fine_centroid`` (Point2 or pair)."""
    if sorted_index is None:
        sorted_index = coarse.locator
    if isinstance(fine_centroid, Point2):
        fine_centroid = fine_centroid.as_array()
    ids, _ = sorted_index.locate(np.asarray(fine_centroid, dtype=float)[None, :])
    return int(ids[0])


def dump_mesh(mesh, path):
    """Write ``v x y`` / ``t i j k`` / ``b i j`` lines."""
    lines = ["# rectangle " + " ".join(repr(float(v)) for v in mesh.domain.as_tuple())]
    lines += [f"v {x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"t {i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"b {i} {j}" for i, j in mesh.boundary_edges.tolist()]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputFailure(f"Cannot write mesh to {path}: {exc}") from exc


def load_mesh(path):
    vertices, triangles, boundary = [], [], []
    domain = None
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[:2] == ["#", "rectangle"]:
            domain = Rectangle(*map(float, parts[2:6]))
        elif parts[0] == "v":
            vertices.append((float(parts[1]), float(parts[2])))
        elif parts[0] == "t":
            triangles.append(tuple(map(int, parts[1:4])))
        elif parts[0] == "b":
            boundary.append(tuple(map(int, parts[1:3])))
    if domain is None:
        raise InvalidArgument(f"{path} has no rectangle header")
    vertices = np.array(vertices)
    sides = [_side_of(domain, vertices[i], vertices[j]) for i, j in boundary]
    return Mesh(vertices, np.array(triangles), np.array(boundary), np.array(sides), domain)


def _side_of(domain, p, q):
    tol = 1e-12 * domain.diameter
    if abs(p[1] - domain.y0) <= tol and abs(q[1] - domain.y0) <= tol:
        return Side.BOTTOM
    if abs(p[0] - domain.x1) <= tol and abs(q[0] - domain.x1) <= tol:
        return Side.RIGHT
    if abs(p[1] - domain.y1) <= tol and abs(q[1] - domain.y1) <= tol:
        return Side.TOP
    if abs(p[0] - domain.x0) <= tol and abs(q[0] - domain.x0) <= tol:
        return Side.LEFT
    raise InvalidArgument(f"Boundary edge {p} -> {q} is not on the rectangle")

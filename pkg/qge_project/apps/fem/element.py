"""
The quintic Argyris triangle.

Local degrees of freedom, in order: for each vertex ``v`` the block
``6*v .. 6*v + 5`` holds value, d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2; entries
18, 19, 20 are the outward normal derivatives at the midpoints of edges 0, 1, 2
(edge ``e`` is opposite vertex ``e``).

Argyris is not affine equivalent. Physical shape functions are
``phi_i = sum_j E[j, i] * (phihat_j o F^-1)`` where row ``j`` of ``E`` writes
reference functional ``j`` (of the pulled-back function) as a combination of
physical functionals.
"""

import enum
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

from .exceptions import InvalidArgument
from .mesh import LOCAL_EDGES

logger = logging.getLogger(__name__)

N_DOFS = 21
DEGREE = 5

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

# Exponents (a, b) of the monomial basis x^a y^b, total degree <= 5.
MONOMIALS = tuple((total - b, b) for total in range(DEGREE + 1) for b in range(total + 1))
_A = np.array([a for a, _ in MONOMIALS])
_B = np.array([b for _, b in MONOMIALS])

# Vertex derivative multi-indices in DoF order.
VERTEX_DERIVATIVES = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


class DofKind(enum.Enum):
    VERTEX_VALUE = "vertex_value"
    VERTEX_DX = "vertex_dx"
    VERTEX_DY = "vertex_dy"
    VERTEX_DXX = "vertex_dxx"
    VERTEX_DXY = "vertex_dxy"
    VERTEX_DYY = "vertex_dyy"
    EDGE_NORMAL_DERIVATIVE = "edge_normal_derivative"


@dataclass(frozen=True)
class DofDescriptor:
    kind: DofKind
    location: int


_VERTEX_KINDS = (
    DofKind.VERTEX_VALUE,
    DofKind.VERTEX_DX,
    DofKind.VERTEX_DY,
    DofKind.VERTEX_DXX,
    DofKind.VERTEX_DXY,
    DofKind.VERTEX_DYY,
)

DOF_DESCRIPTORS = tuple(
    [DofDescriptor(kind, v) for v in range(3) for kind in _VERTEX_KINDS]
    + [DofDescriptor(DofKind.EDGE_NORMAL_DERIVATIVE, e) for e in range(3)]
)


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray
    gradients: np.ndarray
    hessians: np.ndarray

    def __post_init__(self):
        for name in ("values", "gradients", "hessians"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgument(f"Non-finite basis {name}")

    @property
    def laplacians(self):
        return self.hessians[..., 0] + self.hessians[..., 2]


def _edge_frames(vertices):
    """Unit tangents (..., 3, 2), outward normals and lengths (..., 3) of each local edge."""
    a = vertices[..., [pair[0] for pair in LOCAL_EDGES], :]
    b = vertices[..., [pair[1] for pair in LOCAL_EDGES], :]
    tangent = b - a
    length = np.linalg.norm(tangent, axis=-1)
    tangent = tangent / length[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    return tangent, normal, length


@lru_cache(maxsize=None)
def reference_coefficients():
    """
    (21, 21) array ``C``: reference shape function ``j`` is ``sum_k C[k, j] x^a_k y^b_k``.

    The nodal system is solved in rational arithmetic. The hypotenuse functional
    uses the unnormalized normal (1, 1) and its column is rescaled by sqrt(2)
    afterwards.
    """
    x, y = sympy.symbols("x y")
    monomials = [x**a * y**b for a, b in MONOMIALS]
    vertices = [(0, 0), (1, 0), (0, 1)]
    half = sympy.Rational(1, 2)
    edge_points = [(half, half), (0, half), (half, 0)]
    edge_normals = [(1, 1), (-1, 0), (0, -1)]

    rows = []
    for vx, vy in vertices:
        for da, db in VERTEX_DERIVATIVES:
            rows.append([sympy.diff(m, x, da, y, db).subs({x: vx, y: vy}) for m in monomials])
    for (px, py), (nx, ny) in zip(edge_points, edge_normals):
        rows.append(
            [(nx * sympy.diff(m, x) + ny * sympy.diff(m, y)).subs({x: px, y: py}) for m in monomials]
        )

    inverse = sympy.Matrix(rows).LUsolve(sympy.eye(N_DOFS))
    coefficients = np.array([[float(value) for value in row] for row in inverse.tolist()])
    coefficients[:, 18] *= np.sqrt(2.0)
    coefficients.setflags(write=False)
    logger.debug("Built reference Argyris coefficients")
    return coefficients


def _monomial_tables(points):
    """Monomial values and derivatives up to order 2 at (n, 2) points: seven (n, 21) arrays."""
    x = points[:, :1]
    y = points[:, 1:]

    def term(da, db):
        coeff = np.ones(len(MONOMIALS))
        for k in range(da):
            coeff = coeff * (_A - k)
        for k in range(db):
            coeff = coeff * (_B - k)
        return coeff * x ** np.maximum(_A - da, 0) * y ** np.maximum(_B - db, 0)

    return {d: term(*d) for d in VERTEX_DERIVATIVES}


def tabulate_reference(points):
    """
    Reference shape functions at (n, 2) reference points.

    Returns ``values`` (n, 21), ``gradients`` (n, 21, 2), ``hessians`` (n, 21, 3).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coefficients = reference_coefficients()
    tables = {d: table @ coefficients for d, table in _monomial_tables(points).items()}
    values = tables[(0, 0)]
    gradients = np.stack([tables[(1, 0)], tables[(0, 1)]], axis=-1)
    hessians = np.stack([tables[(2, 0)], tables[(1, 1)], tables[(0, 2)]], axis=-1)
    return values, gradients, hessians


def reference_basis(point):
    """BasisEval of the 21 reference shape functions at one reference point."""
    if hasattr(point, "as_array"):
        point = point.as_array()
    values, gradients, hessians = tabulate_reference(np.asarray(point, dtype=float)[None, :])
    return BasisEval(values=values[0], gradients=gradients[0], hessians=hessians[0])


@dataclass(frozen=True)
class ElementMap:
    """
    Affine map x = origin + jacobian @ xhat and the Argyris dof transform.

    Fields may carry a leading batch axis, in which case indexing returns the
    map of a single triangle.
    """

    vertices: np.ndarray
    jacobian: np.ndarray
    inverse: np.ndarray
    determinant: np.ndarray
    dof_transform: np.ndarray

    @property
    def origin(self):
        return self.vertices[..., 0, :]

    def __len__(self):
        return len(self.determinant) if np.ndim(self.determinant) else 1

    def __getitem__(self, index):
        return ElementMap(
            vertices=self.vertices[index],
            jacobian=self.jacobian[index],
            inverse=self.inverse[index],
            determinant=np.asarray(self.determinant)[index],
            dof_transform=self.dof_transform[index],
        )

    def to_reference(self, points):
        """Reference coordinates of physical (n, 2) points (single map only)."""
        return (np.asarray(points, dtype=float) - self.origin) @ self.inverse.T


def build_element_maps(vertices):
    """Element maps for an (m, 3, 2) array of counterclockwise triangles."""
    vertices = np.asarray(vertices, dtype=float)
    m = len(vertices)
    jac = np.stack([vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    scale = np.einsum("mij,mij->m", jac, jac)
    if np.any(det <= 1e-14 * scale):
        raise InvalidArgument(f"{int(np.sum(det <= 1e-14 * scale))} degenerate or clockwise triangle(s)")
    inv = np.linalg.inv(jac)

    b00, b01, b10, b11 = jac[:, 0, 0], jac[:, 0, 1], jac[:, 1, 0], jac[:, 1, 1]
    E = np.zeros((m, N_DOFS, N_DOFS))
    first = np.stack([np.stack([b00, b10], -1), np.stack([b01, b11], -1)], axis=-2)
    second = np.stack(
        [
            np.stack([b00 * b00, 2 * b00 * b10, b10 * b10], -1),
            np.stack([b00 * b01, b00 * b11 + b10 * b01, b10 * b11], -1),
            np.stack([b01 * b01, 2 * b01 * b11, b11 * b11], -1),
        ],
        axis=-2,
    )
    for v in range(3):
        s = 6 * v
        E[:, s, s] = 1.0
        E[:, s + 1 : s + 3, s + 1 : s + 3] = first
        E[:, s + 3 : s + 6, s + 3 : s + 6] = second

    _, ref_normals, _ = _edge_frames(REFERENCE_VERTICES)
    tangent, normal, length = _edge_frames(vertices)
    for e, (a, b) in enumerate(LOCAL_EDGES):
        t, n, ell = tangent[:, e], normal[:, e], length[:, e]
        w = jac @ ref_normals[e]
        wt = np.einsum("mi,mi->m", w, t)
        tau = np.stack([t[:, 0] ** 2, 2 * t[:, 0] * t[:, 1], t[:, 1] ** 2], axis=-1)
        row = 18 + e
        E[:, row, row] = np.einsum("mi,mi->m", w, n)
        E[:, row, 6 * a] += -15.0 / 8.0 * wt / ell
        E[:, row, 6 * b] += 15.0 / 8.0 * wt / ell
        E[:, row, 6 * a + 1 : 6 * a + 3] += (-7.0 / 16.0 * wt)[:, None] * t
        E[:, row, 6 * b + 1 : 6 * b + 3] += (-7.0 / 16.0 * wt)[:, None] * t
        E[:, row, 6 * a + 3 : 6 * a + 6] += (-ell / 32.0 * wt)[:, None] * tau
        E[:, row, 6 * b + 3 : 6 * b + 6] += (ell / 32.0 * wt)[:, None] * tau

    return ElementMap(vertices=vertices, jacobian=jac, inverse=inv, determinant=det, dof_transform=E)


def build_element_map(physical_vertices):
    """ElementMap of one triangle given three Point2 (or coordinate pairs)."""
    coords = [p.as_array() if hasattr(p, "as_array") else np.asarray(p, dtype=float) for p in physical_vertices]
    if len(coords) != 3:
        raise InvalidArgument("A triangle needs exactly three vertices")
    return build_element_maps(np.stack(coords)[None])[0]


def hessian_transform(inverse):
    """
    (..., 3, 3) matrices taking reference (xx, xy, yy) second derivatives to physical ones.
    """
    k = inverse
    rows = []
    for p, q in ((0, 0), (0, 1), (1, 1)):
        rows.append(
            np.stack(
                [
                    k[..., 0, p] * k[..., 0, q],
                    k[..., 0, p] * k[..., 1, q] + k[..., 1, p] * k[..., 0, q],
                    k[..., 1, p] * k[..., 1, q],
                ],
                axis=-1,
            )
        )
    return np.stack(rows, axis=-2)


def transform_values(maps, ref_values):
    """(m, n, 21) physical values from (n, 21) reference values."""
    return np.einsum("qj,mji->mqi", ref_values, maps.dof_transform, optimize=True)


def transform_gradients(maps, ref_gradients):
    """(m, n, 21, 2) physical gradients from (n, 21, 2) reference gradients."""
    mixed = np.einsum("qjd,mji->mqid", ref_gradients, maps.dof_transform, optimize=True)
    return np.einsum("med,mqie->mqid", maps.inverse, mixed, optimize=True)


def transform_hessians(maps, ref_hessians):
    """(m, n, 21, 3) physical (xx, xy, yy) second derivatives."""
    mixed = np.einsum("qjh,mji->mqih", ref_hessians, maps.dof_transform, optimize=True)
    return np.einsum("mkh,mqih->mqik", hessian_transform(maps.inverse), mixed, optimize=True)


def transform_laplacians(maps, ref_hessians):
    """(m, n, 21) physical Laplacians, without forming full Hessians."""
    transform = hessian_transform(maps.inverse)
    weights = transform[:, 0, :] + transform[:, 2, :]
    combined = np.einsum("mh,qjh->mqj", weights, ref_hessians, optimize=True)
    return np.einsum("mqj,mji->mqi", combined, maps.dof_transform, optimize=True)


def physical_basis(element_map, physical_point):
    """BasisEval of the 21 physical shape functions at one physical point."""
    if hasattr(physical_point, "as_array"):
        physical_point = physical_point.as_array()
    ref = element_map.to_reference(np.asarray(physical_point, dtype=float)[None, :])
    values, gradients, hessians = tabulate_reference(ref)
    batch = element_map[None]
    return BasisEval(
        values=transform_values(batch, values)[0, 0],
        gradients=transform_gradients(batch, gradients)[0, 0],
        hessians=transform_hessians(batch, hessians)[0, 0],
    )


def nodal_functionals(vertices, derivative):
    """
    Apply the 21 physical functionals to a smooth function.

    ``vertices`` is (3, 2) or (m, 3, 2); ``derivative(a, b, points)`` returns the
    partial derivative d^(a+b)/dx^a dy^b at (n, 2) points. Edge entries use the
    outward normal of each triangle.
    """
    vertices = np.asarray(vertices, dtype=float)
    single = vertices.ndim == 2
    if single:
        vertices = vertices[None]
    m = len(vertices)
    out = np.empty((m, N_DOFS))
    corners = vertices.reshape(-1, 2)
    for k, (a, b) in enumerate(VERTEX_DERIVATIVES):
        out[:, k : 18 : 6] = np.asarray(derivative(a, b, corners), dtype=float).reshape(m, 3)

    _, normal, _ = _edge_frames(vertices)
    midpoints = np.stack(
        [0.5 * (vertices[:, a] + vertices[:, b]) for a, b in LOCAL_EDGES], axis=1
    ).reshape(-1, 2)
    dx = np.asarray(derivative(1, 0, midpoints), dtype=float).reshape(m, 3)
    dy = np.asarray(derivative(0, 1, midpoints), dtype=float).reshape(m, 3)
    out[:, 18:] = normal[..., 0] * dx + normal[..., 1] * dy
    return out[0] if single else out

"""
Global Argyris spaces on a mesh and assembly of the weak forms

    a(psi, chi)      = Re^-1 int lap(psi) lap(chi)
    b(zeta; psi, chi) = int lap(zeta) (psi_y chi_x - psi_x chi_y)
    c(psi, chi)      = -Ro^-1 int psi_x chi
    l(chi)           = Ro^-1 int F chi

on the clamped subspace. Matrices are indexed by free DoFs only.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .conf import get_setting
from .element import (
    N_DOFS,
    build_element_maps,
    hessian_transform,
    nodal_functionals,
    tabulate_reference,
    transform_gradients,
    transform_hessians,
    transform_laplacians,
    transform_values,
)
from .exceptions import InvalidArgument
from .mesh import LOCAL_EDGES, Side
from .quadrature import rule_for_degree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowParams:
    reynolds: float
    rossby: float

    def __post_init__(self):
        for name in ("reynolds", "rossby"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class DofMap:
    """
    Global numbering: vertex ``v`` owns DoFs ``6*v .. 6*v + 5``, edge ``k`` owns
    ``6*n_vertices + k``.

    ``signs[t, 18 + e]`` is +1 when the outward normal of local edge ``e`` equals
    the global edge normal (right-hand normal of the edge walked from its lower
    to its higher vertex id) and -1 otherwise.
    """

    cell_dofs: np.ndarray
    signs: np.ndarray
    n_dofs: int
    constrained: np.ndarray

    @cached_property
    def free_dofs(self):
        return np.flatnonzero(~self.constrained)

    @cached_property
    def to_free(self):
        index = np.full(self.n_dofs, -1, dtype=np.int64)
        index[self.free_dofs] = np.arange(len(self.free_dofs))
        return index

    @property
    def n_free(self):
        return len(self.free_dofs)

    @cached_property
    def cell_free(self):
        """(m, 21) free-DoF ids, -1 where the DoF is constrained."""
        return self.to_free[self.cell_dofs]

    def expand(self, free_values):
        full = np.zeros(self.n_dofs)
        full[self.free_dofs] = free_values
        return full


def build_dof_map(mesh):
    n_vertices = mesh.n_vertices
    triangles = mesh.triangles
    vertex_dofs = (6 * triangles[:, :, None] + np.arange(6)).reshape(-1, 18)
    edge_dofs = 6 * n_vertices + mesh.triangle_edges
    cell_dofs = np.concatenate([vertex_dofs, edge_dofs], axis=1)

    signs = np.ones((mesh.n_triangles, N_DOFS))
    for e, (a, b) in enumerate(LOCAL_EDGES):
        signs[:, 18 + e] = np.where(triangles[:, a] < triangles[:, b], 1.0, -1.0)

    n_dofs = 6 * n_vertices + len(mesh.edges)
    constrained = np.zeros(n_dofs, dtype=bool)
    sides = mesh.vertex_sides
    on_boundary = sides.any(axis=1)
    horizontal = sides[:, Side.BOTTOM] | sides[:, Side.TOP]
    vertical = sides[:, Side.LEFT] | sides[:, Side.RIGHT]
    # psi and its normal derivative vanish along a side, hence so do their
    # tangential derivatives: d2/dt2 and d2/dtdn. d2/dn2 stays free.
    vertex_constraints = np.column_stack(
        [on_boundary, on_boundary, on_boundary, horizontal, on_boundary, vertical]
    )
    constrained[: 6 * n_vertices] = vertex_constraints.ravel()
    constrained[6 * n_vertices + mesh.boundary_edge_ids] = True

    for array in (cell_dofs, signs, constrained):
        array.setflags(write=False)
    dofmap = DofMap(cell_dofs=cell_dofs, signs=signs, n_dofs=int(n_dofs), constrained=constrained)
    logger.debug("DofMap: %d DoFs, %d free", dofmap.n_dofs, dofmap.n_free)
    return dofmap


class SparseOperator:
    """A CSR matrix over free DoFs with an advisory symmetry flag."""

    def __init__(self, matrix, symmetric=False):
        self.matrix = sparse.csr_matrix(matrix)
        self.matrix.sum_duplicates()
        self.symmetric = symmetric

    def __repr__(self):
        return f"<SparseOperator n={self.dimension} nnz={self.nnz} symmetric={self.symmetric}>"

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    def __matmul__(self, vector):
        return self.matrix @ vector

    def __add__(self, other):
        return SparseOperator(self.matrix + other.matrix, symmetric=self.symmetric and other.symmetric)

    def scaled(self, factor):
        return SparseOperator(factor * self.matrix, symmetric=self.symmetric)

    def toarray(self):
        return self.matrix.toarray()


class Discretization:
    """
    A mesh with its Argyris DofMap and a quadrature rule.

    Physical bases are tabulated chunk by chunk of triangles; each chunk is
    independent, so chunks may be processed by a thread pool and merged in
    chunk order.
    """

    def __init__(self, mesh, degree=None, workers=None, chunk_size=None):
        self.mesh = mesh
        self.degree = degree or get_setting("QUADRATURE_DEGREE")
        self.workers = workers or get_setting("WORKERS")
        self.chunk_size = chunk_size or get_setting("ASSEMBLY_CHUNK_SIZE")
        if self.workers < 1 or self.chunk_size < 1:
            raise InvalidArgument("workers and chunk_size must be at least 1")
        self.rule = rule_for_degree(self.degree)
        self.dofmap = build_dof_map(mesh)
        self.reference = tabulate_reference(self.rule.points)

    def __repr__(self):
        return f"<Discretization {self.mesh!r} degree={self.degree} free={self.n_free}>"

    @property
    def n_free(self):
        return self.dofmap.n_free

    @property
    def n_points(self):
        return len(self.rule)

    def chunks(self):
        m = self.mesh.n_triangles
        return [slice(start, min(start + self.chunk_size, m)) for start in range(0, m, self.chunk_size)]

    def map_chunks(self, func):
        """``[func(chunk) for chunk in self.chunks()]``, possibly threaded, in chunk order."""
        chunks = self.chunks()
        if self.workers == 1 or len(chunks) == 1:
            return [func(chunk) for chunk in chunks]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(func, chunks))

    def element_maps(self, chunk):
        return build_element_maps(self.mesh.corners[chunk])

    def quadrature_points(self, chunk, maps=None):
        maps = maps or self.element_maps(chunk)
        return maps.origin[:, None, :] + np.einsum("mij,qj->mqi", maps.jacobian, self.rule.points)

    def tabulate(self, chunk, fields=("values", "gradients", "laplacians")):
        """
        Signed physical basis data on one chunk.

        Always returns ``points`` (c, q, 2) and ``weights`` (c, q); ``values`` and
        ``laplacians`` are (c, q, 21), ``gradients`` (c, q, 21, 2), ``hessians``
        (c, q, 21, 3).
        """
        maps = self.element_maps(chunk)
        ref_values, ref_gradients, ref_hessians = self.reference
        signs = self.dofmap.signs[chunk][:, None, :]
        tab = {
            "points": self.quadrature_points(chunk, maps),
            "weights": maps.determinant[:, None] * self.rule.weights[None, :],
        }
        if "values" in fields:
            tab["values"] = transform_values(maps, ref_values) * signs
        if "gradients" in fields:
            tab["gradients"] = transform_gradients(maps, ref_gradients) * signs[..., None]
        if "laplacians" in fields:
            tab["laplacians"] = transform_laplacians(maps, ref_hessians) * signs
        if "hessians" in fields:
            tab["hessians"] = transform_hessians(maps, ref_hessians) * signs[..., None]
        return tab

    def assemble(self, kernel, symmetric=False):
        """Sum of per-chunk (c, 21, 21) element matrices ``kernel(chunk)`` into a SparseOperator."""
        (operator,) = self.assemble_many(lambda chunk: (kernel(chunk),))
        operator.symmetric = symmetric
        return operator

    def assemble_many(self, kernel):
        """Like :meth:`assemble` for a kernel returning a tuple of element matrices per chunk."""
        started = time.perf_counter()
        results = self.map_chunks(lambda chunk: (chunk, kernel(chunk)))
        n = self.n_free
        if not results:
            return ()
        operators = []
        for k in range(len(results[0][1])):
            rows, cols, data = [], [], []
            for chunk, blocks in results:
                local = blocks[k]
                ids = self.dofmap.cell_free[chunk]
                r = np.broadcast_to(ids[:, :, None], local.shape)
                c = np.broadcast_to(ids[:, None, :], local.shape)
                keep = (r >= 0) & (c >= 0)
                rows.append(r[keep])
                cols.append(c[keep])
                data.append(local[keep])
            matrix = sparse.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
            ).tocsr()
            operators.append(SparseOperator(matrix))
        logger.debug("Assembled %d operator(s) of size %d in %.3fs", len(operators), n, time.perf_counter() - started)
        return tuple(operators)

    def assemble_vector(self, kernel):
        """Sum of per-chunk (c, 21) element vectors into a free-DoF vector."""
        out = np.zeros(self.n_free)
        for chunk, local in self.map_chunks(lambda chunk: (chunk, kernel(chunk))):
            ids = self.dofmap.cell_free[chunk]
            keep = ids >= 0
            np.add.at(out, ids[keep], local[keep])
        return out

    def integrate(self, kernel):
        """Sum of per-chunk scalars, in chunk order."""
        return float(sum(self.map_chunks(kernel)))


def field_on_chunk(tab, coefficients):
    """Evaluate the discrete function with (c, 21) local coefficients at a chunk's points."""
    out = {}
    if "values" in tab:
        out["value"] = np.einsum("cqi,ci->cq", tab["values"], coefficients)
    if "gradients" in tab:
        out["gradient"] = np.einsum("cqid,ci->cqd", tab["gradients"], coefficients)
    if "laplacians" in tab:
        out["laplacian"] = np.einsum("cqi,ci->cq", tab["laplacians"], coefficients)
    if "hessians" in tab:
        out["hessian"] = np.einsum("cqih,ci->cqh", tab["hessians"], coefficients)
    return out


class Solution:
    """
    A discrete streamfunction: global coefficients on a Discretization.

    Solver results have zeros on constrained DoFs; interpolants keep whatever
    the interpolated function prescribes there.
    """

    def __init__(self, discretization, full_coefficients):
        full_coefficients = np.asarray(full_coefficients, dtype=float)
        if full_coefficients.shape != (discretization.dofmap.n_dofs,):
            raise InvalidArgument(
                f"Expected {discretization.dofmap.n_dofs} coefficients, got {full_coefficients.shape}"
            )
        self.discretization = discretization
        self.full_coefficients = full_coefficients

    @classmethod
    def from_free(cls, discretization, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (discretization.n_free,):
            raise InvalidArgument(f"Expected {discretization.n_free} free coefficients, got {coefficients.shape}")
        return cls(discretization, discretization.dofmap.expand(coefficients))

    @classmethod
    def zero(cls, discretization):
        return cls(discretization, np.zeros(discretization.dofmap.n_dofs))

    def __repr__(self):
        return f"<Solution on {self.discretization!r}>"

    @property
    def mesh(self):
        return self.discretization.mesh

    @property
    def dofmap(self):
        return self.discretization.dofmap

    @property
    def coefficients(self):
        return self.full_coefficients[self.dofmap.free_dofs]

    def cell_coefficients(self, cells):
        """(c, 21) coefficients against the signed physical bases of ``cells``."""
        return self.full_coefficients[self.dofmap.cell_dofs[cells]]

    def on_chunk(self, tab, chunk):
        return field_on_chunk(tab, self.cell_coefficients(chunk))

    def laplacian_on(self, discretization, chunk, tab):
        if discretization is not self.discretization:
            raise InvalidArgument("A Solution can only be sampled on its own discretization; use CoarseField")
        if "laplacians" in tab:
            return np.einsum("cqi,ci->cq", tab["laplacians"], self.cell_coefficients(chunk))
        return self.on_chunk(discretization.tabulate(chunk, ("laplacians",)), chunk)["laplacian"]

    def evaluate_in_cells(self, cells, points):
        """
        Value (n,), gradient (n, 2), hessian (n, 3) and laplacian (n,) at
        physical ``points[k]`` lying in triangle ``cells[k]``.
        """
        cells = np.asarray(cells, dtype=np.int64)
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        maps = build_element_maps(self.mesh.corners[cells])
        local = np.einsum("nij,nj->ni", maps.inverse, points - maps.origin)
        ref_values, ref_gradients, ref_hessians = tabulate_reference(local)
        signed = self.cell_coefficients(cells) * self.dofmap.signs[cells]
        reference = np.einsum("nji,ni->nj", maps.dof_transform, signed)
        gradient_ref = np.einsum("njd,nj->nd", ref_gradients, reference)
        hessian_ref = np.einsum("njh,nj->nh", ref_hessians, reference)
        hessian = np.einsum("nkh,nh->nk", hessian_transform(maps.inverse), hessian_ref)
        return {
            "value": np.einsum("nj,nj->n", ref_values, reference),
            "gradient": np.einsum("ned,ne->nd", maps.inverse, gradient_ref),
            "hessian": hessian,
            "laplacian": hessian[:, 0] + hessian[:, 2],
        }

    def evaluate(self, points):
        """Evaluate anywhere in the domain; cells found with the mesh's ParentIndex."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        cells, _ = self.mesh.locator.locate(points)
        return self.evaluate_in_cells(cells, points)


class CoarseField:
    """
    Laplacian of a coarse Solution cached at every quadrature point of a fine
    Discretization.

    Parents come from the hierarchy's stored refinement map (``lookup="stored"``)
    or from the centroid search (``lookup="search"``).
    """

    def __init__(self, coarse, fine, hierarchy, lookup=None):
        lookup = lookup or get_setting("LOOKUP")
        if hierarchy.coarse is not coarse.mesh or hierarchy.fine is not fine.mesh:
            raise InvalidArgument("The hierarchy does not connect the coarse and fine discretizations")
        self.coarse = coarse
        self.fine = fine
        self.lookup = lookup

        started = time.perf_counter()
        if lookup == "stored":
            self.parents = np.asarray(hierarchy.parent_of)
            self.tests = None
        elif lookup == "search":
            self.parents, self.tests = coarse.mesh.locator.locate(fine.mesh.centroids)
        else:
            raise InvalidArgument(f"Unknown parent lookup {lookup!r}")
        self.lookup_seconds = time.perf_counter() - started

        started = time.perf_counter()
        blocks = fine.map_chunks(self._sample)
        self.laplacian = np.concatenate(blocks) if blocks else np.zeros((0, fine.n_points))
        self.evaluation_seconds = time.perf_counter() - started
        logger.debug(
            "Coarse Laplacian cached at %d fine points (lookup %.4fs, evaluation %.4fs)",
            self.laplacian.size, self.lookup_seconds, self.evaluation_seconds,
        )

    def _sample(self, chunk):
        points = self.fine.quadrature_points(chunk)
        cells = np.repeat(self.parents[chunk], points.shape[1])
        values = self.coarse.evaluate_in_cells(cells, points.reshape(-1, 2))["laplacian"]
        return values.reshape(points.shape[:2])

    def laplacian_on(self, discretization, chunk, tab):
        if discretization is not self.fine:
            raise InvalidArgument("CoarseField sampled on a foreign discretization")
        return self.laplacian[chunk]


def assemble_biharmonic(disc, params):
    """A[i, j] = Re^-1 int lap(phi_j) lap(phi_i)."""
    scale = 1.0 / params.reynolds

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("laplacians",))
        return scale * np.einsum("cq,cqi,cqj->cij", tab["weights"], tab["laplacians"], tab["laplacians"])

    return disc.assemble(kernel, symmetric=True)


def assemble_beta(disc, params):
    """C[i, j] = -Ro^-1 int d_x phi_j phi_i."""
    scale = -1.0 / params.rossby

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("values", "gradients"))
        return scale * np.einsum("cq,cqi,cqj->cij", tab["weights"], tab["values"], tab["gradients"][..., 0])

    return disc.assemble(kernel)


def _advection_block(tab, lap_zeta):
    gx, gy = tab["gradients"][..., 0], tab["gradients"][..., 1]
    k = np.einsum("cq,cqi,cqj->cij", tab["weights"] * lap_zeta, gx, gy)
    return k - k.transpose(0, 2, 1)


def assemble_jacobian_form(zeta, disc):
    """
    B(zeta)[i, j] = int lap(zeta) (d_y phi_j d_x phi_i - d_x phi_j d_y phi_i).

    ``zeta`` is a Solution on ``disc`` or a CoarseField cached on it. The
    element matrices are exactly skew.
    """

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("gradients",))
        return _advection_block(tab, zeta.laplacian_on(disc, chunk, tab))

    return disc.assemble(kernel)


def assemble_newton_terms(current, disc):
    """B(psi) and B'(psi)[i, j] = int lap(phi_j) (psi_y d_x phi_i - psi_x d_y phi_i) in one pass."""

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("gradients", "laplacians"))
        field = current.on_chunk(tab, chunk)
        gx, gy = tab["gradients"][..., 0], tab["gradients"][..., 1]
        psi_x, psi_y = field["gradient"][..., 0], field["gradient"][..., 1]
        mixed = psi_y[..., None] * gx - psi_x[..., None] * gy
        prime = np.einsum("cq,cqi,cqj->cij", tab["weights"], mixed, tab["laplacians"])
        return _advection_block(tab, field["laplacian"]), prime

    return disc.assemble_many(kernel)


def assemble_load(forcing, disc, params):
    """L[i] = Ro^-1 int F phi_i for a pointwise forcing ``forcing(points) -> values``."""
    scale = 1.0 / params.rossby

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("values",))
        samples = np.asarray(forcing(tab["points"].reshape(-1, 2)), dtype=float)
        samples = np.broadcast_to(samples, (tab["points"].shape[0] * tab["points"].shape[1],))
        weighted = tab["weights"] * samples.reshape(tab["weights"].shape)
        return scale * np.einsum("cq,cqi->ci", weighted, tab["values"])

    return disc.assemble_vector(kernel)


def assemble_residual(current, linear, L, disc):
    """``L - [A psi + B(psi) psi + C psi]`` without forming B(psi); ``linear`` is A + C."""

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("gradients", "laplacians"))
        field = current.on_chunk(tab, chunk)
        gx, gy = tab["gradients"][..., 0], tab["gradients"][..., 1]
        psi_x, psi_y = field["gradient"][..., 0], field["gradient"][..., 1]
        mixed = psi_y[..., None] * gx - psi_x[..., None] * gy
        return np.einsum("cq,cqi->ci", tab["weights"] * field["laplacian"], mixed)

    return L - (linear @ current.coefficients) - disc.assemble_vector(kernel)


def newton_system(current, A, C, L, disc, linear=None):
    """
    Jacobian ``J = A + B(psi) + B'(psi) + C`` and residual ``r = L - [A psi + B(psi) psi + C psi]``.

    ``linear`` may pass a precomputed ``A + C``.
    """
    linear = linear if linear is not None else A + C
    psi = current.coefficients
    advection, linearized = assemble_newton_terms(current, disc)
    residual = L - (linear @ psi) - (advection @ psi)
    return linear + advection + linearized, residual


def eval_b(zeta, psi, chi, disc=None):
    """b(zeta; psi, chi) by quadrature; all three on the same Discretization."""
    disc = disc or psi.discretization

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("gradients", "laplacians"))
        lap = zeta.on_chunk(tab, chunk)["laplacian"]
        dpsi = psi.on_chunk(tab, chunk)["gradient"]
        dchi = chi.on_chunk(tab, chunk)["gradient"]
        integrand = lap * (dpsi[..., 1] * dchi[..., 0] - dpsi[..., 0] * dchi[..., 1])
        return np.sum(tab["weights"] * integrand)

    return disc.integrate(kernel)


def eval_b0(xi, chi, psi, disc=None):
    """
    b0(xi; chi, psi) = int (xi_y chi_xy - xi_x chi_yy) psi_y - (xi_x chi_xy - xi_y chi_xx) psi_x.
    """
    disc = disc or xi.discretization

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("gradients", "hessians"))
        dxi = xi.on_chunk(tab, chunk)["gradient"]
        hchi = chi.on_chunk(tab, chunk)["hessian"]
        dpsi = psi.on_chunk(tab, chunk)["gradient"]
        xi_x, xi_y = dxi[..., 0], dxi[..., 1]
        chi_xx, chi_xy, chi_yy = hchi[..., 0], hchi[..., 1], hchi[..., 2]
        integrand = (xi_y * chi_xy - xi_x * chi_yy) * dpsi[..., 1] - (xi_x * chi_xy - xi_y * chi_xx) * dpsi[..., 0]
        return np.sum(tab["weights"] * integrand)

    return disc.integrate(kernel)


def interpolate(field, disc):
    """
    Global Argyris interpolant of a smooth function.

    ``field`` is any object with ``derivative(a, b, points)``.
    """
    local = nodal_functionals(disc.mesh.corners, field.derivative)
    full = np.zeros(disc.dofmap.n_dofs)
    full[disc.dofmap.cell_dofs] = local * disc.dofmap.signs
    return Solution(disc, full)


def hessian_seminorm_squared(solution):
    disc = solution.discretization

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("hessians",))
        h = solution.on_chunk(tab, chunk)["hessian"]
        return np.sum(tab["weights"] * (h[..., 0] ** 2 + 2.0 * h[..., 1] ** 2 + h[..., 2] ** 2))

    return disc.integrate(kernel)


def energy_identity_defect(solution, load, params):
    """Relative gap between Re^-1 |psi|_2^2 and l(psi)."""
    lhs = hessian_seminorm_squared(solution) / params.reynolds
    rhs = float(load @ solution.coefficients)
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else abs(lhs - rhs) / scale

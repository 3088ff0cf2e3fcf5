"""
Tests for the global Argyris space and the assembled forms.
"""

import numpy as np
import pytest
import sympy
from numpy.testing import assert_allclose, assert_array_equal

from qge_project.apps.fem.analysis import X, Y, SymbolicField
from qge_project.apps.fem.assembly import (
    CoarseField,
    Discretization,
    FlowParams,
    Solution,
    assemble_beta,
    assemble_biharmonic,
    assemble_jacobian_form,
    assemble_load,
    assemble_newton_terms,
    assemble_residual,
    build_dof_map,
    energy_identity_defect,
    eval_b,
    eval_b0,
    hessian_seminorm_squared,
    interpolate,
    newton_system,
)
from qge_project.apps.fem.exceptions import InvalidArgument
from qge_project.apps.fem.mesh import red_refine, refine_levels

pytestmark = pytest.mark.numerics

PARAMS = FlowParams(reynolds=1.0, rossby=1.0)

# Clamped on the unit square: psi and grad psi vanish on the boundary.
BUMP = SymbolicField((X * (1 - X) * Y * (1 - Y)) ** 2)
WAVE = SymbolicField((sympy.sin(sympy.pi * X) * sympy.sin(2 * sympy.pi * Y)) ** 2)
TILTED = SymbolicField((X * (1 - X)) ** 2 * (sympy.sin(sympy.pi * Y)) ** 2 * (1 + X + 2 * Y))


def random_solution(disc, seed):
    rng = np.random.default_rng(seed)
    return Solution.from_free(disc, rng.standard_normal(disc.n_free))


def integral_of(solution):
    disc = solution.discretization

    def kernel(chunk):
        tab = disc.tabulate(chunk, ("values",))
        return np.sum(tab["weights"] * solution.on_chunk(tab, chunk)["value"])

    return disc.integrate(kernel)


class FlowParamsTestCase:
    @pytest.mark.parametrize("reynolds,rossby", [(0.0, 1.0), (1.0, -1.0), (float("nan"), 1.0), (1.0, float("inf"))])
    def test_invalid(self, reynolds, rossby):
        with pytest.raises(InvalidArgument):
            FlowParams(reynolds=reynolds, rossby=rossby)


class DofMapTestCase:
    def test_counts_on_half_mesh(self, unit_mesh_half):
        dofmap = build_dof_map(unit_mesh_half)
        assert dofmap.n_dofs == 6 * 9 + 16 == 70
        # 4 side vertices keep one second derivative, the centre keeps 6, interior edges 8.
        assert dofmap.n_free == 4 + 6 + 8 == 18

    def test_constraint_rule(self, unit_mesh_half):
        dofmap = build_dof_map(unit_mesh_half)
        mesh = unit_mesh_half
        for v, (x, y) in enumerate(mesh.vertices):
            block = dofmap.constrained[6 * v : 6 * v + 6]
            on_vertical = x in (0.0, 1.0)
            on_horizontal = y in (0.0, 1.0)
            if not (on_vertical or on_horizontal):
                assert not block.any()
                continue
            assert block[[0, 1, 2, 4]].all()
            assert block[3] == on_horizontal
            assert block[5] == on_vertical
        edge_constrained = dofmap.constrained[6 * mesh.n_vertices :]
        assert_array_equal(np.flatnonzero(edge_constrained), np.sort(mesh.boundary_edge_ids))

    def test_free_count_matches_rank(self, disc_half):
        A = assemble_biharmonic(disc_half, PARAMS).toarray()
        assert np.linalg.matrix_rank(A) == disc_half.n_free

    def test_growth_under_refinement(self, unit_mesh_half):
        counts = []
        mesh = unit_mesh_half
        for _ in range(3):
            mesh = red_refine(mesh).fine
            counts.append(build_dof_map(mesh).n_free)
        ratios = np.array(counts[1:]) / np.array(counts[:-1])
        assert np.all(ratios > 3.0)
        assert ratios[-1] < 4.5

    def test_edge_signs(self, unit_mesh_quarter):
        dofmap = build_dof_map(unit_mesh_quarter)
        mesh = unit_mesh_quarter
        # Two triangles sharing an interior edge see it with opposite signs.
        owners = {}
        for t in range(mesh.n_triangles):
            for e in range(3):
                owners.setdefault(int(mesh.triangle_edges[t, e]), []).append(dofmap.signs[t, 18 + e])
        for edge, signs in owners.items():
            if len(signs) == 2:
                assert signs[0] == -signs[1]

    def test_expand(self, disc_half):
        values = np.arange(disc_half.n_free, dtype=float)
        full = disc_half.dofmap.expand(values)
        assert_array_equal(full[disc_half.dofmap.free_dofs], values)
        assert not full[disc_half.dofmap.constrained].any()


class BiharmonicTestCase:
    def test_symmetric(self, disc_quarter):
        A = assemble_biharmonic(disc_quarter, PARAMS).toarray()
        assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()

    def test_positive_definite(self, disc_half):
        A = assemble_biharmonic(disc_half, PARAMS).toarray()
        assert np.linalg.eigvalsh(0.5 * (A + A.T)).min() > 0

    def test_reynolds_scaling(self, disc_half):
        A1 = assemble_biharmonic(disc_half, FlowParams(1.0, 1.0)).toarray()
        A2 = assemble_biharmonic(disc_half, FlowParams(2.0, 1.0)).toarray()
        assert_allclose(A2, A1 / 2, rtol=1e-14, atol=0)

    def test_energy_of_interpolant(self, disc_quarter):
        psi = interpolate(BUMP, disc_quarter)
        A = assemble_biharmonic(disc_quarter, PARAMS)
        energy = psi.coefficients @ (A @ psi.coefficients)
        assert energy == pytest.approx(hessian_seminorm_squared(psi), rel=1e-10)

    def test_threaded_assembly_matches(self, unit_mesh_quarter):
        serial = Discretization(unit_mesh_quarter, degree=14, workers=1, chunk_size=5)
        threaded = Discretization(unit_mesh_quarter, degree=14, workers=3, chunk_size=5)
        A1 = assemble_biharmonic(serial, PARAMS).toarray()
        A2 = assemble_biharmonic(threaded, PARAMS).toarray()
        assert_array_equal(A1, A2)


class BetaTestCase:
    def test_skew(self, disc_quarter):
        C = assemble_beta(disc_quarter, PARAMS).toarray()
        assert np.abs(C + C.T).max() <= 1e-10 * np.abs(C).max()

    def test_quadratic_form_vanishes(self, disc_quarter):
        C = assemble_beta(disc_quarter, PARAMS)
        chi = np.random.default_rng(0).standard_normal(disc_quarter.n_free)
        assert abs(chi @ (C @ chi)) <= 1e-10 * np.abs(C.toarray()).max() * (chi @ chi)

    def test_rossby_scaling(self, disc_half):
        C1 = assemble_beta(disc_half, FlowParams(1.0, 1.0)).toarray()
        C2 = assemble_beta(disc_half, FlowParams(1.0, 2.0)).toarray()
        assert_allclose(C2, C1 / 2, rtol=1e-14, atol=0)


class AdvectionTestCase:
    def test_zero_vorticity(self, disc_quarter):
        B = assemble_jacobian_form(Solution.zero(disc_quarter), disc_quarter)
        assert B.nnz == 0 or np.abs(B.toarray()).max() == 0.0

    def test_skew(self, disc_quarter):
        zeta = random_solution(disc_quarter, 1)
        B = assemble_jacobian_form(zeta, disc_quarter)
        dense = B.toarray()
        assert_allclose(dense, -dense.T, rtol=0, atol=1e-13 * np.abs(dense).max())
        chi = np.random.default_rng(2).standard_normal(disc_quarter.n_free)
        assert abs(chi @ (B @ chi)) <= 1e-10 * np.abs(dense).max() * (chi @ chi)

    def test_matches_scalar_form(self, disc_quarter):
        zeta, psi, chi = (random_solution(disc_quarter, seed) for seed in (3, 4, 5))
        B = assemble_jacobian_form(zeta, disc_quarter)
        assert chi.coefficients @ (B @ psi.coefficients) == pytest.approx(eval_b(zeta, psi, chi), rel=1e-10)

    def test_permutation_identity(self, disc_quarter):
        psi = interpolate(BUMP, disc_quarter)
        xi = interpolate(WAVE, disc_quarter)
        chi = interpolate(TILTED, disc_quarter)
        lhs = eval_b(psi, xi, chi)
        rhs = eval_b0(chi, xi, psi) - eval_b0(xi, chi, psi)
        assert lhs == pytest.approx(rhs, rel=1e-8)
        assert abs(lhs) > 1e-8

    def test_b0_of_zero(self, disc_quarter):
        zero = Solution.zero(disc_quarter)
        psi = interpolate(BUMP, disc_quarter)
        assert eval_b0(zero, psi, psi) == 0.0

    @pytest.mark.slow
    def test_b0_against_riemann_sum(self, disc_quarter, unit_mesh_quarter):
        xi = interpolate(WAVE, disc_quarter)
        chi = interpolate(TILTED, disc_quarter)
        psi = interpolate(BUMP, disc_quarter)

        def centroid_sum(levels):
            # Every sample sits inside one coarse triangle, where the integrand is smooth.
            hierarchy = refine_levels(unit_mesh_quarter, levels)
            centroids, areas = hierarchy.fine.centroids, hierarchy.fine.signed_areas
            total = 0.0
            for start in range(0, len(centroids), 8192):
                cells = hierarchy.parent_of[start : start + 8192]
                points = centroids[start : start + 8192]
                a, c, p = (field.evaluate_in_cells(cells, points) for field in (xi, chi, psi))
                xi_x, xi_y = a["gradient"].T
                chi_xx, chi_xy, chi_yy = c["hessian"].T
                psi_x, psi_y = p["gradient"].T
                integrand = (xi_y * chi_xy - xi_x * chi_yy) * psi_y - (xi_x * chi_xy - xi_y * chi_xx) * psi_x
                total += areas[start : start + 8192] @ integrand
            return total

        # The centroid rule converges like h^2 with an h^4 correction: eliminate both.
        sums = [centroid_sum(levels) for levels in (5, 6, 7)]
        first = [(4 * fine - coarse) / 3 for coarse, fine in zip(sums, sums[1:])]
        extrapolated = (16 * first[1] - first[0]) / 15
        assert eval_b0(xi, chi, psi) == pytest.approx(extrapolated, rel=1e-5)

    def test_coarse_field_matches_direct_evaluation(self, unit_mesh_half):
        coarse = Discretization(unit_mesh_half, degree=14)
        hierarchy = refine_levels(unit_mesh_half, 2)
        fine = Discretization(hierarchy.fine, degree=14)
        zeta = interpolate(WAVE, coarse)
        stored = CoarseField(zeta, fine, hierarchy, lookup="stored")
        searched = CoarseField(zeta, fine, hierarchy, lookup="search")
        assert_array_equal(stored.laplacian, searched.laplacian)
        assert searched.tests is not None and searched.tests.min() >= 1

        points = np.concatenate([fine.quadrature_points(chunk) for chunk in fine.chunks()]).reshape(-1, 2)
        assert_allclose(stored.laplacian.ravel(), zeta.evaluate(points)["laplacian"], rtol=1e-12, atol=1e-10)

    def test_coarse_field_rejects_unknown_lookup(self, unit_mesh_half):
        coarse = Discretization(unit_mesh_half, degree=14)
        hierarchy = refine_levels(unit_mesh_half, 1)
        fine = Discretization(hierarchy.fine, degree=14)
        with pytest.raises(InvalidArgument):
            CoarseField(Solution.zero(coarse), fine, hierarchy, lookup="guess")

    def test_solution_rejects_foreign_discretization(self, unit_mesh_half, disc_half):
        other = Discretization(unit_mesh_half, degree=14)
        zeta = Solution.zero(disc_half)
        with pytest.raises(InvalidArgument):
            assemble_jacobian_form(zeta, other)


class LoadTestCase:
    def test_zero_forcing(self, disc_quarter):
        L = assemble_load(lambda points: np.zeros(len(points)), disc_quarter, PARAMS)
        assert_array_equal(L, 0.0)

    def test_unit_forcing_against_bump_integral(self, unit_mesh_half):
        disc = Discretization(refine_levels(unit_mesh_half, 2).fine, degree=14)
        L = assemble_load(lambda points: 1.0, disc, PARAMS)
        chi = interpolate(BUMP, disc)
        assert L @ chi.coefficients == pytest.approx(integral_of(chi), rel=1e-12)
        assert L @ chi.coefficients == pytest.approx(1 / 900, rel=1e-2)

    def test_quintic_integral(self, disc_half):
        quintic = X**5 + X * Y**3 - 2 * Y**2 + 1
        total = integral_of(interpolate(SymbolicField(quintic), disc_half))
        exact = float(sympy.integrate(quintic, (X, 0, 1), (Y, 0, 1)))
        assert total == pytest.approx(exact, rel=1e-12)

    def test_rossby_scaling(self, disc_half):
        forcing = SymbolicField(sympy.cos(X) * Y)
        L1 = assemble_load(forcing, disc_half, FlowParams(1.0, 1.0))
        L2 = assemble_load(forcing, disc_half, FlowParams(1.0, 2.0))
        assert_allclose(L2, L1 / 2, rtol=1e-14, atol=0)


class NewtonSystemTestCase:
    def test_linearization(self, disc_quarter):
        A = assemble_biharmonic(disc_quarter, PARAMS)
        C = assemble_beta(disc_quarter, PARAMS)
        L = assemble_load(SymbolicField(sympy.sin(3 * X) * Y), disc_quarter, PARAMS)
        linear = A + C
        current = Solution.from_free(disc_quarter, 1e-2 * np.random.default_rng(6).standard_normal(disc_quarter.n_free))
        direction = np.random.default_rng(7).standard_normal(disc_quarter.n_free)
        J, r = newton_system(current, A, C, L, disc_quarter)

        defects = []
        epsilons = (1e-3, 1e-4, 1e-5)
        for eps in epsilons:
            shifted = Solution.from_free(disc_quarter, current.coefficients + eps * direction)
            r_eps = assemble_residual(shifted, linear, L, disc_quarter)
            defects.append(np.linalg.norm(r_eps - r + eps * (J @ direction)))
        orders = np.log10(np.array(defects[:-1]) / np.array(defects[1:]))
        assert np.all(orders >= 1.9)

    def test_residual_paths_agree(self, disc_quarter):
        A = assemble_biharmonic(disc_quarter, PARAMS)
        C = assemble_beta(disc_quarter, PARAMS)
        L = assemble_load(SymbolicField(X * Y), disc_quarter, PARAMS)
        current = random_solution(disc_quarter, 8)
        _, r = newton_system(current, A, C, L, disc_quarter)
        assert_allclose(assemble_residual(current, A + C, L, disc_quarter), r, rtol=1e-10, atol=1e-10 * np.abs(r).max())

    def test_linear_case(self, disc_quarter):
        A = assemble_biharmonic(disc_quarter, PARAMS)
        C = assemble_beta(disc_quarter, PARAMS)
        L = np.zeros(disc_quarter.n_free)
        J, r = newton_system(Solution.zero(disc_quarter), A, C, L, disc_quarter)
        assert_allclose(J.toarray(), (A + C).toarray(), atol=0)
        assert_array_equal(r, 0.0)

    def test_newton_terms_at_zero(self, disc_quarter):
        advection, linearized = assemble_newton_terms(Solution.zero(disc_quarter), disc_quarter)
        assert np.abs(advection.toarray()).max(initial=0.0) == 0.0
        assert np.abs(linearized.toarray()).max(initial=0.0) == 0.0


class EnergyIdentityTestCase:
    def test_defect_of_zero(self, disc_quarter):
        L = np.zeros(disc_quarter.n_free)
        assert energy_identity_defect(Solution.zero(disc_quarter), L, PARAMS) == 0.0

    def test_seminorm_of_interpolant(self, unit_mesh_half):
        disc = Discretization(refine_levels(unit_mesh_half, 3).fine, degree=14)
        # |(x(1-x)y(1-y))^2|_2^2 over the unit square
        expr = BUMP.expr
        exact = sympy.integrate(
            sympy.diff(expr, X, 2) ** 2 + 2 * sympy.diff(expr, X, Y) ** 2 + sympy.diff(expr, Y, 2) ** 2,
            (X, 0, 1), (Y, 0, 1),
        )
        assert hessian_seminorm_squared(interpolate(BUMP, disc)) == pytest.approx(float(exact), rel=1e-3)

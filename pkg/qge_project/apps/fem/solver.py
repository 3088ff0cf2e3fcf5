"""
One-level Newton solves, the fine-level linear solve and the two-level method.

The two-level method solves the nonlinear problem on a coarse mesh, then a
single linear problem on the fine mesh in which the advecting vorticity is
frozen at the coarse solution.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .assembly import (
    CoarseField,
    Discretization,
    Solution,
    SparseOperator,
    assemble_beta,
    assemble_biharmonic,
    assemble_jacobian_form,
    assemble_load,
    assemble_residual,
    energy_identity_defect,
    newton_system,
)
from .conf import get_setting
from .exceptions import InvalidArgument, NumericalFailure
from .mesh import Mesh, MeshHierarchy, refine_levels

logger = logging.getLogger(__name__)

REFINEMENT_STEPS = 3
RESIDUAL_WARNING = 1e-10


@dataclass(frozen=True)
class NewtonSettings:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-12
    step_tol: float = 1e-10
    max_iters: int = 25
    initial_guess: Solution = None
    continuation_steps: int = 3

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "step_tol"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.max_iters < 1:
            raise InvalidArgument(f"max_iters must be at least 1, got {self.max_iters}")
        if self.continuation_steps < 1:
            raise InvalidArgument(f"continuation_steps must be at least 1, got {self.continuation_steps}")

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            "abs_tol": get_setting("NEWTON_ABS_TOL"),
            "rel_tol": get_setting("NEWTON_REL_TOL"),
            "step_tol": get_setting("NEWTON_STEP_TOL"),
            "max_iters": get_setting("NEWTON_MAX_ITERS"),
            "continuation_steps": get_setting("CONTINUATION_STEPS"),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def with_guess(self, guess):
        return NewtonSettings(
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            step_tol=self.step_tol,
            max_iters=self.max_iters,
            initial_guess=guess,
            continuation_steps=self.continuation_steps,
        )


@dataclass
class SolveReport:
    method: str
    iterations: int = 0
    residual_norm: float = 0.0
    wall_time: float = 0.0
    linear_solves: int = 0
    converged: bool = False
    stop_rule: str = None
    n_free: int = 0
    residual_history: list = field(default_factory=list)
    continuation: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    energy_defect: float = None

    def as_dict(self):
        return {
            "method": self.method,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "wall_time": self.wall_time,
            "linear_solves": self.linear_solves,
            "converged": self.converged,
            "stop_rule": self.stop_rule,
            "n_free": self.n_free,
            "continuation": list(self.continuation),
            "timings": dict(self.timings),
            "energy_defect": self.energy_defect,
        }


def sparse_direct_solve(op, rhs):
    """
    Solve ``op x = rhs`` by sparse LU with symmetric row-max equilibration and
    up to three steps of iterative refinement.
    """
    matrix = op.matrix if isinstance(op, SparseOperator) else sparse.csr_matrix(op)
    rhs = np.asarray(rhs, dtype=float)
    n, m = matrix.shape
    if n != m or rhs.shape != (n,):
        raise InvalidArgument(f"Cannot solve a {n}x{m} system with a right-hand side of shape {rhs.shape}")
    if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(matrix.data)):
        raise NumericalFailure("Non-finite entries in the linear system")
    rhs_norm = np.linalg.norm(rhs)
    if n == 0 or rhs_norm == 0.0:
        return np.zeros(n)

    row_max = np.asarray(abs(matrix).max(axis=1).todense()).ravel()
    if np.any(row_max == 0.0):
        raise NumericalFailure(f"{int(np.sum(row_max == 0.0))} zero row(s): the operator is singular")
    scale = 1.0 / np.sqrt(row_max)
    D = sparse.diags(scale)
    scaled = (D @ matrix @ D).tocsc()

    started = time.perf_counter()
    try:
        lu = splu(scaled, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise NumericalFailure(f"Sparse factorization failed: {exc}") from exc
    logger.debug("Factorized %d unknowns (nnz %d) in %.3fs", n, matrix.nnz, time.perf_counter() - started)

    x = scale * lu.solve(scale * rhs)
    residual = rhs - matrix @ x
    for _ in range(REFINEMENT_STEPS):
        if np.linalg.norm(residual) <= 1e-15 * rhs_norm:
            break
        x = x + scale * lu.solve(scale * residual)
        residual = rhs - matrix @ x
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("The factorization produced non-finite values")
    relative = np.linalg.norm(residual) / rhs_norm
    if relative > RESIDUAL_WARNING:
        logger.warning("Linear solve residual %.3e exceeds %.0e relative", relative, RESIDUAL_WARNING)
    return x


def _forcing_for(forcing, params):
    if hasattr(forcing, "for_params"):
        return forcing.for_params(params)
    return forcing


def _discretization(mesh_or_disc, degree, workers):
    if isinstance(mesh_or_disc, Discretization):
        return mesh_or_disc
    return Discretization(mesh_or_disc, degree=degree, workers=workers)


def newton_solve(disc, params, forcing, settings=None, method="one-level"):
    """Newton's method on one discretization with a fixed forcing; no continuation."""
    settings = settings or NewtonSettings.from_settings()
    report = SolveReport(method=method, n_free=disc.n_free)
    started = time.perf_counter()

    A = assemble_biharmonic(disc, params)
    C = assemble_beta(disc, params)
    L = assemble_load(_forcing_for(forcing, params), disc, params)
    linear = A + C

    guess = settings.initial_guess
    if guess is None:
        current = Solution.zero(disc)
    elif guess.discretization.mesh is disc.mesh:
        current = Solution(disc, guess.full_coefficients.copy())
    else:
        raise InvalidArgument("The initial guess lives on a different mesh")

    jacobian, residual = newton_system(current, A, C, L, disc, linear=linear)
    first = None
    while True:
        norm = float(np.linalg.norm(residual))
        report.residual_history.append(norm)
        first = norm if first is None else first
        if not math.isfinite(norm):
            logger.warning("Newton diverged after %d iterations (non-finite residual)", report.iterations)
            break
        tolerance = max(settings.abs_tol, settings.rel_tol * first)
        if norm <= tolerance:
            report.converged = True
            report.stop_rule = "absolute" if norm <= settings.abs_tol else "relative"
            break
        if report.iterations == settings.max_iters:
            break

        step = sparse_direct_solve(jacobian, residual)
        current = Solution.from_free(disc, current.coefficients + step)
        report.iterations += 1
        report.linear_solves += 1
        step_norm = float(np.max(np.abs(step)))
        logger.info("Newton %d: residual %.3e, step %.3e", report.iterations, norm, step_norm)

        if step_norm <= settings.step_tol * max(float(np.max(np.abs(current.coefficients))), 1.0):
            residual = assemble_residual(current, linear, L, disc)
            report.residual_history.append(float(np.linalg.norm(residual)))
            report.converged = True
            report.stop_rule = "step"
            break
        jacobian, residual = newton_system(current, A, C, L, disc, linear=linear)

    report.residual_norm = report.residual_history[-1]
    report.wall_time = time.perf_counter() - started
    if not report.converged:
        logger.warning(
            "Newton did not converge in %d iterations (residual %.3e)", report.iterations, report.residual_norm
        )
    report.energy_defect = energy_identity_defect(current, L, params) if report.converged else None
    return current, report


def solve_one_level(mesh, params, forcing, settings=None, degree=None, workers=None):
    """
    Newton's method from the initial guess on ``mesh`` (a Mesh or Discretization).

    When the cold start fails and ``Ro < 1``, the problem is solved again by
    continuation in the Rossby number from 1 down to the target, each step
    seeding the next. Non-convergence is reported, not raised.
    """
    settings = settings or NewtonSettings.from_settings()
    started = time.perf_counter()
    disc = _discretization(mesh, degree, workers)
    spent = time.perf_counter() - started

    try:
        solution, report = newton_solve(disc, params, forcing, settings)
        failure = None
    except NumericalFailure as exc:
        solution, report, failure = None, None, exc

    if (report is None or not report.converged) and params.rossby < 1.0 and settings.initial_guess is None:
        logger.warning("Cold start failed at Ro=%g; continuing from Ro=1", params.rossby)
        if report is not None:
            spent += report.wall_time
        solution, report = _continuation(disc, params, forcing, settings)
    elif failure is not None:
        raise failure

    report.wall_time += spent
    report.method = "one-level"
    return solution, report


def _continuation(disc, params, forcing, settings):
    steps = settings.continuation_steps
    rossby_path = [params.rossby ** (k / steps) for k in range(steps + 1)]
    guess = None
    total = SolveReport(method="one-level", n_free=disc.n_free)
    for rossby in rossby_path:
        stage = type(params)(reynolds=params.reynolds, rossby=rossby)
        logger.info("Continuation stage Ro=%g", rossby)
        guess, report = newton_solve(disc, stage, forcing, settings.with_guess(guess))
        total.iterations += report.iterations
        total.linear_solves += report.linear_solves
        total.wall_time += report.wall_time
        total.residual_history.extend(report.residual_history)
        total.continuation.append(rossby)
        if not report.converged:
            logger.warning("Continuation stalled at Ro=%g", rossby)
            break
    total.converged = report.converged
    total.stop_rule = report.stop_rule
    total.residual_norm = report.residual_norm
    total.energy_defect = report.energy_defect
    return guess, total


def solve_fine_linear(coarse, hierarchy, params, forcing, settings=None, degree=None, workers=None, lookup=None):
    """
    One linear solve of ``a(psi_h, chi) + b(psi_H; psi_h, chi) + c(psi_h, chi) = l(chi)``
    on ``hierarchy.fine``, with ``psi_H = coarse``.
    """
    started = time.perf_counter()
    fine = Discretization(
        hierarchy.fine,
        degree=degree or coarse.discretization.degree,
        workers=workers or coarse.discretization.workers,
    )
    report = SolveReport(method="fine-linear", n_free=fine.n_free)

    zeta = CoarseField(coarse, fine, hierarchy, lookup=lookup)
    report.timings["lookup_seconds"] = zeta.lookup_seconds
    report.timings["coarse_evaluation_seconds"] = zeta.evaluation_seconds
    if zeta.tests is not None:
        report.timings["max_lookup_tests"] = int(zeta.tests.max(initial=0))

    assembly_started = time.perf_counter()
    operator = assemble_biharmonic(fine, params) + assemble_jacobian_form(zeta, fine) + assemble_beta(fine, params)
    L = assemble_load(_forcing_for(forcing, params), fine, params)
    report.timings["fine_assembly_seconds"] = time.perf_counter() - assembly_started

    solve_started = time.perf_counter()
    x = sparse_direct_solve(operator, L)
    report.timings["fine_factorization_seconds"] = time.perf_counter() - solve_started

    solution = Solution.from_free(fine, x)
    report.linear_solves = 1
    report.residual_norm = float(np.linalg.norm(operator @ x - L))
    report.residual_history.append(report.residual_norm)
    report.converged = True
    report.stop_rule = "direct"
    report.wall_time = time.perf_counter() - started
    report.energy_defect = energy_identity_defect(solution, L, params)
    return solution, report


def _hierarchy(coarse_mesh, fine_mesh_or_levels):
    if isinstance(fine_mesh_or_levels, MeshHierarchy):
        return fine_mesh_or_levels
    if isinstance(fine_mesh_or_levels, Mesh):
        fine = fine_mesh_or_levels
        parents, _ = coarse_mesh.locator.locate(fine.centroids)
        ratio = coarse_mesh.mesh_size / fine.mesh_size
        hierarchy = MeshHierarchy(
            coarse=coarse_mesh, fine=fine, parent_of=parents, levels=max(0, round(math.log2(ratio)))
        )
        hierarchy.check_containment()
        return hierarchy
    return refine_levels(coarse_mesh, int(fine_mesh_or_levels))


def solve_two_level(coarse_mesh, fine_mesh_or_levels, params, forcing, settings=None, degree=None, workers=None, lookup=None):
    """
    Nonlinear solve on the coarse mesh followed by one linear solve on the fine mesh.

    ``fine_mesh_or_levels`` is a refinement count, a MeshHierarchy or a fine Mesh
    nested in ``coarse_mesh``. Refinement is not timed.
    """
    hierarchy = _hierarchy(coarse_mesh, fine_mesh_or_levels)
    settings = settings or NewtonSettings.from_settings()

    coarse, coarse_report = solve_one_level(hierarchy.coarse, params, forcing, settings, degree=degree, workers=workers)
    coarse_seconds = coarse_report.wall_time
    fine, fine_report = solve_fine_linear(coarse, hierarchy, params, forcing, degree=degree, workers=workers, lookup=lookup)

    report = SolveReport(
        method="two-level",
        iterations=coarse_report.iterations,
        residual_norm=fine_report.residual_norm,
        linear_solves=coarse_report.linear_solves + fine_report.linear_solves,
        converged=coarse_report.converged and fine_report.converged,
        stop_rule=coarse_report.stop_rule,
        n_free=fine_report.n_free,
        residual_history=coarse_report.residual_history + fine_report.residual_history,
        continuation=coarse_report.continuation,
        energy_defect=fine_report.energy_defect,
    )
    report.timings = {"coarse_seconds": coarse_seconds, "coarse_free_dofs": coarse_report.n_free, **fine_report.timings}
    report.wall_time = coarse_seconds + fine_report.wall_time
    if not coarse_report.converged:
        logger.warning("Two-level solve used an unconverged coarse solution")
    return fine, report

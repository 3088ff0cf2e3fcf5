"""
Convergence and efficiency studies.

Rows run sequentially so that their wall times are comparable; parallelism is
confined to assembly inside a row.
"""

import logging
import platform
from dataclasses import dataclass, field

import numpy as np
import scipy
import sympy

from qge_project.apps.fem.analysis import ConvergenceRecord, error_norms, with_orders
from qge_project.apps.fem.exceptions import InvalidArgument, SolverError
from qge_project.apps.fem.mesh import generate_rect_mesh, refine_levels
from qge_project.apps.fem.solver import solve_one_level, solve_two_level

logger = logging.getLogger(__name__)

TIMING_NOTE = 'wall time covers assembly and solves; mesh generation, refinement and error norms are excluded'


@dataclass
class StudyResult:
    kind: str
    config: object
    records: list = field(default_factory=list)
    solves: list = field(default_factory=list)

    @property
    def converged(self):
        return all(record.converged for record in self.records)

    def metadata(self):
        newton = self.config.newton
        return {
            'study': self.kind,
            'workers': self.config.workers,
            'quad_degree': self.config.quad_degree,
            'newton': {
                'abs_tol': newton.abs_tol,
                'rel_tol': newton.rel_tol,
                'step_tol': newton.step_tol,
                'max_iters': newton.max_iters,
            },
            'lookup': self.config.lookup,
            'timing': TIMING_NOTE,
            'versions': {
                'python': platform.python_version(),
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'sympy': sympy.__version__,
            },
        }


def _failed_record(method, h, H=None):
    return ConvergenceRecord(
        h=h, dofs_h=0, e_L2=None, e_H1=None, e_H2=None, time_s=0.0,
        H=H, method=method, converged=False,
    )


def _record(method, solution, report, exact, coarse_size=None):
    errors = error_norms(solution, exact)
    return ConvergenceRecord(
        h=solution.mesh.mesh_size,
        dofs_h=solution.discretization.n_free,
        e_L2=errors.e_L2,
        e_H1=errors.e_H1,
        e_H2=errors.e_H2,
        time_s=report.wall_time,
        H=coarse_size,
        dofs_H=report.timings.get('coarse_free_dofs'),
        method=method,
        converged=report.converged,
        iterations=report.iterations,
        stop_rule=report.stop_rule,
    )


def run_one_level_row(config, h):
    """One-level solve at target size ``h``; returns ``(record, report)``."""
    exact = config.solution
    mesh = generate_rect_mesh(exact.domain, h)
    try:
        solution, report = solve_one_level(
            mesh, config.params, exact.forcing(config.params), config.newton_settings(),
            degree=config.quad_degree, workers=config.workers,
        )
    except SolverError as exc:
        logger.error('One-level solve at h=%g failed: %s', h, exc)
        return _failed_record('one-level', mesh.mesh_size), None
    logger.info('one-level h=%.6g: %d free DoFs, %.3fs', mesh.mesh_size, report.n_free, report.wall_time)
    return _record('one-level', solution, report, exact), report


def run_two_level_row(config, H, levels):
    """Two-level solve on a coarse mesh of target size ``H`` refined ``levels`` times."""
    exact = config.solution
    coarse = generate_rect_mesh(exact.domain, H)
    hierarchy = refine_levels(coarse, levels)
    try:
        solution, report = solve_two_level(
            coarse, hierarchy, config.params, exact.forcing(config.params), config.newton_settings(),
            degree=config.quad_degree, workers=config.workers, lookup=config.lookup,
        )
    except SolverError as exc:
        logger.error('Two-level solve at H=%g failed: %s', H, exc)
        return _failed_record('two-level', hierarchy.fine.mesh_size, coarse.mesh_size), None
    logger.info(
        'two-level H=%.6g h=%.6g: %d free DoFs, %.3fs',
        coarse.mesh_size, hierarchy.fine.mesh_size, report.n_free, report.wall_time,
    )
    return _record('two-level', solution, report, exact, coarse_size=coarse.mesh_size), report


def _solve_info(record, report):
    info = record.solve_info()
    if report is not None:
        info.update(
            energy_defect=report.energy_defect,
            residual_norm=report.residual_norm,
            continuation=list(report.continuation),
            timings=dict(report.timings),
        )
    return info


def _collect(result, rows, size):
    result.records = with_orders([record for record, _ in rows], size=size)
    reports = [report for _, report in rows]
    result.solves = [_solve_info(record, report) for record, report in zip(result.records, reports)]
    return result


def run_solve(config):
    """One row per entry of ``h_list`` with the configured method."""
    rows = []
    for h in config.h_list:
        if config.method == 'one-level':
            rows.append(run_one_level_row(config, h))
        else:
            rows.append(run_two_level_row(config, h * config.ratio, config.refinement_levels))
    return _collect(StudyResult('solve', config), rows, size='h')


def run_efficiency_study(config):
    """For every h: one-level at h, then two-level at (ratio * h, h)."""
    rows = []
    for h in config.h_list:
        rows.append(run_one_level_row(config, h))
        rows.append(run_two_level_row(config, h * config.ratio, config.refinement_levels))
    return _collect(StudyResult('efficiency', config), rows, size='h')


def coarse_levels(H, h):
    """Refinements taking a mesh of size H to one of size h; H / h must be a power of two."""
    ratio = H / h
    levels = int(round(np.log2(ratio)))
    if levels < 0 or not np.isclose(2.0**levels, ratio, rtol=1e-9):
        raise InvalidArgument(f'H={H!r} is not a power-of-two multiple of h={h!r}')
    return levels


def run_H_sweep(config):
    """Two-level rows over ``H_list`` at the fixed fine size ``sweep_h``."""
    rows = [run_two_level_row(config, H, coarse_levels(H, config.sweep_h)) for H in config.H_list]
    return _collect(StudyResult('sweep_coarse', config), rows, size='H')


def run_h_sweep(config):
    """Two-level rows over ``h_list`` with H = ratio * h."""
    rows = [run_two_level_row(config, h * config.ratio, config.refinement_levels) for h in config.h_list]
    return _collect(StudyResult('sweep_fine', config), rows, size='h')


STUDIES = {
    'solve': run_solve,
    'efficiency': run_efficiency_study,
    'sweep_coarse': run_H_sweep,
    'sweep_fine': run_h_sweep,
}

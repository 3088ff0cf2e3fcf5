"""
Acceptance thresholds applied by ``--check`` and by ``check_acceptance``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from qge_project.apps.fem.mesh import UNIT_SQUARE, generate_rect_mesh, refine_levels

logger = logging.getLogger(__name__)

ENERGY_TOL = 1e-8
PARITY_TOL = 0.05
MIN_SPEEDUP = 1.2
LOOKUP_FRACTION = 0.05
FINE_ORDER_RANGE = {'sine-squared': (3.5, 4.7), 'boundary-layer': (3.5, 5.0)}
FINE_ORDERS_CHECKED = {'sine-squared': 1, 'boundary-layer': 2}
ONE_LEVEL_ORDER_RANGE = (3.5, 5.0)
COARSE_ORDER_RANGE = (4.3, 5.7)


@dataclass(frozen=True)
class AcceptanceResult:
    name: str
    passed: bool
    detail: str

    def __str__(self):
        return f'[{"PASS" if self.passed else "FAIL"}] {self.name}: {self.detail}'


def _in_range(value, bounds):
    return value is not None and bounds[0] <= value <= bounds[1]


def check_converged(result):
    failed = [i for i, record in enumerate(result.records) if not record.converged]
    return AcceptanceResult(
        'all rows converged',
        not failed and bool(result.records),
        f'{len(result.records) - len(failed)}/{len(result.records)} rows converged',
    )


def check_energy(result):
    defects = [info.get('energy_defect') for info in result.solves]
    worst = max((d for d in defects if d is not None), default=None)
    passed = worst is not None and None not in defects and worst <= ENERGY_TOL
    return AcceptanceResult('energy identity', passed, f'largest relative defect {worst!r} (limit {ENERGY_TOL:g})')


def check_fine_orders(result):
    problem = result.config.problem
    bounds = FINE_ORDER_RANGE.get(problem, FINE_ORDER_RANGE['sine-squared'])
    count = FINE_ORDERS_CHECKED.get(problem, 1)
    orders = [r.order_H2 for r in result.records if r.method == 'two-level'][1:]
    checked = orders[-count:]
    passed = len(checked) == count and all(_in_range(order, bounds) for order in checked)
    return AcceptanceResult('H2 order in h', passed, f'final order(s) {checked} expected in {list(bounds)}')


def check_one_level_order(result):
    """Observed H2 order between the two finest one-level rows."""
    orders = [r.order_H2 for r in result.records if r.method == 'one-level'][1:]
    final = orders[-1] if orders else None
    return AcceptanceResult(
        'one-level H2 order in h', _in_range(final, ONE_LEVEL_ORDER_RANGE),
        f'final order {final!r} expected in {list(ONE_LEVEL_ORDER_RANGE)}; all {orders}',
    )


def fitted_order(sizes, errors):
    """Least-squares slope of log(error) against log(size)."""
    slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
    return float(slope)


def check_coarse_orders(result):
    """
    Order in H fitted over the mid-range rows of the sweep: the coarsest row is
    pre-asymptotic and the finest sits on the fine-mesh error floor.
    """
    rows = [r for r in result.records if r.H is not None and r.e_H2]
    middle = rows[1:-1] if len(rows) > 3 else rows
    fitted = fitted_order([r.H for r in middle], [r.e_H2 for r in middle]) if len(middle) >= 2 else None
    orders = [r.order_H2 for r in result.records][1:]
    return AcceptanceResult(
        'H2 order in H', _in_range(fitted, COARSE_ORDER_RANGE),
        f'mid-range order {fitted!r} over H={[r.H for r in middle]} expected in {list(COARSE_ORDER_RANGE)}; '
        f'pairwise {orders}',
    )


def _pairs(result):
    one = [r for r in result.records if r.method == 'one-level']
    two = [r for r in result.records if r.method == 'two-level']
    return list(zip(one, two))


def _gap(one, two):
    if one.e_H2 is None or two.e_H2 is None or one.e_H2 == 0:
        return None
    return abs(two.e_H2 - one.e_H2) / one.e_H2


def check_parity(result):
    """
    Relative H2 gap between the two methods at the finest pair. Coarser pairs
    are reported only: there the coarse error is still of the size of the fine one.
    """
    gaps = [_gap(one, two) for one, two in _pairs(result)]
    finest = gaps[-1] if gaps else None
    passed = finest is not None and finest <= PARITY_TOL
    return AcceptanceResult(
        'two-level/one-level H2 parity at the finest pair', passed,
        f'gap {finest!r} (limit {PARITY_TOL:g}); all gaps {gaps}',
    )


def check_speedup(result):
    pairs = _pairs(result)
    if not pairs:
        return AcceptanceResult('speedup', False, 'no one-level/two-level pair')
    one, two = pairs[-1]
    speedup = one.time_s / two.time_s if two.time_s > 0 else None
    passed = speedup is not None and two.time_s < one.time_s and speedup >= MIN_SPEEDUP
    return AcceptanceResult(
        'speedup at the finest pair', passed,
        f'one-level {one.time_s:.3f}s, two-level {two.time_s:.3f}s, speedup {speedup!r} (minimum {MIN_SPEEDUP:g})',
    )


def check_lookup_share(result):
    """Parent lookup time against total fine-level assembly time of each two-level row."""
    shares = []
    for info in result.solves:
        timings = info.get('timings') or {}
        if info.get('method') != 'two-level' or 'lookup_seconds' not in timings:
            continue
        total = (
            timings['lookup_seconds']
            + timings.get('coarse_evaluation_seconds', 0.0)
            + timings.get('fine_assembly_seconds', 0.0)
        )
        shares.append(timings['lookup_seconds'] / total if total > 0 else 0.0)
    passed = bool(shares) and max(shares) < LOOKUP_FRACTION
    return AcceptanceResult('parent lookup share', passed, f'lookup shares {shares} (limit {LOOKUP_FRACTION:g})')


def check_parent_search(mesh_size=0.25, levels=4, domain=None):
    """Centroid search agrees with stored parentage on every fine triangle of a hierarchy."""
    coarse = generate_rect_mesh(domain or UNIT_SQUARE, mesh_size)
    hierarchy = refine_levels(coarse, levels)
    found, tests = coarse.locator.locate(hierarchy.fine.centroids)
    agree = float(np.mean(found == hierarchy.parent_of))
    return AcceptanceResult(
        'parent search', agree == 1.0,
        f'{agree:.2%} of {hierarchy.fine.n_triangles} fine triangles, at most {int(tests.max())} tests per query',
    )


CHECKS = {
    'solve': (check_converged, check_energy),
    'efficiency': (
        check_converged, check_energy, check_one_level_order, check_parity, check_speedup, check_lookup_share,
    ),
    'sweep_fine': (check_converged, check_energy, check_fine_orders, check_lookup_share),
    'sweep_coarse': (check_converged, check_energy, check_coarse_orders, check_lookup_share),
}


def check_study(result):
    outcomes = [check(result) for check in CHECKS[result.kind]]
    for outcome in outcomes:
        (logger.info if outcome.passed else logger.warning)('%s', outcome)
    return outcomes

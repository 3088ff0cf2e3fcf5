"""
Tests for the acceptance thresholds, on synthetic study results.
"""

import pytest

from qge_project.apps.experiments.acceptance import (
    CHECKS,
    check_coarse_orders,
    check_lookup_share,
    check_one_level_order,
    check_parity,
    check_study,
    fitted_order,
)
from qge_project.apps.experiments.config import load_config
from qge_project.apps.experiments.studies import StudyResult
from qge_project.apps.fem.analysis import ConvergenceRecord, with_orders

SIZES = (1 / 16, 1 / 32, 1 / 64)


def record(h, e_H2, method="one-level", H=None, time_s=1.0):
    return ConvergenceRecord(h=h, dofs_h=100, e_L2=None, e_H1=None, e_H2=e_H2, time_s=time_s, H=H, method=method)


def two_level_info(lookup, evaluation=0.5, assembly=1.0):
    return {
        "method": "two-level",
        "converged": True,
        "energy_defect": 1e-12,
        "timings": {
            "lookup_seconds": lookup,
            "coarse_evaluation_seconds": evaluation,
            "fine_assembly_seconds": assembly,
        },
    }


def make_result(kind, records, solves=None, **overrides):
    config = load_config().with_overrides(**overrides)
    records = with_orders(records, size="H" if kind == "sweep_coarse" else "h")
    if solves is None:
        solves = [
            two_level_info(1e-4) if r.method == "two-level" else {"method": r.method, "energy_defect": 1e-12}
            for r in records
        ]
    return StudyResult(kind, config, records, solves)


def efficiency_records(one_level_errors, two_level_errors, one_level_time=2.0, two_level_time=1.0):
    records = []
    for h, one, two in zip(SIZES, one_level_errors, two_level_errors):
        records.append(record(h, one, time_s=one_level_time))
        records.append(record(h, two, method="two-level", H=2 * h, time_s=two_level_time))
    return records


class LookupShareTestCase:
    def test_slow_lookup_fails(self):
        result = make_result("efficiency", [], solves=[two_level_info(0.2), two_level_info(1e-3)])
        outcome = check_lookup_share(result)
        assert not outcome.passed
        assert "0.1" in outcome.detail

    def test_fast_lookup_passes(self):
        result = make_result("efficiency", [], solves=[two_level_info(1e-3), two_level_info(2e-3)])
        assert check_lookup_share(result).passed

    def test_one_level_rows_only(self):
        result = make_result("efficiency", [], solves=[{"method": "one-level", "timings": {"lookup_seconds": 0.0}}])
        assert not check_lookup_share(result).passed

    @pytest.mark.parametrize("lookup", ["stored", "search"])
    def test_checked_in_every_lookup_mode(self, lookup):
        records = efficiency_records((3.6, 0.2, 0.0116), (4.7, 0.27, 0.0121))
        solves = [
            two_level_info(0.5) if r.method == "two-level" else {"method": "one-level", "energy_defect": 1e-12}
            for r in records
        ]
        result = make_result("efficiency", records, solves=solves, lookup=lookup)
        names = {outcome.name: outcome.passed for outcome in check_study(result)}
        assert names["parent lookup share"] is False

    @pytest.mark.parametrize("kind", ["efficiency", "sweep_fine", "sweep_coarse"])
    def test_registered_for_two_level_studies(self, kind):
        assert check_lookup_share in CHECKS[kind]


class ParityTestCase:
    def test_finest_pair_decides(self):
        # Gaps of about 31%, 32% and 4.3%.
        result = make_result("efficiency", efficiency_records((3.622, 0.2045, 0.01157), (4.755, 0.2701, 0.01206)))
        outcome = check_parity(result)
        assert outcome.passed
        assert "0.31" in outcome.detail

    def test_gap_at_finest_pair(self):
        result = make_result("efficiency", efficiency_records((3.6, 0.2, 0.0116), (3.6, 0.2, 0.0139)))
        assert not check_parity(result).passed

    def test_missing_error(self):
        result = make_result("efficiency", efficiency_records((3.6, 0.2, 0.0116), (3.6, 0.2, None)))
        assert not check_parity(result).passed

    def test_no_pairs(self):
        assert not check_parity(make_result("efficiency", [])).passed


class OneLevelOrderTestCase:
    def test_fourth_order(self):
        result = make_result("efficiency", efficiency_records((3.622, 0.2045, 0.01157), (4.7, 0.27, 0.0121)))
        outcome = check_one_level_order(result)
        assert outcome.passed
        assert "4.14" in outcome.detail

    def test_third_order_fails(self):
        result = make_result("efficiency", efficiency_records((1.0, 1 / 8, 1 / 64), (1.0, 1 / 8, 1 / 64)))
        assert not check_one_level_order(result).passed

    def test_single_row(self):
        result = make_result("efficiency", efficiency_records((1.0,), (1.0,)))
        assert not check_one_level_order(result).passed

    def test_registered_for_efficiency(self):
        assert check_one_level_order in CHECKS["efficiency"]


class CoarseOrderTestCase:
    COARSE = (1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)

    def sweep(self, errors):
        return make_result("sweep_coarse", [
            record(1 / 128, e, method="two-level", H=H) for H, e in zip(self.COARSE, errors)
        ])

    def test_fitted_order(self):
        assert fitted_order([0.5, 0.25, 0.125], [0.5**5, 0.25**5, 0.125**5]) == pytest.approx(5.0)

    def test_ends_are_left_out(self):
        # Pre-asymptotic first row, fifth-order middle, plateau at the end.
        middle = [1e3 * H**5 for H in self.COARSE[1:4]]
        assert check_coarse_orders(self.sweep([20.0, *middle, middle[-1] * 0.9])).passed

    def test_third_order_fails(self):
        assert not check_coarse_orders(self.sweep([H**3 for H in self.COARSE])).passed

    def test_two_rows(self):
        outcome = check_coarse_orders(self.sweep([1e3 * (1 / 4) ** 5, 1e3 * (1 / 8) ** 5]))
        assert outcome.passed

    def test_single_row(self):
        assert not check_coarse_orders(self.sweep([1.0])).passed

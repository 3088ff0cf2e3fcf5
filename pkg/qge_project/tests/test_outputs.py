"""
Tests for the CSV, JSON and plot-data tables written by the studies.
"""

import json

import pytest

from qge_project.apps.experiments.config import load_config
from qge_project.apps.experiments.outputs import (
    emit_outputs,
    format_cell,
    read_csv_table,
    result_document,
    write_csv,
    write_plot_data,
)
from qge_project.apps.experiments.studies import StudyResult
from qge_project.apps.fem.analysis import CSV_COLUMNS, ConvergenceRecord, with_orders
from qge_project.apps.fem.exceptions import OutputFailure


def make_result(kind="efficiency", plot_data=False):
    records = with_orders([
        ConvergenceRecord(h=0.0883883476483184, dofs_h=498, e_L2=1.234567890123e-4, e_H1=2.5e-3,
                          e_H2=0.1 / 3, time_s=0.25, method="one-level", iterations=5, stop_rule="absolute"),
        ConvergenceRecord(h=0.0883883476483184, dofs_h=498, e_L2=1.3e-4, e_H1=2.6e-3, e_H2=0.034,
                          time_s=0.125, H=0.1767766952966368, dofs_H=106, method="two-level", iterations=4,
                          stop_rule="relative"),
        ConvergenceRecord(h=0.0441941738241592, dofs_h=2146, e_L2=None, e_H1=None, e_H2=None,
                          time_s=0.0, method="one-level", converged=False),
    ])
    config = load_config().with_overrides(plot_data=plot_data)
    return StudyResult(kind, config, records, [record.solve_info() for record in records])


class FormatCellTestCase:
    @pytest.mark.parametrize(
        "value,text", [(None, ""), (True, "true"), (106, "106"), (0.1, "0.10000000000000001")]
    )
    def test_cells(self, value, text):
        assert format_cell(value) == text


class CsvTestCase:
    def test_header_only(self, tmp_path):
        path = write_csv([], tmp_path / "empty.csv")
        assert path.read_text().strip() == ",".join(CSV_COLUMNS)
        assert read_csv_table(path) == []

    def test_values_survive(self, tmp_path):
        result = make_result()
        rows = read_csv_table(write_csv(result.records, tmp_path / "table.csv"))
        assert len(rows) == 3
        for row, record in zip(rows, result.records):
            assert row == record.as_row()
        assert rows[1]["dofs_H"] == 106
        assert rows[2]["e_H2"] is None

    def test_unwritable(self, tmp_path):
        with pytest.raises(OutputFailure):
            write_csv([], tmp_path / "missing" / "table.csv")


class JsonTestCase:
    def test_document(self):
        result = make_result()
        document = result_document(result)
        assert list(document) == ["config", "metadata", "rows", "solves"]
        assert document["metadata"]["study"] == "efficiency"
        assert document["metadata"]["quad_degree"] == 14
        assert "excluded" in document["metadata"]["timing"]
        assert document["rows"][1]["H"] == pytest.approx(0.1767766952966368)
        assert document["solves"][0]["stop_rule"] == "absolute"
        json.dumps(document)


class PlotDataTestCase:
    def test_blocks_per_method(self, tmp_path):
        time_path, error_path = write_plot_data(make_result().records, tmp_path)
        assert time_path.name == "time_vs_dofs.dat"
        blocks = time_path.read_text().split("\n\n\n")
        assert blocks[0].strip().splitlines() == ["# one-level", "498 0.25"]
        assert blocks[1].strip().splitlines() == ["# two-level", "498 0.125"]
        assert "0.034000000000000002" in error_path.read_text()


class EmitOutputsTestCase:
    def test_csv_and_json(self, tmp_path):
        paths = emit_outputs(make_result(kind="sweep_fine"), out=tmp_path / "run")
        assert [path.name for path in paths] == ["sweep_fine.csv", "sweep_fine.json"]
        document = json.loads(paths[1].read_text())
        assert len(document["rows"]) == 3

    def test_plot_data_from_config(self, tmp_path):
        paths = emit_outputs(make_result(plot_data=True), out=tmp_path)
        assert {path.name for path in paths} == {
            "efficiency.csv", "efficiency.json", "time_vs_dofs.dat", "error_vs_time.dat",
        }

    def test_uncreatable_directory(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OutputFailure):
            emit_outputs(make_result(), out=blocker / "run")

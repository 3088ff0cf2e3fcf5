"""
Tables written by the studies: CSV, JSON and two-column plot data.
"""

import csv
import json
import logging
from pathlib import Path

from qge_project.apps.fem.analysis import CSV_COLUMNS
from qge_project.apps.fem.exceptions import OutputFailure

logger = logging.getLogger(__name__)

INTEGER_COLUMNS = ('dofs_H', 'dofs_h')


def format_cell(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return '%.17g' % value


def write_csv(records, path):
    path = Path(path)
    try:
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                row = record.as_row()
                writer.writerow([format_cell(row[column]) for column in CSV_COLUMNS])
    except OSError as exc:
        raise OutputFailure(f'Cannot write {path}: {exc}') from exc
    return path


def read_csv_table(path):
    """Rows of a CSV written by :func:`write_csv`, as dictionaries (empty cells -> None)."""
    rows = []
    with Path(path).open(newline='') as handle:
        for raw in csv.DictReader(handle):
            row = {}
            for column in CSV_COLUMNS:
                cell = raw.get(column, '')
                if cell == '':
                    row[column] = None
                elif column in INTEGER_COLUMNS:
                    row[column] = int(cell)
                else:
                    row[column] = float(cell)
            rows.append(row)
    return rows


def result_document(result):
    return {
        'config': result.config.to_dict(),
        'metadata': result.metadata(),
        'rows': [record.as_row() for record in result.records],
        'solves': result.solves,
    }


def write_json(result, path):
    path = Path(path)
    try:
        path.write_text(json.dumps(result_document(result), indent=2) + '\n')
    except OSError as exc:
        raise OutputFailure(f'Cannot write {path}: {exc}') from exc
    return path


def write_plot_data(records, directory):
    """
    ``time_vs_dofs.dat`` (free DoFs, seconds) and ``error_vs_time.dat``
    (seconds, H2 error), one gnuplot index block per method.
    """
    directory = Path(directory)
    methods = []
    for record in records:
        if record.method not in methods:
            methods.append(record.method)

    def blocks(columns):
        lines = []
        for method in methods:
            lines.append(f'# {method}')
            for record in records:
                values = [getattr(record, column) for column in columns]
                if record.method == method and record.converged and None not in values:
                    lines.append(' '.join(format_cell(value) for value in values))
            lines.extend(['', ''])
        return '\n'.join(lines)

    paths = []
    for name, columns in (('time_vs_dofs.dat', ('dofs_h', 'time_s')), ('error_vs_time.dat', ('time_s', 'e_H2'))):
        path = directory / name
        try:
            path.write_text(blocks(columns))
        except OSError as exc:
            raise OutputFailure(f'Cannot write {path}: {exc}') from exc
        paths.append(path)
    return paths


def emit_outputs(result, out=None, plot_data=None):
    """Write ``<kind>.csv``, ``<kind>.json`` and, optionally, plot data under ``out``."""
    directory = Path(out or result.config.out)
    plot_data = result.config.plot_data if plot_data is None else plot_data
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputFailure(f'Cannot create output directory {directory}: {exc}') from exc

    paths = [
        write_csv(result.records, directory / f'{result.kind}.csv'),
        write_json(result, directory / f'{result.kind}.json'),
    ]
    if plot_data:
        paths.extend(write_plot_data(result.records, directory))
    logger.info('Wrote %s', ', '.join(str(path) for path in paths))
    return paths

"""
Shared plumbing of the study management commands.

Exit codes: 0 on success, 2 when a solve failed, 3 when ``--check`` thresholds
were not met.
"""

from django.core.management.base import BaseCommand, CommandError

from qge_project.apps.fem.exceptions import InvalidArgument, OutputFailure, SolverError

from .acceptance import check_study
from .config import load_config, parse_size_list
from .models import ExperimentRun
from .outputs import emit_outputs

SOLVER_FAILURE = 2
ACCEPTANCE_FAILURE = 3

COLUMNS = (
    ('method', 10, None),
    ('H', 10, '.4g'),
    ('h', 10, '.4g'),
    ('dofs_h', 8, 'd'),
    ('e_L2', 10, '.3e'),
    ('e_H1', 10, '.3e'),
    ('e_H2', 10, '.3e'),
    ('order_H2', 8, '.2f'),
    ('time_s', 8, '.2f'),
)


def _cell(value, spec):
    if value is None:
        return '-'
    return format(value, spec) if spec else str(value)


def format_table(records):
    lines = ['  '.join(name.rjust(width) for name, width, _ in COLUMNS)]
    lines.append('-' * len(lines[0]))
    for record in records:
        lines.append('  '.join(
            _cell(getattr(record, name), spec).rjust(width) for name, width, spec in COLUMNS
        ))
    return '\n'.join(lines)


def _size(text):
    sizes = parse_size_list(text)
    if len(sizes) != 1:
        raise InvalidArgument(f'Expected a single mesh size, got {text!r}')
    return sizes[0]


def add_study_arguments(parser):
    parser.add_argument('--config', help='TOML file with [problem], [mesh], [solver] and [output] sections')
    parser.add_argument('--problem', help='Manufactured problem: sine-squared or boundary-layer')
    parser.add_argument('--re', type=float, help='Reynolds number')
    parser.add_argument('--ro', type=float, help='Rossby number')
    parser.add_argument('--method', choices=['one-level', 'two-level'], help='Method for the solve command')
    parser.add_argument('--h-list', dest='h_list', type=parse_size_list, help='Fine mesh sizes, e.g. "1/16,1/32"')
    parser.add_argument('--H-list', dest='H_list', type=parse_size_list, help='Coarse mesh sizes for the H sweep')
    parser.add_argument('--sweep-h', dest='sweep_h', type=_size, help='Fixed fine mesh size of the H sweep, e.g. "1/128"')
    parser.add_argument('--ratio', type=int, help='H / h for two-level rows (power of two)')
    parser.add_argument('--quad-degree', dest='quad_degree', type=int, help='Quadrature degree (1-20)')
    parser.add_argument('--newton-tol', dest='newton_tol', type=float, help='Absolute Newton residual tolerance')
    parser.add_argument('--workers', type=int, help='Assembly worker threads')
    parser.add_argument('--lookup', choices=['stored', 'search'], help='Coarse parent lookup')
    parser.add_argument('--out', help='Output directory')
    parser.add_argument('--plot-data', dest='plot_data', action='store_true', default=None,
                        help='Also write time_vs_dofs.dat and error_vs_time.dat')
    parser.add_argument('--check', action='store_true', help='Apply the acceptance thresholds')
    parser.add_argument('--no-store', dest='no_store', action='store_true',
                        help='Do not save the run in the database')


OVERRIDES = ('problem', 're', 'ro', 'method', 'h_list', 'H_list', 'sweep_h', 'ratio', 'quad_degree',
             'newton_tol', 'workers', 'lookup', 'out', 'plot_data')


class StudyCommand(BaseCommand):
    # Subclasses set ``kind`` and ``study = staticmethod(<runner>)``.
    kind = None
    study = None

    def add_arguments(self, parser):
        add_study_arguments(parser)

    def build_config(self, options):
        try:
            config = load_config(options.get('config'))
            return config.with_overrides(**{name: options.get(name) for name in OVERRIDES})
        except InvalidArgument as exc:
            raise CommandError(str(exc)) from exc

    def run_and_report(self, config, check=False, store=True, kind=None, study=None):
        """Run the study, write its outputs, optionally check and store it. Returns (result, passed)."""
        kind = kind or self.kind
        study = study or self.study
        self.stdout.write(f'Running {kind} for {config.problem} (Re={config.reynolds:g}, Ro={config.rossby:g})...')
        try:
            result = study(config)
            paths = emit_outputs(result)
        except OutputFailure as exc:
            raise CommandError(str(exc)) from exc
        except SolverError as exc:
            raise CommandError(str(exc), returncode=SOLVER_FAILURE) from exc

        self.stdout.write(format_table(result.records))
        for path in paths:
            self.stdout.write(f'Wrote {path}')

        outcomes = check_study(result) if check else None
        if outcomes is not None:
            for outcome in outcomes:
                style = self.style.SUCCESS if outcome.passed else self.style.ERROR
                self.stdout.write(style(str(outcome)))
        if store:
            run = ExperimentRun.record(result, outcomes)
            self.stdout.write(f'Stored run #{run.pk}')
        passed = outcomes is None or all(outcome.passed for outcome in outcomes)
        return result, passed

    def handle(self, *args, **options):
        config = self.build_config(options)
        result, passed = self.run_and_report(config, check=options['check'], store=not options['no_store'])
        if not result.converged:
            raise CommandError(
                f'{sum(not r.converged for r in result.records)} row(s) failed to converge',
                returncode=SOLVER_FAILURE,
            )
        if not passed:
            raise CommandError('Acceptance thresholds not met', returncode=ACCEPTANCE_FAILURE)
        self.stdout.write(self.style.SUCCESS(f'{self.kind} finished with {len(result.records)} row(s)'))

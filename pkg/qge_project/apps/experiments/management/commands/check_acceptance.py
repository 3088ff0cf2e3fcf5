from pathlib import Path

from django.core.management.base import CommandError

from qge_project.apps.experiments.acceptance import check_parent_search
from qge_project.apps.experiments.commands import ACCEPTANCE_FAILURE, SOLVER_FAILURE, StudyCommand
from qge_project.apps.experiments.studies import STUDIES

SUITE = (
    ('sine-squared', 'sweep_fine'),
    ('sine-squared', 'sweep_coarse'),
    ('sine-squared', 'efficiency'),
    ('boundary-layer', 'sweep_fine'),
)


class Command(StudyCommand):
    help = 'Run the acceptance suite: parent search, both manufactured problems, all studies with --check'
    kind = 'check_acceptance'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML file used as the base configuration')
        parser.add_argument('--quad-degree', dest='quad_degree', type=int, help='Quadrature degree (1-20)')
        parser.add_argument('--workers', type=int, help='Assembly worker threads')
        parser.add_argument('--lookup', choices=['stored', 'search'], help='Coarse parent lookup')
        parser.add_argument('--out', default='results/acceptance', help='Output directory')
        parser.add_argument(
            '--skip-boundary-layer',
            dest='skip_boundary_layer',
            action='store_true',
            help='Leave out the boundary-layer problem (its finest mesh takes minutes)',
        )
        parser.add_argument('--no-store', dest='no_store', action='store_true',
                            help='Do not save the runs in the database')

    def handle(self, *args, **options):
        outcome = check_parent_search()
        self.stdout.write((self.style.SUCCESS if outcome.passed else self.style.ERROR)(str(outcome)))
        failures = [] if outcome.passed else [outcome.name]
        unconverged = []

        base = self.build_config({
            'config': options.get('config'),
            'quad_degree': options.get('quad_degree'),
            'workers': options.get('workers'),
            'lookup': options.get('lookup'),
        })
        for problem, kind in SUITE:
            if problem == 'boundary-layer' and options['skip_boundary_layer']:
                self.stdout.write(f'Skipping {kind} for {problem}')
                continue
            config = base.with_overrides(problem=problem, out=str(Path(options['out']) / problem))
            result, passed = self.run_and_report(
                config, check=True, store=not options['no_store'], kind=kind, study=STUDIES[kind],
            )
            if not result.converged:
                unconverged.append(f'{problem}/{kind}')
            if not passed:
                failures.append(f'{problem}/{kind}')

        if unconverged:
            raise CommandError(f'Solves failed in: {", ".join(unconverged)}', returncode=SOLVER_FAILURE)
        if failures:
            raise CommandError(f'Acceptance failed: {", ".join(failures)}', returncode=ACCEPTANCE_FAILURE)
        self.stdout.write(self.style.SUCCESS('All acceptance checks passed'))

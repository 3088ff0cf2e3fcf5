from qge_project.apps.experiments.commands import StudyCommand
from qge_project.apps.experiments.studies import run_h_sweep


class Command(StudyCommand):
    help = 'Two-level convergence in the fine size h with H = ratio * h'
    kind = 'sweep_fine'
    study = staticmethod(run_h_sweep)

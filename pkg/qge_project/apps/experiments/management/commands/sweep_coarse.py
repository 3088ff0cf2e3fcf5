from qge_project.apps.experiments.commands import StudyCommand
from qge_project.apps.experiments.studies import run_H_sweep


class Command(StudyCommand):
    help = 'Two-level convergence in the coarse size H at the smallest fine size of --h-list'
    kind = 'sweep_coarse'
    study = staticmethod(run_H_sweep)

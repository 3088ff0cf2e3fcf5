"""
Experiment configuration: TOML file, then command-line overrides.

Sections of the file::

    [problem]  id, re, ro
    [mesh]     h_list, H_list, sweep_h, ratio
    [solver]   method, quad_degree, newton_tol, newton_rel_tol, newton_step_tol,
               newton_max_iters, workers, lookup
    [output]   dir, plot_data
"""

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path

from qge_project.apps.fem.analysis import get_problem
from qge_project.apps.fem.assembly import FlowParams
from qge_project.apps.fem.conf import solver_settings
from qge_project.apps.fem.exceptions import InvalidArgument
from qge_project.apps.fem.quadrature import MAX_DEGREE, MIN_DEGREE
from qge_project.apps.fem.solver import NewtonSettings

METHODS = ('one-level', 'two-level')
LOOKUPS = ('stored', 'search')

DEFAULT_H_LISTS = {
    'sine-squared': (1 / 16, 1 / 32, 1 / 64),
    'boundary-layer': (1 / 8, 1 / 16, 1 / 32, 1 / 64),
}
DEFAULT_COARSE_LIST = (1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)
# Fixed fine size of the H sweep, well below the smallest H.
DEFAULT_SWEEP_H = {'sine-squared': 1 / 128, 'boundary-layer': 1 / 64}


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float
    rel_tol: float
    step_tol: float
    max_iters: int

    def settings(self, continuation_steps):
        return NewtonSettings(
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            step_tol=self.step_tol,
            max_iters=self.max_iters,
            continuation_steps=continuation_steps,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    reynolds: float
    rossby: float
    h_list: tuple
    H_list: tuple
    sweep_h: float
    ratio: int
    method: str
    quad_degree: int
    newton: NewtonConfig
    workers: int
    lookup: str
    out: str
    plot_data: bool = False
    continuation_steps: int = 3

    def __post_init__(self):
        get_problem(self.problem)
        FlowParams(self.reynolds, self.rossby)
        for name in ('h_list', 'H_list'):
            sizes = getattr(self, name)
            if any(not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0) for s in sizes):
                raise InvalidArgument(f'{name} must contain positive sizes, got {sizes!r}')
            if any(b >= a for a, b in zip(sizes, sizes[1:])):
                raise InvalidArgument(f'{name} must be strictly decreasing, got {sizes!r}')
        if not (isinstance(self.sweep_h, (int, float)) and math.isfinite(self.sweep_h) and self.sweep_h > 0):
            raise InvalidArgument(f'sweep_h must be a positive size, got {self.sweep_h!r}')
        if any(H < self.sweep_h for H in self.H_list):
            raise InvalidArgument(f'H_list {self.H_list!r} reaches below sweep_h={self.sweep_h!r}')
        if self.ratio < 1 or self.ratio & (self.ratio - 1):
            raise InvalidArgument(f'ratio must be a power of two, got {self.ratio}')
        if self.method not in METHODS:
            raise InvalidArgument(f'method must be one of {METHODS}, got {self.method!r}')
        if self.lookup not in LOOKUPS:
            raise InvalidArgument(f'lookup must be one of {LOOKUPS}, got {self.lookup!r}')
        if not MIN_DEGREE <= self.quad_degree <= MAX_DEGREE:
            raise InvalidArgument(f'quad_degree must lie in [{MIN_DEGREE}, {MAX_DEGREE}]')
        if self.workers < 1:
            raise InvalidArgument(f'workers must be at least 1, got {self.workers}')

    @property
    def params(self):
        return FlowParams(self.reynolds, self.rossby)

    @property
    def solution(self):
        return get_problem(self.problem)

    @property
    def refinement_levels(self):
        return int(round(math.log2(self.ratio)))

    def newton_settings(self):
        return self.newton.settings(self.continuation_steps)

    def to_dict(self):
        return {
            'problem': {'id': self.problem, 're': self.reynolds, 'ro': self.rossby},
            'mesh': {
                'h_list': list(self.h_list),
                'H_list': list(self.H_list),
                'sweep_h': self.sweep_h,
                'ratio': self.ratio,
            },
            'solver': {
                'method': self.method,
                'quad_degree': self.quad_degree,
                'newton_tol': self.newton.abs_tol,
                'newton_rel_tol': self.newton.rel_tol,
                'newton_step_tol': self.newton.step_tol,
                'newton_max_iters': self.newton.max_iters,
                'continuation_steps': self.continuation_steps,
                'workers': self.workers,
                'lookup': self.lookup,
            },
            'output': {'dir': self.out, 'plot_data': self.plot_data},
        }

    @classmethod
    def from_dict(cls, data):
        defaults = solver_settings()
        problem = data.get('problem', {})
        mesh = data.get('mesh', {})
        solver = data.get('solver', {})
        output = data.get('output', {})
        unknown = set(data) - {'problem', 'mesh', 'solver', 'output'}
        if unknown:
            raise InvalidArgument(f'Unknown config section(s): {", ".join(sorted(unknown))}')

        identifier = problem.get('id', 'sine-squared')
        registered = get_problem(identifier)
        return cls(
            problem=identifier,
            reynolds=float(problem.get('re', registered.reynolds)),
            rossby=float(problem.get('ro', registered.rossby)),
            h_list=tuple(float(h) for h in mesh.get('h_list', DEFAULT_H_LISTS[identifier])),
            H_list=tuple(float(h) for h in mesh.get('H_list', DEFAULT_COARSE_LIST)),
            sweep_h=float(mesh.get('sweep_h', DEFAULT_SWEEP_H[identifier])),
            ratio=int(mesh.get('ratio', 2)),
            method=solver.get('method', 'two-level'),
            quad_degree=int(solver.get('quad_degree', defaults['QUADRATURE_DEGREE'])),
            newton=NewtonConfig(
                abs_tol=float(solver.get('newton_tol', defaults['NEWTON_ABS_TOL'])),
                rel_tol=float(solver.get('newton_rel_tol', defaults['NEWTON_REL_TOL'])),
                step_tol=float(solver.get('newton_step_tol', defaults['NEWTON_STEP_TOL'])),
                max_iters=int(solver.get('newton_max_iters', defaults['NEWTON_MAX_ITERS'])),
            ),
            continuation_steps=int(solver.get('continuation_steps', defaults['CONTINUATION_STEPS'])),
            workers=int(solver.get('workers', defaults['WORKERS'])),
            lookup=solver.get('lookup', defaults['LOOKUP']),
            out=str(output.get('dir', defaults['OUTPUT_DIR'])),
            plot_data=bool(output.get('plot_data', False)),
        )

    def with_overrides(self, **flags):
        """Apply command-line flags; ``None`` values are ignored."""
        data = self.to_dict()
        targets = {
            'problem': ('problem', 'id'),
            're': ('problem', 're'),
            'ro': ('problem', 'ro'),
            'h_list': ('mesh', 'h_list'),
            'H_list': ('mesh', 'H_list'),
            'sweep_h': ('mesh', 'sweep_h'),
            'ratio': ('mesh', 'ratio'),
            'method': ('solver', 'method'),
            'quad_degree': ('solver', 'quad_degree'),
            'newton_tol': ('solver', 'newton_tol'),
            'workers': ('solver', 'workers'),
            'lookup': ('solver', 'lookup'),
            'out': ('output', 'dir'),
            'plot_data': ('output', 'plot_data'),
        }
        problem_changed = flags.get('problem') not in (None, self.problem)
        if problem_changed:
            # Problem defaults (Re, Ro, sizes) follow the new problem unless given explicitly.
            data['problem'] = {'id': flags['problem']}
            data['mesh'].pop('h_list')
            data['mesh'].pop('sweep_h')
        for name, value in flags.items():
            if value is None:
                continue
            if name not in targets:
                raise InvalidArgument(f'Unknown override {name!r}')
            section, key = targets[name]
            data[section][key] = list(value) if isinstance(value, (list, tuple)) else value
        return ExperimentConfig.from_dict(data)


def parse_size_list(text):
    """'1/16, 1/32, 0.015625' -> (0.0625, 0.03125, 0.015625)."""
    sizes = []
    for token in str(text).replace(';', ',').split(','):
        token = token.strip()
        if not token:
            continue
        try:
            if '/' in token:
                numerator, denominator = token.split('/', 1)
                sizes.append(float(numerator) / float(denominator))
            else:
                sizes.append(float(token))
        except (ValueError, ZeroDivisionError):
            raise InvalidArgument(f'Cannot parse mesh size {token!r}') from None
    return tuple(sizes)


def load_config(path=None):
    if path is None:
        return ExperimentConfig.from_dict({})
    try:
        with Path(path).open('rb') as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise InvalidArgument(f'Config file {path} does not exist') from None
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgument(f'Config file {path} is not valid TOML: {exc}') from exc
    return ExperimentConfig.from_dict(data)


def config_as_toml(config):
    """Render ``config`` in the format :func:`load_config` reads."""
    lines = []
    for section, values in config.to_dict().items():
        lines.append(f'[{section}]')
        for key, value in values.items():
            lines.append(f'{key} = {_toml_value(value)}')
        lines.append('')
    return '\n'.join(lines)


def _toml_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, str):
        return '"' + value.replace('\\', '\\\\').replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_toml_value(v) for v in value) + ']'
    return str(value)

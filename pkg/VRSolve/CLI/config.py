'''
This module reads an experiment config (a JSON document) into an ExperimentConfig and builds the
problem, the starting point and the schedule it describes.

A config looks like:
{
    "problem": {"name": "quadratic", "n": 50, "d": 4, "kappa": 10, "seed": 0},
    "solver": "isarah",
    "regime": "multi_loop_strongly_convex", "epsilon": 0.01,
    "replications": 100, "seed_base": 0, "w0": 1.0,
    "output": {"trace_dir": "traces", "summary": "summary.json", "full_trace": false},
    "diagnostics": {"contraction_check": true}
}
An explicit "schedule": {"eta": ..., "m": ..., "b": ..., "T": ...} replaces "regime" and "epsilon";
the output of `vrsolve schedule` can be pasted in unchanged. The one-loop regimes also take "m"
in place of "epsilon"; "m" and "epsilon" are never given together.
'''
from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
import os

import numpy as np

from ..Diagnostics import SigmoidSquared
from ..Oracle import HELD_OUT_SAMPLES
from ..Problems import load_libsvm, make_gaussian_quadratic, make_quadratic, modified_logistic
from ..Schedules import MULTI_LOOP_REGIMES, Regime, Schedule
from ..Solvers import SOLVERS
from ..errors import ConfigError, VRSolveError

logger = logging.getLogger(__name__)

PROBLEMS = ('quadratic', 'gaussian_quadratic', 'libsvm', 'modified_logistic', 'sigmoid_squared')
DIAGNOSTICS = ('contraction_check', 'theorem1_bound_check', 'theorem2_bound_check', 'variance_decay_check')
KNOWN_KEYS = {
    'problem', 'solver', 'schedule', 'regime', 'epsilon', 'm', 'replications', 'seed_base', 'w0',
    'output', 'diagnostics', 'record_wall_time', 'track_gradient', 'gradient_samples', 'workers',
}


@dataclass
class OutputConfig:
    trace_dir: str = 'traces'
    summary: str = 'summary.json'
    full_trace: bool = False


@dataclass
class ExperimentConfig:
    '''
    Description:
    A validated experiment. Exactly one of `schedule` (explicit parameters) and `regime` is set;
    a regime comes with exactly one of `epsilon` and `m` (one-loop regimes only). Relative paths have already been resolved against the config file's directory.
    '''
    problem: dict
    solver: str
    schedule: Schedule | None = None
    regime: Regime | None = None
    epsilon: float | None = None
    m: int | None = None
    replications: int = 1
    seed_base: int = 0
    w0: float | list | None = None
    output: OutputConfig = field(default_factory=OutputConfig)
    diagnostics: dict = field(default_factory=dict)
    record_wall_time: bool = False
    track_gradient: bool = False
    gradient_samples: int = HELD_OUT_SAMPLES
    workers: int | None = None
    source: dict = field(default_factory=dict, repr=False)

    def build_problem(self):
        return build_problem(self.problem)

    def start_point(self, oracle):
        # A scalar w0 is broadcast to every coordinate, a missing one is the origin.
        if self.w0 is None: return np.zeros(oracle.dim)
        if np.isscalar(self.w0): return np.full(oracle.dim, float(self.w0))
        try:
            return oracle.check_point(self.w0)
        except VRSolveError as error:
            raise ConfigError(f'w0 does not fit the problem: {error}') from None


def load_config(path):
    '''
    Arguments:
    - path: str
        The JSON config file.

    Returns:
    - ExperimentConfig

    Raises ConfigError for unreadable files and every validation failure.
    '''
    try:
        with open(path) as file: values = json.load(file)
    except OSError as error:
        raise ConfigError(f'Cannot read config {path}: {error.strerror}.') from None
    except json.JSONDecodeError as error:
        raise ConfigError(f'Config {path} is not valid JSON: {error}.') from None
    return parse_config(values, os.path.dirname(os.path.abspath(path)))


def parse_config(values, base_dir='.'):
    if not isinstance(values, dict): raise ConfigError('The config must be a JSON object.')
    unknown = set(values) - KNOWN_KEYS
    if unknown: raise ConfigError(f'Unknown config keys {sorted(unknown)}.')

    for key in ('problem', 'solver'):
        if key not in values: raise ConfigError(f'The config needs a "{key}" entry.')
    problem = dict(values['problem']) if isinstance(values['problem'], dict) else None
    if problem is None or problem.get('name') not in PROBLEMS:
        raise ConfigError(f'problem.name must be one of {PROBLEMS}.')
    if problem['name'] == 'libsvm':
        if 'path' not in problem: raise ConfigError('A libsvm problem needs a "path".')
        problem['path'] = os.path.join(base_dir, problem['path'])
    if values['solver'] not in SOLVERS: raise ConfigError(f'solver must be one of {SOLVERS}, got {values["solver"]!r}.')

    has_schedule = 'schedule' in values
    has_regime = any(key in values for key in ('regime', 'epsilon', 'm'))
    if has_schedule == has_regime:
        raise ConfigError('Give exactly one of an explicit "schedule" or "regime" with "epsilon".')
    schedule, regime, epsilon, m = None, None, None, None
    try:
        if has_schedule:
            schedule = Schedule.from_dict(values['schedule'])
            if schedule.T is None: raise ConfigError('An explicit schedule needs T.')
        else:
            if 'regime' not in values: raise ConfigError('"epsilon" and "m" need a "regime".')
            regime = Regime(values['regime'])
            if 'epsilon' in values and 'm' in values:
                raise ConfigError('Give one of "epsilon" and "m": the regime derives m from epsilon.')
            if 'm' in values:
                if regime in MULTI_LOOP_REGIMES: raise ConfigError(f'{regime.value} takes "epsilon", not "m".')
                m = values['m']
                if not isinstance(m, int) or m < 1: raise ConfigError(f'm must be an integer >= 1, got {m!r}.')
            elif 'epsilon' in values:
                epsilon = float(values['epsilon'])
                if not epsilon > 0: raise ConfigError(f'epsilon must be positive, got {epsilon}.')
            else:
                raise ConfigError(f'{regime.value} needs "epsilon".')
    except (TypeError, ValueError) as error:
        if isinstance(error, ConfigError): raise
        raise ConfigError(f'Invalid schedule: {error}') from None

    replications, seed_base = values.get('replications', 1), values.get('seed_base', 0)
    if not isinstance(replications, int) or replications < 1: raise ConfigError(f'replications must be an integer >= 1, got {replications}.')
    if not isinstance(seed_base, int) or seed_base < 0: raise ConfigError(f'seed_base must be an integer >= 0, got {seed_base}.')

    diagnostics = values.get('diagnostics', {})
    unknown = set(diagnostics) - set(DIAGNOSTICS) - {'stages', 'margin_sigmas'}
    if unknown: raise ConfigError(f'Unknown diagnostics {sorted(unknown)}; expected {DIAGNOSTICS}.')
    if any(diagnostics.get(name) for name in DIAGNOSTICS) and replications < 2:
        raise ConfigError('Diagnostics need at least 2 replications for a Monte-Carlo estimate.')

    output = values.get('output', {})
    unknown = set(output) - set(OutputConfig.__dataclass_fields__)
    if unknown: raise ConfigError(f'Unknown output keys {sorted(unknown)}.')
    output = OutputConfig(**output)
    output.trace_dir = os.path.join(base_dir, output.trace_dir)
    output.summary = os.path.join(base_dir, output.summary)

    return ExperimentConfig(
        problem=problem, solver=values['solver'], schedule=schedule, regime=regime, epsilon=epsilon,
        m=m, replications=replications, seed_base=seed_base, w0=values.get('w0'),
        output=output, diagnostics=diagnostics, record_wall_time=bool(values.get('record_wall_time', False)),
        track_gradient=bool(values.get('track_gradient', False)),
        gradient_samples=int(values.get('gradient_samples', HELD_OUT_SAMPLES)), workers=values.get('workers'),
        source=values,
    )


def build_problem(spec):
    '''
    Arguments:
    - spec: dict
        {"name": one of PROBLEMS, ...parameters}.

    Returns:
    - Oracle
    '''
    parameters = {key: value for key, value in spec.items() if key != 'name'}
    name = spec['name']
    try:
        if name == 'quadratic':
            return make_quadratic(
                parameters.pop('n'), parameters.pop('d'), parameters.pop('kappa'), rng=parameters.pop('seed', 0),
                heterogeneity=parameters.pop('heterogeneity', 0.5), noise=parameters.pop('noise', 1.0), **parameters,
            )
        if name == 'gaussian_quadratic':
            return make_gaussian_quadratic(
                parameters.pop('d'), parameters.pop('kappa'), noise=parameters.pop('noise', 1.0),
                rng=parameters.pop('seed', 0), **parameters,
            )
        if name == 'libsvm':
            return load_libsvm(parameters.pop('path'), **parameters)
        if name == 'modified_logistic':
            return modified_logistic(parameters.pop('lam'), **parameters)
        return SigmoidSquared(**parameters)
    except KeyError as error:
        raise ConfigError(f'The {name} problem needs the parameter {error.args[0]!r}.') from None
    except TypeError as error:
        raise ConfigError(f'Invalid parameters for the {name} problem: {error}') from None

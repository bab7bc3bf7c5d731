'''
Command-line front end.

    vrsolve run CONFIG          run a seeded solver ensemble, write traces and a summary
    vrsolve verify SUITE        run a canned bundle of diagnostic checks
    vrsolve schedule --regime ...   print the derived (eta, m, b, T)

Exit codes: 0 everything passed, 1 a check failed, 2 usage or input error, 3 a solver diverged.
'''
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from ..Diagnostics import (
    MonteCarloEstimate, MARGIN_SIGMAS, contraction_check, replicate, theorem1_bound_check,
    theorem2_bound_check, variance_decay_check,
)
from ..Oracle import ProblemConstants, RandomStreams
from ..Schedules import MULTI_LOOP_REGIMES, Regime, schedule_for
from ..Solvers import run_solver
from ..Solvers.solvers import measured_grad_norm_sq
from ..errors import ConfigError, DivergenceError, VRSolveError
from .config import load_config
from .suites import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
SCHEMA_VERSION = 1
# Above this inner loop length per-iteration rows are thinned unless a full trace is requested.
MAX_TRACE_ROWS = 10**4


def json_safe(value):
    # NaN and inf are not valid JSON, numpy scalars are not serialisable.
    if isinstance(value, dict): return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)): return [json_safe(item) for item in value]
    if isinstance(value, np.ndarray): return json_safe(value.tolist())
    if isinstance(value, np.integer): return int(value)
    if isinstance(value, (float, np.floating)): return float(value) if math.isfinite(value) else None
    return value


def write_json(path, values):
    directory = os.path.dirname(path)
    if directory: os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as file:
        json.dump(json_safe(values), file, indent=2)
        file.write('\n')


def resolve_schedule(config, oracle, w0):
    '''
    Returns:
    - Schedule
        The explicit schedule, or the regime's schedule with its run-time inputs measured at w0
        (on the diagnostic stream of seed_base, so every replication shares it).
    '''
    if config.schedule is not None: return config.schedule.check_step_size(oracle.constants)
    if config.epsilon is None:
        schedule = schedule_for(config.regime, oracle.constants, m=config.m)
        logger.info('Schedule for %s with m=%d: eta=%.6g b=%d.', config.regime.value, schedule.m, schedule.eta, schedule.b)
        return schedule
    rng = RandomStreams(config.seed_base).diagnostic()
    measurements = {}
    if config.regime in MULTI_LOOP_REGIMES:
        measurements['initial_grad_norm_sq'] = measured_grad_norm_sq(oracle, w0, rng, config.gradient_samples)
    else:
        measurements['initial_gap'] = oracle.optimality_gap(w0)
        if config.regime == Regime.ONE_LOOP_NONCONVEX:
            measurements['initial_second_moment'] = oracle.grad_second_moment(w0, rng, config.gradient_samples)
    schedule = schedule_for(config.regime, oracle.constants, config.epsilon, **measurements)
    logger.info('Schedule for %s: eta=%.6g m=%d b=%d T=%s (%s).',
                config.regime.value, schedule.eta, schedule.m, schedule.b, schedule.T, schedule.provenance)
    return schedule


def run_checks(config, oracle, schedule, w0):
    # Each enabled diagnostic maps to its list of BoundCheck objects.
    toggles = config.diagnostics
    options = dict(replications=config.replications, w0=w0, seed_base=config.seed_base,
                   margin_sigmas=toggles.get('margin_sigmas', MARGIN_SIGMAS), workers=config.workers)
    checks = {}
    if toggles.get('contraction_check'):
        if schedule.regime not in MULTI_LOOP_REGIMES:
            raise ConfigError('contraction_check needs a multiple-loop regime.')
        checks['contraction_check'] = contraction_check(oracle, schedule, toggles.get('stages', schedule.T),
                                                        gradient_samples=config.gradient_samples, **options)
    if toggles.get('theorem1_bound_check'):
        checks['theorem1_bound_check'] = [theorem1_bound_check(oracle, schedule.m, gradient_samples=config.gradient_samples, **options)]
    if toggles.get('theorem2_bound_check'):
        checks['theorem2_bound_check'] = [theorem2_bound_check(oracle, schedule.m, gradient_samples=config.gradient_samples, **options)]
    if toggles.get('variance_decay_check'):
        checks['variance_decay_check'] = variance_decay_check(oracle, schedule.eta, schedule.b, schedule.m, **options)
    return checks


def run(config_path):
    '''
    Arguments:
    - config_path: str

    Returns:
    - int
        The exit code.

    Methodology:
    - Replications run on seeds seed_base + r, possibly on worker threads, and are written to
      run_<r>.csv afterwards in seed order from the main thread.
    - A diverged replication still gets its partial trace written before exiting with 3.
    '''
    config = load_config(config_path)
    oracle = config.build_problem()
    w0 = config.start_point(oracle)
    schedule = resolve_schedule(config, oracle, w0)
    every = 1
    if not config.output.full_trace and schedule.m > MAX_TRACE_ROWS: every = math.ceil(schedule.m / MAX_TRACE_ROWS)

    def run_one(seed):
        streams = RandomStreams(seed)
        start = time.perf_counter()
        try:
            w, trace = run_solver(config.solver, oracle, w0, schedule, streams, track_gradient=config.track_gradient,
                                  gradient_samples=config.gradient_samples)
        except DivergenceError as error:
            return {'seed': seed, 'trace': error.trace, 'error': error, 'wall_time': time.perf_counter() - start}
        final = measured_grad_norm_sq(oracle, w, streams.diagnostic(), config.gradient_samples)
        return {'seed': seed, 'trace': trace, 'final_grad_norm_sq': final, 'wall_time': time.perf_counter() - start}

    results = replicate(run_one, config.replications, config.seed_base, config.workers)

    os.makedirs(config.output.trace_dir, exist_ok=True)
    runs, diverged = [], []
    for run_id, result in enumerate(results):
        path = os.path.join(config.output.trace_dir, f'run_{run_id:04d}.csv')
        wall_time = result['wall_time'] if config.record_wall_time else None
        if result['trace'] is not None:
            result['trace'].to_csv(path, run_id, result['seed'], every=every, wall_time=wall_time)
        record = {'run_id': run_id, 'seed': result['seed'], 'trace': os.path.basename(path)}
        if 'error' in result:
            diverged.append(result)
            record.update(status='diverged', message=str(result['error']), stage=result['error'].stage)
        else:
            record.update(status='ok', grad_evals=result['trace'].grad_evals, final_grad_norm_sq=result['final_grad_norm_sq'])
        runs.append(record)

    summary = {
        'schema_version': SCHEMA_VERSION, 'config': config.source, 'problem': oracle.problem_type,
        'constants': oracle.constants.to_dict(), 'schedule': schedule.to_dict(), 'runs': runs,
    }
    if diverged:
        summary['passed'] = False
        write_json(config.output.summary, summary)
        logger.error('%d of %d replications diverged, first: %s', len(diverged), len(results), diverged[0]['error'])
        return EXIT_DIVERGED

    finals = [result['final_grad_norm_sq'] for result in results]
    if len(finals) >= 2 and np.all(np.isfinite(finals)):
        summary['final_grad_norm_sq'] = MonteCarloEstimate.from_samples(finals, config.seed_base).to_dict()
    checks = run_checks(config, oracle, schedule, w0)
    summary['checks'] = {name: [check.to_dict() for check in bound_checks] for name, bound_checks in checks.items()}
    passed = all(check.passed for bound_checks in checks.values() for check in bound_checks)
    summary['passed'] = passed
    write_json(config.output.summary, summary)

    for name, bound_checks in checks.items():
        failures = [check.label for check in bound_checks if not check.passed]
        if failures: logger.warning('%s failed at %s.', name, ', '.join(failures))
        else: logger.info('%s passed (%d checks).', name, len(bound_checks))
    return EXIT_PASS if passed else EXIT_CHECK_FAILED


def verify(suite_name, summary_path=None, workers=None):
    if suite_name not in SUITES:
        raise ConfigError(f'Unknown suite {suite_name!r}; expected one of {sorted(SUITES)}.')
    outcomes = run_suite(suite_name, workers=workers)
    for outcome in outcomes:
        print(f'{"PASS" if outcome["passed"] else "FAIL"}  {outcome["suite"]}: {outcome["label"]}')
    if summary_path:
        write_json(summary_path, {'schema_version': SCHEMA_VERSION, 'suite': suite_name, 'results': outcomes})
    return EXIT_PASS if all(outcome['passed'] for outcome in outcomes) else EXIT_CHECK_FAILED


def print_schedule(args):
    # Constants come from the flags; anything a formula needs and was not given exits 2 naming it.
    constants = ProblemConstants(L=args.L, mu=args.mu, sigma_star_sq=args.sigma_star_sq, M=args.M, N=args.N)
    derived = schedule_for(args.regime, constants, epsilon=args.epsilon, m=args.m, initial_gap=args.gap,
                           initial_second_moment=args.second_moment, initial_grad_norm_sq=args.grad0)
    print(json.dumps(json_safe(derived.to_dict()), indent=2))
    return EXIT_PASS


def build_parser():
    parser = argparse.ArgumentParser(prog='vrsolve', description='Inexact SARAH solvers and convergence checks.')
    parser.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', required=True)

    run_parser = commands.add_parser('run', help='run the experiment described by a JSON config')
    run_parser.add_argument('config', help='path to the experiment config')

    verify_parser = commands.add_parser('verify', help='run a canned bundle of diagnostic checks')
    verify_parser.add_argument('suite', help=f'one of {", ".join(sorted(SUITES))}')
    verify_parser.add_argument('--summary', help='also write the outcomes as JSON to this path')
    verify_parser.add_argument('--workers', type=int, help='replication threads (default: $VRSOLVE_WORKERS or 1)')

    schedule_parser = commands.add_parser('schedule', help='print the schedule a regime derives from constants')
    schedule_parser.add_argument('--regime', required=True, choices=[regime.value for regime in Regime])
    schedule_parser.add_argument('--L', type=float, required=True, help='smoothness constant')
    schedule_parser.add_argument('--mu', type=float, help='strong convexity modulus')
    schedule_parser.add_argument('--sigma-star-sq', dest='sigma_star_sq', type=float, help='E||grad f(w*; xi)||^2')
    schedule_parser.add_argument('--M', type=float, help='growth constant M')
    schedule_parser.add_argument('--N', type=float, help='growth constant N')
    schedule_parser.add_argument('--epsilon', type=float, help='target accuracy')
    schedule_parser.add_argument('--m', type=int, help='inner loop length (one-loop regimes without epsilon)')
    schedule_parser.add_argument('--grad0', type=float, help='||grad F(w0)||^2, fixes T of the multiple-loop regimes')
    schedule_parser.add_argument('--gap', type=float, help='F(w0) - F*, for the one-loop epsilon schedules')
    schedule_parser.add_argument('--second-moment', dest='second_moment', type=float,
                                 help='E||grad f(w0; xi)||^2, for the one-loop non-convex epsilon schedule')
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return EXIT_USAGE if stop.code else EXIT_PASS
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'run': return run(args.config)
        if args.command == 'verify': return verify(args.suite, args.summary, args.workers)
        return print_schedule(args)
    except DivergenceError as error:
        logger.error('%s', error)
        return EXIT_DIVERGED
    except (VRSolveError, OSError) as error:
        logger.error('%s', error)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())

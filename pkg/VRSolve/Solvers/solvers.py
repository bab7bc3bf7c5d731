'''
This module contains the solvers: the inexact SARAH inner loop and its multiple-loop driver, the
exact-gradient SARAH and SVRG baselines, and plain mini-batch SGD.
All inner loops share run_inner_loop and differ only in how v_0 is formed and in the estimator:
- sarah: v_t = grad f(w_t; xi_t) - grad f(w_{t-1}; xi_t) + v_{t-1}
- svrg:  v_t = grad f(w_t; xi_t) - grad f(w_0; xi_t) + v_0
followed by w_{t+1} = w_t - eta v_t.
'''
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np

from ..Trace import RunTrace
from ..errors import DivergenceError, InvalidArgumentError

logger = logging.getLogger(__name__)

ESTIMATORS = ('sarah', 'svrg')
OUTPUT_RULES = ('uniform', 'last')


@dataclass
class InnerLoopState:
    '''
    Description:
    Snapshot handed to a solver callback after v_t has been formed.
    w_curr = w_prev - eta v_prev holds for every t >= 1.
    '''
    w_prev: np.ndarray | None
    w_curr: np.ndarray
    v: np.ndarray
    t: int
    eta: float
    v_prev: np.ndarray | None = None
    xi: int | None = None


def check_positive_integer(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise InvalidArgumentError(f'{name} must be an integer >= {minimum}, got {value}.')
    return int(value)


def measured_grad_norm_sq(oracle, w, rng=None, gradient_samples=None):
    # Exact on finite sums, a held-out estimate when gradient_samples is set, NaN otherwise.
    if oracle.is_finite_sum: return oracle.grad_norm_sq(w)
    if gradient_samples: return oracle.grad_norm_sq(w, rng, gradient_samples)
    return np.nan


def run_inner_loop(oracle, w0, eta, m, v0_mode, estimator, streams, stage=1, solver='',
                   track_gradient=False, gradient_samples=None, record_every=1, callback=None, output='uniform'):
    '''
    Arguments:
    - oracle: Oracle
    - w0: array
        Starting point.
    - eta: float
        Step size, strictly positive.
    - m: int
        Inner loop length, at least 1. Iterates w_0..w_m are produced.
    - v0_mode: int or 'exact'
        Mini-batch size b for v_0 (drawn from streams.zeta) or 'exact' for grad F(w_0).
    - estimator: str
        'sarah' or 'svrg'.
    - streams: RandomStreams
    - stage: int (optional)
        Outer stage index written into the trace.
    - solver: str (optional)
        Name written into the trace.
    - track_gradient: bool (optional)
        Also record ||grad F(w_t)||^2 and F(w_t) on recorded rows (not counted as work).
    - gradient_samples: int (optional)
        Held-out sample size used for ||grad F(w_t)||^2 on expectation-form problems.
    - record_every: int (optional)
        Record every k-th step plus the first and the last.
    - callback: callable (optional)
        Called with an InnerLoopState after every v_t.
    - output: str (optional)
        'uniform' draws t_tilde uniformly from {0..m} with streams.select, 'last' returns w_m.

    Returns:
    - (w_tilde, RunTrace)

    Methodology:
    - t_tilde is drawn before the loop from its own stream, so only w_{t_tilde} has to be kept and
      the optimisation path does not depend on the draw.
    - v_0 costs b (or n) gradient evaluations, every later v_t costs 2; v_m is never formed.
    - A non-finite iterate raises DivergenceError carrying the rows recorded so far.
    '''
    if not eta > 0: raise InvalidArgumentError(f'Step size must be strictly positive, got {eta}.')
    m = check_positive_integer(m, 'm')
    record_every = check_positive_integer(record_every, 'record_every')
    if estimator not in ESTIMATORS: raise InvalidArgumentError(f'Unknown estimator {estimator!r}; expected one of {ESTIMATORS}.')
    if output not in OUTPUT_RULES: raise InvalidArgumentError(f'Unknown output rule {output!r}; expected one of {OUTPUT_RULES}.')
    w0 = oracle.check_point(w0)
    trace = RunTrace(solver)
    diagnostic_rng = streams.diagnostic() if track_gradient and not oracle.is_finite_sum else None

    t_tilde = m if output == 'last' else int(streams.select.integers(0, m + 1))
    w_tilde = w0 if t_tilde == 0 else None

    def record(t, w, v):
        if t % record_every and t != m - 1: return
        grad_norm_sq, value = np.nan, np.nan
        if track_gradient:
            grad_norm_sq = measured_grad_norm_sq(oracle, w, diagnostic_rng, gradient_samples)
            if oracle.is_finite_sum: value = oracle.value_full(w)
        trace.record(stage, t, float(v @ v), grad_norm_sq, value)

    def step(t, w, v):
        w_next = w - eta * v
        if not np.isfinite(w_next).all():
            raise DivergenceError(
                f'Non-finite iterate w_{t + 1} produced by {solver or estimator} at t={t}.', trace=trace.finalise(),
            )
        return w_next

    if v0_mode == 'exact':
        v0 = oracle.grad_full(w0)
        trace.consume(oracle.n_components)
    else:
        b = check_positive_integer(v0_mode, 'b')
        v0 = oracle.grad_minibatch(w0, b, streams.zeta)
        trace.consume(b)
    record(0, w0, v0)
    if callback: callback(InnerLoopState(w_prev=None, w_curr=w0, v=v0, t=0, eta=eta))

    w_prev, w_curr, v_prev = w0, step(0, w0, v0), v0
    if t_tilde == 1: w_tilde = w_curr

    for t in range(1, m):
        xi = oracle.sample(streams.xi)
        ids = np.array([xi])
        anchor = w_prev if estimator == 'sarah' else w0
        base = v_prev if estimator == 'sarah' else v0
        v = oracle.grad_batch(w_curr, ids)[0] - oracle.grad_batch(anchor, ids)[0] + base
        trace.consume(2)
        record(t, w_curr, v)
        if callback: callback(InnerLoopState(w_prev=w_prev, w_curr=w_curr, v=v, t=t, eta=eta, v_prev=v_prev, xi=xi))

        w_next = step(t, w_curr, v)
        if t + 1 == t_tilde: w_tilde = w_next
        w_prev, w_curr, v_prev = w_curr, w_next, v

    trace.t_tilde = [t_tilde]
    trace.w_tilde = w_tilde
    return w_tilde, trace.finalise()


def isarah_inner(oracle, w0, eta, m, b, streams, **options):
    # iSARAH-IN: v_0 from a size-b mini-batch, SARAH recursion afterwards.
    options.setdefault('solver', 'isarah')
    return run_inner_loop(oracle, w0, eta, m, b, 'sarah', streams, **options)


def sarah_exact_inner(oracle, w0, eta, m, streams, **options):
    # Original SARAH inner loop: v_0 is the exact gradient (finite sums only).
    oracle.require_finite_sum('sarah_exact_inner')
    options.setdefault('solver', 'sarah')
    return run_inner_loop(oracle, w0, eta, m, 'exact', 'sarah', streams, **options)


def svrg_inner(oracle, w0, eta, m, b, streams, **options):
    # SVRG inner loop; b=None anchors at the exact gradient like the original method.
    options.setdefault('solver', 'svrg')
    if b is None:
        oracle.require_finite_sum('svrg_inner with an exact anchor')
        b = 'exact'
    return run_inner_loop(oracle, w0, eta, m, b, 'svrg', streams, **options)


def run_outer_loop(inner, oracle, w_tilde_0, T, streams, solver='', gradient_samples=None, **options):
    '''
    Arguments:
    - inner: callable
        inner(w, stage=s, **options) -> (w_tilde_s, RunTrace), one of the inner loops with its
        step size and lengths bound.
    - oracle: Oracle
    - w_tilde_0: array
    - T: int
        Number of outer stages.
    - streams: RandomStreams
        Shared by all stages, each stage continues the same streams.
    - gradient_samples: int (optional)
        Held-out sample size for ||grad F(w_tilde_s)||^2 on expectation-form problems.

    Returns:
    - (w_tilde_T, RunTrace)
        The trace concatenates the stage traces and records (s, ||grad F(w_tilde_s)||^2) for s = 0..T.
    '''
    T = check_positive_integer(T, 'T')
    w = oracle.check_point(w_tilde_0)
    diagnostic_rng = streams.diagnostic() if not oracle.is_finite_sum else None
    trace = RunTrace(solver)
    trace.record_stage(0, measured_grad_norm_sq(oracle, w, diagnostic_rng, gradient_samples))

    for s in range(1, T + 1):
        try:
            w, stage_trace = inner(w, stage=s, solver=solver, gradient_samples=gradient_samples, **options)
        except DivergenceError as error:
            prefix = trace + error.trace if error.trace is not None else trace
            raise error.annotate_stage(s, prefix) from None
        stage_trace.record_stage(s, measured_grad_norm_sq(oracle, w, diagnostic_rng, gradient_samples))
        logger.debug('%s stage %d/%d: ||grad F||^2 = %.6e after %d gradient evaluations.',
                     solver, s, T, stage_trace.outer_grad_norm_sq[-1], trace.grad_evals + stage_trace.grad_evals)
        trace = trace + stage_trace

    trace.w_tilde = w
    return w, trace


def isarah_outer(oracle, w_tilde_0, eta, m, b, T, streams, **options):
    # Multiple-loop iSARAH: w_tilde_s = iSARAH-IN(w_tilde_{s-1}, eta, m, b).
    inner = lambda w, **stage_options: isarah_inner(oracle, w, eta, m, b, streams, **stage_options)
    return run_outer_loop(inner, oracle, w_tilde_0, T, streams, solver=options.pop('solver', 'isarah'), **options)


def sarah_outer(oracle, w_tilde_0, eta, m, T, streams, **options):
    oracle.require_finite_sum('sarah_outer')
    inner = lambda w, **stage_options: sarah_exact_inner(oracle, w, eta, m, streams, **stage_options)
    return run_outer_loop(inner, oracle, w_tilde_0, T, streams, solver=options.pop('solver', 'sarah'), **options)


def svrg_outer(oracle, w_tilde_0, eta, m, b, T, streams, **options):
    inner = lambda w, **stage_options: svrg_inner(oracle, w, eta, m, b, streams, **stage_options)
    return run_outer_loop(inner, oracle, w_tilde_0, T, streams, solver=options.pop('solver', 'svrg'), **options)


def sgd(oracle, w0, eta_schedule, num_steps, b, streams, track_gradient=False, gradient_samples=None, record_every=1):
    '''
    Arguments:
    - oracle: Oracle
    - w0: array
    - eta_schedule: float or callable
        A constant step size or k -> eta_k.
    - num_steps: int
    - b: int
        Mini-batch size, drawn from streams.xi.
    - streams: RandomStreams

    Returns:
    - (w_out, RunTrace)
        w_out is the last iterate; rows record ||g_k||^2 in the v_norm_sq column.
    '''
    num_steps = check_positive_integer(num_steps, 'num_steps')
    b = check_positive_integer(b, 'b')
    record_every = check_positive_integer(record_every, 'record_every')
    step_size = eta_schedule if callable(eta_schedule) else (lambda k: eta_schedule)
    w = oracle.check_point(w0)
    trace = RunTrace('sgd')
    diagnostic_rng = streams.diagnostic() if track_gradient and not oracle.is_finite_sum else None

    for k in range(num_steps):
        eta = float(step_size(k))
        if eta < 0: raise InvalidArgumentError(f'Step size must be non-negative, got {eta} at step {k}.')
        g = oracle.grad_minibatch(w, b, streams.xi)
        trace.consume(b)
        if k % record_every == 0 or k == num_steps - 1:
            grad_norm_sq, value = np.nan, np.nan
            if track_gradient:
                grad_norm_sq = measured_grad_norm_sq(oracle, w, diagnostic_rng, gradient_samples)
                if oracle.is_finite_sum: value = oracle.value_full(w)
            trace.record(1, k, float(g @ g), grad_norm_sq, value)
        w = w - eta * g
        if not np.isfinite(w).all():
            raise DivergenceError(f'Non-finite iterate w_{k + 1} produced by sgd.', trace=trace.finalise())

    trace.t_tilde = [num_steps]
    trace.w_tilde = w
    return w, trace.finalise()


SOLVERS = ('isarah', 'sarah', 'svrg', 'sgd')


def run_solver(name, oracle, w0, schedule, streams, **options):
    '''
    Arguments:
    - name: str
        One of SOLVERS.
    - schedule: Schedule
        Supplies eta, m, b and T. For sgd, m * T steps of size eta with batch b are taken.

    Returns:
    - (w_out, RunTrace)
    '''
    if schedule.T is None: raise InvalidArgumentError('The schedule still has a pending T; call resolve_stages first.')
    schedule.check_step_size(oracle.constants)
    if name == 'isarah': return isarah_outer(oracle, w0, schedule.eta, schedule.m, schedule.b, schedule.T, streams, **options)
    if name == 'sarah': return sarah_outer(oracle, w0, schedule.eta, schedule.m, schedule.T, streams, **options)
    if name == 'svrg': return svrg_outer(oracle, w0, schedule.eta, schedule.m, schedule.b, schedule.T, streams, **options)
    if name == 'sgd':
        options.pop('callback', None)
        options.pop('output', None)
        return sgd(oracle, w0, schedule.eta, schedule.m * schedule.T, schedule.b, streams, **options)
    raise InvalidArgumentError(f'Unknown solver {name!r}; expected one of {SOLVERS}.')

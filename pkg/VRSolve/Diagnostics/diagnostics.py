'''
This module measures the quantities the convergence analysis bounds and compares them with the
closed-form bounds: the mini-batch variance identity, the decay of ||v_t||^2, the one-loop bounds,
the multiple-loop stage contraction and the growth of total work with 1/epsilon.
Expectations are estimated over seeded replications; a bound passes when the Monte-Carlo mean is
within `margin_sigmas` standard errors of it.
'''
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
import itertools
import logging
import math
import os

import numpy as np
import scipy.stats

from ..Oracle import RandomStreams, HELD_OUT_SAMPLES
from ..Schedules import (
    Regime, MULTI_LOOP_REGIMES, contraction_for, one_loop_convex, one_loop_nonconvex, schedule_for,
)
from ..Solvers import isarah_inner, isarah_outer, sarah_exact_inner, svrg_inner
from ..Solvers.solvers import measured_grad_norm_sq
from ..errors import (
    InvalidArgumentError, NonConvergenceError, ResourceError, ScheduleInvalidError,
)

logger = logging.getLogger(__name__)

MARGIN_SIGMAS = 4.0
WORKERS_ENV = 'VRSOLVE_WORKERS'
MAX_ENUMERATION = 6 ** 6


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    replications: int
    seed_base: int

    @classmethod
    def from_samples(cls, samples, seed_base=0):
        '''
        Arguments:
        - samples: sequence of float
            One value per replication, in seed order.
        - seed_base: int (optional)

        Returns:
        - MonteCarloEstimate
            std_error = sample std (ddof=1) / sqrt(replications).
            Identical samples give that value back exactly with zero error.
        '''
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size < 2: raise InvalidArgumentError(f'A Monte-Carlo estimate needs at least 2 replications, got {samples.size}.')
        if np.all(samples == samples[0]): return cls(float(samples[0]), 0.0, int(samples.size), int(seed_base))
        return cls(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size)), int(samples.size), int(seed_base))

    @property
    def relative_std_error(self):
        if self.mean == 0: return 0.0
        return self.std_error / abs(self.mean)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundCheck:
    '''
    Description:
    passed iff measured.mean <= bound + margin_sigmas * measured.std_error + rounding slack,
    where the slack is 1e-12 * max(1, |bound|). The verdict is recomputed from the stored fields.
    '''
    measured: MonteCarloEstimate
    bound: float
    margin_sigmas: float = MARGIN_SIGMAS
    provenance: str = ''
    label: str = ''

    @property
    def passed(self):
        slack = 1e-12 * max(1.0, abs(self.bound))
        return self.measured.mean <= self.bound + self.margin_sigmas * self.measured.std_error + slack

    @property
    def verdict(self):
        return 'pass' if self.passed else 'fail'

    def to_dict(self):
        return {
            'label': self.label, 'measured': self.measured.to_dict(), 'bound': self.bound,
            'margin_sigmas': self.margin_sigmas, 'verdict': self.verdict, 'provenance': self.provenance,
        }

    @classmethod
    def from_dict(cls, values):
        return cls(
            measured=MonteCarloEstimate(**values['measured']), bound=values['bound'],
            margin_sigmas=values['margin_sigmas'], provenance=values.get('provenance', ''), label=values.get('label', ''),
        )


def default_workers():
    return max(1, int(os.environ.get(WORKERS_ENV, '1')))


def replicate(fn, replications, seed_base=0, workers=None):
    '''
    Arguments:
    - fn: callable
        fn(seed) -> result, must not share mutable state between calls.
    - replications: int
    - seed_base: int (optional)
        Replication r uses seed seed_base + r.
    - workers: int (optional)
        Thread count, VRSOLVE_WORKERS or 1 by default.

    Returns:
    - list
        Results in seed order whatever the worker count.
    '''
    if replications < 1: raise InvalidArgumentError(f'replications must be positive, got {replications}.')
    seeds = [seed_base + r for r in range(replications)]
    workers = workers or default_workers()
    if workers == 1: return [fn(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, seeds))


def start_point(oracle, w0):
    if w0 is None: return np.zeros(oracle.dim)
    return oracle.check_point(w0)


def minibatch_variance_identity(oracle, w, b):
    '''
    Arguments:
    - oracle: Oracle
        A finite sum with n^b <= 6^6.
    - w: array
    - b: int

    Returns:
    - (lhs, rhs)
        lhs = E||(1/b) sum_i grad f(w; xi_i) - grad F(w)||^2 by enumerating all n^b equiprobable tuples,
        rhs = (E||grad f(w; xi)||^2 - ||grad F(w)||^2) / b.
    '''
    oracle.require_finite_sum('minibatch_variance_identity')
    if int(b) != b or b < 1: raise InvalidArgumentError(f'b must be a positive integer, got {b}.')
    n = oracle.n_components
    if n ** b > MAX_ENUMERATION:
        raise ResourceError(f'Enumerating n^b = {n}^{b} batches exceeds the limit of {MAX_ENUMERATION}.')
    w = oracle.check_point(w)
    grads = oracle.grad_batch(w, np.arange(n))
    mean_grad = grads.mean(axis=0)

    tuples = np.array(list(itertools.product(range(n), repeat=int(b))))
    batch_means = grads[tuples].mean(axis=1)
    lhs = float(np.mean(np.sum((batch_means - mean_grad) ** 2, axis=1)))
    rhs = float((np.mean(np.sum(grads ** 2, axis=1)) - mean_grad @ mean_grad) / b)
    return lhs, rhs


def variance_profile(oracle, eta, v0_mode, m, replications, w0=None, seed_base=0, estimator='sarah', workers=None):
    '''
    Returns:
    - numpy array of shape (replications, m)
        ||v_t||^2 for t = 0..m-1 per replication.

    Methodology:
    - The zeta stream is pinned to the one of seed_base for every replication, so all replications
      share v_0 and only the xi draws vary.
    '''
    w0 = start_point(oracle, w0)

    def run(seed):
        streams = RandomStreams(seed, zeta=RandomStreams.stream(seed_base, 'zeta'))
        if estimator == 'svrg':
            _, trace = svrg_inner(oracle, w0, eta, m, None if v0_mode == 'exact' else v0_mode, streams, output='last')
        elif v0_mode == 'exact':
            _, trace = sarah_exact_inner(oracle, w0, eta, m, streams, output='last')
        else:
            _, trace = isarah_inner(oracle, w0, eta, m, v0_mode, streams, output='last')
        return trace.v

    return np.stack(replicate(run, replications, seed_base, workers))


def variance_decay_check(oracle, eta, v0_mode, m, replications, w0=None, seed_base=0,
                         margin_sigmas=MARGIN_SIGMAS, workers=None):
    '''
    Arguments:
    - oracle: Oracle
        Strongly convex (constants.mu known).
    - eta: float
        Step size, 0 < eta < 2/L.
    - v0_mode: int or 'exact'
    - m: int
    - replications: int

    Returns:
    - list of BoundCheck
        One per t = 0..m-1: mean ||v_t||^2 against [1 - (2/(eta L) - 1) mu^2 eta^2]^t ||v_0||^2.
    '''
    constants = oracle.constants
    constants.require('L', 'mu', purpose='the variance decay bound')
    if not 0 < eta * constants.L < 2: raise InvalidArgumentError(f'The decay bound needs 0 < eta < 2/L, got eta = {eta}.')
    rate = 1 - (2 / (eta * constants.L) - 1) * constants.mu ** 2 * eta ** 2
    profile = variance_profile(oracle, eta, v0_mode, m, replications, w0, seed_base, 'sarah', workers)
    v0_norm_sq = profile[0, 0]

    checks = []
    for t in range(profile.shape[1]):
        checks.append(BoundCheck(
            measured=MonteCarloEstimate.from_samples(profile[:, t], seed_base), bound=rate ** t * v0_norm_sq,
            margin_sigmas=margin_sigmas, label=f't={t}',
            provenance=f'E||v_t||^2 <= [1 - (2/(eta L) - 1) mu^2 eta^2]^t ||v_0||^2 with rate {rate:.6g}',
        ))
    return checks


def one_loop_measurements(oracle, schedule, w0, replications, seed_base, workers, gradient_samples):
    # ||grad F(w_tilde)||^2 of iSARAH-IN for every replication, including the t_tilde draw.
    def run(seed):
        streams = RandomStreams(seed)
        w_tilde, _ = isarah_inner(oracle, w0, schedule.eta, schedule.m, schedule.b, streams)
        return measured_grad_norm_sq(oracle, w_tilde, streams.diagnostic(), gradient_samples)
    return replicate(run, replications, seed_base, workers)


def theorem1_bound_check(oracle, m, replications, w0=None, seed_base=0, margin_sigmas=MARGIN_SIGMAS,
                         workers=None, gradient_samples=HELD_OUT_SAMPLES):
    '''
    Arguments:
    - oracle: Oracle
        Convex components with L and sigma_star_sq known and F(w_*) available.
    - m: int
    - replications: int
    - w0: array (optional)

    Returns:
    - BoundCheck
        E||grad F(w_tilde)||^2 of iSARAH-IN with the one-loop convex schedule against
        (6 L [F(w_0) - F(w_*)] + 2 sigma_*^2) / sqrt(m+1).
    '''
    constants = oracle.constants
    constants.require('L', 'sigma_star_sq', purpose='the one-loop convex bound')
    w0 = start_point(oracle, w0)
    schedule = one_loop_convex(constants, m)
    gap = oracle.optimality_gap(w0)
    bound = (6 * constants.L * gap + 2 * constants.sigma_star_sq) / math.sqrt(m + 1)
    samples = one_loop_measurements(oracle, schedule, w0, replications, seed_base, workers, gradient_samples)
    return BoundCheck(
        measured=MonteCarloEstimate.from_samples(samples, seed_base), bound=bound, margin_sigmas=margin_sigmas,
        label=f'm={m}', provenance='E||grad F(w_tilde)||^2 <= (6 L [F(w0) - F(w*)] + 2 sigma*^2) / sqrt(m+1)',
    )


def theorem2_bound_check(oracle, m, replications, w0=None, f_star=None, seed_base=0, margin_sigmas=MARGIN_SIGMAS,
                         workers=None, gradient_samples=HELD_OUT_SAMPLES):
    '''
    Returns:
    - BoundCheck
        E||grad F(w_tilde)||^2 of iSARAH-IN with the one-loop non-convex schedule against
        2/(eta (m+1)) [F(w_0) - F^*] + E||grad f(w_0; xi)||^2 / sqrt(m+1).
    '''
    constants = oracle.constants
    w0 = start_point(oracle, w0)
    schedule = one_loop_nonconvex(constants, m)
    gap = oracle.optimality_gap(w0, f_star)
    second_moment = oracle.grad_second_moment(w0, RandomStreams(seed_base).diagnostic(), gradient_samples)
    bound = 2 / (schedule.eta * (m + 1)) * gap + second_moment / math.sqrt(m + 1)
    samples = one_loop_measurements(oracle, schedule, w0, replications, seed_base, workers, gradient_samples)
    return BoundCheck(
        measured=MonteCarloEstimate.from_samples(samples, seed_base), bound=bound, margin_sigmas=margin_sigmas,
        label=f'm={m}', provenance='E||grad F(w_tilde)||^2 <= 2/(eta(m+1)) [F(w0) - F*] + E||grad f(w0; xi)||^2 / sqrt(m+1)',
    )


def contraction_check(oracle, schedule, S, replications, w0=None, seed_base=0, margin_sigmas=MARGIN_SIGMAS,
                      workers=None, gradient_samples=HELD_OUT_SAMPLES):
    '''
    Arguments:
    - oracle: Oracle
    - schedule: Schedule
        A multiple-loop schedule (its own T is ignored, S stages are run).
    - S: int
        Number of stages, 0 checks only the starting point.
    - replications: int

    Returns:
    - list of BoundCheck
        One per stage s = 0..S: mean ||grad F(w_tilde_s)||^2 against alpha^s (||grad F(w_tilde_0)||^2 - Delta) + Delta
        (alpha, Delta from the strongly convex or the (M, N) contraction).
    '''
    if schedule.regime not in MULTI_LOOP_REGIMES:
        raise InvalidArgumentError(f'contraction_check needs a multiple-loop schedule, got regime {schedule.regime}.')
    if int(S) != S or S < 0: raise InvalidArgumentError(f'S must be a non-negative integer, got {S}.')
    contraction = contraction_for(schedule, oracle.constants)
    if not contraction.contracts:
        raise ScheduleInvalidError(f'The schedule does not contract: alpha = {contraction.alpha:.6g} >= 1.')
    w0 = start_point(oracle, w0)
    initial = measured_grad_norm_sq(oracle, w0, RandomStreams(seed_base).diagnostic(), gradient_samples)

    if S == 0:
        stages = np.full((replications, 1), initial)
    else:
        def run(seed):
            streams = RandomStreams(seed)
            _, trace = isarah_outer(oracle, w0, schedule.eta, schedule.m, schedule.b, int(S), streams, gradient_samples=gradient_samples)
            # Stage 0 is measured once above so every replication shares the same envelope start.
            return [initial] + trace.outer_grad_norm_sq[1:]
        stages = np.array(replicate(run, replications, seed_base, workers))

    checks = []
    for s in range(stages.shape[1]):
        checks.append(BoundCheck(
            measured=MonteCarloEstimate.from_samples(stages[:, s], seed_base),
            bound=contraction.envelope(s, initial), margin_sigmas=margin_sigmas, label=f's={s}',
            provenance=f'E||grad F(w_s)||^2 - Delta <= alpha^s (||grad F(w_0)||^2 - Delta) with alpha = {contraction.alpha:.6g}, Delta = {contraction.Delta}',
        ))
    return checks


def complexity_work(oracle, regime, epsilon, w0=None, seed=0, budget_factor=100, gradient_samples=HELD_OUT_SAMPLES):
    '''
    Arguments:
    - oracle: Oracle
    - regime: Regime or str
    - epsilon: float
    - w0: array (optional)
    - seed: int (optional)
    - budget_factor: float (optional)

    Returns:
    - int
        Stochastic gradient evaluations consumed until ||grad F(w_tilde)||^2 <= epsilon.

    Methodology:
    - The scheduled run is executed first. While the target is missed, one-loop regimes restart
      iSARAH-IN from the last output and multiple-loop regimes run one more stage.
    - Exceeding budget_factor times the scheduled work raises NonConvergenceError.
    '''
    regime = Regime(regime)
    w = start_point(oracle, w0)
    streams = RandomStreams(seed)
    diagnostic_rng = streams.diagnostic()
    measure = lambda point: measured_grad_norm_sq(oracle, point, diagnostic_rng, gradient_samples)

    if regime in MULTI_LOOP_REGIMES:
        schedule = schedule_for(regime, oracle.constants, epsilon, initial_grad_norm_sq=measure(w))
        run_pass = lambda point, stages: isarah_outer(oracle, point, schedule.eta, schedule.m, schedule.b, stages, streams,
                                                      gradient_samples=gradient_samples)
        first_stages, extra_stages = schedule.T, 1
    else:
        second_moment = oracle.grad_second_moment(w, diagnostic_rng, gradient_samples) if regime == Regime.ONE_LOOP_NONCONVEX else None
        schedule = schedule_for(regime, oracle.constants, epsilon, initial_gap=oracle.optimality_gap(w), initial_second_moment=second_moment)
        run_pass = lambda point, stages: isarah_inner(oracle, point, schedule.eta, schedule.m, schedule.b, streams)
        first_stages, extra_stages = 1, 1

    budget = budget_factor * schedule.total_work
    w, trace = run_pass(w, first_stages)
    work = trace.grad_evals
    while measure(w) > epsilon:
        if work + extra_stages * schedule.work_per_stage > budget:
            raise NonConvergenceError(
                f'{regime.value} did not reach epsilon={epsilon} within {budget_factor}x the scheduled {schedule.total_work} gradient evaluations.'
            )
        w, trace = run_pass(w, extra_stages)
        work += trace.grad_evals
    logger.info('%s reached epsilon=%g with %d gradient evaluations (scheduled %d).', regime.value, epsilon, work, schedule.total_work)
    return work


def complexity_slope(oracle, regime, epsilons, w0=None, seed=0, budget_factor=100, gradient_samples=HELD_OUT_SAMPLES):
    '''
    Arguments:
    - epsilons: list of float
        At least 3 values spanning at least 2 decades.

    Returns:
    - float
        Least-squares slope of log(work) against log(1/epsilon).
    '''
    epsilons = np.asarray(sorted(epsilons, reverse=True), dtype=np.float64)
    if len(epsilons) < 3 or np.any(epsilons <= 0) or np.log10(epsilons.max() / epsilons.min()) < 2 - 1e-9:
        raise InvalidArgumentError('complexity_slope needs at least 3 positive epsilons spanning at least 2 decades.')
    work = [complexity_work(oracle, regime, epsilon, w0, seed, budget_factor, gradient_samples) for epsilon in epsilons]
    fit = scipy.stats.linregress(np.log(1 / epsilons), np.log(np.asarray(work, dtype=np.float64)))
    return float(fit.slope)


def grad_fd_check(oracle, num_points, rng=None, scale=2.0, step=1e-6, floor=1e-12, max_coordinates=50):
    '''
    Arguments:
    - oracle: Oracle
    - num_points: int
        Random (w, xi) pairs to test, w ~ N(0, scale^2 I).
    - rng: numpy Generator or int (optional)
    - step: float (optional)
        Central differences use h_j = step (1 + |w_j|).
    - floor: float (optional)
        Absolute errors below this count as zero.
    - max_coordinates: int (optional)
        In higher dimensions only a random subset of coordinates is differenced.

    Returns:
    - float
        The worst scaled error ||fd - grad|| / max(||grad||, 1) over the tested coordinates: relative
        for gradients above unit norm, absolute below it.
    '''
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    worst = 0.0
    for _ in range(num_points):
        w = rng.normal(0.0, scale, size=oracle.dim)
        xi = oracle.sample(rng)
        coordinates = np.arange(oracle.dim)
        if oracle.dim > max_coordinates: coordinates = rng.choice(oracle.dim, size=max_coordinates, replace=False)

        gradient = oracle.grad_sample(w, xi)[coordinates]
        finite_difference = np.empty(len(coordinates))
        for k, j in enumerate(coordinates):
            h = step * (1 + abs(w[j]))
            forward, backward = w.copy(), w.copy()
            forward[j] += h
            backward[j] -= h
            finite_difference[k] = (oracle.value_sample(forward, xi) - oracle.value_sample(backward, xi)) / (forward[j] - backward[j])

        error = float(np.linalg.norm(finite_difference - gradient))
        if error <= floor: continue
        worst = max(worst, error / max(float(np.linalg.norm(gradient)), 1.0))
    return worst

'''
This module maps problem constants and a target accuracy epsilon to the parameters (eta, m, b, T)
of the inexact SARAH method, following the one-loop and multiple-loop convergence results.
Every Schedule carries the regime and a provenance string naming the result it came from.
Formula outputs that are not integers are rounded up.
'''
from __future__ import annotations

from dataclasses import dataclass, asdict
from enum import Enum
import logging
import math

import numpy as np

from ..errors import InvalidArgumentError, MissingConstantError, ScheduleInvalidError

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    ONE_LOOP_CONVEX = 'one_loop_convex'
    ONE_LOOP_NONCONVEX = 'one_loop_nonconvex'
    MULTI_LOOP_STRONGLY_CONVEX = 'multi_loop_strongly_convex'
    MULTI_LOOP_CONVEX_MN = 'multi_loop_convex_mn'


MULTI_LOOP_REGIMES = (Regime.MULTI_LOOP_STRONGLY_CONVEX, Regime.MULTI_LOOP_CONVEX_MN)


def conservative_ceil(value):
    # Round up, but let values within rounding noise of an integer (20 * 9.999999999999998) stay put.
    return int(math.ceil(value - 1e-9 * max(1.0, abs(value))))


def halving_stages(initial_grad_norm_sq, epsilon):
    # Smallest s with (1/2^s) ||grad F(w_0)||^2 <= 3/4 epsilon, at least one stage.
    ratio = initial_grad_norm_sq / (0.75 * epsilon)
    if ratio <= 1: return 1
    return max(1, conservative_ceil(math.log2(ratio)))


@dataclass(frozen=True)
class Schedule:
    '''
    Description:
    Parameters for one run of iSARAH. T is None while it still depends on ||grad F(w_tilde_0)||^2,
    which is only known at run time; resolve_stages fills it in.
    '''
    eta: float
    m: int
    b: int
    T: int | None = 1
    regime: Regime | None = None
    epsilon: float | None = None
    provenance: str = 'user supplied'

    def __post_init__(self):
        if not self.eta > 0: raise InvalidArgumentError(f'Schedule step size must be positive, got {self.eta}.')
        for name in ('m', 'b'):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise InvalidArgumentError(f'Schedule {name} must be a positive integer, got {getattr(self, name)}.')
        if self.T is not None and (int(self.T) != self.T or self.T < 1):
            raise InvalidArgumentError(f'Schedule T must be a positive integer, got {self.T}.')
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidArgumentError(f'epsilon must be positive, got {self.epsilon}.')
        if self.regime is not None: object.__setattr__(self, 'regime', Regime(self.regime))

    def check_step_size(self, constants):
        '''
        Arguments:
        - constants: ProblemConstants or None

        Returns:
        - Schedule
            self, when eta lies in the range its regime's result covers: eta <= 1/L for one_loop_convex,
            eta < 2/L otherwise. A schedule without a regime, or a problem without L, is not checked.
        '''
        if self.regime is None or constants is None or constants.L is None: return self
        if self.regime == Regime.ONE_LOOP_CONVEX and self.eta > (1 + 1e-12) / constants.L:
            raise ScheduleInvalidError(f'eta={self.eta:.6g} exceeds 1/L={1 / constants.L:.6g} for {self.regime.value}.')
        if self.eta >= 2 / constants.L:
            raise ScheduleInvalidError(f'eta={self.eta:.6g} is not below 2/L={2 / constants.L:.6g} for {self.regime.value}.')
        return self

    @property
    def work_per_stage(self):
        # b for v_0 and two evaluations for each of the m - 1 recursive steps.
        return self.b + 2 * (self.m - 1)

    @property
    def total_work(self):
        if self.T is None: return None
        return self.T * self.work_per_stage

    def resolve_stages(self, initial_grad_norm_sq):
        if self.T is not None: return self
        if self.epsilon is None: raise MissingConstantError('epsilon', 'the number of outer stages')
        T = halving_stages(initial_grad_norm_sq, self.epsilon)
        return Schedule(self.eta, self.m, self.b, T, self.regime, self.epsilon,
                        f'{self.provenance}; T = ceil(log2(||grad F(w0)||^2 / (3/4 eps))) with ||grad F(w0)||^2 = {initial_grad_norm_sq:.6g}')

    def to_dict(self):
        values = asdict(self)
        values['regime'] = None if self.regime is None else self.regime.value
        return values

    @classmethod
    def from_dict(cls, values):
        known = {key: values[key] for key in cls.__dataclass_fields__ if key in values}
        return cls(**known)


def check_m(m):
    if int(m) != m or m < 1: raise InvalidArgumentError(f'm must be an integer >= 1, got {m}.')
    return int(m)


def check_epsilon(epsilon):
    if epsilon is None or not epsilon > 0: raise InvalidArgumentError(f'epsilon must be strictly positive, got {epsilon}.')
    return float(epsilon)


def one_loop_convex(constants, m, epsilon=None):
    '''
    Arguments:
    - constants: ProblemConstants
    - m: int
        Inner loop length.

    Returns:
    - Schedule
        eta = 1 / (L sqrt(m+1)), b = ceil(2 sqrt(m+1)), T = 1.
    '''
    constants.require('L', purpose='the one-loop convex schedule')
    m = check_m(m)
    root = math.sqrt(m + 1)
    return Schedule(
        eta=1.0 / (constants.L * root), m=m, b=conservative_ceil(2 * root), T=1,
        regime=Regime.ONE_LOOP_CONVEX, epsilon=epsilon,
        provenance='one-loop convex result: eta = 1/(L sqrt(m+1)), b = 2 sqrt(m+1)',
    )


def one_loop_convex_for_epsilon(constants, epsilon, initial_gap):
    '''
    Arguments:
    - constants: ProblemConstants
        Needs L and sigma_star_sq.
    - epsilon: float
    - initial_gap: float
        F(w_0) - F(w_*), see Oracle.optimality_gap.

    Returns:
    - Schedule
        m + 1 = ceil((6 L gap + 2 sigma_*^2)^2 / epsilon^2), clamped so that m >= 1.
    '''
    epsilon = check_epsilon(epsilon)
    constants.require('L', 'sigma_star_sq', purpose='the one-loop convex epsilon schedule')
    if initial_gap is None: raise MissingConstantError('initial_gap', 'the one-loop convex epsilon schedule')
    numerator = 6 * constants.L * max(initial_gap, 0.0) + 2 * constants.sigma_star_sq
    m_plus_1 = max(1, conservative_ceil(numerator ** 2 / epsilon ** 2))
    schedule = one_loop_convex(constants, max(1, m_plus_1 - 1), epsilon)
    return Schedule(**{**schedule.__dict__, 'provenance': schedule.provenance + '; m + 1 = (6 L gap + 2 sigma*^2)^2 / eps^2'})


def one_loop_nonconvex(constants, m, epsilon=None):
    '''
    Returns:
    - Schedule
        The largest admissible step eta = 2 / (L (sqrt(1 + 4m) + 1)), the positive root of
        L^2 eta^2 m - (1 - L eta) = 0, with b = ceil(sqrt(m+1)) and T = 1.
    '''
    constants.require('L', purpose='the one-loop non-convex schedule')
    m = check_m(m)
    return Schedule(
        eta=2.0 / (constants.L * (math.sqrt(1 + 4 * m) + 1)), m=m, b=conservative_ceil(math.sqrt(m + 1)), T=1,
        regime=Regime.ONE_LOOP_NONCONVEX, epsilon=epsilon,
        provenance='one-loop non-convex result: eta = 2/(L(sqrt(1+4m)+1)), b = sqrt(m+1)',
    )


def one_loop_nonconvex_bound(constants, m, initial_gap, initial_second_moment):
    # 2/(eta (m+1)) [F(w_0) - F^*] + E||grad f(w_0; xi)||^2 / sqrt(m+1) at the non-convex step size.
    eta = 2.0 / (constants.L * (math.sqrt(1 + 4 * m) + 1))
    return 2.0 / (eta * (m + 1)) * initial_gap + initial_second_moment / math.sqrt(m + 1)


def one_loop_nonconvex_for_epsilon(constants, epsilon, initial_gap, initial_second_moment):
    '''
    Returns:
    - Schedule
        one_loop_nonconvex at the smallest m whose guaranteed bound is at most epsilon.

    Methodology:
    - The bound decreases in m, so m is bracketed by doubling and then bisected.
    '''
    epsilon = check_epsilon(epsilon)
    constants.require('L', purpose='the one-loop non-convex epsilon schedule')
    if initial_gap is None: raise MissingConstantError('initial_gap', 'the one-loop non-convex epsilon schedule')
    if initial_second_moment is None: raise MissingConstantError('initial_second_moment', 'the one-loop non-convex epsilon schedule')
    bound = lambda m: one_loop_nonconvex_bound(constants, m, max(initial_gap, 0.0), initial_second_moment)

    upper = 1
    while bound(upper) > epsilon:
        upper *= 2
        if upper > 2**62: raise InvalidArgumentError(f'No inner loop length reaches epsilon={epsilon}.')
    lower = upper // 2
    while upper - lower > 1:
        middle = (lower + upper) // 2
        if bound(middle) > epsilon: lower = middle
        else: upper = middle
    schedule = one_loop_nonconvex(constants, upper, epsilon)
    return Schedule(**{**schedule.__dict__, 'provenance': schedule.provenance + '; smallest m with bound <= eps'})


def multi_loop_strongly_convex(constants, epsilon, initial_grad_norm_sq=None):
    '''
    Arguments:
    - constants: ProblemConstants
        Needs L, mu and sigma_star_sq.
    - epsilon: float
    - initial_grad_norm_sq: float (optional)
        ||grad F(w_tilde_0)||^2. Without it T stays pending (None).

    Returns:
    - Schedule
        eta = 2/(5L), m = ceil(20 kappa - 1), b = ceil(max(20 kappa - 10, 20 sigma_*^2 / eps)),
        T = ceil(log2(||grad F(w_tilde_0)||^2 / (3/4 eps))).
    '''
    epsilon = check_epsilon(epsilon)
    constants.require('L', 'mu', 'sigma_star_sq', purpose='the multiple-loop strongly convex schedule')
    kappa = constants.kappa
    schedule = Schedule(
        eta=2.0 / (5 * constants.L),
        m=max(1, conservative_ceil(20 * kappa - 1)),
        b=max(1, conservative_ceil(max(20 * kappa - 10, 20 * constants.sigma_star_sq / epsilon))),
        T=None, regime=Regime.MULTI_LOOP_STRONGLY_CONVEX, epsilon=epsilon,
        provenance='multiple-loop strongly convex result: eta = 2/(5L), m = 20 kappa - 1, b = max(20 kappa - 10, 20 sigma*^2/eps)',
    )
    if initial_grad_norm_sq is None: return schedule
    return schedule.resolve_stages(initial_grad_norm_sq)


def multi_loop_convex_mn(constants, epsilon, initial_grad_norm_sq=None):
    '''
    Arguments:
    - constants: ProblemConstants
        Needs L, M, N and sigma_star_sq.

    Returns:
    - Schedule
        eta = 2/(5L), m = ceil(max(40 L M - 1, 120 L N / eps - 1)),
        b = ceil(max(40 L M - 5, 120 L N / eps, 60 sigma_*^2 / eps)), T by the same halving argument
        as the strongly convex case (these parameters contract by 1/2 per stage plus eps/8).
    '''
    epsilon = check_epsilon(epsilon)
    constants.require('L', 'M', 'N', 'sigma_star_sq', purpose='the multiple-loop (M, N) schedule')
    L, M, N = constants.L, constants.M, constants.N
    schedule = Schedule(
        eta=2.0 / (5 * L),
        m=max(1, conservative_ceil(max(40 * L * M - 1, 120 * L * N / epsilon - 1))),
        b=max(1, conservative_ceil(max(40 * L * M - 5, 120 * L * N / epsilon, 60 * constants.sigma_star_sq / epsilon))),
        T=None, regime=Regime.MULTI_LOOP_CONVEX_MN, epsilon=epsilon,
        provenance='multiple-loop (M, N) result: eta = 2/(5L), m = max(40LM - 1, 120LN/eps - 1), b = max(40LM - 5, 120LN/eps, 60 sigma*^2/eps)',
    )
    if initial_grad_norm_sq is None: return schedule
    return schedule.resolve_stages(initial_grad_norm_sq)


@dataclass(frozen=True)
class Contraction:
    '''
    Description:
    Per-stage contraction E||grad F(w_s)||^2 <= alpha E||grad F(w_{s-1})||^2 + delta, with fixed point
    Delta = delta / (1 - alpha) when alpha < 1. float(contraction) is alpha.
    '''
    alpha: float
    delta: float | None
    Delta: float | None

    @property
    def contracts(self):
        return self.alpha < 1

    def __float__(self):
        return float(self.alpha)

    def envelope(self, s, initial_grad_norm_sq):
        # alpha^s (||grad F(w_0)||^2 - Delta) + Delta
        Delta = self.Delta or 0.0
        return self.alpha ** s * (initial_grad_norm_sq - Delta) + Delta


def check_step(eta, L):
    if not 0 < eta * L < 2: raise InvalidArgumentError(f'The contraction needs 0 < eta < 2/L, got eta = {eta} with L = {L}.')


def finish_contraction(alpha, delta, label):
    if alpha >= 1: logger.warning('%s = %.6g >= 1: the stage recursion does not contract.', label, alpha)
    Delta = delta / (1 - alpha) if delta is not None and alpha < 1 else None
    return Contraction(alpha=alpha, delta=delta, Delta=Delta)


def theorem3_alpha(eta, m, b, constants):
    '''
    Returns:
    - Contraction
        alpha = 1/(mu eta (m+1)) + eta L/(2 - eta L) + (4 kappa - 2)/(b (2 - eta L)),
        delta = 4 sigma_*^2 / (b (2 - eta L)) when sigma_star_sq is known.
        alpha >= 1 is logged as a warning and still returned.
    '''
    constants.require('L', 'mu', purpose='the strongly convex contraction factor')
    L, mu, kappa = constants.L, constants.mu, constants.kappa
    check_step(eta, L)
    denominator = 2 - eta * L
    alpha = 1 / (mu * eta * (m + 1)) + eta * L / denominator + (4 * kappa - 2) / (b * denominator)
    delta = None if constants.sigma_star_sq is None else 4 * constants.sigma_star_sq / (b * denominator)
    return finish_contraction(alpha, delta, 'alpha')


def theorem4_alpha_c(eta, m, b, constants):
    '''
    Returns:
    - Contraction
        alpha_c = 2M/(eta (m+1)) + eta L/(2 - eta L) + (8 L M - 1)/(b (2 - eta L)),
        delta_c = 2N/(eta (m+1)) + 8 L N/(b (2 - eta L)) + 4 sigma_*^2/(b (2 - eta L)).
    '''
    constants.require('L', 'M', 'N', purpose='the (M, N) contraction factor')
    L, M, N = constants.L, constants.M, constants.N
    check_step(eta, L)
    denominator = 2 - eta * L
    alpha = 2 * M / (eta * (m + 1)) + eta * L / denominator + (8 * L * M - 1) / (b * denominator)
    delta = None
    if constants.sigma_star_sq is not None:
        delta = 2 * N / (eta * (m + 1)) + 8 * L * N / (b * denominator) + 4 * constants.sigma_star_sq / (b * denominator)
    return finish_contraction(alpha, delta, 'alpha_c')


def contraction_for(schedule, constants):
    if schedule.regime == Regime.MULTI_LOOP_STRONGLY_CONVEX: return theorem3_alpha(schedule.eta, schedule.m, schedule.b, constants)
    if schedule.regime == Regime.MULTI_LOOP_CONVEX_MN: return theorem4_alpha_c(schedule.eta, schedule.m, schedule.b, constants)
    raise InvalidArgumentError(f'Regime {schedule.regime} has no stage contraction.')


def estimate_sigma_star_sq(oracle, w_hat, rng, samples=1000):
    '''
    Arguments:
    - oracle: Oracle
    - w_hat: array
        Best known approximation of w_*.
    - rng: numpy Generator
    - samples: int (optional)

    Returns:
    - float
        Mean of ||grad f(w_hat; xi)||^2 over `samples` fresh draws, a plug-in for sigma_*^2.
    '''
    if samples < 1: raise InvalidArgumentError(f'samples must be positive, got {samples}.')
    w_hat = oracle.check_point(w_hat)
    grads = oracle.grad_batch(w_hat, oracle.sample_batch(rng, samples))
    return float(np.mean(np.sum(grads ** 2, axis=1)))


def schedule_for(regime, constants, epsilon=None, m=None, initial_gap=None, initial_second_moment=None,
                 initial_grad_norm_sq=None):
    '''
    Arguments:
    - regime: Regime or str
    - constants: ProblemConstants
    - epsilon: float (optional)
    - m: int (optional)
        Only used by the one-loop regimes when epsilon is not given; epsilon wins when both are.
    - initial_gap, initial_second_moment, initial_grad_norm_sq: float (optional)
        Run-time measurements at w_0 used by the epsilon-driven formulas.

    Returns:
    - Schedule
    '''
    regime = Regime(regime)
    if regime in (Regime.ONE_LOOP_CONVEX, Regime.ONE_LOOP_NONCONVEX):
        if epsilon is not None:
            if m is not None: logger.info('Both m=%s and epsilon=%s given; m is recomputed from epsilon.', m, epsilon)
            if regime == Regime.ONE_LOOP_CONVEX: return one_loop_convex_for_epsilon(constants, epsilon, initial_gap)
            return one_loop_nonconvex_for_epsilon(constants, epsilon, initial_gap, initial_second_moment)
        if m is None: raise MissingConstantError('m', f'the {regime.value} schedule without epsilon')
        if regime == Regime.ONE_LOOP_CONVEX: return one_loop_convex(constants, m)
        return one_loop_nonconvex(constants, m)
    if epsilon is None: raise MissingConstantError('epsilon', f'the {regime.value} schedule')
    if regime == Regime.MULTI_LOOP_STRONGLY_CONVEX: return multi_loop_strongly_convex(constants, epsilon, initial_grad_norm_sq)
    return multi_loop_convex_mn(constants, epsilon, initial_grad_norm_sq)

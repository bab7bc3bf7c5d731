import math
import numpy as np
import pytest

from ..Oracle import ProblemConstants
from ..Problems import QuadraticFiniteSum, modified_logistic
from ..Schedules import (
    Regime, Schedule, halving_stages, one_loop_convex, one_loop_convex_for_epsilon, one_loop_nonconvex,
    one_loop_nonconvex_for_epsilon, multi_loop_strongly_convex, multi_loop_convex_mn, theorem3_alpha,
    theorem4_alpha_c, contraction_for, estimate_sigma_star_sq, schedule_for,
)
from ..Schedules.schedules import conservative_ceil, one_loop_nonconvex_bound
from ..errors import InvalidArgumentError, MissingConstantError, ScheduleInvalidError


def test_one_loop_schedules():
    # Test 1: convex, L = 2, m = 99 gives eta = 1/(2 * 10) and b = 2 * 10.
    schedule = one_loop_convex(ProblemConstants(L=2.0), 99)
    assert schedule.eta == pytest.approx(0.05) and schedule.b == 20, f'Got eta={schedule.eta}, b={schedule.b}.'
    assert schedule.T == 1 and schedule.regime == Regime.ONE_LOOP_CONVEX, 'A one-loop schedule has T = 1.'

    # Test 2: non-convex, L = 1, m = 6: sqrt(25) = 5 so eta = 1/3 and b = ceil(sqrt(7)) = 3.
    schedule = one_loop_nonconvex(ProblemConstants(L=1.0), 6)
    assert schedule.eta == pytest.approx(1 / 3) and schedule.b == 3, f'Got eta={schedule.eta}, b={schedule.b}.'

    # Test 3: the non-convex step solves L^2 eta^2 m = 1 - L eta.
    for m in (1, 10, 1000):
        eta = one_loop_nonconvex(ProblemConstants(L=3.0), m).eta
        assert 9 * eta ** 2 * m == pytest.approx(1 - 3 * eta), f'The step size for m={m} is not the admissible root.'

    with pytest.raises(InvalidArgumentError):
        one_loop_convex(ProblemConstants(L=1.0), 0)


def test_one_loop_convex_for_epsilon():
    constants = ProblemConstants(L=1.0, sigma_star_sq=1.0)
    # (6 * 1 * 1 + 2)^2 / 0.5^2 = 256, so m + 1 = 256.
    schedule = one_loop_convex_for_epsilon(constants, 0.5, initial_gap=1.0)
    assert schedule.m == 255, f'm should be 255 but is {schedule.m}.'
    assert schedule.epsilon == 0.5 and 'eps' in schedule.provenance, 'epsilon and its provenance should be kept.'

    # A huge epsilon is clamped to m = 1.
    assert one_loop_convex_for_epsilon(constants, 1e6, initial_gap=1.0).m == 1, 'm should be clamped to 1.'
    with pytest.raises(MissingConstantError):
        one_loop_convex_for_epsilon(ProblemConstants(L=1.0), 0.5, initial_gap=1.0)


def test_one_loop_nonconvex_for_epsilon_is_minimal():
    constants = ProblemConstants(L=2.0)
    schedule = one_loop_nonconvex_for_epsilon(constants, 0.05, initial_gap=1.0, initial_second_moment=3.0)
    m = schedule.m
    assert one_loop_nonconvex_bound(constants, m, 1.0, 3.0) <= 0.05, f'The bound at m={m} misses epsilon.'
    assert one_loop_nonconvex_bound(constants, m - 1, 1.0, 3.0) > 0.05, f'm={m} is not the smallest admissible length.'


def test_multi_loop_strongly_convex_schedule():
    # L = 1, mu = 0.1, sigma*^2 = 0, eps = 0.01: eta = 0.4, m = 199, b = 190.
    constants = ProblemConstants(L=1.0, mu=0.1, sigma_star_sq=0.0)
    schedule = multi_loop_strongly_convex(constants, 0.01)
    assert schedule.eta == pytest.approx(0.4), f'eta should be 0.4 but is {schedule.eta}.'
    assert (schedule.m, schedule.b) == (199, 190), f'(m, b) should be (199, 190) but is {(schedule.m, schedule.b)}.'
    assert schedule.T is None and schedule.total_work is None, 'T stays pending without ||grad F(w0)||^2.'

    # T = ceil(log2(g0 / (3/4 eps))).
    resolved = schedule.resolve_stages(12.0)
    assert resolved.T == math.ceil(math.log2(12.0 / 0.0075)), f'T should follow the halving count, got {resolved.T}.'
    assert resolved.total_work == resolved.T * (190 + 2 * 198), 'total_work is T (b + 2 (m - 1)).'

    # The variance term sets b once it dominates.
    noisy = multi_loop_strongly_convex(constants.replace(sigma_star_sq=1.0), 0.01)
    assert noisy.b == 2000, f'b should be 20 sigma*^2 / eps = 2000 but is {noisy.b}.'


def test_theorem3_alpha_at_the_halving_parameters():
    # 1/8 + 1/4 + 1/8 = 1/2.
    constants = ProblemConstants(L=1.0, mu=0.1, sigma_star_sq=0.0)
    schedule = multi_loop_strongly_convex(constants, 0.01)
    contraction = theorem3_alpha(schedule.eta, schedule.m, schedule.b, constants)
    assert abs(contraction.alpha - 0.5) < 1e-15, f'alpha should be exactly 1/2 but is {contraction.alpha!r}.'
    assert contraction.Delta == 0.0 and contraction.contracts, 'Without noise the fixed point is 0.'
    assert float(contraction_for(schedule, constants)) == contraction.alpha, 'contraction_for should dispatch on the regime.'

    # A short loop does not contract and is only flagged.
    weak = theorem3_alpha(0.4, 2, 1, constants)
    assert weak.alpha >= 1 and not weak.contracts and weak.Delta is None, 'alpha >= 1 should be returned with no fixed point.'
    with pytest.raises(InvalidArgumentError):
        theorem3_alpha(2.5, 10, 10, constants)


def test_multi_loop_convex_mn_schedule():
    constants = modified_logistic(0.5).constants
    schedule = multi_loop_convex_mn(constants, 0.1, initial_grad_norm_sq=0.5)
    L, M, N = constants.L, constants.M, constants.N
    assert schedule.m == conservative_ceil(max(40 * L * M - 1, 120 * L * N / 0.1 - 1)), f'm is {schedule.m}.'
    contraction = theorem4_alpha_c(schedule.eta, schedule.m, schedule.b, constants)
    assert contraction.alpha <= 0.5 + 1e-12, f'alpha_c should be at most 1/2 but is {contraction.alpha}.'
    assert contraction.Delta is not None and contraction.Delta > 0, 'N > 0 leaves a positive fixed point.'


def test_schedule_for_dispatch():
    constants = ProblemConstants(L=1.0, mu=0.5, sigma_star_sq=0.2)

    # Test 1: epsilon wins over m for one-loop regimes.
    schedule = schedule_for('one_loop_convex', constants, epsilon=0.5, m=3, initial_gap=1.0)
    assert schedule.m != 3, 'epsilon should recompute m.'
    assert schedule_for(Regime.ONE_LOOP_NONCONVEX, constants, m=8).m == 8, 'm should be used without epsilon.'

    # Test 2: missing inputs are reported by name.
    with pytest.raises(MissingConstantError) as error:
        schedule_for('multi_loop_strongly_convex', ProblemConstants(L=1.0, sigma_star_sq=0.0), epsilon=0.1)
    assert error.value.name == 'mu', f'The missing constant is mu, reported {error.value.name}.'
    with pytest.raises(MissingConstantError):
        schedule_for('multi_loop_convex_mn', constants, epsilon=0.1)
    with pytest.raises(ValueError):
        schedule_for('two_loop', constants, epsilon=0.1)


def test_schedule_validation_and_serialisation():
    for values in ({'eta': 0.0, 'm': 1, 'b': 1}, {'eta': 0.1, 'm': 0, 'b': 1}, {'eta': 0.1, 'm': 1, 'b': 1.5}, {'eta': 0.1, 'm': 1, 'b': 1, 'T': 0}):
        with pytest.raises(InvalidArgumentError):
            Schedule(**values)

    schedule = multi_loop_strongly_convex(ProblemConstants(L=2.0, mu=0.5, sigma_star_sq=0.1), 0.05, 3.0)
    values = schedule.to_dict()
    assert values['regime'] == 'multi_loop_strongly_convex', 'The regime should be written by value.'
    assert Schedule.from_dict(values) == schedule, 'from_dict should rebuild the same schedule.'
    assert Schedule(eta=0.1, m=5, b=3).work_per_stage == 11, 'work_per_stage is b + 2 (m - 1).'


def test_halving_stages():
    assert halving_stages(0.5, 1.0) == 1, 'A start already below 3/4 eps still runs one stage.'
    assert halving_stages(6.0, 1.0) == 3, 'log2(6 / 0.75) = 3.'
    assert halving_stages(6.1, 1.0) == 4, 'Any excess needs one more stage.'


def test_estimate_sigma_star_sq():
    # Every component gradient at w* = 0 has squared norm 1.
    oracle = QuadraticFiniteSum([1.0, 1.0], [-1.0, 1.0])
    estimate = estimate_sigma_star_sq(oracle, [0.0], np.random.default_rng(0), samples=50)
    assert estimate == pytest.approx(1.0), f'The plug-in sigma*^2 should be 1, got {estimate}.'


def test_schedules_grow_as_epsilon_shrinks():
    epsilons = [1.0, 0.3, 0.1, 0.03, 0.01, 0.003]
    strongly_convex = ProblemConstants(L=1.0, mu=0.1, sigma_star_sq=0.5)
    bounded = ProblemConstants(L=0.75, M=1.0, N=1.3, sigma_star_sq=0.2)
    constants = ProblemConstants(L=2.0, sigma_star_sq=0.5)
    derived = {
        'multi_loop_strongly_convex': [multi_loop_strongly_convex(strongly_convex, eps, 10.0) for eps in epsilons],
        'multi_loop_convex_mn': [multi_loop_convex_mn(bounded, eps, 10.0) for eps in epsilons],
        'one_loop_convex': [one_loop_convex_for_epsilon(constants, eps, initial_gap=1.0) for eps in epsilons],
        'one_loop_nonconvex': [one_loop_nonconvex_for_epsilon(constants, eps, 1.0, 3.0) for eps in epsilons],
    }
    for regime, schedules in derived.items():
        for name in ('m', 'b', 'T'):
            values = [getattr(schedule, name) for schedule in schedules]
            assert values == sorted(values), f'{regime}: {name} should not decrease as epsilon shrinks, got {values}.'


def test_check_step_size():
    # Test 1: one_loop_convex allows eta <= 1/L, the other regimes eta < 2/L.
    convex = Schedule(eta=0.5, m=5, b=1, regime=Regime.ONE_LOOP_CONVEX)
    assert convex.check_step_size(ProblemConstants(L=2.0)) is convex, 'eta = 1/L is admissible.'
    with pytest.raises(ScheduleInvalidError):
        convex.check_step_size(ProblemConstants(L=4.0))
    multi = Schedule(eta=1.5, m=5, b=1, regime=Regime.MULTI_LOOP_STRONGLY_CONVEX, epsilon=0.1)
    assert multi.check_step_size(ProblemConstants(L=1.0)) is multi, 'eta = 1.5 < 2/L = 2 is admissible.'
    with pytest.raises(ScheduleInvalidError):
        multi.check_step_size(ProblemConstants(L=2.0))

    # Test 2: derived schedules always pass, a schedule without a regime is never checked.
    constants = ProblemConstants(L=3.0, mu=0.3, sigma_star_sq=0.1)
    for schedule in (one_loop_convex(constants, 10), one_loop_nonconvex(constants, 10), multi_loop_strongly_convex(constants, 0.1)):
        schedule.check_step_size(constants)
    free = Schedule(eta=100.0, m=5, b=1)
    assert free.check_step_size(constants) is free and free.check_step_size(None) is free, 'No regime, no check.'

import itertools
import numpy as np
import pytest
import scipy.stats

from ..Oracle import ProblemConstants, RandomStreams, ScriptedStream
from ..Problems import QuadraticFiniteSum, make_gaussian_quadratic, make_quadratic
from ..errors import (
    ContractViolationError, InvalidArgumentError, MissingConstantError, UnsupportedOperationError,
)


def two_components():
    # f_1 = 1/2 (w + 1)^2, f_2 = 1/2 (w - 1)^2.
    return QuadraticFiniteSum([1.0, 1.0], [-1.0, 1.0])


def test_problem_constants_validation():
    # Test 1: invalid constants are rejected at construction.
    for values in ({'L': 0.0}, {'L': 1.0, 'mu': 2.0}, {'L': 1.0, 'mu': 0.0}, {'L': 1.0, 'sigma_star_sq': -1.0}, {'L': 1.0, 'M': -1.0}):
        with pytest.raises(InvalidArgumentError):
            ProblemConstants(**values)

    # Test 2: N = 0 is allowed (the gradient-dominated case).
    assert ProblemConstants(L=1.0, M=1.0, N=0.0).N == 0.0, 'N = 0 should be accepted.'

    # Test 3: require names the missing constant.
    with pytest.raises(MissingConstantError) as error:
        ProblemConstants(L=1.0).require('L', 'sigma_star_sq', purpose='a test')
    assert error.value.name == 'sigma_star_sq', f'The missing constant is sigma_star_sq, reported {error.value.name}.'
    assert 'sigma_star_sq' in str(error.value), f'The message should name the constant: {error.value}.'


def test_problem_constants_dict_and_kappa():
    constants = ProblemConstants(L=4.0, mu=0.5, w_star=[1.0, 2.0])
    assert constants.kappa == 8.0, f'kappa should be 8 but is {constants.kappa}.'
    values = constants.to_dict()
    assert values['w_star'] == [1.0, 2.0], 'w_star should be serialised as a list.'
    restored = ProblemConstants.from_dict(values)
    assert np.array_equal(restored.w_star, constants.w_star) and restored.mu == 0.5, 'from_dict should restore the constants.'
    assert constants.replace(mu=1.0).mu == 1.0 and constants.mu == 0.5, 'replace should return a changed copy.'


def test_scripted_stream():
    stream = ScriptedStream([2, -1, 0], cycle=True)
    draws = [stream.integers(0, 5) for _ in range(4)]
    assert draws == [2, 4, 0, 2], f'Scripted draws should be [2, 4, 0, 2] but are {draws}.'
    assert np.array_equal(ScriptedStream([1, 0]).integers(0, 3, size=2), [1, 0]), 'Batch draws should follow the script.'

    with pytest.raises(ContractViolationError):
        ScriptedStream([7]).integers(0, 3)
    once = ScriptedStream([1], cycle=False)
    once.integers(0, 3)
    with pytest.raises(InvalidArgumentError):
        once.integers(0, 3)


def test_random_streams_are_reproducible_and_independent():
    # Test 1: the same seed gives the same draws on every role.
    first, second = RandomStreams(7), RandomStreams(7)
    for role in ('zeta', 'xi', 'select'):
        a = getattr(first, role).integers(0, 10**9, size=5)
        b = getattr(second, role).integers(0, 10**9, size=5)
        assert np.array_equal(a, b), f'The {role} stream is not reproducible.'

    # Test 2: roles differ from each other and match RandomStreams.stream.
    streams = RandomStreams(7)
    zeta, xi = streams.zeta.integers(0, 10**9, size=5), streams.xi.integers(0, 10**9, size=5)
    assert not np.array_equal(zeta, xi), 'The zeta and xi streams should be independent.'
    assert np.array_equal(RandomStreams.stream(7, 'zeta').integers(0, 10**9, size=5), zeta), 'stream() should reproduce a role.'

    # Test 3: overrides replace a single role and unknown roles are rejected.
    pinned = RandomStreams(3, select=ScriptedStream([0]))
    assert pinned.select.integers(0, 10) == 0, 'The select stream should be the scripted one.'
    with pytest.raises(InvalidArgumentError):
        RandomStreams(3, theta=ScriptedStream([0]))


def test_point_and_id_contracts():
    oracle = two_components()
    with pytest.raises(ContractViolationError):
        oracle.grad_sample(np.zeros(2), 0)
    with pytest.raises(ContractViolationError):
        oracle.grad_sample(np.zeros(1), 2)
    assert np.array_equal(oracle.grad_sample(0.5, 1), [-0.5]), 'A scalar point should be accepted in one dimension.'
    with pytest.raises(InvalidArgumentError):
        oracle.grad_minibatch(np.zeros(1), 0, np.random.default_rng(0))


def test_full_quantities_of_a_finite_sum():
    oracle = two_components()
    w = np.array([2.0])
    assert np.allclose(oracle.grad_full(w), [2.0]), f'grad F(2) should be 2, got {oracle.grad_full(w)}.'
    assert oracle.value_full(w) == pytest.approx(2.5), 'F(2) is the mean of 4.5 and 0.5.'
    assert oracle.grad_norm_sq(w) == pytest.approx(4.0), 'grad_norm_sq should be exact on a finite sum.'
    assert oracle.grad_second_moment(w) == pytest.approx((9 + 1) / 2), 'E||grad f||^2 at 2 is (9 + 1) / 2.'
    assert oracle.optimality_gap(w) == pytest.approx(2.0), 'F(2) - F* = 2.5 - 0.5.'

    ids = oracle.sample_batch(np.random.default_rng(0), 1000)
    assert ids.min() >= 0 and ids.max() <= 1, 'Finite-sum SampleIds are 0-based component indices.'


def test_expectation_form_restrictions():
    oracle = make_gaussian_quadratic(3, 4.0, rng=0)
    assert not oracle.is_finite_sum, 'GaussianQuadratic is in expectation form.'
    with pytest.raises(UnsupportedOperationError):
        oracle.grad_full(np.zeros(3))
    with pytest.raises(UnsupportedOperationError):
        oracle.grad_norm_sq(np.zeros(3))
    estimate = oracle.grad_norm_sq(np.zeros(3), np.random.default_rng(1), samples=20000)
    exact = float(np.sum(oracle.mean_gradient(np.zeros(3)) ** 2))
    assert abs(estimate - exact) < 0.1 * exact + 0.05, f'Held-out estimate {estimate} is far from {exact}.'


def test_optimality_gap_needs_a_lower_bound():
    oracle = two_components()
    oracle.constants = ProblemConstants(L=1.0, n_components=2)
    with pytest.raises(MissingConstantError):
        oracle.optimality_gap(np.zeros(1))
    assert oracle.optimality_gap(np.zeros(1), f_star=0.0) == pytest.approx(0.5), 'An explicit f_star should be used.'


def test_sample_is_uniform():
    # Chi-square goodness of fit of 20000 draws over n = 10 components.
    oracle = make_quadratic(10, 2, 2.0, rng=0)
    rng = np.random.default_rng(0)
    draws = np.array([oracle.sample(rng) for _ in range(20000)])
    assert draws.min() >= 0 and draws.max() < 10, f'SampleIds should lie in [0, 10), got [{draws.min()}, {draws.max()}].'
    result = scipy.stats.chisquare(np.bincount(draws, minlength=10))
    assert result.pvalue > 1e-4, f'The draws are not uniform: p = {result.pvalue}.'


def test_grad_minibatch_is_the_mean_over_its_draws():
    oracle = make_quadratic(3, 2, 3.0, rng=0)
    w = np.array([0.7, -1.2])

    # Test 1: every 2-tuple of SampleIds gives the mean of its two gradients.
    means = []
    for ids in itertools.product(range(3), repeat=2):
        mean = oracle.grad_minibatch(w, 2, ScriptedStream(ids))
        expected = (oracle.grad_sample(w, ids[0]) + oracle.grad_sample(w, ids[1])) / 2
        assert np.allclose(mean, expected, rtol=0, atol=1e-14), f'The batch {ids} gives {mean}, expected {expected}.'
        means.append(mean)

    # Test 2: averaged over all tuples the mini-batch gradient is unbiased.
    assert np.allclose(np.mean(means, axis=0), oracle.grad_full(w), rtol=0, atol=1e-14), 'The enumerated mean should be grad F(w).'

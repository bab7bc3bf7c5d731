import json
import os
import tempfile
import numpy as np
import pytest

from ..Problems import (
    QuadraticFiniteSum, make_quadratic, GaussianQuadratic, make_gaussian_quadratic,
    LogisticProblem, load_libsvm, modified_logistic,
)
from ..Problems.problems import constants_sidecar_path
from ..errors import DataError, InvalidArgumentError


def test_quadratic_constants_are_closed_form():
    # Two components 1/2 (w -+ 1)^2: L = mu = 1, w* = 0, sigma*^2 = 1, F* = 1/2.
    oracle = QuadraticFiniteSum([1.0, 1.0], [-1.0, 1.0])
    constants = oracle.constants
    assert (constants.L, constants.mu) == (1.0, 1.0), f'L and mu should be 1, got {constants.L}, {constants.mu}.'
    assert np.allclose(constants.w_star, [0.0]), f'w* should be 0, got {constants.w_star}.'
    assert constants.sigma_star_sq == pytest.approx(1.0), f'sigma*^2 should be 1, got {constants.sigma_star_sq}.'
    assert constants.f_star == pytest.approx(0.5), f'F* should be 1/2, got {constants.f_star}.'
    assert np.allclose(oracle.grad_full(constants.w_star), 0.0), 'grad F(w*) should vanish.'


def test_quadratic_validation():
    with pytest.raises(InvalidArgumentError):
        QuadraticFiniteSum([[1.0, -1.0]], [[0.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        QuadraticFiniteSum([[1.0, 1.0]], [[0.0]])
    # A coordinate without curvature leaves mu undefined.
    assert QuadraticFiniteSum([[1.0, 0.0]], [[0.0, 0.0]]).constants.mu is None, 'mu should be None without full curvature.'


def test_make_quadratic_hits_the_condition_number():
    for n, d, kappa in ((20, 4, 10.0), (5, 3, 2.0), (50, 2, 100.0), (10, 3, 1.2)):
        constants = make_quadratic(n, d, kappa, rng=1).constants
        assert constants.kappa == pytest.approx(kappa, rel=1e-9), f'kappa should be {kappa} but is {constants.kappa} for n={n}, d={d}.'
        assert constants.mu == pytest.approx(1.0, rel=1e-12), f'The mean Hessian should have mu = 1, got {constants.mu}.'

    # The same seed gives the same problem.
    first, second = make_quadratic(8, 3, 5.0, rng=4), make_quadratic(8, 3, 5.0, rng=4)
    assert np.array_equal(first.A, second.A) and np.array_equal(first.C, second.C), 'make_quadratic should be seeded.'

    with pytest.raises(InvalidArgumentError):
        make_quadratic(5, 2, 0.5)


def test_make_quadratic_in_one_dimension():
    # Test 1: every seed reaches kappa with positive curvatures, n = 3 allows any kappa below 3.
    for seed in range(20):
        for kappa in (1.5, 2.0, 2.9):
            oracle = make_quadratic(3, 1, kappa, rng=seed)
            assert np.all(oracle.A > 0), f'Curvatures must stay positive for seed={seed}, kappa={kappa}: {oracle.A.ravel()}.'
            assert oracle.constants.kappa == pytest.approx(kappa, rel=1e-9), f'seed={seed} gives kappa={oracle.constants.kappa}.'
            assert oracle.constants.mu == pytest.approx(1.0, rel=1e-12), 'The mean curvature should be 1.'

    # Test 2: kappa = 1 is the homogeneous problem and kappa >= n is out of reach.
    assert np.all(make_quadratic(4, 1, 1.0, rng=0).A == 1.0), 'kappa = 1 gives identical curvatures.'
    for n, kappa in ((3, 3.0), (1, 2.0)):
        with pytest.raises(InvalidArgumentError):
            make_quadratic(n, 1, kappa, rng=0)


def test_quadratic_strong_convexity_certificate():
    # 2 mu [F(w) - F*] <= ||grad F(w)||^2 on random points.
    oracle = make_quadratic(15, 3, 6.0, rng=2)
    rng = np.random.default_rng(3)
    mu, f_star = oracle.constants.mu, oracle.constants.f_star
    for _ in range(1000):
        w = rng.normal(0.0, 5.0, size=oracle.dim)
        gap = oracle.value_full(w) - f_star
        assert 2 * mu * gap <= oracle.grad_norm_sq(w) * (1 + 1e-10) + 1e-12, f'Strong convexity fails at {w}.'


def test_gaussian_quadratic():
    oracle = make_gaussian_quadratic(4, 8.0, noise=0.5, rng=0)
    constants = oracle.constants
    assert constants.kappa == pytest.approx(8.0), f'kappa should be 8, got {constants.kappa}.'
    assert constants.sigma_star_sq == pytest.approx(0.25 * np.sum(oracle.a ** 2)), 'sigma*^2 = noise^2 sum a^2.'

    # Equal SampleIds regenerate the same realisation.
    w = np.ones(4)
    assert np.array_equal(oracle.grad_sample(w, 12345), oracle.grad_sample(w, 12345)), 'A SampleId should fix xi.'

    # The mini-batch mean approaches the analytic gradient.
    estimate = oracle.grad_minibatch(w, 20000, np.random.default_rng(5))
    assert np.allclose(estimate, oracle.mean_gradient(w), atol=0.15), f'{estimate} is far from {oracle.mean_gradient(w)}.'
    assert oracle.optimality_gap(constants.w_star) == 0.0, 'The gap at w* should be 0.'

    with pytest.raises(InvalidArgumentError):
        GaussianQuadratic([1.0, 0.0], [0.0, 0.0], 1.0)


def logistic_data(n=40, d=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(X @ rng.normal(size=d) + 0.5 * rng.normal(size=n) > 0, 1.0, -1.0)
    return X, y


def test_logistic_constants_and_optimum():
    X, y = logistic_data()
    oracle = LogisticProblem(X, y, lam=0.1)
    expected_L = np.max(np.sum(X ** 2, axis=1)) / 4 + 0.1
    assert oracle.constants.L == pytest.approx(expected_L), f'L should be {expected_L}, got {oracle.constants.L}.'
    assert oracle.constants.mu == 0.1, 'mu should equal lambda.'
    assert oracle.constants.w_star is None, 'w* is unknown before solve_optimum.'

    assert oracle.solve_optimum(gtol=1e-8), 'L-BFGS-B should find the regularised optimum.'
    constants = oracle.constants
    assert np.linalg.norm(oracle.grad_full(constants.w_star)) <= 1e-8, 'grad F(w*) should be below gtol.'
    assert constants.f_star == pytest.approx(oracle.value_full(constants.w_star)), 'F* should be F(w*).'
    assert constants.sigma_star_sq == pytest.approx(oracle.grad_second_moment(constants.w_star)), 'sigma*^2 at w*.'


def test_smoothness_certificate():
    # ||grad f_i(w) - grad f_i(w')|| <= L ||w - w'|| on random triples (i, w, w').
    X, y = logistic_data(n=30, d=4, seed=2)
    rng = np.random.default_rng(4)
    for oracle in (make_quadratic(15, 3, 6.0, rng=2), LogisticProblem(X, y, lam=0.1), modified_logistic(0.5)):
        L = oracle.constants.L
        for _ in range(1000):
            i = oracle.sample(rng)
            w, w_prime = rng.normal(0.0, 3.0, size=(2, oracle.dim))
            change = np.linalg.norm(oracle.grad_sample(w, i) - oracle.grad_sample(w_prime, i))
            assert change <= L * np.linalg.norm(w - w_prime) * (1 + 1e-10) + 1e-12, f'{oracle.problem_type} is not L-smooth at i={i}.'


def test_logistic_validation():
    X, y = logistic_data(n=4)
    with pytest.raises(DataError):
        LogisticProblem(X, y[:3])
    with pytest.raises(DataError):
        LogisticProblem(X, np.array([0.0, 1.0, 1.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        LogisticProblem(X, y, lam=-1.0)


def test_load_libsvm_caches_the_constants():
    # This test ensures that the sidecar is written once and reused while the data is unchanged.
    X, y = logistic_data(n=30, d=4, seed=1)
    lines = [f'{int(label)} ' + ' '.join(f'{j + 1}:{float(value)!r}' for j, value in enumerate(row)) for row, label in zip(X, y)]
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'train.libsvm')
        with open(path, 'w') as file: file.write('\n'.join(lines) + '\n')

        solved = load_libsvm(path, lam=0.05, solve_optimum=True)
        assert solved.constants.w_star is not None, 'solve_optimum should find w*.'
        assert os.path.exists(constants_sidecar_path(path)), 'The constants sidecar should be written.'

        cached = load_libsvm(path, lam=0.05)
        assert np.array_equal(cached.constants.w_star, solved.constants.w_star), 'The cached w* should be reused.'
        assert cached.constants.sigma_star_sq == solved.constants.sigma_star_sq, 'The cached sigma*^2 should be reused.'

        # A different lambda makes the cache stale.
        assert load_libsvm(path, lam=0.5).constants.w_star is None, 'A stale sidecar should be ignored.'
        with open(constants_sidecar_path(path)) as file:
            assert json.load(file)['lambda'] == 0.05, 'The sidecar records lambda.'


def test_modified_logistic():
    oracle = modified_logistic(0.5)
    constants = oracle.constants
    assert constants.L == 0.75 and constants.M == 1.0, f'L and M should be 0.75 and 1, got {constants.L}, {constants.M}.'
    assert constants.N == pytest.approx(np.log(1 + np.e ** 2)), 'N should be log(1 + e^2).'
    assert constants.w_star is None and constants.f_star == 0.0, 'F* = 0 is not attained.'

    # Test 1: the gradient is continuous where the penalty starts.
    below, above = oracle.grad_sample([-2.0 - 1e-9], 0), oracle.grad_sample([-2.0 + 1e-9], 0)
    assert abs(below[0] - above[0]) < 1e-8, f'The gradient jumps at w = -2: {below} vs {above}.'

    # Test 2: F(w) - F* <= M ||grad F(w)||^2 + N on a grid.
    for w in np.linspace(-30.0, 30.0, 601):
        gap = oracle.value_full([w])
        assert gap <= constants.M * oracle.grad_norm_sq([w]) + constants.N + 1e-12, f'The (M, N) bound fails at w = {w}.'

    with pytest.raises(InvalidArgumentError):
        modified_logistic(0.0)

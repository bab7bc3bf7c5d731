'''
Canned diagnostic bundles for `vrsolve verify`. Every suite returns a list of outcomes
{"suite", "label", "passed", "detail"}; a suite passes when all of its outcomes do.
The problems and replication counts are fixed so the verdicts are reproducible.
'''
import logging

import numpy as np
import scipy.sparse

from ..Diagnostics import (
    SigmoidSquared, complexity_slope, contraction_check, grad_fd_check, minibatch_variance_identity,
    theorem1_bound_check, theorem2_bound_check, variance_decay_check, variance_profile,
)
from ..Problems import (
    LogisticProblem, QuadraticFiniteSum, make_gaussian_quadratic, make_quadratic, modified_logistic,
)
from ..Schedules import Regime, multi_loop_strongly_convex
from ..errors import NonConvergenceError

logger = logging.getLogger(__name__)


def outcome(suite, name, passed, **detail):
    # detail may carry its own 'label' (a BoundCheck dict); the outcome is labelled by name.
    return {'suite': suite, 'label': name, 'passed': bool(passed), 'detail': detail}


def bound_outcomes(suite, prefix, checks):
    return [outcome(suite, f'{prefix} {check.label}', check.passed, **check.to_dict()) for check in checks]


def identity_suite(workers=None):
    # Exact enumeration for every n, b in 1..4 at 5 random points; the identity holds to rounding.
    results = []
    rng = np.random.default_rng(0)
    for n in range(1, 5):
        oracle = QuadraticFiniteSum(rng.uniform(0.5, 1.5, size=(n, 2)), rng.normal(size=(n, 2)))
        for b in range(1, 5):
            worst = 0.0
            for _ in range(5):
                lhs, rhs = minibatch_variance_identity(oracle, rng.normal(size=2), b)
                worst = max(worst, abs(lhs - rhs))
            results.append(outcome('identity', f'n={n} b={b}', worst < 1e-12, max_abs_difference=worst))
    return results


def prop1_suite(workers=None, replications=1000, m=20):
    '''
    For kappa in {2, 10} with eta = 1/L: the decay bound at every t, and the contrast
    SARAH ratio E||v_{m-1}||^2 / E||v_0||^2 <= 1.5 (1 - 1/kappa^2)^(m-1) while SVRG's ratio is
    more than ten times larger.
    '''
    results = []
    for kappa in (2, 10):
        oracle = make_quadratic(20, 4, kappa, rng=kappa)
        eta, w0 = 1 / oracle.constants.L, np.full(oracle.dim, 3.0)
        checks = variance_decay_check(oracle, eta, 'exact', m, replications, w0=w0, workers=workers)
        results += bound_outcomes('prop1', f'kappa={kappa}', checks)

        sarah = variance_profile(oracle, eta, 'exact', m, replications, w0=w0, workers=workers).mean(axis=0)
        svrg = variance_profile(oracle, eta, 'exact', m, replications, w0=w0, estimator='svrg', workers=workers).mean(axis=0)
        sarah_ratio, svrg_ratio = sarah[-1] / sarah[0], svrg[-1] / svrg[0]
        limit = 1.5 * (1 - 1 / kappa ** 2) ** (m - 1)
        results.append(outcome('prop1', f'kappa={kappa} sarah decay', sarah_ratio <= limit, ratio=sarah_ratio, limit=limit))
        results.append(outcome('prop1', f'kappa={kappa} svrg contrast', svrg_ratio > 10 * sarah_ratio,
                               svrg_ratio=svrg_ratio, sarah_ratio=sarah_ratio))
    return results


def thm1_suite(workers=None, replications=500):
    # Two components 1/2 (w -+ 1)^2, so sigma_*^2 = 1, started at w0 = 2 with m + 1 = 64.
    oracle = QuadraticFiniteSum([1.0, 1.0], [-1.0, 1.0])
    check = theorem1_bound_check(oracle, 63, replications, w0=[2.0], workers=workers)
    results = [outcome('thm1', f'two components {check.label}', check.passed, **check.to_dict())]

    deterministic = QuadraticFiniteSum([[1.0, 4.0]], [[1.0, -1.0]])
    check = theorem1_bound_check(deterministic, 31, 20, w0=[3.0, 3.0], workers=workers)
    results.append(outcome('thm1', f'single component {check.label}', check.passed, **check.to_dict()))
    return results


def thm2_suite(workers=None, replications=1000):
    check = theorem2_bound_check(SigmoidSquared(), 99, replications, w0=[2.0], workers=workers)
    return [outcome('thm2', f'sigmoid squared {check.label}', check.passed, **check.to_dict())]


def contraction_suite(workers=None, replications=200, stages=5):
    # Halving per stage: every stage within (1/2^s) ||grad F(w_0)||^2 + eps/4.
    oracle = make_quadratic(20, 4, 5, rng=5, noise=0.1)
    w0 = np.full(oracle.dim, 2.0)
    schedule = multi_loop_strongly_convex(oracle.constants, 1e-2, oracle.grad_norm_sq(w0))
    checks = contraction_check(oracle, schedule, stages, replications, w0=w0, workers=workers)
    return bound_outcomes('contraction', 'kappa=5', checks)


def slope_suite(workers=None):
    '''
    Work against 1/epsilon on a two-component quadratic with sigma_*^2 = 0.09:
    ~ 1/eps^2 for the one-loop convex schedule and ~ 1/eps (up to the log) for the
    multiple-loop strongly convex one.
    '''
    oracle = QuadraticFiniteSum([1.0, 1.0], [-0.3, 0.3])
    epsilons = [1e-1, 1e-2, 1e-3]
    results = []
    for regime, w0, (low, high) in ((Regime.ONE_LOOP_CONVEX, [0.3], (1.7, 2.3)),
                                    (Regime.MULTI_LOOP_STRONGLY_CONVEX, [3.0], (0.7, 1.3))):
        try:
            slope = complexity_slope(oracle, regime, epsilons, w0=w0)
        except NonConvergenceError as error:
            results.append(outcome('slope', regime.value, False, error=str(error)))
            continue
        results.append(outcome('slope', regime.value, low <= slope <= high, slope=slope, expected=[low, high]))
    return results


def builtin_problems():
    rng = np.random.default_rng(0)
    X = scipy.sparse.random(30, 8, density=0.4, random_state=1, format='csr')
    y = np.where(rng.uniform(size=30) < 0.5, -1.0, 1.0)
    return {
        'quadratic': make_quadratic(10, 3, 4, rng=0),
        'gaussian_quadratic': make_gaussian_quadratic(3, 4, rng=0),
        'logistic': LogisticProblem(X, y, lam=0.1),
        'modified_logistic': modified_logistic(0.5),
        'sigmoid_squared': SigmoidSquared(),
    }


def gradients_suite(workers=None):
    results = []
    for name, oracle in builtin_problems().items():
        error = grad_fd_check(oracle, 20, rng=0)
        results.append(outcome('gradients', name, error < 1e-5, max_scaled_error=error))
    return results


SUITES = {
    'identity': identity_suite, 'prop1': prop1_suite, 'thm1': thm1_suite, 'thm2': thm2_suite,
    'contraction': contraction_suite, 'slope': slope_suite, 'gradients': gradients_suite,
}
SUITES['all'] = None


def run_suite(name, workers=None):
    names = [suite for suite in SUITES if suite != 'all'] if name == 'all' else [name]
    results = []
    for suite in names:
        logger.info('Running suite %s.', suite)
        results += SUITES[suite](workers=workers)
    return results

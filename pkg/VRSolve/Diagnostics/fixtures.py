'''
Test objectives that only the diagnostics need.
'''

import numpy as np
from scipy.special import expit

from ..Oracle import Oracle, ProblemConstants


def sigmoid_squared_curvature(u):
    # Second derivative of sigmoid(u)^2.
    sigma = expit(u)
    return (4 * sigma - 6 * sigma ** 2) * sigma * (1 - sigma)


class SigmoidSquared(Oracle):
    '''
    Description:
    Non-convex 1-D finite sum f_i(w) = sigmoid(w - s_i)^2, bounded below by F^* = 0.
    L is certified numerically as the largest |f_i''| on a dense grid, with a small safety factor.

    Parent Class:
    Oracle
    '''
    def __init__(self, shifts=(-1.0, 0.0, 1.0)):
        Oracle.__init__(self)
        self.problem_type = 'SigmoidSquared'
        self.shifts = np.asarray(shifts, dtype=np.float64)
        self.dim, self.n_components = 1, len(self.shifts)
        grid = np.linspace(-40.0, 40.0, 400001)
        L = float(np.abs(sigmoid_squared_curvature(grid)).max()) * 1.001
        self.constants = ProblemConstants(L=L, n_components=self.n_components, f_star=0.0)

    def grad_batch(self, w, ids):
        sigma = expit(w[0] - self.shifts[ids])
        return (2 * sigma ** 2 * (1 - sigma))[:, None]

    def value_batch(self, w, ids):
        return expit(w[0] - self.shifts[ids]) ** 2


class ConstantObjective(Oracle):
    # f(w; i) = value for every component; a zero-gradient edge case for the finite-difference check.
    def __init__(self, dim=2, value=3.0, n_components=2):
        Oracle.__init__(self)
        self.problem_type = 'ConstantObjective'
        self.dim, self.n_components, self.value = dim, n_components, float(value)
        self.constants = ProblemConstants(L=1.0, n_components=n_components, f_star=self.value)

    def grad_batch(self, w, ids):
        return np.zeros((len(ids), self.dim))

    def value_batch(self, w, ids):
        return np.full(len(ids), self.value)

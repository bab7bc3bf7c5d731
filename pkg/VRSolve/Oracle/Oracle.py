'''
This module contains the stochastic objective abstraction consumed by every solver.
The Oracle class is the generic object; concrete problems (see VRSolve.Problems) are child classes
which only need to provide batched per-sample gradients and values.
'''
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import numpy as np

from ..errors import (
    ContractViolationError, InvalidArgumentError, MissingConstantError, UnsupportedOperationError,
)

# Number of held-out samples used when an expectation has to be estimated by Monte-Carlo.
HELD_OUT_SAMPLES = 10**4
STREAM_ROLES = ('zeta', 'xi', 'select')


@dataclass
class ProblemConstants:
    '''
    Description:
    The constants the analysis is stated in terms of. Every field but L is optional because most
    problems only know some of them.
    '''
    L: float
    mu: float | None = None
    sigma_star_sq: float | None = None
    M: float | None = None
    N: float | None = None
    n_components: int | None = None
    f_star: float | None = None
    w_star: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidArgumentError(f'L must be strictly positive, got {self.L}.')
        if self.mu is not None:
            if not self.mu > 0:
                raise InvalidArgumentError(f'mu must be strictly positive, got {self.mu}.')
            # A tiny relative slack absorbs rounding in derived constants (mu computed as a mean).
            if self.mu > self.L * (1 + 1e-12):
                raise InvalidArgumentError(f'mu={self.mu} exceeds L={self.L}; the condition number must be >= 1.')
        if self.sigma_star_sq is not None and self.sigma_star_sq < 0:
            raise InvalidArgumentError(f'sigma_star_sq must be non-negative, got {self.sigma_star_sq}.')
        for name in ('M', 'N'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidArgumentError(f'{name} must be non-negative, got {value}.')
        if self.w_star is not None: self.w_star = np.asarray(self.w_star, dtype=np.float64)

    @property
    def kappa(self):
        self.require('mu', purpose='the condition number')
        return self.L / self.mu

    def require(self, *names, purpose=''):
        # Raises MissingConstantError naming the first absent constant.
        for name in names:
            if getattr(self, name) is None: raise MissingConstantError(name, purpose)

    def replace(self, **changes):
        values = asdict(self)
        values['w_star'] = self.w_star
        values.update(changes)
        return ProblemConstants(**values)

    def to_dict(self):
        values = asdict(self)
        values['w_star'] = None if self.w_star is None else self.w_star.tolist()
        return values

    @classmethod
    def from_dict(cls, values):
        return cls(**{key: value for key, value in values.items() if key in cls.__dataclass_fields__})


class ScriptedStream:
    '''
    Description:
    A stand-in for a numpy Generator that returns preset draws. Used to pin a stream, for example
    the xi sequence of a hand-checked trajectory or the output selection t_tilde.
    Only `integers` is provided since that is all the solvers and oracles draw.
    '''
    def __init__(self, values, cycle=True):
        '''
        Arguments:
        - values: sequence of int
            The draws to return in order.
        - cycle: bool (optional)
            Start again from the first value once exhausted, otherwise raise.
        '''
        self.values = [int(value) for value in values]
        if not self.values: raise InvalidArgumentError('A ScriptedStream needs at least one value.')
        self.cycle = cycle
        self.position = 0

    def next_value(self, low, high):
        if self.position >= len(self.values):
            if not self.cycle: raise InvalidArgumentError('ScriptedStream exhausted.')
            self.position = 0
        value = self.values[self.position]
        self.position += 1
        # The sentinel -1 means "the largest admissible value", e.g. always pick t = m.
        if value == -1: value = high - 1
        if not low <= value < high:
            raise ContractViolationError(f'Scripted draw {value} is outside [{low}, {high}).')
        return value

    def integers(self, low, high=None, size=None):
        if high is None: low, high = 0, low
        if size is None: return self.next_value(low, high)
        return np.array([self.next_value(low, high) for _ in range(size)], dtype=np.int64)


class RandomStreams:
    '''
    Description:
    One independent random stream per role:
    - zeta: the outer mini-batch draws used for v_0,
    - xi: the inner-loop draws,
    - select: the output index t_tilde.
    Because the streams are spawned separately, changing m never perturbs the zeta draws and the
    output selection never perturbs the optimisation path.
    '''
    def __init__(self, seed, **overrides):
        '''
        Arguments:
        - seed: int
            Seed of the replication.
        - **overrides: numpy Generator or ScriptedStream
            Replace the named stream, e.g. RandomStreams(3, select=ScriptedStream([-1])).
        '''
        unknown = set(overrides) - set(STREAM_ROLES)
        if unknown: raise InvalidArgumentError(f'Unknown stream roles {sorted(unknown)}; expected {STREAM_ROLES}.')
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(len(STREAM_ROLES))
        for role, child in zip(STREAM_ROLES, children):
            setattr(self, role, overrides.get(role, np.random.default_rng(child)))

    def diagnostic(self):
        # A fourth stream for held-out Monte-Carlo measurements, it never touches the three roles.
        return np.random.default_rng(np.random.SeedSequence(self.seed).spawn(len(STREAM_ROLES) + 1)[-1])

    @staticmethod
    def stream(seed, role):
        # The stream `role` exactly as RandomStreams(seed) would create it.
        child = np.random.SeedSequence(seed).spawn(len(STREAM_ROLES))[STREAM_ROLES.index(role)]
        return np.random.default_rng(child)


class Oracle:
    def __init__(self):
        # This is the generic objective object, child classes set the attributes below.
        # n_components is None for expectation-form problems, which only support sampling.
        self.dim = 0
        self.n_components = None
        self.constants = None
        self.problem_type = 'Oracle'

    @property
    def is_finite_sum(self):
        return self.n_components is not None

    def check_point(self, w):
        # Every entry point converts w to float64 and checks the dimension.
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 0 and self.dim == 1: w = w.reshape(1)
        if w.shape != (self.dim,):
            raise ContractViolationError(
                f'Point has shape {w.shape} but the {self.problem_type} problem has dimension {self.dim}.'
            )
        return w

    def check_ids(self, ids):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if self.is_finite_sum and ids.size and (ids.min() < 0 or ids.max() >= self.n_components):
            raise ContractViolationError(
                f'SampleIds must lie in [0, {self.n_components}), got {ids.min()}..{ids.max()}.'
            )
        return ids

    def require_finite_sum(self, operation):
        if not self.is_finite_sum:
            raise UnsupportedOperationError(
                f'{operation} needs a finite-sum problem but {self.problem_type} is in expectation form.'
            )

    # Sampling.
    def sample_batch(self, rng, b):
        '''
        Arguments:
        - rng: numpy Generator or ScriptedStream
        - b: int
            Number of i.i.d. draws (with replacement).

        Returns:
        - numpy array of int
            Component indices for finite sums, realisation seeds otherwise.
        '''
        if self.is_finite_sum: return np.asarray(rng.integers(0, self.n_components, size=b), dtype=np.int64)
        return np.asarray(rng.integers(0, np.iinfo(np.int64).max, size=b), dtype=np.int64)

    def sample(self, rng):
        # SampleIds of a finite sum are 0-based component indices in [0, n).
        return int(self.sample_batch(rng, 1)[0])

    # Child classes implement these two on a batch of SampleIds.
    def grad_batch(self, w, ids):
        raise NotImplementedError(f'{type(self).__name__} does not implement grad_batch.')

    def value_batch(self, w, ids):
        raise NotImplementedError(f'{type(self).__name__} does not implement value_batch.')

    def grad_sample(self, w, xi):
        w = self.check_point(w)
        return self.grad_batch(w, self.check_ids([xi]))[0]

    def value_sample(self, w, xi):
        w = self.check_point(w)
        return float(self.value_batch(w, self.check_ids([xi]))[0])

    def grad_minibatch(self, w, b, rng):
        '''
        Arguments:
        - w: array
        - b: int
            Batch size, at least 1.
        - rng: numpy Generator or ScriptedStream

        Returns:
        - numpy array
            (1/b) sum_i grad f(w; zeta_i) with zeta_i drawn i.i.d. with replacement.

        Methodology:
        - The gradients are stacked and reduced with ndarray.mean over axis 0, a sequential sum over
          rows in draw order, so the result is bit-stable for a given draw.
        '''
        if int(b) != b or b < 1: raise InvalidArgumentError(f'Mini-batch size must be a positive integer, got {b}.')
        w = self.check_point(w)
        ids = self.sample_batch(rng, int(b))
        return self.grad_batch(w, ids).mean(axis=0)

    def grad_full(self, w):
        self.require_finite_sum('grad_full')
        w = self.check_point(w)
        return self.grad_batch(w, np.arange(self.n_components)).mean(axis=0)

    def value_full(self, w):
        self.require_finite_sum('value_full')
        w = self.check_point(w)
        return float(self.value_batch(w, np.arange(self.n_components)).mean())

    def grad_norm_sq(self, w, rng=None, samples=HELD_OUT_SAMPLES):
        '''
        Returns:
        - float
            ||grad F(w)||^2, exact on finite sums. Otherwise the squared norm of a held-out mini-batch
            gradient of `samples` draws (which overestimates by the variance over `samples`).
        '''
        if self.is_finite_sum: return float(np.sum(self.grad_full(w) ** 2))
        if rng is None: raise UnsupportedOperationError('A random stream is needed to estimate grad F on an expectation-form problem.')
        return float(np.sum(self.grad_minibatch(w, samples, rng) ** 2))

    def grad_second_moment(self, w, rng=None, samples=HELD_OUT_SAMPLES):
        # E||grad f(w; xi)||^2, exact on finite sums and a Monte-Carlo mean otherwise.
        w = self.check_point(w)
        if self.is_finite_sum: ids = np.arange(self.n_components)
        elif rng is None: raise UnsupportedOperationError('A random stream is needed to estimate E||grad f||^2 on an expectation-form problem.')
        else: ids = self.sample_batch(rng, samples)
        return float(np.mean(np.sum(self.grad_batch(w, ids) ** 2, axis=1)))

    def optimality_gap(self, w, f_star=None):
        '''
        Arguments:
        - w: array
        - f_star: float (optional)
            A lower bound F^* to measure against. Defaults to constants.f_star, or F(constants.w_star).

        Returns:
        - float
            F(w) - F^*.
        '''
        if f_star is None: f_star = self.constants.f_star
        if f_star is None and self.constants.w_star is not None: f_star = self.value_full(self.constants.w_star)
        if f_star is None: raise MissingConstantError('f_star', 'the optimality gap')
        return self.value_full(w) - f_star

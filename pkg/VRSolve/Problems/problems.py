'''
This module contains child classes of the Oracle class, one per built-in objective.
Each of them stores the constants it can derive (L, mu, sigma_*^2, w_*, F_*, M, N) in a
ProblemConstants object at construction and is immutable afterwards.
'''

import hashlib
import json
import logging
import os

import numpy as np
import scipy.optimize
import scipy.sparse
from scipy.special import expit

from ..Oracle import Oracle, ProblemConstants
from ..File_Types import LIBSVM_File
from ..errors import DataError, InvalidArgumentError

logger = logging.getLogger(__name__)


def as_generator(rng):
    # Accept a Generator or anything np.random.default_rng accepts (an int seed, None).
    if isinstance(rng, np.random.Generator): return rng
    return np.random.default_rng(rng)


class QuadraticFiniteSum(Oracle):
    '''
    Description:
    F(w) = (1/n) sum_i f_i(w) with f_i(w) = 1/2 (w - c_i)^T A_i (w - c_i) and diagonal PSD A_i.
    Every constant is available in closed form:
    L = max_i lambda_max(A_i), mu = lambda_min(mean A_i), w_* solves (mean A_i) w = mean(A_i c_i),
    sigma_*^2 = (1/n) sum_i ||A_i (w_* - c_i)||^2.

    Parent Class:
    Oracle
    '''
    def __init__(self, diagonals, shifts):
        '''
        Arguments:
        - diagonals: array of shape (n, d), or (n,) for a 1-D problem
            Row i is the diagonal of A_i. Entries must be non-negative.
        - shifts: array of the same shape
            Row i is c_i.
        '''
        Oracle.__init__(self)
        self.problem_type = 'QuadraticFiniteSum'
        A = np.asarray(diagonals, dtype=np.float64)
        C = np.asarray(shifts, dtype=np.float64)
        if A.ndim == 1: A = A[:, None]
        if C.ndim == 1: C = C[:, None]
        if A.shape != C.shape or A.ndim != 2 or A.size == 0:
            raise InvalidArgumentError(f'Diagonals {A.shape} and shifts {C.shape} must share a non-empty (n, d) shape.')
        if np.any(A < 0):
            raise InvalidArgumentError('Diagonal Hessians must be non-negative for every component to be convex.')
        if not np.isfinite(A).all() or not np.isfinite(C).all():
            raise InvalidArgumentError('Diagonals and shifts must be finite.')
        self.A, self.C = A, C
        self.n_components, self.dim = A.shape
        self.constants = self.derive_constants()

    def derive_constants(self):
        L = float(self.A.max())
        if L <= 0: raise InvalidArgumentError('At least one Hessian entry must be positive.')
        mean_hessian = self.A.mean(axis=0)
        mu = float(mean_hessian.min()) if mean_hessian.min() > 0 else None

        # Coordinates with zero mean curvature have zero curvature in every component, they are free.
        weighted_shift = (self.A * self.C).mean(axis=0)
        safe_hessian = np.where(mean_hessian > 0, mean_hessian, 1.0)
        w_star = np.where(mean_hessian > 0, weighted_shift / safe_hessian, 0.0)

        grads_at_optimum = self.grad_batch(w_star, np.arange(self.n_components))
        sigma_star_sq = float(np.mean(np.sum(grads_at_optimum ** 2, axis=1)))
        f_star = float(self.value_batch(w_star, np.arange(self.n_components)).mean())
        return ProblemConstants(
            L=L, mu=mu, sigma_star_sq=sigma_star_sq, n_components=self.n_components,
            f_star=f_star, w_star=w_star,
        )

    def grad_batch(self, w, ids):
        return self.A[ids] * (w - self.C[ids])

    def value_batch(self, w, ids):
        return 0.5 * np.sum(self.A[ids] * (w - self.C[ids]) ** 2, axis=1)


def make_quadratic(n, d, kappa_target, rng=None, heterogeneity=0.5, noise=1.0):
    '''
    Arguments:
    - n: int
        Number of components.
    - d: int
        Dimension.
    - kappa_target: float
        Wanted condition number L / mu, at least 1.
    - rng: numpy Generator or int (optional)
    - heterogeneity: float in [0, 1) (optional)
        How far the component Hessians spread around their mean (relative, per coordinate).
    - noise: float (optional)
        Standard deviation of the shifts c_i, which sets sigma_*^2.

    Returns:
    - QuadraticFiniteSum

    Methodology:
    - Component diagonals are A_ij = s_j u_ij with u_ij = 1 + h z_ij, where z has zero mean over the
      components and |z| <= 1, so the mean Hessian is exactly diag(s) and mu = s_0 = 1.
    - L = max_ij s_j u_ij. For d >= 2 the spectrum s_j = S^(j/(d-1)) is stretched with brentq until
      L / mu equals kappa_target. For d = 1 the curvatures are a_i = exp(c z_i) / mean(exp(c z)),
      positive with mean 1, and brentq picks the tilt c so that max a_i = kappa_target (< n).
    - If the spread alone would exceed kappa_target it is reduced.
    '''
    if n < 1 or d < 1: raise InvalidArgumentError(f'n and d must be at least 1, got n={n}, d={d}.')
    if kappa_target < 1: raise InvalidArgumentError(f'kappa_target must be >= 1, got {kappa_target}.')
    if not 0 <= heterogeneity < 1: raise InvalidArgumentError(f'heterogeneity must lie in [0, 1), got {heterogeneity}.')
    rng = as_generator(rng)

    z = rng.uniform(-1, 1, size=(n, d))
    z -= z.mean(axis=0)
    largest = np.abs(z).max()
    z = z / largest if n > 1 and largest > 0 else np.zeros((n, d))
    z_max = z.max()

    if d == 1:
        u, s = np.ones((n, 1)), np.ones(1)
        if kappa_target > 1:
            # Positive curvatures with mean 1 keep their maximum below n.
            if kappa_target >= n:
                raise InvalidArgumentError(f'kappa_target={kappa_target} is not reachable in one dimension with n={n}: it must be below n.')
            gaps = z[:, 0] - z_max
            realised = lambda tilt: 1 / np.mean(np.exp(tilt * gaps)) - kappa_target
            upper = 1.0
            while realised(upper) < 0:
                upper *= 2
                if upper > 1e12: raise InvalidArgumentError(f'kappa_target={kappa_target} is not reachable with this draw (tied curvatures).')
            tilt = scipy.optimize.brentq(realised, 0.0, upper, xtol=1e-14, rtol=1e-14)
            weights = np.exp(tilt * gaps)
            u = (weights / weights.mean())[:, None]
    else:
        h = heterogeneity
        if 1 + h * z_max > kappa_target: h = (kappa_target - 1) / z_max
        u = 1 + h * z
        column_max = u.max(axis=0)
        exponents = np.arange(d) / (d - 1)
        realised = lambda stretch: np.max(stretch ** exponents * column_max) - kappa_target
        stretch = 1.0 if realised(1.0) >= 0 else scipy.optimize.brentq(realised, 1.0, kappa_target, xtol=1e-14, rtol=1e-14)
        s = stretch ** exponents

    C = rng.normal(0.0, noise, size=(n, d))
    return QuadraticFiniteSum(u * s, C)


class GaussianQuadratic(Oracle):
    '''
    Description:
    Expectation-form problem f(w; xi) = 1/2 (w - c - xi)^T A (w - c - xi) with xi ~ N(0, noise^2 I)
    and diagonal A. A SampleId is a seed from which xi is regenerated, so equal ids give equal
    gradients. The constants are analytic: w_* = c, sigma_*^2 = noise^2 sum_j A_jj^2,
    F_* = 1/2 noise^2 tr(A).

    Parent Class:
    Oracle
    '''
    def __init__(self, diagonal, center, noise):
        Oracle.__init__(self)
        self.problem_type = 'GaussianQuadratic'
        self.a = np.atleast_1d(np.asarray(diagonal, dtype=np.float64))
        self.c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if self.a.shape != self.c.shape or self.a.ndim != 1:
            raise InvalidArgumentError('diagonal and center must be vectors of the same length.')
        if np.any(self.a <= 0): raise InvalidArgumentError('GaussianQuadratic needs a positive definite diagonal.')
        if noise < 0: raise InvalidArgumentError(f'noise must be non-negative, got {noise}.')
        self.noise = float(noise)
        self.dim = len(self.a)
        self.constants = ProblemConstants(
            L=float(self.a.max()), mu=float(self.a.min()),
            sigma_star_sq=self.noise ** 2 * float(np.sum(self.a ** 2)),
            f_star=0.5 * self.noise ** 2 * float(np.sum(self.a)), w_star=self.c.copy(),
        )

    def realisations(self, ids):
        return np.stack([np.random.default_rng(seed).standard_normal(self.dim) for seed in ids]) * self.noise

    def grad_batch(self, w, ids):
        return self.a * (w - self.c - self.realisations(ids))

    def value_batch(self, w, ids):
        return 0.5 * np.sum(self.a * (w - self.c - self.realisations(ids)) ** 2, axis=1)

    def mean_gradient(self, w):
        # Analytic grad F, used by tests to validate the Monte-Carlo estimates.
        return self.a * (self.check_point(w) - self.c)

    def optimality_gap(self, w, f_star=None):
        # F(w) - F_* = 1/2 (w - c)^T A (w - c) in closed form; F itself is never evaluated exactly.
        w = self.check_point(w)
        gap = 0.5 * float(np.sum(self.a * (w - self.c) ** 2))
        if f_star is None: return gap
        return gap + self.constants.f_star - f_star


def make_gaussian_quadratic(d, kappa_target, noise=1.0, rng=None):
    if d < 1: raise InvalidArgumentError(f'd must be at least 1, got {d}.')
    if kappa_target < 1: raise InvalidArgumentError(f'kappa_target must be >= 1, got {kappa_target}.')
    if d == 1 and kappa_target != 1: raise InvalidArgumentError('A one-dimensional GaussianQuadratic has kappa = 1.')
    rng = as_generator(rng)
    return GaussianQuadratic(np.geomspace(1.0, kappa_target, d), rng.normal(size=d), noise)


class LogisticProblem(Oracle):
    '''
    Description:
    l2-regularised logistic regression, f_i(w) = log(1 + exp(-y_i x_i^T w)) + lambda/2 ||w||^2.
    L = max_i ||x_i||^2 / 4 + lambda and mu = lambda when lambda > 0.
    Features are kept as a CSR matrix; gradients are dense.

    Parent Class:
    Oracle
    '''
    def __init__(self, X, y, lam=0.0):
        '''
        Arguments:
        - X: scipy sparse matrix or array of shape (n, d)
        - y: array of shape (n,)
            Labels in {-1, +1}.
        - lam: float (optional)
            The l2 penalty, at least 0.
        '''
        Oracle.__init__(self)
        self.problem_type = 'LogisticProblem'
        self.X = scipy.sparse.csr_matrix(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if lam < 0: raise InvalidArgumentError(f'lambda must be non-negative, got {lam}.')
        if self.X.shape[0] == 0: raise DataError('A logistic problem needs at least one sample.')
        if self.X.shape[0] != len(self.y): raise DataError(f'{self.X.shape[0]} feature rows but {len(self.y)} labels.')
        if not set(np.unique(self.y)) <= {-1.0, 1.0}: raise DataError('Logistic labels must be -1 or +1.')
        self.lam = float(lam)
        self.n_components, self.dim = self.X.shape
        self.row_norm_sq = np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()

        L = float(self.row_norm_sq.max()) / 4 + self.lam
        if L <= 0: raise DataError('All feature rows are zero and lambda = 0, the problem has no curvature.')
        self.constants = ProblemConstants(L=L, mu=self.lam if self.lam > 0 else None, n_components=self.n_components)

    def grad_batch(self, w, ids):
        rows = self.X[ids].toarray()
        labels = self.y[ids]
        coefficient = -labels * expit(-labels * (rows @ w))
        return rows * coefficient[:, None] + self.lam * w

    def value_batch(self, w, ids):
        margins = self.y[ids] * (self.X[ids] @ w)
        return np.logaddexp(0.0, -margins) + 0.5 * self.lam * float(w @ w)

    def solve_optimum(self, w0=None, gtol=1e-10, max_iter=10**4):
        '''
        Arguments:
        - w0: array (optional)
            Starting point, zeros by default.
        - gtol: float (optional)
            Accept the solution when ||grad F|| <= gtol.
        - max_iter: int (optional)

        Returns:
        - bool
            Whether w_* was found. On success constants gains w_star, f_star and sigma_star_sq.

        Methodology:
        - scipy's L-BFGS-B on the exact full objective and gradient.
        - Without regularisation separable data has no minimiser; then nothing is stored.
        '''
        w0 = np.zeros(self.dim) if w0 is None else self.check_point(w0)
        result = scipy.optimize.minimize(
            self.value_full, w0, jac=self.grad_full, method='L-BFGS-B',
            options={'gtol': gtol * 1e-2, 'ftol': 0.0, 'maxiter': max_iter},
        )
        grad_norm = float(np.linalg.norm(self.grad_full(result.x)))
        if grad_norm > gtol:
            logger.warning('Logistic optimum not found: ||grad F|| = %.3e after %d iterations (%s).', grad_norm, result.nit, result.message)
            return False
        self.attach_optimum(result.x)
        logger.info('Logistic optimum found: F* = %.12g, ||grad F|| = %.3e.', self.constants.f_star, grad_norm)
        return True

    def attach_optimum(self, w_star):
        w_star = self.check_point(w_star)
        self.constants = self.constants.replace(
            w_star=w_star, f_star=self.value_full(w_star),
            sigma_star_sq=self.grad_second_moment(w_star),
        )

    def data_hash(self):
        digest = hashlib.sha256()
        for array in (self.X.data, self.X.indices, self.X.indptr, self.y):
            digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(repr(self.X.shape).encode())
        return digest.hexdigest()


def constants_sidecar_path(path):
    return f'{path}.constants.json'


def load_libsvm(path, lam=0.0, solve_optimum=False, use_cache=True):
    '''
    Arguments:
    - path: str
        LIBSVM text file.
    - lam: float (optional)
        The l2 penalty.
    - solve_optimum: bool (optional)
        Solve for (w_*, F_*, sigma_*^2) when no matching cache exists, and write the cache.
    - use_cache: bool (optional)
        Read and write the JSON sidecar `<path>.constants.json`.

    Returns:
    - LogisticProblem

    Methodology:
    - The sidecar is only trusted when its data hash and lambda match the loaded file.
    '''
    data_file = LIBSVM_File(path)
    problem = LogisticProblem(data_file.X, data_file.y, lam)
    sidecar = constants_sidecar_path(path)

    if use_cache and os.path.exists(sidecar):
        with open(sidecar) as file:
            cached = json.load(file)
        if cached.get('data_sha256') == problem.data_hash() and cached.get('lambda') == problem.lam:
            problem.constants = problem.constants.replace(
                w_star=np.array(cached['w_star']), f_star=cached['f_star'], sigma_star_sq=cached['sigma_star_sq'],
            )
            return problem
        logger.info('Ignoring stale constants sidecar %s.', sidecar)

    if solve_optimum and problem.solve_optimum() and use_cache:
        with open(sidecar, 'w') as file:
            json.dump({
                'data_sha256': problem.data_hash(), 'lambda': problem.lam,
                'w_star': problem.constants.w_star.tolist(), 'f_star': problem.constants.f_star,
                'sigma_star_sq': problem.constants.sigma_star_sq,
            }, file, indent=2)
    return problem


class ModifiedLogistic1D(Oracle):
    '''
    Description:
    F(w) = log(1 + e^-w) for w >= -2 and log(1 + e^-w) + lambda/2 (w + 2)^2 for w < -2.
    Continuously differentiable, not strongly convex, and F_* = 0 is an infimum that is not attained
    (so no w_* is stored). A single deterministic component.
    It satisfies the (M, N) growth bound with M = 1/(2 lambda) and N = log(1 + e^2).

    Parent Class:
    Oracle
    '''
    def __init__(self, lam):
        Oracle.__init__(self)
        if not lam > 0: raise InvalidArgumentError(f'lambda must be strictly positive, got {lam}.')
        self.problem_type = 'ModifiedLogistic1D'
        self.lam = float(lam)
        self.dim, self.n_components = 1, 1
        self.constants = ProblemConstants(
            L=0.25 + self.lam, sigma_star_sq=0.0, M=1 / (2 * self.lam), N=float(np.log1p(np.e ** 2)),
            n_components=1, f_star=0.0,
        )

    def penalty_gap(self, w):
        # (w + 2) on the penalised branch, 0 elsewhere.
        return np.minimum(w[0] + 2.0, 0.0)

    def grad_batch(self, w, ids):
        gradient = -expit(-w[0]) + self.lam * self.penalty_gap(w)
        return np.full((len(ids), 1), gradient)

    def value_batch(self, w, ids):
        value = np.logaddexp(0.0, -w[0]) + 0.5 * self.lam * self.penalty_gap(w) ** 2
        return np.full(len(ids), value)


def modified_logistic(lam):
    return ModifiedLogistic1D(lam)

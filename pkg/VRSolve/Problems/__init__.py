# Imports the built-in objectives from the problems module.
from .problems import (
    QuadraticFiniteSum, make_quadratic, GaussianQuadratic, make_gaussian_quadratic,
    LogisticProblem, load_libsvm, ModifiedLogistic1D, modified_logistic,
)

# Imports the diagnostic checks from the diagnostics module and the test objectives from fixtures.
from .diagnostics import (
    MonteCarloEstimate, BoundCheck, replicate, minibatch_variance_identity, variance_profile,
    variance_decay_check, theorem1_bound_check, theorem2_bound_check, contraction_check,
    complexity_work, complexity_slope, grad_fd_check, MARGIN_SIGMAS,
)
from .fixtures import SigmoidSquared, ConstantObjective

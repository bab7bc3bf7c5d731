# Imports the schedule derivations from the schedules module.
from .schedules import (
    Regime, Schedule, Contraction, MULTI_LOOP_REGIMES,
    one_loop_convex, one_loop_convex_for_epsilon, one_loop_nonconvex, one_loop_nonconvex_for_epsilon,
    multi_loop_strongly_convex, multi_loop_convex_mn, theorem3_alpha, theorem4_alpha_c,
    contraction_for, estimate_sigma_star_sq, schedule_for, halving_stages,
)

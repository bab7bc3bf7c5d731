# Imports the solvers from the solvers module.
from .solvers import (
    InnerLoopState, run_inner_loop, isarah_inner, isarah_outer, sarah_exact_inner, sarah_outer,
    svrg_inner, svrg_outer, sgd, run_solver, SOLVERS,
)

"""Nesterov acceleration with operator decomposition (NOD) and its certificates."""

__version__ = "0.1.0"

from nodkit.core import (  # noqa: E402
    Constants,
    StepPlan,
    compute_B,
    default_eta,
    joint_smoothness,
    solve_C,
    split_bilinear_oracle,
    step_plan,
)
from nodkit.problems import (  # noqa: E402
    BilinearInstance,
    DecomposedProblem,
    make_bilinear,
    make_pure_convex,
    make_quadratic_skew,
    make_sin_coupling,
)
from nodkit.solvers import (  # noqa: E402
    StoppingRule,
    extragradient_run,
    forward_run,
    nag_run,
    nod_bc_run,
    nod_run,
)

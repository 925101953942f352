"""Noisy zeroth-order convex minimization by approximate center-of-gravity cuts."""
from .cut import CutParams, OptState, RunReport, derive_params, run_cut_iteration, run_driver
from .errors import (
    BudgetExhausted, BudgetTooSmall, DegenerateBody, EmptyCut, GravicutError, NotInterior,
)
from .fcp import FcpParams, FcpResult, run_fcp
from .geometry import (
    ConvexBody, Halfspace, IsotropicFrame, apply_cut, chord, estimate_frame,
    estimate_volume_fraction, sample_interior,
)
from .oracle import (
    INFEASIBLE, NoiseModel, ProblemSpec, QueryLedger, evaluate, make_problem, query,
    query_many,
)
from .smoothing import (
    SmoothedQuery, estimate_gradient, estimate_value, eta_conc, sample_ball, sample_sphere,
)

__version__ = "0.1.0"

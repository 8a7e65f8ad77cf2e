"""Quality functionals for control laws with exponential activation U = -C^f2(|S|) sign(S)."""

__version__ = "0.1.0"

from .activation import (
    Additive,
    ControlParams,
    ExponentSpec,
    Identity,
    Power,
    PowerLawParams,
    Reciprocal,
    Scheduled,
    Sqrt,
    conjugate_g,
    control_u,
    f2_derivative,
    f2_eval,
    power_control,
    validate,
)
from .functional import (
    FunctionalForm,
    JBreakdown,
    build_form,
    f_state,
    f_state_closed,
    f_state_numeric,
    g_cost,
    integrand,
    j_along_trajectory,
)
from .simulate import (
    DoubleIntegrator,
    ScalarIntegrator,
    SimConfig,
    Trajectory,
    alpha_sweep,
    analytic_reach_time,
    simulate_closed_loop,
    variational_test,
)
from .specfun import AccuracyPolicy, en_general, ei_principal, erf, gamma_upper, quad_adaptive

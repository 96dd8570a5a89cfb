"""Pseudo-spectral simulator and verification harness for the regularized
ferrofluid magnetization-flow system on the periodic box."""

from .grid import Grid, GridMismatchError, SolvabilityError, hermitian_defect
from .spectral import (
    PropagatorSpec,
    WorkCounter,
    damping_multiplier_apply,
    duhamel_convolve,
    gradient_part,
    hs_norm,
    inv_laplacian_gradient,
    leray_project,
    lpt_hs_norm,
    lpt_norm,
    physical_product,
    phi1,
    phi2,
    propagator_apply,
)
from .state import (
    Envelope,
    ExternalField,
    Params,
    PhysicalState,
    State,
    compute_GF,
    compute_f,
    compute_g,
    magnetostatic_H,
    stationary_state,
    to_physical,
    to_reformulated,
)
from .nonlinear import (
    NonlinearBudget,
    decomposition_residual,
    eval_B_NS,
    eval_L1,
    eval_L2,
    eval_N1,
    eval_N2,
    eval_N3,
    eval_direct,
)

__version__ = "0.1.0"

"""Right-hand-side nonlinearities, evaluated two independent ways.

`eval_direct` forms the three tendencies exactly as they appear in the
evolution system, with the composite fields

    A = m + r + chi0/(1+chi0) * G_F    (the full magnetization)
    B = -r + 1/(1+chi0) * G_F          (the full demagnetizing field)

    N_u = P[-(u.grad)u + (A.grad)B + 1/2 curl(A x B)] - pure-G_F advection
    N_m = P[-(u.grad)A + 1/2 (curl u) x A - A x (A x B)]
    N_r = Q[  same bracket  ]

The pure-forcing pieces (the G_F-only advection in u and the r-equation
force f) are excluded here; they live with the outer force g.

The same tendencies decompose into six operator classes graded by their
homogeneity in U = (u, m, r): a bilinear transport block, two U-linear
blocks (one differentiating G_F, one differentiating U), and three
relaxation product classes of degree 1..3 in U. The class coefficients are
derived from the direct expansion (the composite products distributed over
the sum A = v + a*G_F, B = -r + b*G_F), so the sum of the six classes
reproduces `eval_direct` to rounding; `decomposition_residual` measures
exactly that and is the standing correctness oracle for every coefficient.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid
from .spectral import (
    WorkCounter,
    advect,
    cross_product,
    curl,
    divergence,
    gradient_part,
    leray_project,
    to_physical_counted,
    to_spectral_masked,
)
from .state import Params, State

NonlinearBudget = WorkCounter

# Transform/product plan for one eval_direct call (pinned by the budget
# regression test): 54 inverse transforms, 21 forward transforms, 54
# pointwise scalar-grid products.
EVAL_DIRECT_PLAN = NonlinearBudget(
    inverse_transforms=54, forward_transforms=21, pointwise_products=54
)


def _composite(s: State, gf: np.ndarray, p: Params):
    a = p.balance_m_coeff
    b = p.balance_h_coeff
    return s.m + s.r + a * gf, -s.r + b * gf


def eval_direct(grid: Grid, s: State, gf: np.ndarray, p: Params,
                work: NonlinearBudget | None = None):
    """Tendencies (N_u, N_m, N_r) straight from the composite fields."""
    grid.check_same(s.u, s.m, s.r, gf)
    a, b = p.balance_m_coeff, p.balance_h_coeff
    A, B = _composite(s, gf, p)

    u_p = to_physical_counted(grid, s.u, work)
    A_p = to_physical_counted(grid, A, work)
    B_p = to_physical_counted(grid, B, work)

    adv_uu = advect(grid, s.u, s.u, work, a_phys=u_p)
    adv_AB = advect(grid, A, B, work, a_phys=A_p)
    cr_AB = cross_product(grid, A, B, work, a_phys=A_p, b_phys=B_p)
    cr_curlu_A = cross_product(grid, curl(grid, s.u), A, work, b_phys=A_p)
    adv_uA = advect(grid, s.u, A, work, a_phys=u_p)
    triple = cross_product(grid, A, cr_AB, work, a_phys=A_p)
    adv_GG = advect(grid, gf, gf, work)

    n_u = leray_project(
        grid,
        -adv_uu + adv_AB + 0.5 * curl(grid, cr_AB) - a * b * adv_GG,
    )
    core = -adv_uA + 0.5 * cr_curlu_A - triple
    return n_u, leray_project(grid, core), gradient_part(grid, core)


def eval_B_NS(grid: Grid, s: State, work: NonlinearBudget | None = None):
    """Bilinear transport block: quadratic in U, independent of G_F."""
    v = s.m + s.r
    u_p = to_physical_counted(grid, s.u, work)
    v_p = to_physical_counted(grid, v, work)
    r_p = to_physical_counted(grid, s.r, work)

    adv_uu = advect(grid, s.u, s.u, work, a_phys=u_p)
    adv_vr = advect(grid, v, s.r, work, a_phys=v_p)
    cr_vr = cross_product(grid, v, s.r, work, a_phys=v_p, b_phys=r_p)
    adv_uv = advect(grid, s.u, v, work, a_phys=u_p)
    cr_curlu_v = cross_product(grid, curl(grid, s.u), v, work, b_phys=v_p)

    out_u = leray_project(grid, -adv_uu - adv_vr - 0.5 * curl(grid, cr_vr))
    core = -adv_uv + 0.5 * cr_curlu_v
    return out_u, leray_project(grid, core), gradient_part(grid, core)


def eval_L1(grid: Grid, s: State, gf: np.ndarray, p: Params,
            work: NonlinearBudget | None = None):
    """U-linear block whose derivatives fall on G_F."""
    chi0 = p.chi0
    half = 0.5 / (1.0 + chi0)

    w_grad = s.m + (1.0 - chi0) * s.r
    w_div = s.m + (1.0 + chi0) * s.r
    adv_wG = advect(grid, w_grad, gf, work)
    divG_p = to_physical_counted(grid, divergence(grid, gf), work)
    w_div_p = to_physical_counted(grid, w_div, work)
    scal = to_spectral_masked(grid, divG_p[np.newaxis] * w_div_p, work)
    if work is not None:
        work.add(prod=3)
    out_u = half * leray_project(grid, adv_wG + scal)

    adv_uG = advect(grid, s.u, gf, work)
    coeff = -p.balance_m_coeff
    return out_u, coeff * leray_project(grid, adv_uG), coeff * gradient_part(grid, adv_uG)


def eval_L2(grid: Grid, s: State, gf: np.ndarray, p: Params,
            work: NonlinearBudget | None = None):
    """U-linear block whose derivatives fall on U."""
    chi0 = p.chi0
    half = 0.5 / (1.0 + chi0)

    gf_p = to_physical_counted(grid, gf, work)
    w_grad = s.m + (1.0 - chi0) * s.r
    adv_Gw = advect(grid, gf, w_grad, work, a_phys=gf_p)
    w_div = s.m + (1.0 + chi0) * s.r
    divw_p = to_physical_counted(grid, divergence(grid, w_div), work)
    scal = to_spectral_masked(grid, divw_p[np.newaxis] * gf_p, work)
    if work is not None:
        work.add(prod=3)
    out_u = half * leray_project(grid, adv_Gw - scal)

    cr = cross_product(grid, curl(grid, s.u), gf, work, b_phys=gf_p)
    coeff = 0.5 * chi0 / (1.0 + chi0)
    return out_u, coeff * leray_project(grid, cr), coeff * gradient_part(grid, cr)


def eval_N1(grid: Grid, s: State, gf: np.ndarray, p: Params,
            work: NonlinearBudget | None = None):
    """Relaxation class linear in U, quadratic in G_F; u-component zero."""
    w = s.m + (1.0 + p.chi0) * s.r
    inner = cross_product(grid, w, gf, work)
    outer = cross_product(grid, gf, inner, work)
    coeff = -p.balance_m_coeff * p.balance_h_coeff
    zero = np.zeros_like(s.u)
    return zero, coeff * leray_project(grid, outer), coeff * gradient_part(grid, outer)


def eval_N2(grid: Grid, s: State, gf: np.ndarray, p: Params,
            work: NonlinearBudget | None = None):
    """Relaxation class quadratic in U, linear in G_F; u-component zero."""
    a, b = p.balance_m_coeff, p.balance_h_coeff
    v = s.m + s.r
    w = s.m + (1.0 + p.chi0) * s.r
    inner = cross_product(grid, w, gf, work)
    term1 = cross_product(grid, v, inner, work)
    rxm = cross_product(grid, s.r, s.m, work)
    term2 = cross_product(grid, gf, rxm, work)
    core = -(b * term1 + a * term2)
    zero = np.zeros_like(s.u)
    return zero, leray_project(grid, core), gradient_part(grid, core)


def eval_N3(grid: Grid, s: State, work: NonlinearBudget | None = None):
    """Relaxation class cubic in U, independent of G_F; u-component zero."""
    inner = cross_product(grid, s.r, s.m, work)
    outer = cross_product(grid, s.m + s.r, inner, work)
    zero = np.zeros_like(s.u)
    return zero, -leray_project(grid, outer), -gradient_part(grid, outer)


def eval_class_sum(grid: Grid, s: State, gf: np.ndarray, p: Params,
                   work: NonlinearBudget | None = None):
    """Sum of the six operator classes; must reproduce eval_direct."""
    parts = [
        eval_B_NS(grid, s, work),
        eval_L1(grid, s, gf, p, work),
        eval_L2(grid, s, gf, p, work),
        eval_N1(grid, s, gf, p, work),
        eval_N2(grid, s, gf, p, work),
        eval_N3(grid, s, work),
    ]
    return tuple(sum(piece[i] for piece in parts) for i in range(3))


def decomposition_residual(grid: Grid, s: State, gf: np.ndarray, p: Params) -> float:
    """Max coefficient distance between the two independently coded paths."""
    direct = eval_direct(grid, s, gf, p)
    summed = eval_class_sum(grid, s, gf, p)
    return max(float(np.max(np.abs(d - c))) for d, c in zip(direct, summed))


def discrepancy_force(grid: Grid, s: State, gf: np.ndarray, p: Params) -> np.ndarray:
    """Velocity-equation forcing gap against the relaxed limit (unprojected):

        (A.grad)B + 1/2 curl(A x B) - chi0/(1+chi0)^2 (G_F.grad)G_F

    Every term carries at least one factor of (m, r), so it vanishes with
    the relaxation residue.
    """
    a, b = p.balance_m_coeff, p.balance_h_coeff
    A, B = _composite(s, gf, p)
    adv_AB = advect(grid, A, B)
    cr_AB = cross_product(grid, A, B)
    adv_GG = advect(grid, gf, gf)
    return adv_AB + 0.5 * curl(grid, cr_AB) - a * b * adv_GG

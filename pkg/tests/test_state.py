import numpy as np
import pytest

from ferrospec import (
    Envelope,
    ExternalField,
    Params,
    PhysicalState,
    State,
    compute_GF,
    compute_f,
    compute_g,
    hs_norm,
    magnetostatic_H,
    stationary_state,
    to_physical,
    to_reformulated,
)
from ferrospec.fields import (
    cos_axis_scalar,
    random_band,
    random_gradient,
    random_solenoidal,
    single_mode_scalar,
    zero_scalar,
    zero_vector,
)
from ferrospec.nonlinear import eval_direct
from ferrospec.spectral import curl, divergence, gradient, laplacian, leray_project
from ferrospec.state import relaxation_defect


def test_params_validation_and_derived():
    p = Params(nu=2.0, sigma=0.5, tau=0.1, chi0=3.0)
    assert p.c == 0.5
    assert p.balance_m_coeff == pytest.approx(0.75)
    assert p.balance_h_coeff == pytest.approx(0.25)
    specs = p.propagators()
    assert specs[0].gamma == 0.0 and specs[0].mu == 2.0
    assert specs[1].gamma == pytest.approx(10.0)
    assert specs[2].gamma == pytest.approx(40.0)
    with pytest.raises(ValueError):
        Params(nu=0.0, sigma=1.0, tau=1.0, chi0=1.0)
    with pytest.raises(ValueError):
        Params(nu=1.0, sigma=1.0, tau=-0.1, chi0=1.0)


# ---------------------------------------------------------------------------
# G_F
# ---------------------------------------------------------------------------

def test_compute_gf_basics(grid16, rng):
    assert np.max(np.abs(compute_GF(grid16, zero_scalar(grid16)))) == 0.0
    F = cos_axis_scalar(grid16)
    gf = compute_GF(grid16, F)
    assert np.max(np.abs(divergence(grid16, gf) - F)) < 1e-15
    # Parseval: |G_F|_{H^1} = |F|_{L^2} shell by shell
    F = random_band(grid16, rng, components=1)
    gf = compute_GF(grid16, F)
    assert hs_norm(grid16, gf, 1.0) == pytest.approx(hs_norm(grid16, F, 0.0),
                                                     rel=1e-12)


# ---------------------------------------------------------------------------
# magnetostatic closure and the change of variables
# ---------------------------------------------------------------------------

def test_magnetostatic_h(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    assert np.max(np.abs(magnetostatic_H(grid16, zero_vector(grid16), F)
                         - compute_GF(grid16, F))) == 0.0
    # M itself a gradient with div M = F makes H vanish
    gf = compute_GF(grid16, F)
    H = magnetostatic_H(grid16, gf, F)
    assert np.max(np.abs(H)) < 1e-13
    M = random_band(grid16, rng)
    H = magnetostatic_H(grid16, M, F)
    assert np.max(np.abs(curl(grid16, H))) < 1e-13
    assert hs_norm(grid16, divergence(grid16, M + H) - F, 0.0) < 1e-12


def test_change_of_variables_round_trip(grid16, rng, params):
    F = random_band(grid16, rng, components=1, amplitude=0.5)
    M = random_band(grid16, rng, amplitude=0.8)
    H = magnetostatic_H(grid16, M, F)
    u = random_solenoidal(grid16, rng, amplitude=0.3)
    ps = PhysicalState(u, M, H)
    s = to_reformulated(grid16, ps, F, params)
    # sector invariants of the reformulated state
    assert np.max(np.abs(divergence(grid16, s.m))) < 1e-14
    assert np.max(np.abs(curl(grid16, s.r))) < 1e-13
    back = to_physical(grid16, s, F, params)
    for mine, orig in ((back.u, ps.u), (back.M, ps.M), (back.H, ps.H)):
        assert np.max(np.abs(mine - orig)) < 1e-13
    # partition identity: M - chi0 H = m + (1+chi0) r
    assert relaxation_defect(grid16, ps, s, params) < 1e-13


def test_reformulation_rejects_inconsistent_state(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    M = random_band(grid16, rng)
    H = random_band(grid16, rng)  # not the closure field
    with pytest.raises(ValueError):
        to_reformulated(grid16, PhysicalState(zero_vector(grid16), M, H),
                        F, params)


def test_balance_state_annihilates_reformulated_parts(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    ps = stationary_state(grid16, F, params)
    s = to_reformulated(grid16, ps, F, params)
    assert np.max(np.abs(s.m)) < 1e-15
    assert np.max(np.abs(s.r)) < 1e-15


def test_divergence_free_magnetization_splits_cleanly(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    M = random_solenoidal(grid16, rng)
    H = magnetostatic_H(grid16, M, F)
    s = to_reformulated(grid16, PhysicalState(zero_vector(grid16), M, H),
                        F, params)
    assert np.max(np.abs(s.m - M)) < 1e-13
    gf = compute_GF(grid16, F)
    assert np.max(np.abs(s.r + params.balance_m_coeff * gf)) < 1e-13


def test_to_physical_zero_state(grid16, params):
    s = State.zero(grid16)
    ps = to_physical(grid16, s, zero_scalar(grid16), params)
    assert np.max(np.abs(ps.M)) == 0.0 and np.max(np.abs(ps.H)) == 0.0


def test_to_physical_partition_of_unity(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    ps = to_physical(grid16, State.zero(grid16), F, params)
    gf = compute_GF(grid16, F)
    assert np.max(np.abs(ps.M - params.balance_m_coeff * gf)) < 1e-15
    assert np.max(np.abs(ps.H - params.balance_h_coeff * gf)) < 1e-15
    assert hs_norm(grid16, divergence(grid16, ps.M + ps.H) - F, 0.0) < 1e-12


def test_to_physical_random_state_closure(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    s = State(random_solenoidal(grid16, rng), random_solenoidal(grid16, rng),
              random_gradient(grid16, rng))
    ps = to_physical(grid16, s, F, params)
    assert hs_norm(grid16, divergence(grid16, ps.M + ps.H) - F, 0.0) < 1e-12
    assert np.max(np.abs(curl(grid16, ps.H))) < 1e-13


# ---------------------------------------------------------------------------
# external field and derived forcings
# ---------------------------------------------------------------------------

def test_envelope_values_and_derivatives():
    for env, val, der in (
        (Envelope("constant"), 1.0, 0.0),
        (Envelope("exp", 2.0), np.exp(-1.0), -2.0 * np.exp(-1.0)),
        (Envelope("sin", 3.0), np.sin(1.5), 3.0 * np.cos(1.5)),
        (Envelope("cos", 3.0), np.cos(1.5), -3.0 * np.sin(1.5)),
    ):
        assert env.value(0.5) == pytest.approx(val)
        assert env.derivative(0.5) == pytest.approx(der)
    with pytest.raises(ValueError):
        Envelope("ramp").value(0.0)


def test_external_field_validation(grid16):
    with pytest.raises(ValueError):
        ExternalField(grid16, [((0, 0, 0), 1.0, Envelope())])
    kbad = grid16.dealias_kmax + 1
    with pytest.raises(ValueError):
        ExternalField(grid16, [((kbad, 0, 0), 1.0, Envelope())])


def test_external_field_realness_and_sampling(grid16):
    ext = ExternalField(grid16, [((1, 2, 0), 0.3 + 0.1j, Envelope("exp", 1.0))])
    from ferrospec import hermitian_defect
    f1 = ext.scalar_hat(0.7)
    assert hermitian_defect(f1) < 1e-15
    assert np.max(np.abs(f1 - np.exp(-0.7) * ext.scalar_hat(0.0))) < 1e-15
    assert np.max(np.abs(ext.scalar_hat_dt(0.7) + f1)) < 1e-15  # d/dt e^-t = -e^-t

    t = np.linspace(0.0, 1.0, 5)
    samples = np.array([ext.scalar_hat(ti) for ti in t])
    dsamples = np.array([ext.scalar_hat_dt(ti) for ti in t])
    sampled = ExternalField.from_samples(grid16, t, samples, dsamples)
    assert np.max(np.abs(sampled.scalar_hat(t[2]) - samples[2])) == 0.0
    with pytest.raises(ValueError):
        sampled.scalar_hat(0.33)


def test_compute_f_time_constant(grid16, params):
    # constant F: f = chi0 sigma/(1+chi0) grad F
    F = cos_axis_scalar(grid16)
    f = compute_f(grid16, F, zero_scalar(grid16), params)
    expected = (params.chi0 * params.sigma / (1 + params.chi0)) * gradient(grid16, F)
    assert np.max(np.abs(f - expected)) < 1e-15
    assert np.max(np.abs(compute_f(grid16, zero_scalar(grid16),
                                   zero_scalar(grid16), params))) == 0.0


def test_compute_f_exponential_profile(grid16, params):
    # F(t) = e^{-t} F0: dG/dt - sigma Lap G = -e^{-t}(G0 + sigma Lap G0),
    # so f(t) = chi0/(1+chi0) e^{-t} (G0 + sigma Lap G0) per mode
    F0 = single_mode_scalar(grid16, (1, 2, 0), 0.4 - 0.2j)
    t = 0.6
    decay = np.exp(-t)
    f = compute_f(grid16, decay * F0, -decay * F0, params)
    g0 = compute_GF(grid16, F0)
    expected = params.balance_m_coeff * decay * (g0 + params.sigma * laplacian(grid16, g0))
    assert np.max(np.abs(f - expected)) < 1e-14 * np.max(np.abs(g0))


def test_compute_g_zero_field(grid16, params):
    ext = ExternalField.zero(grid16)
    t = np.linspace(0.0, 1.0, 9)
    g1, gm, g2 = compute_g(grid16, ext, params, t)
    assert np.max(np.abs(g1)) == 0.0
    assert np.max(np.abs(gm)) == 0.0
    assert np.max(np.abs(g2)) == 0.0


def test_compute_g_single_constant_mode(grid16, params):
    # G_F self-advection is a pure gradient, so g1 vanishes identically;
    # g2 follows the constant-forcing Duhamel closed form per mode.
    ext = ExternalField(grid16, [((1, 0, 0), 0.5, Envelope("constant"))])
    t = np.linspace(0.0, 1.0, 17)
    g1, _, g2 = compute_g(grid16, ext, params, t)
    assert np.max(np.abs(g1)) < 1e-14
    f = compute_f(grid16, ext.scalar_hat(0.0), zero_scalar(grid16), params)
    lam = (1 + params.chi0) / params.tau + params.sigma  # |k|^2 = 1
    expected = (1 - np.exp(-lam * t[-1])) / lam * f
    assert np.max(np.abs(g2[-1] - expected)) < 1e-12 * np.max(np.abs(expected))


# ---------------------------------------------------------------------------
# the balance state solves the physical system
# ---------------------------------------------------------------------------

def test_balance_state_satisfies_physical_system(grid16, rng, params):
    """The reformulated tendencies at the balance state, mapped back to
    (u, M) variables, must satisfy the laboratory equations: the velocity
    tendency vanishes modulo pressure, and the magnetization tendency
    matches diffusion + relaxation + spin torque exactly."""
    F = random_band(grid16, rng, components=1, kmax=4, amplitude=0.5)
    ps = stationary_state(grid16, F, params)
    s = to_reformulated(grid16, ps, F, params)
    gf = compute_GF(grid16, F)

    n_u, n_m, n_r = eval_direct(grid16, s, gf, params)
    f = compute_f(grid16, F, zero_scalar(grid16), params)
    # reformulated tendencies at the balance state (time-constant F)
    du_dt = n_u
    dm_dt = n_m  # -(1/tau) m = 0 here
    dr_dt = n_r + f  # -((1+chi0)/tau) r = 0 here
    dM_dt = dm_dt + dr_dt  # G_F constant in time

    # velocity equation: projected tendency must vanish (forcing is gradient)
    assert hs_norm(grid16, du_dt, 0.0) < 1e-10

    # magnetization equation residual:
    # dM/dt = sigma Lap M - (1/tau)(M - chi0 H) - M x (M x H), u = 0
    relax = (ps.M - params.chi0 * ps.H) / params.tau
    rhs = params.sigma * laplacian(grid16, ps.M) - relax
    # M x H = 0 pointwise (parallel fields), and u = 0 kills transport terms
    assert hs_norm(grid16, dM_dt - rhs, 0.0) < 1e-10
    assert np.max(np.abs(ps.M - params.chi0 * ps.H)) < 1e-15


def test_stationary_state_proportionality(grid16, rng, params):
    F = random_band(grid16, rng, components=1)
    ps = stationary_state(grid16, F, params)
    assert np.max(np.abs(ps.u)) == 0.0
    assert np.max(np.abs(ps.M - params.chi0 * ps.H)) < 1e-15
    zero = stationary_state(grid16, zero_scalar(grid16), params)
    assert np.max(np.abs(zero.M)) == 0.0

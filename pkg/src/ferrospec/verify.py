"""Measured, pass/fail numerical experiments for the estimates and limits the
solver is built around: parabolic smoothing scalings, damping-multiplier
decay, the large-damping estimate, the relaxation-time sweep, and the
convergence to the limit velocity system.

Ratio-style checks never assert a specific constant: they assert
finiteness, stability under grid refinement, and the scaling exponents via
log-log slope fits. Monotonicity checks are asserted over the discrete
sweep lists exactly as measured. Every experiment is deterministic under a
fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid
from .spectral import (
    PropagatorSpec,
    damping_multiplier_apply,
    hs_norm,
    hs_norm_series,
    linear_solve,
    lpt_norm,
)
from .state import ExternalField, Params, State, compute_GF
from .nonlinear import discrepancy_force
from .integrate import TimeGrid, limit_ns_solve, simulate
from . import fields as field_ops


@dataclass
class ExperimentResult:
    """One experiment: inputs digest, measured quantities, verdict."""

    name: str
    inputs_digest: str
    measured: dict
    passed: bool
    tolerance: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs_digest": self.inputs_digest,
            "measured": self.measured,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def _digest(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def _fit_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs)), np.log(np.asarray(ys)), 1)[0])


def _non_increasing(values, rel_slack: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1.0 + rel_slack)))


# ---------------------------------------------------------------------------
# parabolic smoothing scalings
# ---------------------------------------------------------------------------

def _l4_h_ratio_data(grid, gamma, mu, t_nodes, w0, s):
    spec = PropagatorSpec(gamma, mu)
    w = linear_solve(grid, spec, t_nodes, w0)
    return lpt_norm(t_nodes, hs_norm_series(grid, w, s + 0.5), 4.0)


def verify_parabolic_smoothing(grid: Grid, gamma: float = 4.0, mu: float = 2.0,
                               trials: int = 24, seed: int = 0,
                               s: float = 0.5, t_end: float = 1.0,
                               slope_tol: float = 0.02) -> ExperimentResult:
    """Scaling fits for the damped-heat smoothing estimates.

    Three single-mode slope fits over 16x parameter spans: the data term
    decays like mu^(-1/4) (heat dominated) and gamma^(-1/4) (damping
    dominated); the forcing term like mu^(-3/4) when the forcing mode is
    co-scaled so the per-mode decay rate stays fixed. Random band-limited
    trials then measure the estimate ratios with C = 1 and check finiteness
    and refinement stability.
    """
    if trials < 20:
        raise ValueError("trials must be >= 20")
    rng = np.random.default_rng(seed)
    # fine enough that trapezoid error distorts the fitted slopes by < 1e-3
    t_nodes = np.linspace(0.0, t_end, 1025)
    measured: dict = {}

    # single-mode fits only involve |k| <= 4; a small grid keeps them cheap
    fit_grid = Grid(12, grid.box_length, grid.dealias)

    # data term, slope -1/4 in mu (gamma = 0, single |k| = 1 mode)
    w0 = field_ops.single_mode_vector(fit_grid, (1, 0, 0), (0.0, 0.7, 0.0))
    mu_list = [mu * 2.0**j for j in range(5)]
    norm_s = hs_norm(fit_grid, w0, s)
    ratios = [_l4_h_ratio_data(fit_grid, 0.0, m_, t_nodes, w0, s) / norm_s
              for m_ in mu_list]
    measured["mu_data"] = {"mu": mu_list, "ratio": ratios,
                           "slope": _fit_slope(mu_list, ratios)}

    # data term, slope -1/4 in gamma (mu |k|^2 negligible)
    gamma_list = [gamma * 2.0**j for j in range(5)]
    norm_shalf = hs_norm(fit_grid, w0, s + 0.5)
    ratios_g = [_l4_h_ratio_data(fit_grid, g_, 1e-3, t_nodes, w0, s) / norm_shalf
                for g_ in gamma_list]
    measured["gamma_data"] = {"gamma": gamma_list, "ratio": ratios_g,
                              "slope": _fit_slope(gamma_list, ratios_g)}

    # forcing term, slope -3/4 in mu at fixed per-mode rate lambda = mu |k|^2
    lam = 2.0 / t_end
    rows = []
    for kmag in (1, 2, 4):
        mu_k = lam / kmag**2
        f0 = field_ops.single_mode_vector(fit_grid, (kmag, 0, 0), (0.0, 0.5, 0.0))
        forcing = np.broadcast_to(f0, (len(t_nodes),) + f0.shape)
        spec = PropagatorSpec(0.0, mu_k)
        w = linear_solve(fit_grid, spec, t_nodes, np.zeros_like(f0), forcing)
        num = lpt_norm(t_nodes, hs_norm_series(fit_grid, w, s + 0.5), 4.0)
        den = lpt_norm(t_nodes,
                       np.full(len(t_nodes), hs_norm(fit_grid, f0, s - 1.0)), 2.0)
        rows.append((mu_k, num / den))
    measured["mu_forcing"] = {
        "mu": [r[0] for r in rows],
        "ratio": [r[1] for r in rows],
        "slope": _fit_slope([r[0] for r in rows], [r[1] for r in rows]),
    }

    # random-trial estimate ratios with C = 1, on the base and a finer grid
    t_coarse = np.linspace(0.0, t_end, 257)
    envelopes = [lambda t: np.ones_like(t),
                 lambda t: np.exp(-t),
                 lambda t: np.cos(2.0 * t) ** 2]
    ratio_stats = {}
    for label, n_axis in (("base", grid.n), ("fine", grid.n + 8)):
        g = Grid(n_axis, grid.box_length, grid.dealias)
        r1_max = 0.0
        r2_max = 0.0
        for trial in range(trials):
            w0t = field_ops.random_band(g, rng, components=3, kmax=4,
                                        s_decay=2.0, amplitude=1.0)
            fbase = field_ops.random_band(g, rng, components=3, kmax=4,
                                          s_decay=2.0, amplitude=1.0)
            rho = envelopes[trial % len(envelopes)](t_coarse)
            forcing = rho[:, None, None, None, None] * fbase
            spec = PropagatorSpec(gamma, mu)
            w = linear_solve(g, spec, t_coarse, w0t, forcing)
            wnorm = lpt_norm(t_coarse, hs_norm_series(g, w, s + 0.5), 4.0)
            f_l2_hm = lpt_norm(
                t_coarse, rho * hs_norm(g, fbase, s - 1.0), 2.0)
            bound1 = mu**-0.25 * (hs_norm(g, w0t, s) + mu**-0.5 * f_l2_hm)
            r1_max = max(r1_max, wnorm / bound1)
            f_l43_l2 = lpt_norm(t_coarse, rho * hs_norm(g, fbase, 0.0), 4.0 / 3.0)
            data_min = min(hs_norm(g, w0t, s + 0.5) / gamma**0.25,
                           hs_norm(g, w0t, s) / mu**0.25)
            bound2 = data_min + mu**-0.75 * f_l43_l2
            r2_max = max(r2_max, wnorm / bound2)
        ratio_stats[label] = {"heat_class": r1_max, "damped_class": r2_max}
    measured["ratio_trials"] = ratio_stats

    stable = all(
        ratio_stats["fine"][key] <= 2.0 * ratio_stats["base"][key]
        and ratio_stats["base"][key] <= 2.0 * ratio_stats["fine"][key]
        for key in ("heat_class", "damped_class")
    )
    finite = all(v < 100.0 and math.isfinite(v)
                 for st in ratio_stats.values() for v in st.values())
    slopes_ok = (
        abs(measured["mu_data"]["slope"] + 0.25) <= slope_tol
        and abs(measured["gamma_data"]["slope"] + 0.25) <= slope_tol
        and abs(measured["mu_forcing"]["slope"] + 0.75) <= slope_tol
    )
    passed = slopes_ok and stable and finite
    digest = _digest({"name": "parabolic_smoothing", "gamma": gamma, "mu": mu,
                      "trials": trials, "seed": seed, "s": s, "t_end": t_end})
    return ExperimentResult("parabolic_smoothing", digest, measured, passed,
                            {"slope_tol": slope_tol, "ratio_cap": 100.0,
                             "stability_factor": 2.0})


# ---------------------------------------------------------------------------
# damping multiplier decay
# ---------------------------------------------------------------------------

def verify_multiplier_decay(grid: Grid, mu: float = 1.0, alpha: float = 1.0,
                            field: np.ndarray | None = None, seed: int = 0,
                            gamma_list=None) -> ExperimentResult:
    """Norm of the damping multiplier over a gamma sweep: monotone decrease
    to zero, with the low-frequency gamma^(-alpha/4) bound measured."""
    rng = np.random.default_rng(seed)
    if field is None:
        field = field_ops.random_band(grid, rng, components=1, kmax=4,
                                      s_decay=2.0, amplitude=1.0)
    if gamma_list is None:
        gamma_list = [10.0**j for j in range(9)]
    base = hs_norm(grid, field, 0.0)
    norms = [hs_norm(grid, damping_multiplier_apply(grid, g_, mu, alpha, field), 0.0)
             for g_ in gamma_list]
    ratios = [nrm / (g_**(-alpha / 4.0) * base) for nrm, g_ in zip(norms, gamma_list)]

    kmax = float(np.max(np.abs(grid.k_int_full)))
    symbol_cap = (kmax**2 / (gamma_list[-1] + mu * kmax**2)) ** (alpha / 2.0)
    decreasing = bool(np.all(np.diff(norms) < 0))
    vanishing = norms[-1] <= 1.01 * symbol_cap * base
    passed = decreasing and vanishing
    measured = {
        "gamma": list(gamma_list),
        "norm": norms,
        "field_l2": base,
        "gamma_quarter_ratio": ratios,
        "measured_constant": max(ratios),
        "final_symbol_cap": symbol_cap,
    }
    digest = _digest({"name": "multiplier_decay", "mu": mu, "alpha": alpha,
                      "seed": seed, "gammas": list(gamma_list)})
    return ExperimentResult("multiplier_decay", digest, measured, passed,
                            {"monotone": True, "final_cap_slack": 1.01})


# ---------------------------------------------------------------------------
# large-damping estimate
# ---------------------------------------------------------------------------

def verify_damping_estimate(grid: Grid, w0: np.ndarray,
                            forcing1: np.ndarray | None,
                            forcing2: np.ndarray | None,
                            sigma: float, gamma_list, tgrid: TimeGrid,
                            eps_fraction: float = 0.1,
                            data_tol: float = 0.01) -> ExperimentResult:
    """sup_{t in (eps, T)} of the H^{1/2} norm across a gamma sweep.

    Pure-data runs must match the e^{-gamma eps} law within data_tol in the
    gamma-dominated regime; forced runs must be non-increasing in gamma.
    """
    t_nodes = tgrid.nodes
    eps = eps_fraction * tgrid.t_end
    sel = t_nodes >= eps * (1.0 - 1e-12)
    # the discrete sup is attained at the first retained node; state the
    # exponential law there so off-node eps values stay exact
    eps_eff = float(t_nodes[sel][0])
    pure_data = forcing1 is None and forcing2 is None
    forcing = None
    if not pure_data:
        parts = [f for f in (forcing1, forcing2) if f is not None]
        forcing = sum(parts[1:], parts[0])

    w0_half = hs_norm(grid, w0, 0.5)
    sups = []
    for gamma in gamma_list:
        spec = PropagatorSpec(gamma, sigma)
        w = linear_solve(grid, spec, t_nodes, w0, forcing)
        sups.append(float(np.max(hs_norm_series(grid, w[sel], 0.5))))

    measured = {"gamma": list(gamma_list), "sup_h12": sups, "eps": eps,
                "eps_effective": eps_eff, "w0_h12": w0_half,
                "pure_data": pure_data}
    if pure_data:
        expected = [math.exp(-g * eps_eff) * w0_half for g in gamma_list]
        measured["expected_exp_law"] = expected
        # absolute floor: the squared-coefficient norm underflows near
        # sqrt(realmin), so anything below w0 * 1e-150 reads as zero
        floor = 1e-150 * w0_half
        passed = all(
            abs(sup - exp_) <= data_tol * exp_ + floor
            for sup, exp_ in zip(sups, expected)
        )
    else:
        positive = [g for g in gamma_list if g > 0]
        sel_pos = [sups[i] for i, g in enumerate(gamma_list) if g > 0]
        measured["gamma_positive"] = positive
        passed = _non_increasing(sel_pos)

    digest = _digest({"name": "damping_estimate", "sigma": sigma,
                      "gammas": list(gamma_list), "pure_data": pure_data,
                      "t_end": tgrid.t_end, "n_steps": tgrid.n_steps})
    return ExperimentResult("damping_estimate", digest, measured, passed,
                            {"data_tol": data_tol})


# ---------------------------------------------------------------------------
# relaxation-time sweeps
# ---------------------------------------------------------------------------

def sweep_trajectories(grid, U0, ext, p_base, tau_list, tgrid):
    out = {}
    for tau in tau_list:
        p = Params(nu=p_base.nu, sigma=p_base.sigma, tau=tau, chi0=p_base.chi0)
        out[tau] = simulate(grid, U0, ext, p, tgrid)
    return out


def run_tau_sweep(grid: Grid, U0: State, ext: ExternalField, p_base: Params,
                  tau_list, tgrid: TimeGrid, eps_fraction: float = 0.1,
                  h_target: float = 1e-2, min_reduction: float = 10.0,
                  trajectories: dict | None = None) -> ExperimentResult:
    """Relaxation sweep: away from t = 0, the damped components and the
    magnetization/field discrepancies must be non-increasing along a
    decreasing tau list, with the (m, r) norm dropping by min_reduction
    overall and the field discrepancy under h_target at the smallest tau."""
    tau_list = list(tau_list)
    if any(b >= a for a, b in zip(tau_list, tau_list[1:])):
        raise ValueError("tau_list must be strictly decreasing")
    if trajectories is None:
        trajectories = sweep_trajectories(grid, U0, ext, p_base, tau_list, tgrid)

    t_nodes = tgrid.nodes
    eps = eps_fraction * tgrid.t_end
    idx = np.where(t_nodes >= eps * (1.0 - 1e-12))[0]
    rows = []
    for tau in tau_list:
        traj, _rep = trajectories[tau]
        m_half = hs_norm_series(grid, traj.m[idx], 0.5)
        r_half = hs_norm_series(grid, traj.r[idx], 0.5)
        # M - chi0/(1+chi0) G_F = m + r ; H - 1/(1+chi0) G_F = -r
        m_gap = hs_norm_series(grid, traj.m[idx] + traj.r[idx], 0.5)
        rows.append({
            "tau": tau,
            "sup_mr_h12": float(np.max(np.hypot(m_half, r_half))),
            "sup_m_discrepancy": float(np.max(m_gap)),
            "sup_h_discrepancy": float(np.max(r_half)),
        })

    mr = [row["sup_mr_h12"] for row in rows]
    m_gap = [row["sup_m_discrepancy"] for row in rows]
    h_gap = [row["sup_h_discrepancy"] for row in rows]
    reduction = mr[0] / mr[-1] if mr[-1] > 0 else math.inf
    monotone = (_non_increasing(mr) and _non_increasing(m_gap)
                and _non_increasing(h_gap))
    passed = monotone and reduction >= min_reduction and h_gap[-1] <= h_target

    measured = {"rows": rows, "eps": eps, "mr_reduction_factor": reduction}
    digest = _digest({"name": "tau_sweep", "taus": tau_list,
                      "t_end": tgrid.t_end, "n_steps": tgrid.n_steps,
                      "eps_fraction": eps_fraction})
    return ExperimentResult("tau_sweep", digest, measured, passed,
                            {"min_reduction": min_reduction,
                             "h_target": h_target})


def verify_limit_convergence(grid: Grid, U0: State, ext: ExternalField,
                             p_base: Params, tau_list, tgrid: TimeGrid,
                             eps_fraction: float = 0.1,
                             trajectories: dict | None = None) -> ExperimentResult:
    """Velocity convergence to the limit system and decay of the
    discrepancy force, along a decreasing tau list."""
    tau_list = list(tau_list)
    if any(b >= a for a, b in zip(tau_list, tau_list[1:])):
        raise ValueError("tau_list must be strictly decreasing")
    if trajectories is None:
        trajectories = sweep_trajectories(grid, U0, ext, p_base, tau_list, tgrid)

    t_nodes = tgrid.nodes
    eps = eps_fraction * tgrid.t_end
    idx = np.where(t_nodes >= eps * (1.0 - 1e-12))[0]
    ubar_traj, ubar_rep = limit_ns_solve(grid, U0.u, ext, p_base, tgrid)

    rows = []
    for tau in tau_list:
        p = Params(nu=p_base.nu, sigma=p_base.sigma, tau=tau, chi0=p_base.chi0)
        traj, _rep = trajectories[tau]
        du = traj.u[idx] - ubar_traj.u[idx]
        sup_du = float(np.max(hs_norm_series(grid, du, 0.5)))
        grad_gap_sq = hs_norm_series(grid, du, 1.5) ** 2
        gtau_sq = np.zeros(len(idx))
        for j, i in enumerate(idx):
            gf = ext.gf_hat(t_nodes[i]) if not ext.is_zero \
                else field_ops.zero_vector(grid)
            g_force = discrepancy_force(grid, traj.state_at(i), gf, p)
            gtau_sq[j] = hs_norm(grid, g_force, -0.5) ** 2
        t_sel = t_nodes[idx]
        rows.append({
            "tau": tau,
            "sup_u_discrepancy": sup_du,
            "grad_u_discrepancy_l2t": float(np.sqrt(np.trapezoid(grad_gap_sq, t_sel))),
            "gtau_l2t_hm12": float(np.sqrt(np.trapezoid(gtau_sq, t_sel))),
        })

    keys = ("sup_u_discrepancy", "grad_u_discrepancy_l2t", "gtau_l2t_hm12")
    passed = all(_non_increasing([row[k] for row in rows]) for k in keys)
    measured = {"rows": rows, "eps": eps,
                "limit_forcing_gap": ubar_rep.mild_residual}
    digest = _digest({"name": "limit_convergence", "taus": tau_list,
                      "t_end": tgrid.t_end, "n_steps": tgrid.n_steps,
                      "eps_fraction": eps_fraction})
    return ExperimentResult("limit_convergence", digest, measured, passed, {})


# ---------------------------------------------------------------------------
# smallness diagnostics (reported, never asserted)
# ---------------------------------------------------------------------------

def measure_smallness_diagnostics(grid: Grid, U0: State, ext: ExternalField,
                                  p: Params, tgrid: TimeGrid) -> ExperimentResult:
    """Dimensionless groups the existence theory constrains; the unspecified
    constants mean these are recorded, not thresholded."""
    t_nodes = tgrid.nodes
    u0_group = p.nu**-0.25 * hs_norm(grid, U0.u, 0.5)
    mr_h1 = math.hypot(hs_norm(grid, U0.m, 1.0), hs_norm(grid, U0.r, 1.0))
    mr_group = p.tau**0.25 * mr_h1

    if ext.is_zero:
        f_l4t_l2 = 0.0
        gf_l4t_h1 = 0.0
        gf_stiff = 0.0
    else:
        f_vals = [hs_norm(grid, ext.scalar_hat(t), 0.0) for t in t_nodes]
        f_l4t_l2 = lpt_norm(t_nodes, f_vals, 4.0)
        gf_vals = [hs_norm(grid, ext.gf_hat(t), 1.0) for t in t_nodes]
        gf_l4t_h1 = lpt_norm(t_nodes, gf_vals, 4.0)
        gf_h3 = lpt_norm(t_nodes, [hs_norm(grid, ext.gf_hat(t), 3.0)
                                   for t in t_nodes], 2.0)
        gf_dt_h1 = lpt_norm(t_nodes, [hs_norm(grid, ext.gf_hat_dt(t), 1.0)
                                      for t in t_nodes], 2.0)
        gf_stiff = (p.chi0 * (1.0 + p.chi0)**-1.75 * p.tau**0.75
                    * (gf_h3 + gf_dt_h1))

    measured = {
        "velocity_group": u0_group,
        "relaxation_group": mr_group,
        "f_l4t_l2": f_l4t_l2,
        "gf_l4t_h1": gf_l4t_h1,
        "gf_stiff_group": gf_stiff,
        "nu": p.nu, "sigma": p.sigma, "tau": p.tau, "chi0": p.chi0,
    }
    digest = _digest({"name": "smallness", "t_end": tgrid.t_end,
                      "n_steps": tgrid.n_steps, "tau": p.tau})
    return ExperimentResult("smallness_diagnostics", digest, measured,
                            passed=True)

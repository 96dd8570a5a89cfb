"""Time integration of the mild system.

Two routes solve the same integral equation

    U(t) = S(t) U0 + g(t) + int_0^t S(t-s) N(U(s)) ds

with component semigroups (0, nu), (1/tau, sigma), ((1+chi0)/tau, sigma):

* `picard_solve` runs the fixed-point construction literally, iterating the
  Duhamel map over the whole time grid and reporting the empirical
  contraction ratios.
* `simulate` marches an ETD2RK stepper (exponential Euler predictor plus
  phi2 trapezoidal corrector), exact on the stiff linear part for any dt.

`limit_ns_solve` integrates the relaxed-limit Navier-Stokes system for the
velocity alone, with and without its gradient magnetic forcing.
"""

from __future__ import annotations

import struct
import time as time_module
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid
from .spectral import (
    advect,
    duhamel_convolve,
    gradient_part,
    hs_norm,
    hs_norm_series,
    leray_project,
    lpt_norm,
    phi1,
    phi2,
)
from .state import (
    ExternalField,
    Params,
    State,
    compute_f,
    compute_g,
    gf_self_advection,
)
from .nonlinear import eval_direct
from . import fields as field_ops


class PicardDivergenceError(RuntimeError):
    """Fixed-point iteration left the contraction regime."""

    def __init__(self, ratios):
        self.ratios = list(ratios)
        super().__init__(
            f"Picard iteration diverging; last contraction ratios {self.ratios[-3:]}"
        )


class BlowUpError(RuntimeError):
    """Numerical blow-up (non-finite or runaway coefficients)."""

    def __init__(self, t: float):
        self.t = float(t)
        super().__init__(f"solution blew up at t = {t:.6g}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_i = i * t_end / n_steps, starting at 0."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("time.t_end must be > 0")
        if self.n_steps < 1:
            raise ValueError("time.n_steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass
class Trajectory:
    """Spectral coefficients of (u, m, r) at every time node."""

    t: np.ndarray
    u: np.ndarray
    m: np.ndarray
    r: np.ndarray

    def state_at(self, i: int) -> State:
        return State(self.u[i], self.m[i], self.r[i])

    @property
    def n_nodes(self) -> int:
        return len(self.t)


@dataclass
class SolveReport:
    """Norm time series and solver diagnostics for one run."""

    t: np.ndarray
    hs12_u: np.ndarray
    hs12_m: np.ndarray
    hs12_r: np.ndarray
    hs1_u: np.ndarray
    hs1_m: np.ndarray
    hs1_r: np.ndarray
    l4t_h1_running: np.ndarray
    contraction_ratios: list = dc_field(default_factory=list)
    mild_residual: float | None = None
    invariant_drift_max: float = 0.0
    energy_bound_series: np.ndarray | None = None
    wall_time: float = 0.0
    method: str = ""

    def as_dict(self, include_wall_time: bool = False) -> dict:
        out = {
            "t": self.t.tolist(),
            "hs12_u": self.hs12_u.tolist(),
            "hs12_m": self.hs12_m.tolist(),
            "hs12_r": self.hs12_r.tolist(),
            "hs1_u": self.hs1_u.tolist(),
            "hs1_m": self.hs1_m.tolist(),
            "hs1_r": self.hs1_r.tolist(),
            "l4t_h1_running": self.l4t_h1_running.tolist(),
            "contraction_ratios": list(self.contraction_ratios),
            "mild_residual": self.mild_residual,
            "invariant_drift_max": self.invariant_drift_max,
            "method": self.method,
        }
        if self.energy_bound_series is not None:
            out["energy_bound_series"] = self.energy_bound_series.tolist()
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out


def _triple_h1(grid: Grid, u, m, r) -> float:
    return float(np.sqrt(
        hs_norm(grid, u, 1.0) ** 2
        + hs_norm(grid, m, 1.0) ** 2
        + hs_norm(grid, r, 1.0) ** 2
    ))


def _build_report(grid: Grid, traj: Trajectory, p: Params, method: str) -> SolveReport:
    t = traj.t
    hs12 = {c: hs_norm_series(grid, arr, 0.5)
            for c, arr in (("u", traj.u), ("m", traj.m), ("r", traj.r))}
    hs1 = {c: hs_norm_series(grid, arr, 1.0)
           for c, arr in (("u", traj.u), ("m", traj.m), ("r", traj.r))}
    h1_triple = np.sqrt(hs1["u"] ** 2 + hs1["m"] ** 2 + hs1["r"] ** 2)
    mr12_sq = hs12["m"] ** 2 + hs12["r"] ** 2
    mr32_sq = (hs_norm_series(grid, traj.m, 1.5) ** 2
               + hs_norm_series(grid, traj.r, 1.5) ** 2)
    def cumtrapz(vals):
        segs = 0.5 * (vals[1:] + vals[:-1]) * np.diff(t)
        return np.concatenate([[0.0], np.cumsum(segs)])

    running = cumtrapz(h1_triple**4) ** 0.25

    # energy functional: 1/2 |(m,r)(t)|_{1/2}^2 + (1/tau) int |(m,r)|_{1/2}^2
    # + sigma int |grad(m,r)|_{1/2}^2 (the integrals accumulate monotonically)
    energy = 0.5 * mr12_sq + cumtrapz(mr12_sq) / p.tau + p.sigma * cumtrapz(mr32_sq)

    return SolveReport(
        t=t,
        hs12_u=hs12["u"], hs12_m=hs12["m"], hs12_r=hs12["r"],
        hs1_u=hs1["u"], hs1_m=hs1["m"], hs1_r=hs1["r"],
        l4t_h1_running=running,
        energy_bound_series=energy,
        method=method,
    )


# ---------------------------------------------------------------------------
# forcing samples shared by both solvers
# ---------------------------------------------------------------------------

def _force_samples(grid: Grid, ext: ExternalField, p: Params, t_nodes):
    """(u, r) forcing coefficient arrays at every node; None when F = 0."""
    if ext.is_zero:
        return None, None
    coeff = p.balance_m_coeff * p.balance_h_coeff
    fu = np.empty((len(t_nodes), 3) + (grid.n,) * 3, dtype=complex)
    fr = np.empty_like(fu)
    for i, t in enumerate(t_nodes):
        gf = ext.gf_hat(t)
        fu[i] = coeff * leray_project(grid, gf_self_advection(grid, gf))
        fr[i] = compute_f(grid, ext.scalar_hat(t), ext.scalar_hat_dt(t), p)
    return fu, fr


def _check_finite(grid: Grid, s: State, t: float, cap: float = 1e8):
    for arr in (s.u, s.m, s.r):
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > cap:
            raise BlowUpError(t)


# ---------------------------------------------------------------------------
# Picard fixed point over the whole time grid
# ---------------------------------------------------------------------------

def picard_solve(grid: Grid, U0: State, ext: ExternalField, p: Params,
                 tgrid: TimeGrid, tol: float = 1e-10, max_iter: int = 60,
                 nonlinear: bool = True):
    """Iterate U <- S U0 + g + Duhamel(N(U)) to a fixed point.

    Stops when the L4_T H1 norm of the update falls below tol; raises
    PicardDivergenceError after three consecutive contraction ratios >= 1.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    start = time_module.perf_counter()
    t_nodes = tgrid.nodes
    nt = len(t_nodes)
    specs = p.propagators()

    rates = [spec.rates(grid) for spec in specs]
    su0 = [np.array([comp * np.exp(-t * rate) for t in t_nodes])
           for comp, rate in zip((U0.u, U0.m, U0.r), rates)]
    g1, _, g2 = compute_g(grid, ext, p, t_nodes)
    base = [su0[0] + g1, su0[1], su0[2] + g2]
    gf_nodes = [ext.gf_hat(t) for t in t_nodes] if not ext.is_zero else None

    def nonlinearity(traj_arrays):
        shape = (nt, 3) + (grid.n,) * 3
        out = [np.zeros(shape, dtype=complex) for _ in range(3)]
        if not nonlinear:
            return out
        for i in range(nt):
            s = State(traj_arrays[0][i], traj_arrays[1][i], traj_arrays[2][i])
            gf = gf_nodes[i] if gf_nodes is not None else field_ops.zero_vector(grid)
            nu_, nm_, nr_ = eval_direct(grid, s, gf, p)
            out[0][i], out[1][i], out[2][i] = nu_, nm_, nr_
        return out

    def apply_map(traj_arrays):
        forc = nonlinearity(traj_arrays)
        return [base[c] + duhamel_convolve(grid, specs[c], t_nodes, forc[c])
                for c in range(3)]

    def diff_norm(a, b):
        vals = np.array([
            _triple_h1(grid, a[0][i] - b[0][i], a[1][i] - b[1][i], a[2][i] - b[2][i])
            for i in range(nt)
        ])
        return lpt_norm(t_nodes, vals, 4.0)

    current = [np.zeros((nt, 3) + (grid.n,) * 3, dtype=complex) for _ in range(3)]
    ratios: list[float] = []
    prev_diff = None
    bad_streak = 0
    for _ in range(max_iter):
        nxt = apply_map(current)
        d = diff_norm(nxt, current)
        if prev_diff is not None and prev_diff > 0:
            ratio = d / prev_diff
            ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise PicardDivergenceError(ratios)
        current = nxt
        if d < tol:
            break
        prev_diff = d
    else:
        raise PicardDivergenceError(ratios or [float("inf")])

    residual = diff_norm(apply_map(current), current)
    traj = Trajectory(t_nodes, current[0], current[1], current[2])
    report = _build_report(grid, traj, p, method="picard")
    report.contraction_ratios = ratios
    report.mild_residual = residual
    report.wall_time = time_module.perf_counter() - start
    return traj, report


# ---------------------------------------------------------------------------
# ETD2RK stepping
# ---------------------------------------------------------------------------

class EtdStepper:
    """One-step ETD2RK integrator; exact on the linear-diagonal part."""

    def __init__(self, grid: Grid, p: Params, ext: ExternalField, dt: float,
                 nonlinear: bool = True):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self.grid = grid
        self.p = p
        self.ext = ext
        self.dt = dt
        self.nonlinear = nonlinear
        self.decay = []
        self.w1 = []
        self.w2 = []
        for spec in p.propagators():
            z = dt * spec.rates(grid)
            self.decay.append(np.exp(-z))
            self.w1.append(dt * phi1(z))
            self.w2.append(dt * phi2(z))

    def total_rhs(self, s: State, t: float, forces=None):
        grid, p = self.grid, self.p
        if self.nonlinear:
            gf = self.ext.gf_hat(t) if not self.ext.is_zero \
                else field_ops.zero_vector(grid)
            n_u, n_m, n_r = eval_direct(grid, s, gf, p)
        else:
            n_u = field_ops.zero_vector(grid)
            n_m = field_ops.zero_vector(grid)
            n_r = field_ops.zero_vector(grid)
        if forces is not None:
            f_u, f_r = forces
            n_u = n_u + f_u
            n_r = n_r + f_r
        elif not self.ext.is_zero:
            gf = self.ext.gf_hat(t)
            coeff = p.balance_m_coeff * p.balance_h_coeff
            n_u = n_u + coeff * leray_project(grid, gf_self_advection(grid, gf))
            n_r = n_r + compute_f(
                grid, self.ext.scalar_hat(t), self.ext.scalar_hat_dt(t), p)
        return n_u, n_m, n_r

    def step(self, s: State, t: float, forces_now=None, forces_next=None) -> State:
        n0 = self.total_rhs(s, t, forces_now)
        comps = (s.u, s.m, s.r)
        pred = tuple(
            self.decay[c] * comps[c] + self.w1[c] * n0[c] for c in range(3)
        )
        s_pred = State(*pred)
        n1 = self.total_rhs(s_pred, t + self.dt, forces_next)
        out = tuple(
            pred[c] + self.w2[c] * (n1[c] - n0[c]) for c in range(3)
        )
        new = State(*out)
        _check_finite(self.grid, new, t + self.dt)
        return new


def etd_step(grid: Grid, s: State, ext: ExternalField, p: Params, dt: float,
             t: float = 0.0, nonlinear: bool = True) -> State:
    """Single ETD2RK step from t to t + dt."""
    return EtdStepper(grid, p, ext, dt, nonlinear=nonlinear).step(s, t)


def simulate(grid: Grid, U0: State, ext: ExternalField, p: Params,
             tgrid: TimeGrid, nonlinear: bool = True):
    """March etd_step over the grid, re-projecting sectors each step."""
    start = time_module.perf_counter()
    t_nodes = tgrid.nodes
    nt = len(t_nodes)
    stepper = EtdStepper(grid, p, ext, tgrid.dt, nonlinear=nonlinear)
    f_u, f_r = _force_samples(grid, ext, p, t_nodes)

    def forces_at(i):
        if f_u is None:
            return None
        return f_u[i], f_r[i]

    shape = (nt, 3) + (grid.n,) * 3
    traj = Trajectory(
        t_nodes,
        np.zeros(shape, dtype=complex),
        np.zeros(shape, dtype=complex),
        np.zeros(shape, dtype=complex),
    )
    s = State(
        leray_project(grid, U0.u),
        leray_project(grid, U0.m),
        gradient_part(grid, U0.r),
    )
    traj.u[0], traj.m[0], traj.r[0] = s.u, s.m, s.r
    drift_max = 0.0
    for i in range(tgrid.n_steps):
        s = stepper.step(s, t_nodes[i], forces_at(i), forces_at(i + 1))
        drift = max(
            float(np.max(np.abs(gradient_part(grid, s.u)))),
            float(np.max(np.abs(gradient_part(grid, s.m)))),
            float(np.max(np.abs(s.r - gradient_part(grid, s.r)))),
        )
        drift_max = max(drift_max, drift)
        s = State(
            leray_project(grid, s.u),
            leray_project(grid, s.m),
            gradient_part(grid, s.r),
        )
        traj.u[i + 1], traj.m[i + 1], traj.r[i + 1] = s.u, s.m, s.r

    report = _build_report(grid, traj, p, method="etd2rk")
    report.invariant_drift_max = drift_max
    report.wall_time = time_module.perf_counter() - start
    return traj, report


# ---------------------------------------------------------------------------
# the relaxed-limit Navier-Stokes system
# ---------------------------------------------------------------------------

def limit_ns_solve(grid: Grid, u0: np.ndarray, ext: ExternalField, p: Params,
                   tgrid: TimeGrid):
    """Solve the limit velocity system twice (with and without the gradient
    magnetic forcing) and report the gap; the projected forcing vanishes, so
    the two trajectories must coincide."""
    start = time_module.perf_counter()
    if float(np.max(np.abs(gradient_part(grid, u0)))) > 1e-12:
        raise ValueError("limit system initial velocity must be divergence-free")
    t_nodes = tgrid.nodes
    nt = len(t_nodes)
    dt = tgrid.dt
    spec = p.propagators()[0]
    z = dt * spec.rates(grid)
    decay, w1, w2 = np.exp(-z), dt * phi1(z), dt * phi2(z)

    coeff = p.balance_m_coeff * p.balance_h_coeff
    if ext.is_zero:
        force = None
    else:
        force = np.array([
            coeff * leray_project(grid, gf_self_advection(grid, ext.gf_hat(t)))
            for t in t_nodes
        ])

    def rhs(u, i, forced):
        out = -leray_project(grid, advect(grid, u, u))
        if forced and force is not None:
            out = out + force[i]
        return out

    def march(forced):
        traj = np.zeros((nt, 3) + (grid.n,) * 3, dtype=complex)
        traj[0] = u0
        u = u0.copy()
        for i in range(tgrid.n_steps):
            n0 = rhs(u, i, forced)
            pred = decay * u + w1 * n0
            n1 = rhs(pred, i + 1, forced)
            u = leray_project(grid, pred + w2 * (n1 - n0))
            if not np.all(np.isfinite(u)):
                raise BlowUpError(t_nodes[i + 1])
            traj[i + 1] = u
        return traj

    u_forced = march(forced=True)
    u_plain = march(forced=False) if force is not None else u_forced
    gap = float(np.max(np.abs(u_forced - u_plain)))

    zeros = np.zeros_like(u_forced)
    traj = Trajectory(t_nodes, u_forced, zeros, zeros.copy())
    report = _build_report(grid, traj, p, method="limit-ns")
    report.mild_residual = gap  # forced/unforced gap doubles as the check
    report.wall_time = time_module.perf_counter() - start
    return traj, report


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

_CHECKPOINT_MAGIC = b"FSPC"
_CHECKPOINT_VERSION = 1
# magic, version, n, box_length, dealias, nu, sigma, tau, chi0, time
_HEADER_FMT = "<4sIIdBddddd"


def write_checkpoint(path, grid: Grid, p: Params, t: float, s: State) -> None:
    """Binary container: header (grid, params, time) then raw complex128
    little-endian coefficients, component-major (u, m, r)."""
    header = struct.pack(
        _HEADER_FMT,
        _CHECKPOINT_MAGIC,
        _CHECKPOINT_VERSION,
        grid.n,
        grid.box_length,
        1 if grid.dealias else 0,
        p.nu, p.sigma, p.tau, p.chi0,
        float(t),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for comp in (s.u, s.m, s.r):
            fh.write(np.ascontiguousarray(comp).astype("<c16").tobytes())


def read_checkpoint(path):
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize(_HEADER_FMT))
        magic, version, n, box_length, dealias, nu, sigma, tau, chi0, t = (
            struct.unpack(_HEADER_FMT, header)
        )
        if magic != _CHECKPOINT_MAGIC or version != _CHECKPOINT_VERSION:
            raise ValueError("not a recognized checkpoint file")
        grid = Grid(n, box_length, bool(dealias))
        p = Params(nu=nu, sigma=sigma, tau=tau, chi0=chi0)
        count = 3 * n**3
        comps = []
        for _ in range(3):
            arr = np.frombuffer(fh.read(16 * count), dtype="<c16").astype(complex)
            comps.append(arr.reshape(3, n, n, n))
        return grid, p, t, State(*comps)

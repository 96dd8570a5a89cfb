"""Physical parameters, the two equivalent state representations, the
magnetostatic closure, and everything derived from the external field.

State holds the damped unknowns (u, m, r): u and m divergence-free, r in
the gradient sector. PhysicalState holds (u, M, H) with curl H = 0 and
div(M + H) = F. The two are related by the affine change of variables

    M = m + r + chi0/(1+chi0) * G_F        m = P M
    H = -r + 1/(1+chi0) * G_F              r = Q M - chi0/(1+chi0) * G_F

with G_F = grad(inv_laplacian(F)). The quantity the stiff relaxation term
damps is M - chi0*H = m + (1+chi0)*r.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid
from .spectral import (
    PropagatorSpec,
    advect,
    curl,
    divergence,
    duhamel_convolve,
    hs_norm,
    inv_laplacian_gradient,
    gradient_part,
    leray_project,
    laplacian,
)
from . import fields as field_ops


@dataclass(frozen=True)
class Params:
    """Physical constants; the density/permeability/triple-product constants
    are normalized to one and c = min(nu, sigma) is the derived gap."""

    nu: float
    sigma: float
    tau: float
    chi0: float

    def __post_init__(self):
        for name in ("nu", "sigma", "tau", "chi0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"params.{name} must be > 0")

    @property
    def c(self) -> float:
        return min(self.nu, self.sigma)

    @property
    def balance_m_coeff(self) -> float:
        """chi0/(1+chi0): weight of G_F in the relaxed magnetization."""
        return self.chi0 / (1.0 + self.chi0)

    @property
    def balance_h_coeff(self) -> float:
        """1/(1+chi0): weight of G_F in the relaxed demagnetizing field."""
        return 1.0 / (1.0 + self.chi0)

    def propagators(self) -> tuple[PropagatorSpec, PropagatorSpec, PropagatorSpec]:
        """Component semigroups for (u, m, r)."""
        return (
            PropagatorSpec(0.0, self.nu),
            PropagatorSpec(1.0 / self.tau, self.sigma),
            PropagatorSpec((1.0 + self.chi0) / self.tau, self.sigma),
        )


@dataclass
class State:
    """Reformulated unknowns (u, m, r); all spectral vector fields."""

    u: np.ndarray
    m: np.ndarray
    r: np.ndarray

    def copy(self) -> "State":
        return State(self.u.copy(), self.m.copy(), self.r.copy())

    def scaled(self, lam: float) -> "State":
        return State(lam * self.u, lam * self.m, lam * self.r)

    @classmethod
    def zero(cls, grid: Grid) -> "State":
        return cls(*(field_ops.zero_vector(grid) for _ in range(3)))


@dataclass
class PhysicalState:
    """Laboratory unknowns (u, M, H); all spectral vector fields."""

    u: np.ndarray
    M: np.ndarray
    H: np.ndarray

    @classmethod
    def zero(cls, grid: Grid) -> "PhysicalState":
        return cls(*(field_ops.zero_vector(grid) for _ in range(3)))


# ---------------------------------------------------------------------------
# external field and its analytic time envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Named time profile with a closed-form derivative.

    kind: 'constant' | 'exp' (e^{-rate t}) | 'sin' (sin(rate t)) |
          'cos' (cos(rate t))
    """

    kind: str = "constant"
    rate: float = 1.0

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "exp":
            return float(np.exp(-self.rate * t))
        if self.kind == "sin":
            return float(np.sin(self.rate * t))
        if self.kind == "cos":
            return float(np.cos(self.rate * t))
        raise ValueError(f"unknown envelope kind: {self.kind!r}")

    def derivative(self, t: float) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "exp":
            return float(-self.rate * np.exp(-self.rate * t))
        if self.kind == "sin":
            return float(self.rate * np.cos(self.rate * t))
        if self.kind == "cos":
            return float(-self.rate * np.sin(self.rate * t))
        raise ValueError(f"unknown envelope kind: {self.kind!r}")


@dataclass
class ExternalField:
    """The scalar magnetic source F(x, t), mean-free at every time.

    Analytic form: a list of (integer wavevector, complex amplitude,
    Envelope) modes; the Hermitian partner of every mode is added
    automatically so F stays real. A sampled form (F and dF/dt given on the
    solver's time grid) is supported through `from_samples`.
    """

    grid: Grid
    modes: list = dc_field(default_factory=list)
    _sampled: dict | None = None

    def __post_init__(self):
        kmax = self.grid.dealias_kmax
        for kvec, amp, env in self.modes:
            kv = np.asarray(kvec, dtype=int)
            if np.all(kv == 0):
                raise ValueError("external field modes must be mean-free (k != 0)")
            if np.max(np.abs(kv)) > kmax:
                raise ValueError(
                    f"external field mode {list(kv)} lies outside the dealiased "
                    f"band |k_i| <= {kmax}"
                )
            if not isinstance(env, Envelope):
                raise TypeError("each mode needs an Envelope")
        # one static coefficient array per mode group keeps evaluation cheap
        self._bases = []
        for kvec, amp, env in self.modes:
            self._bases.append(
                (field_ops.single_mode_scalar(self.grid, kvec, amp), env)
            )

    @classmethod
    def zero(cls, grid: Grid) -> "ExternalField":
        return cls(grid, [])

    @classmethod
    def from_samples(cls, grid: Grid, t_nodes: np.ndarray, f_samples: np.ndarray,
                     df_samples: np.ndarray) -> "ExternalField":
        obj = cls(grid, [])
        for snap in (f_samples, df_samples):
            grid.check_same(snap)
            grid.require_mean_free(snap)
        obj._sampled = {
            "t": np.asarray(t_nodes, dtype=float),
            "f": np.asarray(f_samples),
            "df": np.asarray(df_samples),
        }
        return obj

    @property
    def is_zero(self) -> bool:
        return not self.modes and self._sampled is None

    def _sample_index(self, t: float) -> int:
        t_nodes = self._sampled["t"]
        idx = int(np.argmin(np.abs(t_nodes - t)))
        if abs(t_nodes[idx] - t) > 1e-10 * max(1.0, abs(t)):
            raise ValueError("sampled external field queried off its time grid")
        return idx

    def scalar_hat(self, t: float) -> np.ndarray:
        """Coefficients of F(., t)."""
        if self._sampled is not None:
            return self._sampled["f"][self._sample_index(t)]
        out = field_ops.zero_scalar(self.grid)
        for base, env in self._bases:
            out += env.value(t) * base
        return out

    def scalar_hat_dt(self, t: float) -> np.ndarray:
        """Coefficients of dF/dt(., t); exact for analytic envelopes."""
        if self._sampled is not None:
            return self._sampled["df"][self._sample_index(t)]
        out = field_ops.zero_scalar(self.grid)
        for base, env in self._bases:
            out += env.derivative(t) * base
        return out

    def gf_hat(self, t: float) -> np.ndarray:
        """G_F(., t) = grad(inv_laplacian(F))."""
        return compute_GF(self.grid, self.scalar_hat(t))

    def gf_hat_dt(self, t: float) -> np.ndarray:
        return compute_GF(self.grid, self.scalar_hat_dt(t))


# ---------------------------------------------------------------------------
# derived fields and the change of variables
# ---------------------------------------------------------------------------

def compute_GF(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    """G_F with div G_F = F and curl G_F = 0."""
    if not np.any(f_hat):
        return field_ops.zero_vector(grid)
    return inv_laplacian_gradient(grid, f_hat)


def magnetostatic_H(grid: Grid, m_total: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """Demagnetizing field H = -Q M + G_F; curl-free, div(M + H) = F."""
    return -gradient_part(grid, m_total) + compute_GF(grid, f_hat)


def magnetostatic_residual(grid: Grid, ps: PhysicalState, f_hat: np.ndarray) -> float:
    """L^2 size of div(M + H) - F plus the max curl-H coefficient."""
    div_defect = hs_norm(grid, divergence(grid, ps.M + ps.H) - f_hat, 0.0)
    curl_defect = float(np.max(np.abs(curl(grid, ps.H))))
    return max(div_defect, curl_defect)


def to_reformulated(grid: Grid, ps: PhysicalState, f_hat: np.ndarray,
                    p: Params, tol: float = 1e-10) -> State:
    """(u, M, H) -> (u, m, r); rejects states violating the magnetostatic
    closure beyond tol."""
    if magnetostatic_residual(grid, ps, f_hat) > tol:
        raise ValueError(
            "physical state violates div(M+H) = F / curl H = 0 beyond tolerance"
        )
    gf = compute_GF(grid, f_hat)
    m = leray_project(grid, ps.M)
    r = gradient_part(grid, ps.M) - p.balance_m_coeff * gf
    return State(ps.u.copy(), m, r)


def to_physical(grid: Grid, s: State, f_hat: np.ndarray, p: Params) -> PhysicalState:
    """(u, m, r) -> (u, M, H)."""
    gf = compute_GF(grid, f_hat)
    M = s.m + s.r + p.balance_m_coeff * gf
    H = -s.r + p.balance_h_coeff * gf
    return PhysicalState(s.u.copy(), M, H)


def relaxation_defect(grid: Grid, ps: PhysicalState, s: State, p: Params) -> float:
    """Max coefficient of (M - chi0 H) - (m + (1+chi0) r), the damped quantity."""
    lhs = ps.M - p.chi0 * ps.H
    rhs = s.m + (1.0 + p.chi0) * s.r
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# forcings derived from F
# ---------------------------------------------------------------------------

def compute_f(grid: Grid, f_hat: np.ndarray, df_hat: np.ndarray,
              p: Params) -> np.ndarray:
    """Outer force in the r equation:
    -chi0/(1+chi0) * (dG_F/dt - sigma * Lap G_F)."""
    gf = compute_GF(grid, f_hat)
    gf_dt = compute_GF(grid, df_hat)
    return -p.balance_m_coeff * (gf_dt - p.sigma * laplacian(grid, gf))


def gf_self_advection(grid: Grid, gf: np.ndarray, work=None) -> np.ndarray:
    """(G_F . grad) G_F, dealiased; a pure gradient, so P of it vanishes."""
    return advect(grid, gf, gf, work)


def compute_g(grid: Grid, ext: ExternalField, p: Params,
              t_nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Duhamel integrals of the pure-forcing terms at each time node.

    g1: S(0, nu) against chi0/(1+chi0)^2 * P(G_F . grad G_F)
    g2: S((1+chi0)/tau, sigma) against the r-equation force f
    The middle (m) component is identically zero.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    nt = len(t_nodes)
    shape = (nt, 3) + (grid.n,) * 3
    zeros = np.zeros(shape, dtype=complex)
    if ext.is_zero:
        return zeros, zeros.copy(), zeros.copy()

    coeff = p.balance_m_coeff * p.balance_h_coeff  # chi0/(1+chi0)^2
    force1 = np.empty(shape, dtype=complex)
    force2 = np.empty(shape, dtype=complex)
    for i, t in enumerate(t_nodes):
        gf = ext.gf_hat(t)
        force1[i] = coeff * leray_project(grid, gf_self_advection(grid, gf))
        force2[i] = compute_f(grid, ext.scalar_hat(t), ext.scalar_hat_dt(t), p)

    spec_u, _, spec_r = p.propagators()
    g1 = duhamel_convolve(grid, spec_u, t_nodes, force1)
    g2 = duhamel_convolve(grid, spec_r, t_nodes, force2)
    return g1, zeros, g2


def stationary_state(grid: Grid, f_hat: np.ndarray, p: Params) -> PhysicalState:
    """Relaxed balance state for a time-constant F: u = 0, M = chi0 H,
    M x H = 0 pointwise."""
    gf = compute_GF(grid, f_hat)
    return PhysicalState(
        field_ops.zero_vector(grid),
        p.balance_m_coeff * gf,
        p.balance_h_coeff * gf,
    )

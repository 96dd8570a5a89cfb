"""Coefficient-space operators: Hodge projectors, homogeneous Sobolev norms,
damped-heat propagators, stiff Duhamel quadrature, and the pseudo-spectral
product kernels.

All linear operators act mode-by-mode on coefficient arrays; all nonlinear
products go through physical space and are masked by the grid's 2/3 rule.
Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, SolvabilityError


# ---------------------------------------------------------------------------
# first-order operators
# ---------------------------------------------------------------------------

def gradient(grid: Grid, scalar: np.ndarray) -> np.ndarray:
    """grad(s): coefficients i*k*shat, shape (3, n, n, n)."""
    return 1j * grid.k * scalar[np.newaxis]


def divergence(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """div(v): i*k . vhat, shape (n, n, n)."""
    return 1j * np.sum(grid.k * vec, axis=0)


def curl(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """curl(v): i*k x vhat."""
    k = grid.k
    return 1j * np.stack([
        k[1] * vec[2] - k[2] * vec[1],
        k[2] * vec[0] - k[0] * vec[2],
        k[0] * vec[1] - k[1] * vec[0],
    ])


def laplacian(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return -grid.k2 * coeffs


# ---------------------------------------------------------------------------
# Hodge projectors and the inverse-Laplacian gradient
# ---------------------------------------------------------------------------

def gradient_part(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Curl-free (gradient) part: k (k.vhat) / |k|^2 per mode."""
    grid.check_same(vec)
    grid.require_mean_free(vec)
    kdotv = np.sum(grid.k * vec, axis=0)
    return grid.k * (kdotv * grid.inv_k2)[np.newaxis]


def leray_project(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Divergence-free part: v - k (k.vhat) / |k|^2 per mode."""
    return vec - gradient_part(grid, vec)


def inv_laplacian_gradient(grid: Grid, scalar: np.ndarray) -> np.ndarray:
    """grad(inv_laplacian(F)): coefficient -i k Fhat / |k|^2; div of it is F."""
    grid.check_same(scalar)
    grid.require_mean_free(scalar)
    return -1j * grid.k * (scalar * grid.inv_k2)[np.newaxis]


# ---------------------------------------------------------------------------
# homogeneous Sobolev norms
# ---------------------------------------------------------------------------

def _hs_weight(grid: Grid, s: float) -> np.ndarray:
    key = ("hs_weight", float(s))
    if key not in grid._cache:
        k2 = grid.k2
        if s == 0.0:
            weight = np.ones_like(k2)
            weight[0, 0, 0] = 0.0
        else:
            weight = np.zeros_like(k2)
            np.power(k2, s, out=weight, where=k2 > 0)
        grid._cache[key] = weight
    return grid._cache[key]


def hs_norm(grid: Grid, coeffs: np.ndarray, s: float) -> float:
    """Homogeneous H^s norm, ( L^3 * sum_{k!=0} |k|^{2s} |vhat|^2 )^{1/2}.

    The k = 0 mode is excluded, so negative s is allowed; s = 0 matches the
    physical-space L^2 norm under box quadrature.
    """
    grid.check_same(coeffs)
    weight = _hs_weight(grid, s)
    mag2 = np.sum(
        (coeffs.real**2 + coeffs.imag**2).reshape(-1, *weight.shape), axis=0)
    return float(np.sqrt(grid.volume * np.sum(weight * mag2)))


def hs_norm_series(grid: Grid, series: np.ndarray, s: float) -> np.ndarray:
    """H^s norms of a time-indexed stack of fields in one pass."""
    grid.check_same(series)
    weight = _hs_weight(grid, s)
    nt = series.shape[0]
    mag2 = np.sum(
        (series.real**2 + series.imag**2).reshape(nt, -1, *weight.shape), axis=1)
    return np.sqrt(grid.volume * np.tensordot(mag2, weight, axes=3))


def lpt_norm(t_nodes: np.ndarray, values: np.ndarray, p: float) -> float:
    """L^p-in-time norm of sampled nonnegative values by trapezoid quadrature.

    p = inf returns the max over samples.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if t_nodes.size == 0 or values.size == 0:
        raise ValueError("empty time series")
    if np.isinf(p):
        return float(np.max(values))
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    return float(np.trapezoid(values**p, t_nodes) ** (1.0 / p))


def lpt_hs_norm(grid: Grid, t_nodes: np.ndarray, series: np.ndarray,
                p: float, s: float) -> float:
    """Composite L^p_T Hdot^s norm of a time-indexed stack of fields.

    series has the time axis first: (T+1, ...field shape...).
    """
    return lpt_norm(t_nodes, hs_norm_series(grid, series, s), p)


# ---------------------------------------------------------------------------
# propagators and the damping multiplier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropagatorSpec:
    """Damped heat semigroup exp(-t*(gamma + mu |k|^2))."""

    gamma: float
    mu: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")

    def rates(self, grid: Grid) -> np.ndarray:
        return self.gamma + self.mu * grid.k2


def propagator_apply(grid: Grid, spec: PropagatorSpec, t: float,
                     coeffs: np.ndarray) -> np.ndarray:
    """Apply exp(-t*(gamma + mu |k|^2)) coefficient-wise; exact in time."""
    if t < 0:
        raise ValueError("propagator time must be >= 0")
    return coeffs * np.exp(-t * spec.rates(grid))


def damping_multiplier_apply(grid: Grid, gamma: float, mu: float, alpha: float,
                             coeffs: np.ndarray) -> np.ndarray:
    """Multiply by (|k|^2 / (gamma + mu |k|^2))^(alpha/2); zero at k = 0."""
    grid.require_mean_free(coeffs)
    k2 = grid.k2
    symbol = (k2 / (gamma + mu * k2)) ** (alpha / 2.0)
    symbol[0, 0, 0] = 0.0
    return coeffs * symbol


# ---------------------------------------------------------------------------
# exponential-integrator phi weights and the Duhamel convolution
# ---------------------------------------------------------------------------

_PHI_SERIES_CUT = 0.5


def _phi_series(z: np.ndarray, offset: int) -> np.ndarray:
    # Horner evaluation of sum_{m=0..14} (-z)^m / (m+offset)!
    out = np.zeros_like(z)
    for m in range(14, -1, -1):
        out = out * (-z) + 1.0 / math.factorial(m + offset)
    return out


def phi1(z: np.ndarray) -> np.ndarray:
    """(1 - exp(-z))/z; Taylor series below z = 0.5 to dodge cancellation."""
    z = np.asarray(z, dtype=float)
    small = z < _PHI_SERIES_CUT
    zs = np.where(small, 1.0, z)
    closed = -np.expm1(-zs) / zs
    return np.where(small, _phi_series(z, offset=1), closed)


def phi2(z: np.ndarray) -> np.ndarray:
    """(exp(-z) - 1 + z)/z^2; Taylor series below z = 0.5."""
    z = np.asarray(z, dtype=float)
    small = z < _PHI_SERIES_CUT
    zs = np.where(small, 1.0, z)
    closed = (np.exp(-zs) - 1.0 + zs) / zs**2
    return np.where(small, _phi_series(z, offset=2), closed)


def duhamel_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact weights for one step of the Duhamel integral against a
    piecewise-linear forcing: contribution dt*(w_left*f_j + w_right*f_{j+1}).

    w_left = phi1 - phi2 and w_right = phi2; both are stable for z large
    (stiff damping) and for z -> 0 (Taylor fallback).
    """
    p2 = phi2(z)
    return phi1(z) - p2, p2


def duhamel_convolve(grid: Grid, spec: PropagatorSpec, t_nodes: np.ndarray,
                     forcing: np.ndarray) -> np.ndarray:
    """Duhamel integral int_0^t exp(-(t-s)(gamma+mu|k|^2)) F(s) ds at each node.

    forcing holds coefficient arrays sampled at t_nodes (time axis first);
    the integral treats each coefficient as piecewise linear in time between
    samples, integrated exactly per mode.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    if t_nodes.ndim != 1 or t_nodes.shape[0] != forcing.shape[0]:
        raise ValueError("forcing must be sampled at every time node")
    if abs(t_nodes[0]) > 1e-14:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(t_nodes) <= 0):
        raise ValueError("time grid must be strictly increasing")

    rates = spec.rates(grid)
    steps = np.diff(t_nodes)
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    if uniform:
        z = steps[0] * rates
        decay = np.exp(-z)
        w_left, w_right = duhamel_weights(z)

    out = np.zeros_like(forcing)
    acc = np.zeros_like(forcing[0])
    for j, dt in enumerate(steps):
        if not uniform:
            z = dt * rates
            decay = np.exp(-z)
            w_left, w_right = duhamel_weights(z)
        acc = decay * acc + dt * (w_left * forcing[j] + w_right * forcing[j + 1])
        out[j + 1] = acc
    return out


def linear_solve(grid: Grid, spec: PropagatorSpec, t_nodes: np.ndarray,
                 w0: np.ndarray, forcing: np.ndarray | None = None) -> np.ndarray:
    """Solution samples of d/dt w + (gamma - mu Lap) w = F from w0.

    The data part is propagated exactly; the forcing enters through the
    piecewise-linear Duhamel quadrature.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    rates = spec.rates(grid)
    steps = np.diff(t_nodes)
    data = np.empty((len(t_nodes),) + w0.shape, dtype=complex)
    data[0] = w0
    if len(steps) and np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        decay = np.exp(-steps[0] * rates)
        for j in range(len(steps)):
            data[j + 1] = decay * data[j]
    else:
        for j, t in enumerate(t_nodes[1:], start=1):
            data[j] = w0 * np.exp(-t * rates)
    if forcing is None:
        return data
    return data + duhamel_convolve(grid, spec, t_nodes, forcing)


# ---------------------------------------------------------------------------
# pseudo-spectral products
# ---------------------------------------------------------------------------

@dataclass
class WorkCounter:
    """Transform/product instrumentation for one evaluation (not global)."""

    inverse_transforms: int = 0
    forward_transforms: int = 0
    pointwise_products: int = 0

    def add(self, inv=0, fwd=0, prod=0):
        self.inverse_transforms += inv
        self.forward_transforms += fwd
        self.pointwise_products += prod


def to_physical_counted(grid: Grid, coeffs: np.ndarray, work: WorkCounter | None):
    if work is not None:
        work.add(inv=int(np.prod(coeffs.shape[:-3])) if coeffs.ndim > 3 else 1)
    return grid.to_physical(coeffs)


def to_spectral_masked(grid: Grid, phys: np.ndarray, work: WorkCounter | None):
    # Products of non-solenoidal fields can carry a k = 0 component; the
    # artifact works in the mean-free sector throughout, so the mean channel
    # is stripped along with the aliased band.
    if work is not None:
        work.add(fwd=int(np.prod(phys.shape[:-3])) if phys.ndim > 3 else 1)
    out = grid.to_spectral(phys) * grid.product_mask
    out.reshape(-1, grid.n, grid.n, grid.n)[:, 0, 0, 0] = 0.0
    return out


def grad_physical(grid: Grid, vec: np.ndarray, work: WorkCounter | None = None):
    """Physical samples of all nine partials d_i v_j, shape (3, 3, n, n, n)."""
    parts = 1j * grid.k[:, np.newaxis] * vec[np.newaxis]
    return to_physical_counted(grid, parts.reshape(9, *vec.shape[-3:]), work).reshape(
        3, 3, *vec.shape[-3:]
    )


def advect(grid: Grid, a: np.ndarray, b: np.ndarray,
           work: WorkCounter | None = None,
           a_phys: np.ndarray | None = None) -> np.ndarray:
    """(a . grad) b via physical-space products, dealiased."""
    grid.check_same(a, b)
    if a_phys is None:
        a_phys = to_physical_counted(grid, a, work)
    db = grad_physical(grid, b, work)
    prod = np.einsum("i...,ij...->j...", a_phys, db)
    if work is not None:
        work.add(prod=9)
    return to_spectral_masked(grid, prod, work)


def cross_product(grid: Grid, a: np.ndarray, b: np.ndarray,
                  work: WorkCounter | None = None,
                  a_phys: np.ndarray | None = None,
                  b_phys: np.ndarray | None = None) -> np.ndarray:
    """a x b via physical-space products, dealiased."""
    grid.check_same(a, b)
    if a_phys is None:
        a_phys = to_physical_counted(grid, a, work)
    if b_phys is None:
        b_phys = to_physical_counted(grid, b, work)
    prod = np.stack([
        a_phys[1] * b_phys[2] - a_phys[2] * b_phys[1],
        a_phys[2] * b_phys[0] - a_phys[0] * b_phys[2],
        a_phys[0] * b_phys[1] - a_phys[1] * b_phys[0],
    ])
    if work is not None:
        work.add(prod=6)
    return to_spectral_masked(grid, prod, work)


def curl_cross(grid: Grid, a: np.ndarray, b: np.ndarray,
               work: WorkCounter | None = None) -> np.ndarray:
    """curl(a) x b: spectral curl first, then one physical cross product."""
    return cross_product(grid, curl(grid, a), b, work)


def triple_cross(grid: Grid, a: np.ndarray, b: np.ndarray, c: np.ndarray,
                 work: WorkCounter | None = None) -> np.ndarray:
    """a x (b x c) as two successive dealiased binary cross products."""
    inner = cross_product(grid, b, c, work)
    return cross_product(grid, a, inner, work)


def physical_product(grid: Grid, kind: str, a: np.ndarray, b: np.ndarray,
                     c: np.ndarray | None = None,
                     work: WorkCounter | None = None) -> np.ndarray:
    """Dispatch the four pseudo-spectral product kinds.

    kind: 'advection' (a.grad)b | 'cross' a x b | 'curl_cross' curl(a) x b
          | 'triple' a x (b x c)
    """
    if kind == "advection":
        return advect(grid, a, b, work)
    if kind == "cross":
        return cross_product(grid, a, b, work)
    if kind == "curl_cross":
        return curl_cross(grid, a, b, work)
    if kind == "triple":
        if c is None:
            raise ValueError("triple product needs three operands")
        return triple_cross(grid, a, b, c, work)
    raise ValueError(f"unknown product kind: {kind!r}")

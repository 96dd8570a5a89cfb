"""Field constructors used by tests, experiments, and the CLI presets.

Random fields are band-limited and Hermitian-symmetric by construction
(generated from real physical noise), with amplitudes shaped like
|k|^(-s_decay) so the test fields sit comfortably in every Sobolev
space under scrutiny.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid
from .spectral import gradient_part, hs_norm, leray_project


def zero_scalar(grid: Grid) -> np.ndarray:
    return np.zeros((grid.n,) * 3, dtype=complex)


def zero_vector(grid: Grid) -> np.ndarray:
    return np.zeros((3,) + (grid.n,) * 3, dtype=complex)


def band_mask(grid: Grid, kmin: int, kmax: int) -> np.ndarray:
    """Modes with 1 <= kmin <= max_i |k_i| <= kmax (true integer wavenumbers,
    so the Nyquist plane is excluded whenever kmax < n/2)."""
    kabs = np.max(np.abs(grid.k_int_full), axis=0)
    return (kabs >= kmin) & (kabs <= kmax)


def random_band(grid: Grid, rng: np.random.Generator, components: int = 3,
                kmin: int = 1, kmax: int | None = None, s_decay: float = 2.0,
                amplitude: float = 1.0, norm_s: float | None = None) -> np.ndarray:
    """Band-limited random field with |k|^(-s_decay) shell weighting.

    If norm_s is given the field is rescaled so its Hdot^{norm_s} norm
    equals amplitude; otherwise amplitude multiplies the raw coefficients.
    """
    if kmax is None:
        kmax = max(1, grid.dealias_kmax - 1)
    shape = (components,) + (grid.n,) * 3 if components > 1 else (grid.n,) * 3
    noise = rng.standard_normal(shape)
    coeffs = grid.to_spectral(noise)
    keep = band_mask(grid, kmin, kmax)
    weight = np.zeros_like(grid.k2)
    np.power(grid.k2, -s_decay / 2.0, out=weight, where=grid.k2 > 0)
    coeffs = coeffs * np.where(keep, weight, 0.0)
    if norm_s is not None:
        base = hs_norm(grid, coeffs, norm_s)
        if base > 0:
            coeffs *= amplitude / base
    else:
        coeffs *= amplitude
    return coeffs


def random_solenoidal(grid: Grid, rng: np.random.Generator, **kw) -> np.ndarray:
    """Divergence-free random vector field (Leray projected, then scaled)."""
    norm_s = kw.pop("norm_s", None)
    amplitude = kw.pop("amplitude", 1.0)
    v = leray_project(grid, random_band(grid, rng, components=3, **kw))
    return _rescale(grid, v, amplitude, norm_s)


def random_gradient(grid: Grid, rng: np.random.Generator, **kw) -> np.ndarray:
    """Curl-free random vector field (gradient sector)."""
    norm_s = kw.pop("norm_s", None)
    amplitude = kw.pop("amplitude", 1.0)
    v = gradient_part(grid, random_band(grid, rng, components=3, **kw))
    return _rescale(grid, v, amplitude, norm_s)


def _rescale(grid: Grid, v: np.ndarray, amplitude: float, norm_s: float | None):
    if norm_s is None:
        return v * amplitude
    base = hs_norm(grid, v, norm_s)
    return v * (amplitude / base) if base > 0 else v


def taylor_green(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    """Taylor-Green vortex u = A (cos x1 sin x2, -sin x1 cos x2, 0)."""
    x = grid.points() * (2.0 * np.pi / grid.box_length)
    u = np.stack([
        np.cos(x[0]) * np.sin(x[1]),
        -np.sin(x[0]) * np.cos(x[1]),
        np.zeros_like(x[0]),
    ])
    return grid.to_spectral(amplitude * u)


def single_mode_scalar(grid: Grid, kvec, amplitude: complex) -> np.ndarray:
    """Real scalar field amplitude*e^{ik.x} + conj: one Hermitian mode pair."""
    f = zero_scalar(grid)
    i, j, k = (int(c) % grid.n for c in kvec)
    ni, nj, nk = ((-int(c)) % grid.n for c in kvec)
    f[i, j, k] += amplitude
    f[ni, nj, nk] += np.conj(amplitude)
    return f


def single_mode_vector(grid: Grid, kvec, amplitudes) -> np.ndarray:
    """Real vector field with one Hermitian mode pair per component."""
    v = zero_vector(grid)
    for comp, amp in enumerate(amplitudes):
        if amp != 0:
            v[comp] = single_mode_scalar(grid, kvec, amp)
    return v


def cos_axis_scalar(grid: Grid, axis: int = 0) -> np.ndarray:
    """cos(x_axis): coefficients 1/2 at k = +-e_axis."""
    kvec = [0, 0, 0]
    kvec[axis] = 1
    return single_mode_scalar(grid, kvec, 0.5)

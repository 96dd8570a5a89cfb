"""Periodic Fourier grid: wavevectors, transforms, dealiasing.

Fields live in coefficient space as complex numpy arrays:

    scalar field : shape (n, n, n)
    vector field : shape (3, n, n, n)

Coefficients are amplitudes, i.e. ``v(x) = sum_k vhat[k] * exp(i k.x)``,
so a real field has Hermitian-symmetric coefficients and Parseval reads
``int |v|^2 dx = L^3 * sum_k |vhat[k]|^2``.

The resolved band excludes the Nyquist planes (|k_i| = n/2): derivative
multipliers are zeroed there, and every field constructor and dealiasing
mask removes them, so odd-order operators stay Hermitian-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SolvabilityError(ValueError):
    """Raised when an inverse-Laplacian style operator meets a nonzero mean mode."""


class GridMismatchError(ValueError):
    """Raised when operands of a product do not live on the same grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, box_length)^3 with n modes per axis.

    dealias toggles the 2/3-rule mask applied after pseudo-spectral
    products. The mask keeps |k_i| <= (n-1)//3 so that quadratic products
    of masked fields are alias-free on every retained mode (3*kmax < n).
    """

    n: int
    box_length: float = 2.0 * np.pi
    dealias: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError("grid.n must be an even integer >= 4")
        if self.box_length <= 0:
            raise ValueError("grid.box_length must be positive")

    # -- wavevectors ----------------------------------------------------

    @property
    def k_int_full(self) -> np.ndarray:
        """True integer wavenumbers including the Nyquist plane (for masks)."""
        if "k_int_full" not in self._cache:
            ints = np.fft.fftfreq(self.n, d=1.0 / self.n)
            kx, ky, kz = np.meshgrid(ints, ints, ints, indexing="ij")
            self._cache["k_int_full"] = np.stack([kx, ky, kz])
        return self._cache["k_int_full"]

    @property
    def k_int(self) -> np.ndarray:
        """Integer wavenumbers, shape (3, n, n, n), Nyquist plane zero."""
        if "k_int" not in self._cache:
            ints = np.fft.fftfreq(self.n, d=1.0 / self.n)
            ints[self.n // 2] = 0.0  # Nyquist carries no usable derivative
            kx, ky, kz = np.meshgrid(ints, ints, ints, indexing="ij")
            self._cache["k_int"] = np.stack([kx, ky, kz])
        return self._cache["k_int"]

    @property
    def k(self) -> np.ndarray:
        """Physical wavevectors (2*pi/L scaling), shape (3, n, n, n)."""
        if "k" not in self._cache:
            self._cache["k"] = (2.0 * np.pi / self.box_length) * self.k_int
        return self._cache["k"]

    @property
    def k2(self) -> np.ndarray:
        """|k|^2 per mode, shape (n, n, n); zero at the mean mode."""
        if "k2" not in self._cache:
            self._cache["k2"] = np.sum(self.k * self.k, axis=0)
        return self._cache["k2"]

    @property
    def inv_k2(self) -> np.ndarray:
        """1/|k|^2 with the mean mode set to zero (homogeneous inverse)."""
        if "inv_k2" not in self._cache:
            k2 = self.k2
            inv = np.zeros_like(k2)
            np.divide(1.0, k2, out=inv, where=k2 > 0)
            self._cache["inv_k2"] = inv
        return self._cache["inv_k2"]

    @property
    def dealias_kmax(self) -> int:
        return (self.n - 1) // 3

    @property
    def product_mask(self) -> np.ndarray:
        """Mask applied to pseudo-spectral products (2/3 rule, or Nyquist only)."""
        key = "product_mask"
        if key not in self._cache:
            ints = np.fft.fftfreq(self.n, d=1.0 / self.n)
            if self.dealias:
                keep1d = np.abs(ints) <= self.dealias_kmax
            else:
                keep1d = np.abs(ints) < self.n // 2
            kx, ky, kz = np.meshgrid(keep1d, keep1d, keep1d, indexing="ij")
            self._cache[key] = kx & ky & kz
        return self._cache[key]

    @property
    def volume(self) -> float:
        return self.box_length**3

    def points(self) -> np.ndarray:
        """Physical collocation points, shape (3, n, n, n)."""
        x1d = np.arange(self.n) * (self.box_length / self.n)
        return np.stack(np.meshgrid(x1d, x1d, x1d, indexing="ij"))

    # -- transforms -----------------------------------------------------

    def to_spectral(self, phys: np.ndarray) -> np.ndarray:
        """Forward transform physical samples to amplitude coefficients."""
        return np.fft.fftn(phys, axes=(-3, -2, -1)) / self.n**3

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse transform to real physical samples."""
        return np.fft.ifftn(coeffs, axes=(-3, -2, -1)).real * self.n**3

    # -- helpers --------------------------------------------------------

    def check_same(self, *arrays: np.ndarray) -> None:
        for a in arrays:
            if a.shape[-3:] != (self.n, self.n, self.n):
                raise GridMismatchError(
                    f"field of shape {a.shape} does not match grid n={self.n}"
                )

    def require_mean_free(self, coeffs: np.ndarray, tol: float = 1e-13) -> None:
        mean = np.atleast_2d(coeffs.reshape(-1, self.n, self.n, self.n)[:, 0, 0, 0])
        scale = max(np.max(np.abs(coeffs)), 1.0)
        if np.max(np.abs(mean)) > tol * scale:
            raise SolvabilityError(
                "field has a nonzero mean mode; the homogeneous inverse "
                "Laplacian is only solvable on mean-free data"
            )


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Max deviation of coefficients from Hermitian symmetry (real field)."""
    flipped = np.roll(np.flip(coeffs, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
    return float(np.max(np.abs(np.conj(flipped) - coeffs)))

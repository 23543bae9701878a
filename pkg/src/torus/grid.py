"""
Uniform grid on the periodic unit cube and its Fourier symbols.

Coefficients are stored normalized (``fftn / n**3``) so that the mode
``m`` of ``exp(2 pi i m.x)`` has coefficient 1.  Nyquist modes are never
populated: ``from_real`` discards them and every derivative symbol uses
the wavevector with Nyquist components set to zero, so operator identities
such as ``div(grad(Δ⁻¹ f)) = f`` hold in exact spectral arithmetic.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.fft

from ..utils.error_handling import ErrorCode, require


@dataclass(frozen=True)
class Grid:
    """Discretization of T³ = [0,1]³ with ``n`` points per dimension."""
    n: int
    dealias_fraction: float = 2.0 / 3.0
    workers: int = 1

    def __post_init__(self):
        require(self.n >= 8 and not (self.n & (self.n - 1)),
                ErrorCode.UNSUPPORTED_SPEC, "n must be a power of two >= 8", n=self.n)
        require(0.0 < self.dealias_fraction <= 1.0,
                ErrorCode.UNSUPPORTED_SPEC, "dealias_fraction must lie in (0, 1]",
                dealias_fraction=self.dealias_fraction)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, values in [-n/2, n/2)."""
        return np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n)).astype(np.int64)

    @cached_property
    def modes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavevector components m_1, m_2, m_3 as broadcastable arrays."""
        m = self.wavenumbers
        return (m[:, None, None], m[None, :, None], m[None, None, :])

    @cached_property
    def derivative_modes(self) -> np.ndarray:
        """Wavevector m' with Nyquist components zeroed, shape (3, n, n, n)."""
        m = self.wavenumbers.copy()
        m[m == -self.n // 2] = 0
        return np.stack(np.meshgrid(m, m, m, indexing="ij")).astype(float)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|m'|² on the full mode array."""
        return np.sum(self.derivative_modes ** 2, axis=0)

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        return -4.0 * np.pi ** 2 * self.k_squared

    @cached_property
    def inverse_laplacian_symbol(self) -> np.ndarray:
        symbol = np.zeros(self.shape)
        nonzero = self.k_squared > 0
        symbol[nonzero] = 1.0 / self.laplacian_symbol[nonzero]
        return symbol

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes carrying a Nyquist component."""
        m1, m2, m3 = self.modes
        half = -self.n // 2
        return (m1 == half) | (m2 == half) | (m3 == half)

    @property
    def dealias_cutoff(self) -> int:
        return int(np.floor(self.dealias_fraction * self.n / 2))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the truncation rule (|m_i| <= cutoff)."""
        m1, m2, m3 = self.modes
        k = self.dealias_cutoff
        return (np.abs(m1) <= k) & (np.abs(m2) <= k) & (np.abs(m3) <= k)

    @cached_property
    def mode_magnitude(self) -> np.ndarray:
        m1, m2, m3 = self.modes
        return np.sqrt(m1 ** 2 + m2 ** 2 + m3 ** 2)

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gridpoint coordinates x_1, x_2, x_3 as broadcastable arrays."""
        x = np.arange(self.n) / self.n
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def forward(self, samples: np.ndarray) -> np.ndarray:
        """Normalized forward transform over the last three axes."""
        return scipy.fft.fftn(samples, axes=(-3, -2, -1), workers=self.workers) / self.n ** 3

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Real samples from normalized coefficients."""
        values = scipy.fft.ifftn(coeffs * self.n ** 3, axes=(-3, -2, -1), workers=self.workers)
        return values.real

    def compatible(self, other: "Grid") -> bool:
        return self.n == other.n and self.dealias_fraction == other.dealias_fraction

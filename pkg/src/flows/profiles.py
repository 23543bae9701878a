"""
One-dimensional profiles behind the box flows.

Φ is the bump exp(−1/(1 − s²)) with s = (2z − w)/w, supported in [0, w];
φ = Φ″ is normalized to unit L² and has zero mean.  Derivatives are
closed-form so every transport identity built on them holds to round-off.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..utils.error_handling import ErrorCode, require

QUADRATURE_NODES = 400
CUMULATIVE_SAMPLES = 8193


def _bump_derivatives(s: np.ndarray):
    """g, g″, g‴ of g(s) = exp(−1/(1 − s²)) on |s| < 1, zero outside."""
    g = np.zeros_like(s)
    g2 = np.zeros_like(s)
    g3 = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    u = 1.0 - si ** 2
    e1 = -2.0 * si / u ** 2
    e2 = -2.0 / u ** 2 - 8.0 * si ** 2 / u ** 3
    e3 = -24.0 * si / u ** 3 - 48.0 * si ** 3 / u ** 4
    gi = np.exp(-1.0 / u)
    g[inside] = gi
    g2[inside] = gi * (e1 ** 2 + e2)
    g3[inside] = gi * (e1 ** 3 + 3.0 * e1 * e2 + e3)
    return g, g2, g3


@dataclass(frozen=True)
class BaseProfile:
    """Φ and φ = Φ″ on [0, width], with ∫φ² = 1."""
    width: float = 0.125
    scale: float = field(init=False)

    def __post_init__(self):
        require(0.0 < self.width < 1.0, ErrorCode.UNSUPPORTED_SPEC,
                "profile width must lie in (0, 1)", width=self.width)
        nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
        z = 0.5 * self.width * (nodes + 1.0)
        raw = self._raw(z)[1]
        norm2 = 0.5 * self.width * np.sum(weights * raw ** 2)
        object.__setattr__(self, "scale", 1.0 / np.sqrt(norm2))

    def _raw(self, z: np.ndarray):
        z = np.asarray(z, dtype=float)
        w = self.width
        s = (2.0 * z - w) / w
        g, g2, g3 = _bump_derivatives(s)
        return g, g2 * (2.0 / w) ** 2, g3 * (2.0 / w) ** 3

    def Phi(self, z):
        return self.scale * self._raw(z)[0]

    def phi(self, z):
        return self.scale * self._raw(z)[1]

    def phi_prime(self, z):
        return self.scale * self._raw(z)[2]

    def cumulative(self, z):
        """C(z) = ∫₀^z φ² with C(width) = 1."""
        grid, table = _cumulative_table(self.width)
        return np.interp(np.asarray(z, dtype=float), grid, table)


@lru_cache(maxsize=8)
def _cumulative_table(width: float):
    profile = BaseProfile(width)
    grid = np.linspace(0.0, width, CUMULATIVE_SAMPLES)
    table = cumulative_trapezoid(profile.phi(grid) ** 2, grid, initial=0.0)
    return grid, table / table[-1]


def base_profile(support_width: float = 0.125) -> BaseProfile:
    return BaseProfile(support_width)


@dataclass(frozen=True)
class StretchedProfile:
    """h(y) = r^{-1/2} φ(r^{-1} frac(y)): one bump of width r·w per unit of y."""
    profile: BaseProfile
    r_inv: int

    def __post_init__(self):
        require(isinstance(self.r_inv, (int, np.integer)) and self.r_inv >= 1,
                ErrorCode.NOT_INTEGER, "r^{-1} must be a positive integer", r_inv=self.r_inv)

    def _local(self, y):
        return self.r_inv * np.mod(np.asarray(y, dtype=float), 1.0)

    def value(self, y):
        return np.sqrt(self.r_inv) * self.profile.phi(self._local(y))

    def derivative(self, y):
        """dh/dy."""
        return self.r_inv ** 1.5 * self.profile.phi_prime(self._local(y))

    def antiderivative(self, y):
        """∫₀^y (h² − 1), bounded by 1 in absolute value."""
        frac = np.mod(np.asarray(y, dtype=float), 1.0)
        u = np.minimum(self.r_inv * frac, self.profile.width)
        return self.profile.cumulative(u) - frac

    @property
    def support_length(self) -> float:
        return self.profile.width / self.r_inv


def periodized_stretch(profile: BaseProfile, r_inv: int, repetitions: int = 1):
    """x ↦ h(repetitions · x) as a callable on [0, 1)."""
    stretched = StretchedProfile(profile, r_inv)
    return lambda x: stretched.value(repetitions * np.asarray(x, dtype=float))

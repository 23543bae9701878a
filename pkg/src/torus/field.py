"""
Spectral fields on T³ and the calculus acting on them.

A ``SpectralField`` holds normalized Fourier coefficients of a scalar
(rank 0), vector (rank 1, shape (3, n, n, n)) or tensor (rank 2, shape
(3, 3, n, n, n)) field.  Fields are treated as immutable values: every
operation returns a new field.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
import structlog

from ..utils.error_handling import ErrorCode, PreconditionError, require
from .grid import Grid

logger = structlog.get_logger(__name__)

MEAN_TOLERANCE = 1e-10
GL_NODES = 128


class Symmetry(Enum):
    """Symmetry tag of a rank-2 field, preserved by linear operations."""
    NONE = 0
    SYMMETRIC_TRACEFREE = 1
    ANTISYMMETRIC = 2


def _component_shape(rank: int):
    return {0: (), 1: (3,), 2: (3, 3)}[rank]


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    rank: int
    coeffs: np.ndarray
    symmetry: Symmetry = Symmetry.NONE

    def __post_init__(self):
        expected = _component_shape(self.rank) + self.grid.shape
        if self.coeffs.shape != expected:
            raise PreconditionError(
                ErrorCode.GRID_MISMATCH, "coefficient array does not match grid",
                details={"expected": list(expected), "got": list(self.coeffs.shape)},
            )

    # -- construction -------------------------------------------------

    @classmethod
    def zeros(cls, grid: Grid, rank: int, symmetry: Symmetry = Symmetry.NONE) -> "SpectralField":
        return cls(grid, rank, np.zeros(_component_shape(rank) + grid.shape, dtype=complex), symmetry)

    @classmethod
    def from_real(cls, grid: Grid, samples: np.ndarray,
                  symmetry: Symmetry = Symmetry.NONE) -> "SpectralField":
        """Transform real samples; Nyquist modes are discarded."""
        samples = np.asarray(samples, dtype=float)
        rank = samples.ndim - 3
        if rank not in (0, 1, 2):
            raise PreconditionError(ErrorCode.GRID_MISMATCH, "samples must have rank 0, 1 or 2",
                                    details={"ndim": samples.ndim})
        coeffs = grid.forward(samples)
        coeffs[..., grid.nyquist_mask] = 0.0
        return cls(grid, rank, coeffs, symmetry)

    def to_real(self) -> np.ndarray:
        return self.grid.inverse(self.coeffs)

    def with_coeffs(self, coeffs: np.ndarray, symmetry: Optional[Symmetry] = None) -> "SpectralField":
        return SpectralField(self.grid, self.rank, coeffs,
                             self.symmetry if symmetry is None else symmetry)

    # -- arithmetic ---------------------------------------------------

    def _check(self, other: "SpectralField"):
        if not self.grid.compatible(other.grid) or self.rank != other.rank:
            raise PreconditionError(
                ErrorCode.GRID_MISMATCH, "fields live on different grids or ranks",
                details={"ranks": [self.rank, other.rank], "n": [self.grid.n, other.grid.n]},
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        symmetry = self.symmetry if self.symmetry == other.symmetry else Symmetry.NONE
        return self.with_coeffs(self.coeffs + other.coeffs, symmetry)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        symmetry = self.symmetry if self.symmetry == other.symmetry else Symmetry.NONE
        return self.with_coeffs(self.coeffs - other.coeffs, symmetry)

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs / scalar)

    # -- inspection ---------------------------------------------------

    def mean(self) -> np.ndarray:
        """Spatial mean per component."""
        return self.coeffs[..., 0, 0, 0].real

    def component(self, *index: int) -> "SpectralField":
        return SpectralField(self.grid, self.rank - len(index), self.coeffs[index])

    def transpose(self) -> "SpectralField":
        require(self.rank == 2, ErrorCode.UNSUPPORTED_SPEC, "transpose needs a rank-2 field")
        return self.with_coeffs(np.swapaxes(self.coeffs, 0, 1))

    def trace(self) -> "SpectralField":
        require(self.rank == 2, ErrorCode.UNSUPPORTED_SPEC, "trace needs a rank-2 field")
        return SpectralField(self.grid, 0, np.einsum("ii...->...", self.coeffs))

    def imaginary_residue(self) -> float:
        """Largest imaginary part of the samples (zero for real fields)."""
        values = np.fft.ifftn(self.coeffs * self.grid.n ** 3, axes=(-3, -2, -1))
        return float(np.max(np.abs(values.imag))) if values.size else 0.0


def stack(components, symmetry: Symmetry = Symmetry.NONE) -> SpectralField:
    """Stack scalar (or vector) fields into a vector (or tensor) field."""
    first = components[0]
    coeffs = np.stack([c.coeffs for c in components])
    return SpectralField(first.grid, first.rank + 1, coeffs, symmetry)


def identity_tensor(f: SpectralField) -> SpectralField:
    """f·Id for a scalar field f."""
    require(f.rank == 0, ErrorCode.UNSUPPORTED_SPEC, "identity_tensor needs a scalar field")
    coeffs = np.einsum("ij,...->ij...", np.eye(3), f.coeffs)
    return SpectralField(f.grid, 2, coeffs)


# -- linear operators --------------------------------------------------

def derivative(f: SpectralField, axis: int) -> SpectralField:
    """∂_axis f for axis in 1..3."""
    require(axis in (1, 2, 3), ErrorCode.UNSUPPORTED_SPEC, "axis must be 1, 2 or 3", axis=axis)
    symbol = 2j * np.pi * f.grid.derivative_modes[axis - 1]
    return f.with_coeffs(f.coeffs * symbol)


def gradient(f: SpectralField) -> SpectralField:
    """∇f; a rank-r field gives rank r+1 with the derivative index first."""
    symbol = 2j * np.pi * f.grid.derivative_modes
    coeffs = np.einsum("a...,...->a...", symbol, f.coeffs)
    return SpectralField(f.grid, f.rank + 1, coeffs)


def divergence(v: SpectralField) -> SpectralField:
    """Σ_j ∂_j v_j of a vector field."""
    require(v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "divergence needs a vector field")
    symbol = 2j * np.pi * v.grid.derivative_modes
    return SpectralField(v.grid, 0, np.sum(symbol * v.coeffs, axis=0))


def curl(v: SpectralField) -> SpectralField:
    require(v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "curl needs a vector field")
    m = 2j * np.pi * v.grid.derivative_modes
    c = v.coeffs
    coeffs = np.stack([
        m[1] * c[2] - m[2] * c[1],
        m[2] * c[0] - m[0] * c[2],
        m[0] * c[1] - m[1] * c[0],
    ])
    return v.with_coeffs(coeffs)


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs * f.grid.laplacian_symbol)


def remove_mean(f: SpectralField) -> SpectralField:
    """ℙ_{>0}: zero the m = 0 mode only."""
    coeffs = f.coeffs.copy()
    coeffs[..., 0, 0, 0] = 0.0
    return f.with_coeffs(coeffs)


def leray_project(v: SpectralField) -> SpectralField:
    """ℙ_H = Id − ∇div/Δ; the m = 0 mode passes through."""
    require(v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "leray_project needs a vector field")
    grid = v.grid
    m = grid.derivative_modes
    k2 = grid.k_squared
    weight = np.zeros(grid.shape)
    nonzero = k2 > 0
    weight[nonzero] = 1.0 / k2[nonzero]
    projection = np.sum(m * v.coeffs, axis=0) * weight
    return v.with_coeffs(v.coeffs - m * projection)


def check_mean_free(f: SpectralField, what: str = "field") -> None:
    scale = max(1.0, float(np.max(np.abs(f.coeffs))) if f.coeffs.size else 1.0)
    mean = float(np.max(np.abs(f.coeffs[..., 0, 0, 0])))
    require(mean <= MEAN_TOLERANCE * scale, ErrorCode.NON_ZERO_MEAN,
            f"{what} must be mean-free", mean=mean)


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """Δ⁻¹ of a mean-free field; the result is mean-free."""
    check_mean_free(f)
    return f.with_coeffs(f.coeffs * f.grid.inverse_laplacian_symbol)


def heat_semigroup(f: SpectralField, t: float) -> SpectralField:
    """e^{tΔ} f."""
    require(t >= 0.0, ErrorCode.NEGATIVE_TIME, "heat semigroup needs t >= 0", t=t)
    if t == 0.0:
        return f
    return f.with_coeffs(f.coeffs * np.exp(f.grid.laplacian_symbol * t))


def translate(f: SpectralField, shift: np.ndarray) -> SpectralField:
    """f(x − shift)."""
    m = f.grid.derivative_modes
    phase = np.exp(-2j * np.pi * np.tensordot(np.asarray(shift, dtype=float), m, axes=1))
    return f.with_coeffs(f.coeffs * phase)


# -- mollification -------------------------------------------------------

def _bump(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@lru_cache(maxsize=32)
def _mollifier_table(max_k2: int, epsilon: float) -> np.ndarray:
    """Multiplier of the unit-mass radial bump at each integer |m|²."""
    nodes, weights = np.polynomial.legendre.leggauss(GL_NODES)
    r = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    kernel = _bump(r) * r ** 2
    rho = epsilon * np.sqrt(np.arange(max_k2 + 1, dtype=float))
    transform = 4.0 * np.pi * (np.sinc(2.0 * np.outer(rho, r)) @ (w * kernel))
    return transform / transform[0]


def mollifier_multiplier(grid: Grid, epsilon: float) -> np.ndarray:
    k2 = np.rint(grid.k_squared).astype(np.int64)
    table = _mollifier_table(int(k2.max()), float(epsilon))
    return table[k2]


def mollify(f: SpectralField, epsilon: float) -> SpectralField:
    """f ∗ ψ_ε with ψ_ε a radial bump of unit mass supported in |x| < ε."""
    require(0.0 < epsilon < 0.5, ErrorCode.BAD_EPSILON, "epsilon must lie in (0, 1/2)",
            epsilon=epsilon)
    return f.with_coeffs(f.coeffs * mollifier_multiplier(f.grid, epsilon))


# -- dealiased products --------------------------------------------------

def band_limit(f: SpectralField) -> SpectralField:
    """Truncate to the dealiasing band."""
    return f.with_coeffs(f.coeffs * f.grid.dealias_mask)


def _masked_samples(f: SpectralField) -> np.ndarray:
    return f.grid.inverse(f.coeffs * f.grid.dealias_mask)


def _from_product(grid: Grid, samples: np.ndarray, rank: int,
                  symmetry: Symmetry = Symmetry.NONE) -> SpectralField:
    coeffs = grid.forward(samples) * grid.dealias_mask
    return SpectralField(grid, rank, coeffs, symmetry)


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased f·g for a scalar f and a field g of any rank."""
    require(f.rank == 0, ErrorCode.UNSUPPORTED_SPEC, "left factor must be scalar")
    samples = _masked_samples(f) * _masked_samples(g)
    return _from_product(f.grid, samples, g.rank, g.symmetry)


def outer(u: SpectralField, v: SpectralField) -> SpectralField:
    """Dealiased (u ⊗ v)_ij = u_i v_j."""
    require(u.rank == 1 and v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "outer needs vectors")
    samples = np.einsum("i...,j...->ij...", _masked_samples(u), _masked_samples(v))
    return _from_product(u.grid, samples, 2)


def dot(u: SpectralField, v: SpectralField) -> SpectralField:
    """Dealiased pointwise u·v."""
    require(u.rank == 1 and v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "dot needs vectors")
    samples = np.sum(_masked_samples(u) * _masked_samples(v), axis=0)
    return _from_product(u.grid, samples, 0)


def tracefree(m: SpectralField) -> SpectralField:
    """M − ⅓ tr(M) Id for a symmetric M."""
    trace = m.trace().coeffs
    coeffs = m.coeffs - np.einsum("ij,...->ij...", np.eye(3), trace) / 3.0
    return m.with_coeffs(coeffs, Symmetry.SYMMETRIC_TRACEFREE)


def tracefree_outer(u: SpectralField, v: SpectralField) -> SpectralField:
    """Symmetric trace-free part u∘⊗v of ½(u⊗v + v⊗u)."""
    sym = outer(u, v)
    sym = sym.with_coeffs(0.5 * (sym.coeffs + np.swapaxes(sym.coeffs, 0, 1)))
    return tracefree(sym)


def wedge(u: SpectralField, v: SpectralField) -> SpectralField:
    """Antisymmetric u⊗v − v⊗u."""
    uv = outer(u, v)
    return uv.with_coeffs(uv.coeffs - np.swapaxes(uv.coeffs, 0, 1), Symmetry.ANTISYMMETRIC)


# -- sample data ----------------------------------------------------------

def random_solenoidal(grid: Grid, amplitude: float = 1.0, band: float = 4.0,
                      seed: int = 0) -> SpectralField:
    """Mean-free divergence-free field on modes |m| ≤ band with L² norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    f = SpectralField.from_real(grid, rng.standard_normal((3,) + grid.shape))
    coeffs = np.where(grid.mode_magnitude <= band, f.coeffs, 0.0)
    f = leray_project(remove_mean(f.with_coeffs(coeffs)))
    size = float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
    return f * (amplitude / size) if size > 0.0 else f


def shear_field(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> SpectralField:
    """amplitude · sin(2π mode x₂) e₁."""
    _, x2, _ = grid.coordinates
    samples = np.zeros((3,) + grid.shape)
    samples[0] = amplitude * np.sin(2.0 * np.pi * mode * x2)
    return SpectralField.from_real(grid, samples)

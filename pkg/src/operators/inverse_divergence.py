"""
Tensor divergence and its two matrix-valued right inverses.

Convention: (div M)_i = Σ_j ∂_j M_ji.  ``inv_div_sym`` returns a symmetric
trace-free tensor and ``inv_div_anti`` an antisymmetric one; both are
order −1 Fourier multipliers built from the same wavevector as the rest of
the spectral calculus.
"""
import numpy as np
import structlog

from ..torus.field import SpectralField, Symmetry, check_mean_free
from ..utils.error_handling import ErrorCode, require

logger = structlog.get_logger(__name__)

DIV_FREE_TOLERANCE = 1e-10

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_j, _i, _k] = -1.0


def _symbols(field: SpectralField):
    grid = field.grid
    xi = 2j * np.pi * grid.derivative_modes
    return xi, grid.inverse_laplacian_symbol


def div_tensor(m: SpectralField) -> SpectralField:
    """(div M)_i = Σ_j ∂_j M_ji."""
    require(m.rank == 2, ErrorCode.UNSUPPORTED_SPEC, "div_tensor needs a rank-2 field")
    xi, _ = _symbols(m)
    return SpectralField(m.grid, 1, np.einsum("j...,ji...->i...", xi, m.coeffs))


def inv_div_sym(v: SpectralField) -> SpectralField:
    """ℛv: symmetric trace-free with div ℛv = v for mean-free v."""
    require(v.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "inv_div_sym needs a vector field")
    check_mean_free(v, "input of inv_div_sym")
    xi, inv_lap = _symbols(v)
    lv = v.coeffs * inv_lap
    div_lv = np.sum(xi * lv, axis=0)
    grad = np.einsum("k...,l...->kl...", xi, lv)
    coeffs = grad + np.swapaxes(grad, 0, 1)
    hessian = np.einsum("k...,l...->kl...", xi, xi) * inv_lap
    coeffs -= 0.5 * (np.eye(3)[:, :, None, None, None] + hessian) * div_lv
    return SpectralField(v.grid, 2, coeffs, Symmetry.SYMMETRIC_TRACEFREE)


def check_divergence_free(u: SpectralField, what: str = "field") -> None:
    xi, _ = _symbols(u)
    div = np.sqrt(np.sum(np.abs(np.sum(xi * u.coeffs, axis=0)) ** 2))
    scale = np.sqrt(np.sum(np.abs(xi * u.coeffs) ** 2))
    require(div <= DIV_FREE_TOLERANCE * max(scale, 1e-300) or div == 0.0,
            ErrorCode.NOT_DIVERGENCE_FREE, f"{what} must be divergence-free",
            divergence=float(div), scale=float(scale))


def inv_div_anti(u: SpectralField) -> SpectralField:
    """ℛ_a u: antisymmetric with div ℛ_a u = u for mean-free div-free u.

    (ℛ_a u)_ij = ε_ijk Δ⁻¹(curl u)_k under the column divergence above.
    """
    require(u.rank == 1, ErrorCode.UNSUPPORTED_SPEC, "inv_div_anti needs a vector field")
    check_mean_free(u, "input of inv_div_anti")
    check_divergence_free(u, "input of inv_div_anti")
    xi, inv_lap = _symbols(u)
    c = u.coeffs
    curl = np.stack([
        xi[1] * c[2] - xi[2] * c[1],
        xi[2] * c[0] - xi[0] * c[2],
        xi[0] * c[1] - xi[1] * c[0],
    ]) * inv_lap
    coeffs = np.einsum("ijk,k...->ij...", LEVI_CIVITA, curl)
    return SpectralField(u.grid, 2, coeffs, Symmetry.ANTISYMMETRIC)


def pressure_from_stress(m: SpectralField) -> SpectralField:
    """Δ⁻¹ div div M for a rank-2 field (mean-free scalar)."""
    xi, inv_lap = _symbols(m)
    coeffs = np.einsum("i...,j...,ij...->...", xi, xi, m.coeffs) * inv_lap
    return SpectralField(m.grid, 0, coeffs)

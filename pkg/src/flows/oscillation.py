"""
Fast oscillation ψ_k = √2 cos(2π λ N_Λ k·x) with potential
Ψ_k = −√2 cos(2π λ N_Λ k·x)/(4π²), and the vector potentials

    F_k̄ = λ curl (−Δ)⁻¹ (ψ_k k̄),   F_k̄̄ = λ curl (−Δ)⁻¹ (ψ_k k̄̄)

so that curl F/λ reproduces ψ_k k̄ and ψ_k k̄̄ exactly.
"""
from dataclasses import dataclass

import numpy as np

from ..geometry.directions import DirectionTriple
from ..torus.field import SpectralField, curl
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, ResolutionError
from .box import integer_wavevector


@dataclass(frozen=True, eq=False)
class FastOscillation:
    psi: np.ndarray
    potential: np.ndarray
    f_kbar: SpectralField
    f_kbarbar: SpectralField
    wavevector: np.ndarray
    lam: int


def _potential(grid: Grid, psi: np.ndarray, direction: np.ndarray, lam: int) -> SpectralField:
    vector = SpectralField.from_real(grid, psi[None] * direction[:, None, None, None])
    # (−Δ)⁻¹ = −Δ⁻¹
    inverse = vector.with_coeffs(-vector.coeffs * grid.inverse_laplacian_symbol)
    return curl(inverse) * float(lam)


def fast_oscillation(triple: DirectionTriple, lam: int, n_lambda: int, grid: Grid) -> FastOscillation:
    """(ψ_k, Ψ_k, F_k̄, F_k̄̄) for one triple."""
    wavevector = integer_wavevector(lam * n_lambda, triple.k)
    if np.max(np.abs(wavevector)) >= grid.n // 2:
        raise ResolutionError(
            ErrorCode.UNDER_RESOLVED, "fast oscillation exceeds the grid Nyquist frequency",
            details={"wavevector": wavevector.tolist(), "n": grid.n},
        )
    x1, x2, x3 = grid.coordinates
    phase = 2.0 * np.pi * (wavevector[0] * x1 + wavevector[1] * x2 + wavevector[2] * x3)
    phase = np.broadcast_to(phase, grid.shape)
    psi = np.sqrt(2.0) * np.cos(phase)
    potential = -np.sqrt(2.0) * np.cos(phase) / (4.0 * np.pi ** 2)
    return FastOscillation(
        psi=psi,
        potential=potential,
        f_kbar=_potential(grid, psi, triple.kbar_array, lam),
        f_kbarbar=_potential(grid, psi, triple.kbarbar_array, lam),
        wavevector=wavevector,
        lam=lam,
    )

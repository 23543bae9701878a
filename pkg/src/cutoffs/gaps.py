"""
Energy, helicity and magnetic gap functions.

    ρ_q     = (e − ∫(|v̄|² + |b̄|²) − E − δ_{q+2}/2) / 3
    ρ_{q,0} = δ_{q+1} ℵ + ρ_q (1 − ℵ) / (η₋₁ + Σ_l ∫η_l² χ_v)
    ρ_{v,q} = ρ_{q,0} χ_v,        χ_v = χ(⟨R_v / (ℓ^{α/4} δ_{q+1})⟩)
    h_q     = (h − ∫v̄·b̄ − δ_{q+2}/200) / 3
    h_{b,q} = δ_{q+1} ℵ / 400 + h_q (1 − ℵ) / (η₋₁ + Σ_l ∫η_l²)
    ρ_b     = χ(⟨M_b / (δ_{q+1} ℓ^{α/2})⟩) δ_{q+1} ℓ^{α/3},   M_b = −M̊̄

R_v = R̊̄ + Σ_{k∈Λ_b} ρ_b Γ_k(M_b/ρ_b)(k̄⊗k̄ − k̄̄⊗k̄̄) is the Reynolds stress left
once the magnetic principal flows are in place.
"""
from dataclasses import dataclass, asdict
from typing import Dict, Optional, Tuple

import numpy as np
import structlog

from ..geometry.lemmas import Decomposition
from ..geometry.regularizer import chi, japanese_bracket
from ..torus.field import SpectralField
from ..torus.norms import l2_inner
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, PreconditionError
from .eta import CutoffFamily

logger = structlog.get_logger(__name__)


@dataclass
class GapScales:
    """δ_{q+1}, δ_{q+2}, ℓ_q and α of the current level."""
    delta_next: float
    delta_after: float
    ell: float
    alpha: float


@dataclass
class EnergyGaps:
    t: float
    rho_q: float
    rho_q0: float
    denominator: float
    rho_v: np.ndarray

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.pop("rho_v")
        data["rho_v_min"] = float(np.min(self.rho_v))
        data["rho_v_max"] = float(np.max(self.rho_v))
        return data


@dataclass
class HelicityGaps:
    t: float
    h_q: float
    h_b: float
    denominator: float

    def to_dict(self) -> Dict:
        return asdict(self)


def _in_control_window(t: float, cutoffs: CutoffFamily) -> bool:
    return t >= cutoffs.partition.horizon - cutoffs.tau_prev


def _check_positive(name: str, value: float, t: float, cutoffs: CutoffFamily):
    if value <= 0.0 and _in_control_window(t, cutoffs):
        raise PreconditionError(
            ErrorCode.GAP_NEGATIVE, f"{name} is not positive in [T − τ_(q−1), T]",
            details={"gap": name, "value": value, "t": t},
        )


def magnetic_gap(m_bar: np.ndarray, scales: GapScales) -> Tuple[np.ndarray, np.ndarray]:
    """(M_b, ρ_b) from samples of M̊̄ with shape (3, 3, n, n, n)."""
    m_b = -np.asarray(m_bar, dtype=float)
    level = scales.delta_next * scales.ell ** (scales.alpha / 2.0)
    rho_b = chi(japanese_bracket(m_b / level)) * scales.delta_next * scales.ell ** (scales.alpha / 3.0)
    return m_b, rho_b


def corrected_stress(r_bar: np.ndarray, m_b: np.ndarray, rho_b: np.ndarray,
                     decomposition: Decomposition) -> np.ndarray:
    """R_v on the grid."""
    gamma = decomposition.coefficients(m_b / rho_b)
    correction = np.zeros_like(np.asarray(r_bar, dtype=float))
    for coeff, triple in zip(gamma, decomposition.directions):
        kbar, kbarbar = triple.kbar_array, triple.kbarbar_array
        pattern = np.outer(kbar, kbar) - np.outer(kbarbar, kbarbar)
        correction += pattern[:, :, None, None, None] * (rho_b * coeff)[None, None]
    return np.asarray(r_bar, dtype=float) + correction


def velocity_switch(r_v: np.ndarray, scales: GapScales) -> np.ndarray:
    """χ_v = χ(⟨R_v / (ℓ^{α/4} δ_{q+1})⟩)."""
    level = scales.ell ** (scales.alpha / 4.0) * scales.delta_next
    return chi(japanese_bracket(r_v / level))


def energy_gap(e_t: float, glued_energy: float, e_flows: float, scales: GapScales) -> float:
    return (e_t - glued_energy - e_flows - scales.delta_after / 2.0) / 3.0


def helicity_gap(h_t: float, glued_cross: float, scales: GapScales) -> float:
    return (h_t - glued_cross - scales.delta_after / 200.0) / 3.0


def _weighted_mass(cutoffs: CutoffFamily, grid: Grid, t: float,
                   weight: Optional[np.ndarray] = None) -> float:
    total = 0.0
    for l in cutoffs.active(t):
        eta2 = cutoffs.eta_grid(l, grid, t) ** 2
        total += float(np.mean(eta2 if weight is None else eta2 * weight))
    return total


def energy_gaps(e_t: float, v_bar: SpectralField, b_bar: SpectralField, e_flows: float,
                t: float, cutoffs: CutoffFamily, chi_v: np.ndarray,
                scales: GapScales) -> EnergyGaps:
    """ρ_q, ρ_{q,0} and ρ_{v,q} at time t.

    Raises:
        PreconditionError: GapNegative when ρ_q ≤ 0 on [T − τ_{q−1}, T]
    """
    glued = l2_inner(v_bar, v_bar) + l2_inner(b_bar, b_bar)
    rho_q = energy_gap(e_t, glued, e_flows, scales)
    _check_positive("rho_q", rho_q, t, cutoffs)
    aleph = cutoffs.aleph(t)
    denominator = cutoffs.eta_minus1(t) + _weighted_mass(cutoffs, v_bar.grid, t, chi_v)
    if aleph < 1.0 and denominator <= 0.0:
        raise PreconditionError(ErrorCode.GAP_VANISHES, "energy gap denominator vanishes",
                                details={"t": t})
    rho_q0 = scales.delta_next * aleph + (rho_q * (1.0 - aleph) / denominator
                                          if aleph < 1.0 else 0.0)
    logger.debug("Energy gaps", t=t, rho_q=rho_q, rho_q0=rho_q0, denominator=denominator)
    return EnergyGaps(t, rho_q, rho_q0, denominator, rho_q0 * chi_v)


def helicity_gaps(h_t: float, v_bar: SpectralField, b_bar: SpectralField, t: float,
                  cutoffs: CutoffFamily, scales: GapScales) -> HelicityGaps:
    """h_q and h_{b,q} at time t.

    Raises:
        PreconditionError: GapNegative when h_q ≤ 0 on [T − τ_{q−1}, T]
    """
    h_q = helicity_gap(h_t, l2_inner(v_bar, b_bar), scales)
    _check_positive("h_q", h_q, t, cutoffs)
    aleph = cutoffs.aleph(t)
    denominator = cutoffs.eta_minus1(t) + _weighted_mass(cutoffs, v_bar.grid, t)
    if aleph < 1.0 and denominator <= 0.0:
        raise PreconditionError(ErrorCode.GAP_VANISHES, "helicity gap denominator vanishes",
                                details={"t": t})
    h_b = scales.delta_next * aleph / 400.0 + (h_q * (1.0 - aleph) / denominator
                                               if aleph < 1.0 else 0.0)
    logger.debug("Helicity gaps", t=t, h_q=h_q, h_b=h_b, denominator=denominator)
    return HelicityGaps(t, h_q, h_b, denominator)

"""
Residual stresses of the relaxed MHD system

    ∂_t v − Δv + div(v⊗v − b⊗b) + ∇p = div R̊
    ∂_t b − Δb + div(v⊗b − b⊗v)      = div M̊

recovered through ℛ and ℛ_a, plus the start-up tuple and the residual check.
"""
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
import structlog

from ..operators.inverse_divergence import div_tensor, inv_div_anti, inv_div_sym
from ..torus.field import (SpectralField, Symmetry, dot, gradient, laplacian, remove_mean,
                           tracefree_outer, wedge)
from ..torus.norms import lebesgue
from ..utils.error_handling import ErrorCode, PreconditionError
from .mhd import momentum_flux

logger = structlog.get_logger(__name__)

TAG_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class StressPair:
    """(R̊, M̊): symmetric trace-free and antisymmetric."""
    R: SpectralField
    M: SpectralField

    @classmethod
    def zeros(cls, grid) -> "StressPair":
        return cls(SpectralField.zeros(grid, 2, Symmetry.SYMMETRIC_TRACEFREE),
                   SpectralField.zeros(grid, 2, Symmetry.ANTISYMMETRIC))

    def tag_defects(self) -> Dict[str, float]:
        """Pointwise symmetry, trace and antisymmetry defects relative to the sup norm."""
        r, m = self.R.to_real(), self.M.to_real()
        r_scale = max(float(np.max(np.abs(r))), 1e-300)
        m_scale = max(float(np.max(np.abs(m))), 1e-300)
        return {
            "R_symmetry": float(np.max(np.abs(r - np.swapaxes(r, 0, 1)))) / r_scale,
            "R_trace": float(np.max(np.abs(np.einsum("ii...->...", r)))) / r_scale,
            "M_antisymmetry": float(np.max(np.abs(m + np.swapaxes(m, 0, 1)))) / m_scale,
        }

    def check_tags(self, tolerance: float = TAG_TOLERANCE) -> bool:
        return all(value <= tolerance for value in self.tag_defects().values())

    def l1_norms(self) -> Tuple[float, float]:
        return lebesgue(self.R.to_real(), 2, 1.0), lebesgue(self.M.to_real(), 2, 1.0)


def momentum_defect(v: SpectralField, b: SpectralField, p: SpectralField,
                    dv_dt: SpectralField) -> SpectralField:
    """∂_t v − Δv + div(v⊗v − b⊗b) + ∇p."""
    return dv_dt - laplacian(v) + div_tensor(momentum_flux(v, b)) + gradient(p)


def induction_defect(v: SpectralField, b: SpectralField, db_dt: SpectralField) -> SpectralField:
    """∂_t b − Δb + div(v⊗b − b⊗v)."""
    return db_dt - laplacian(b) + div_tensor(wedge(v, b))


def residual_stresses(v: SpectralField, b: SpectralField, p: SpectralField,
                      dv_dt: SpectralField, db_dt: SpectralField) -> StressPair:
    """(R̊, M̊) with div R̊ and div M̊ equal to the two defects.

    Raises:
        PreconditionError: NonSolenoidalResidual when the induction defect is
            not divergence-free; NonZeroMean when a defect has a mean
    """
    r = inv_div_sym(momentum_defect(v, b, p, dv_dt))
    try:
        m = inv_div_anti(induction_defect(v, b, db_dt))
    except PreconditionError as e:
        if e.code is not ErrorCode.NOT_DIVERGENCE_FREE:
            raise
        raise PreconditionError(ErrorCode.NON_SOLENOIDAL_RESIDUAL,
                                "induction residual is not divergence-free",
                                details=e.details) from e
    return StressPair(r, m)


def relaxed_residual(v: SpectralField, b: SpectralField, p: SpectralField,
                     dv_dt: SpectralField, db_dt: SpectralField,
                     stresses: StressPair) -> Dict[str, float]:
    """L² norms of the relaxed-system defects and of their right sides."""
    momentum = momentum_defect(v, b, p, dv_dt) - div_tensor(stresses.R)
    induction = induction_defect(v, b, db_dt) - div_tensor(stresses.M)

    def l2(f: SpectralField) -> float:
        return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))

    return {
        "momentum": l2(momentum),
        "induction": l2(induction),
        "momentum_scale": l2(div_tensor(stresses.R)) + l2(dv_dt),
        "induction_scale": l2(div_tensor(stresses.M)) + l2(db_dt),
    }


def startup_tuple(v: SpectralField, b: SpectralField) -> Tuple[SpectralField, StressPair]:
    """(p₁, (R̊₁, M̊₁)) for heat-flow fields: R̊₁ = v∘⊗v − b∘⊗b, M̊₁ = v⊗b − b⊗v."""
    p = remove_mean((dot(v, v) - dot(b, b)) * (-1.0 / 3.0))
    return p, StressPair(tracefree_outer(v, v) - tracefree_outer(b, b), wedge(v, b))


def centered_derivative(evaluate: Callable[[float], SpectralField], t: float,
                        h: float) -> SpectralField:
    """(f(t−2h) − 8f(t−h) + 8f(t+h) − f(t+2h)) / 12h, evaluated in increasing time."""
    f_m2, f_m1 = evaluate(t - 2.0 * h), evaluate(t - h)
    f_p1, f_p2 = evaluate(t + h), evaluate(t + 2.0 * h)
    return (f_m2 - f_m1 * 8.0 + f_p1 * 8.0 - f_p2) / (12.0 * h)


def forward_derivative(evaluate: Callable[[float], SpectralField], t: float,
                       h: float) -> SpectralField:
    """One-sided fourth-order stencil for times too close to 0 for the centered one."""
    samples = [evaluate(t + i * h) for i in range(5)]
    weights = (-25.0, 48.0, -36.0, 16.0, -3.0)
    total = samples[0] * weights[0]
    for f, weight in zip(samples[1:], weights[1:]):
        total = total + f * weight
    return total / (12.0 * h)


def time_derivative(evaluate: Callable[[float], SpectralField], t: float,
                    h: float) -> SpectralField:
    if t < 2.0 * h:
        return forward_derivative(evaluate, t, h)
    return centered_derivative(evaluate, t, h)

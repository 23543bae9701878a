"""
Box flows φ_{k,k̄,k̄̄}(x, t) = c · h_r(y_k) h_r̄(y_k̄(t)) h_r̄̄(y_k̄̄) with

    y_k = σ N_Λ k·(x − x_k),  y_k̄(t) = σ N_Λ (k̄·(x − x_k) + μ t),
    y_k̄̄ = σ N_Λ k̄̄·(x − x_k).

The constant c makes the grid L² norm of the product one at t = 0.  The
pattern is time periodic with period 1/(σ N_Λ μ).
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import structlog

from ..geometry.directions import DirectionTriple
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, ResolutionError, require
from .profiles import BaseProfile, StretchedProfile

logger = structlog.get_logger(__name__)

MIN_SAMPLES_PER_SUPPORT = 3


@dataclass(frozen=True)
class FlowParams:
    """Oscillation parameters of the box flows."""
    lam: int
    sigma: int
    mu: int
    r_inv: int
    rbar_inv: int
    rbarbar_inv: int
    n_lambda: int
    support_width: float = 0.125
    shifts: Dict[int, Tuple[float, float, float]] = field(default_factory=dict, hash=False,
                                                          compare=False)

    def __post_init__(self):
        for name in ("lam", "sigma", "mu", "r_inv", "rbar_inv", "rbarbar_inv", "n_lambda"):
            value = getattr(self, name)
            require(isinstance(value, (int, np.integer)) and value >= 1, ErrorCode.NOT_INTEGER,
                    f"{name} must be a positive integer", **{name: value})

    @classmethod
    def asymptotic_scaling(cls, lam: int, n_lambda: int, support_width: float = 0.125) -> "FlowParams":
        """σ = λ^{1/128}, μ = λ^{17/16}, r⁻¹ = r̄⁻¹ = λ^{14/16}, r̄̄⁻¹ = λ^{5/16}, rounded."""
        return cls(
            lam=lam,
            sigma=max(1, round(lam ** (1.0 / 128.0))),
            mu=max(1, round(lam ** (17.0 / 16.0))),
            r_inv=max(1, round(lam ** (14.0 / 16.0))),
            rbar_inv=max(1, round(lam ** (14.0 / 16.0))),
            rbarbar_inv=max(1, round(lam ** (5.0 / 16.0))),
            n_lambda=n_lambda,
            support_width=support_width,
        )

    @property
    def period(self) -> float:
        """Time period of the traveling factor."""
        return 1.0 / (self.sigma * self.n_lambda * self.mu)

    def with_shifts(self, shifts: Dict[int, Tuple[float, float, float]]) -> "FlowParams":
        return FlowParams(self.lam, self.sigma, self.mu, self.r_inv, self.rbar_inv,
                          self.rbarbar_inv, self.n_lambda, self.support_width, dict(shifts))

    def snap_time(self, t: float) -> float:
        """Nearest time at which the pattern coincides with t = 0."""
        return round(t / self.period) * self.period


def integer_wavevector(scale: int, vector) -> np.ndarray:
    values = np.array([scale * c for c in vector], dtype=object)
    require(all(float(v) == int(v) for v in values), ErrorCode.NON_INTEGER_WAVEVECTOR,
            "scaled direction is not an integer vector", vector=[str(c) for c in vector])
    return np.array([int(v) for v in values], dtype=np.int64)


class BoxFlow:
    """Sampled box flow of one direction triple on a grid."""

    def __init__(self, triple: DirectionTriple, params: FlowParams, grid: Grid,
                 shift: Optional[Tuple[float, float, float]] = None,
                 profile: Optional[BaseProfile] = None):
        self.triple = triple
        self.params = params
        self.grid = grid
        self.shift = np.zeros(3) if shift is None else np.asarray(shift, dtype=float)
        profile = profile or BaseProfile(params.support_width)
        self.h_k = StretchedProfile(profile, int(params.r_inv))
        self.h_kbar = StretchedProfile(profile, int(params.rbar_inv))
        self.h_kbarbar = StretchedProfile(profile, int(params.rbarbar_inv))

        scale = params.sigma * params.n_lambda
        self.rate = float(scale)
        self.wavevectors = [integer_wavevector(scale, v)
                            for v in (triple.k, triple.kbar, triple.kbarbar)]
        for wavevector, stretched in zip(self.wavevectors,
                                         (self.h_k, self.h_kbar, self.h_kbarbar)):
            self._check_resolution(wavevector, stretched)

        x1, x2, x3 = grid.coordinates
        self._phases = []
        for wavevector in self.wavevectors:
            y = (wavevector[0] * x1 + wavevector[1] * x2 + wavevector[2] * x3
                 - float(wavevector @ self.shift))
            self._phases.append(np.broadcast_to(y, grid.shape))
        self.normalization = 1.0
        norm = float(np.sqrt(np.mean(self._raw_product(0.0) ** 2)))
        if norm == 0.0:
            raise ResolutionError(ErrorCode.UNDER_RESOLVED, "box flow vanishes on the grid")
        self.normalization = 1.0 / norm

    def _check_resolution(self, wavevector: np.ndarray, stretched: StretchedProfile):
        g = math.gcd(math.gcd(int(abs(wavevector[0])), int(abs(wavevector[1]))),
                     math.gcd(int(abs(wavevector[2])), self.grid.n))
        samples = self.grid.n * stretched.support_length / g
        if samples < MIN_SAMPLES_PER_SUPPORT:
            raise ResolutionError(
                ErrorCode.UNDER_RESOLVED, "grid does not resolve the box-flow support",
                details={"samples": samples, "n": self.grid.n,
                         "wavevector": wavevector.tolist()},
            )

    def _traveling_phase(self, t: float) -> np.ndarray:
        return self._phases[1] + self.rate * self.params.mu * t

    def _raw_product(self, t: float) -> np.ndarray:
        return (self.h_k.value(self._phases[0]) * self.h_kbar.value(self._traveling_phase(t))
                * self.h_kbarbar.value(self._phases[2]))

    # -- factors (normalization attached to φ_k) --------------------------

    def phi_k(self) -> np.ndarray:
        return self.normalization * self.h_k.value(self._phases[0])

    def phi_kbar(self, t: float) -> np.ndarray:
        return self.h_kbar.value(self._traveling_phase(t))

    def phi_kbarbar(self) -> np.ndarray:
        return self.h_kbarbar.value(self._phases[2])

    def kbar_slope(self, t: float) -> np.ndarray:
        """k̄·∇φ_k̄; the time derivative is μ times this."""
        return self.rate * self.h_kbar.derivative(self._traveling_phase(t))

    def kbarbar_slope(self) -> np.ndarray:
        """k̄̄·∇φ_k̄̄."""
        return self.rate * self.h_kbarbar.derivative(self._phases[2])

    def kbar_antiderivative(self, t: float) -> np.ndarray:
        """∫₀^{σ(k̄·(x−x_k)+μt)} (φ_r̄² − 1); its time derivative is σμ(φ_k̄² − 1)."""
        return self.h_kbar.antiderivative(self._traveling_phase(t)) / self.params.n_lambda

    def value(self, t: float = 0.0) -> np.ndarray:
        return self.phi_k() * self.phi_kbar(t) * self.phi_kbarbar()

    def time_derivative(self, t: float) -> np.ndarray:
        return self.phi_k() * self.params.mu * self.kbar_slope(t) * self.phi_kbarbar()

    def support(self, t: float = 0.0) -> np.ndarray:
        return self.value(t) != 0.0


def box_flow(triple: DirectionTriple, params: FlowParams, grid: Grid, t: float = 0.0,
             shift: Optional[Tuple[float, float, float]] = None) -> np.ndarray:
    """Samples of φ_{k,k̄,k̄̄}(·, t)."""
    return BoxFlow(triple, params, grid, shift).value(t)

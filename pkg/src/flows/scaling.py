"""
Norm-scaling reports for the box flows at asymptotic scaling.

Asymptotic frequencies cannot be resolved in 3-D, so the reports use the
separable 1-D factor form: for each λ the three stretched factors are
sampled on one period of a fine 1-D grid and the 3-D norms are products of
the 1-D ones.  Integer repetitions of a factor leave every L^p norm and the
support fraction unchanged, so one period suffices.
"""
from dataclasses import dataclass, asdict
from typing import Dict, List, Sequence

import numpy as np
import structlog

from ..utils.error_handling import ErrorCode, require
from .box import FlowParams
from .profiles import BaseProfile, StretchedProfile

logger = structlog.get_logger(__name__)

MIN_LAMBDAS = 4
DEFAULT_LAMBDAS = (2 ** 8, 2 ** 9, 2 ** 10, 2 ** 11, 2 ** 12)
DEFAULT_SAMPLES = 2 ** 20


@dataclass
class ScalingReport:
    """Least-squares slope of log(value) against log(λ)."""
    quantity: str
    lambdas: List[int]
    values: List[float]
    slope: float
    theory: float

    @property
    def deviation(self) -> float:
        return abs(self.slope - self.theory)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["deviation"] = self.deviation
        return data


def _check_lambdas(lambdas: Sequence[int]) -> List[int]:
    lambdas = [int(lam) for lam in lambdas]
    require(len(set(lambdas)) >= MIN_LAMBDAS, ErrorCode.TOO_FEW_SAMPLES,
            f"scaling fits need at least {MIN_LAMBDAS} distinct values of λ",
            lambdas=lambdas)
    return lambdas


def _fit(quantity: str, lambdas: List[int], values: List[float], theory: float) -> ScalingReport:
    slope = float(np.polyfit(np.log(lambdas), np.log(values), 1)[0])
    report = ScalingReport(quantity, lambdas, values, slope, theory)
    logger.info("Scaling fitted", quantity=quantity, slope=slope, theory=theory)
    return report


def _factors(params: FlowParams, profile: BaseProfile, samples: int) -> List[np.ndarray]:
    x = np.arange(samples) / samples
    return [StretchedProfile(profile, int(r_inv)).value(x)
            for r_inv in (params.r_inv, params.rbar_inv, params.rbarbar_inv)]


def _lp(values: np.ndarray, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(values)))
    return float(np.mean(np.abs(values) ** p) ** (1.0 / p))


def lp_theory(p: float) -> float:
    """(14/16)(1 − 2/p) + (5/16)(1/2 − 1/p)."""
    inv = 0.0 if np.isinf(p) else 1.0 / p
    return (14.0 / 16.0) * (1.0 - 2.0 * inv) + (5.0 / 16.0) * (0.5 - inv)


def lp_norm_report(p: float, lambdas: Sequence[int] = DEFAULT_LAMBDAS, n_lambda: int = 1,
                   support_width: float = 0.125, samples: int = DEFAULT_SAMPLES) -> ScalingReport:
    """Fitted exponent of ‖φ_{k,k̄,k̄̄}‖_{L^p} against λ after L² normalization.

    Raises:
        PreconditionError: TooFewSamples with fewer than four values of λ
    """
    lambdas = _check_lambdas(lambdas)
    profile = BaseProfile(support_width)
    values = []
    for lam in lambdas:
        factors = _factors(FlowParams.asymptotic_scaling(lam, n_lambda, support_width), profile, samples)
        l2 = np.prod([_lp(f, 2.0) for f in factors])
        values.append(float(np.prod([_lp(f, p) for f in factors]) / l2))
    return _fit(f"L{p}", lambdas, values, lp_theory(p))


def support_report(lambdas: Sequence[int] = DEFAULT_LAMBDAS, n_lambda: int = 1,
                   support_width: float = 0.125,
                   samples: int = DEFAULT_SAMPLES) -> ScalingReport:
    """Fitted exponent of |supp φ_{k,k̄,k̄̄}|, expected −33/16."""
    lambdas = _check_lambdas(lambdas)
    profile = BaseProfile(support_width)
    values = []
    for lam in lambdas:
        factors = _factors(FlowParams.asymptotic_scaling(lam, n_lambda, support_width), profile, samples)
        values.append(float(np.prod([np.mean(f != 0.0) for f in factors])))
    return _fit("support", lambdas, values, -33.0 / 16.0)


def temporal_flow_report(lambdas: Sequence[int] = DEFAULT_LAMBDAS, n_lambda: int = 1,
                         support_width: float = 0.125,
                         samples: int = DEFAULT_SAMPLES) -> ScalingReport:
    """Fitted exponent of μ⁻¹‖P_{>0}(φ_k² φ_k̄² φ_k̄̄²)‖_{L²}, expected −1/32.

    The squared factors are separable, so the L² norm of the mean-free part
    is (Π‖f_i‖² − Π(mean f_i)²)^{1/2}.
    """
    lambdas = _check_lambdas(lambdas)
    profile = BaseProfile(support_width)
    values = []
    for lam in lambdas:
        params = FlowParams.asymptotic_scaling(lam, n_lambda, support_width)
        squares = [f ** 2 for f in _factors(params, profile, samples)]
        l2 = np.prod([np.mean(s ** 2) for s in squares])
        mean = np.prod([np.mean(s) for s in squares])
        values.append(float(np.sqrt(max(l2 - mean ** 2, 0.0)) / params.mu))
    theory = 2.0 * lp_theory(4.0) - 17.0 / 16.0
    return _fit("temporal_L2", lambdas, values, theory)


def stretched_support_fraction(r_inv: int, support_width: float = 0.125,
                               samples: int = 2 ** 16) -> float:
    """Share of one period where h_r does not vanish."""
    x = np.arange(samples) / samples
    return float(np.mean(StretchedProfile(BaseProfile(support_width), r_inv).value(x) != 0.0))

"""
The parameter ladder λ_q = a^{b^q}, δ_q = λ₂^{3β} λ_q^{−2β}, ℓ_q = λ_q^{−e}.
"""
from dataclasses import asdict, dataclass
from typing import Dict

import structlog

from ..cutoffs.gaps import GapScales
from ..utils.config import WorkbenchSettings
from ..utils.error_handling import ErrorCode, require

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class Ladder:
    a: float = 2.0
    b: int = 2
    beta: float = 1.0 / 16.0
    alpha: float = 1.0 / 64.0
    ell_exponent: float = 6.0
    gap_alpha: float = 3.0
    tau: float = 1.0 / 8.0
    tau_prev: float = 1.0 / 4.0
    horizon: float = 1.0

    def __post_init__(self):
        require(self.a > 1.0 and self.b >= 2, ErrorCode.UNSUPPORTED_SPEC,
                "ladder needs a > 1 and b >= 2", a=self.a, b=self.b)
        require(0.0 < self.tau < self.tau_prev, ErrorCode.BAD_TAU,
                "τ_q must lie in (0, τ_{q−1})", tau=self.tau, tau_prev=self.tau_prev)

    @classmethod
    def from_settings(cls, settings: WorkbenchSettings) -> "Ladder":
        ladder = settings.ladder
        return cls(a=ladder.a, b=ladder.b, beta=ladder.beta, alpha=ladder.alpha,
                   ell_exponent=ladder.ell_exponent, gap_alpha=settings.cutoffs.gap_alpha,
                   tau=ladder.tau, tau_prev=ladder.tau_prev, horizon=ladder.horizon)

    def lam(self, q: int) -> float:
        return float(self.a ** (self.b ** q))

    def delta(self, q: int) -> float:
        return self.lam(2) ** (3.0 * self.beta) * self.lam(q) ** (-2.0 * self.beta)

    def ell(self, q: int) -> float:
        return self.lam(q) ** (-self.ell_exponent)

    def scales(self, q: int) -> GapScales:
        """Gap scales used while stepping from level q to q + 1."""
        return GapScales(self.delta(q + 1), self.delta(q + 2), self.ell(q), self.gap_alpha)

    def level(self, q: int) -> Dict[str, float]:
        return {"q": q, "lambda": self.lam(q), "delta": self.delta(q), "ell": self.ell(q),
                "delta_next": self.delta(q + 1), "delta_after": self.delta(q + 2)}

    def to_dict(self) -> Dict:
        return asdict(self)

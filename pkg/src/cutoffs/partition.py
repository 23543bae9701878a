"""
Time partition t_l = lτ with the intervals

    I_l = [t_l + τ/3, t_l + 2τ/3],   J_l = (t_l − τ/3, t_l + τ/3)

and the straight partition of unity {χ_l}, 1 ≤ l ≤ N_q: χ_l rises on
I_{l−1}, equals 1 on J_l and falls on I_l.  χ_1 is 1 from −τ/3 on and χ_{N_q}
stays 1 to the end, so Σχ_l = 1 on [−τ/3, T + τ/3].
"""
import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import structlog

from ..utils.error_handling import ErrorCode, require

logger = structlog.get_logger(__name__)


def _flat(s: np.ndarray) -> np.ndarray:
    """f(s) = exp(−1/s) for s > 0, else 0."""
    positive = s > 0
    return np.where(positive, np.exp(-1.0 / np.where(positive, s, 1.0)), 0.0)


def _flat_prime(s: np.ndarray) -> np.ndarray:
    positive = s > 0
    safe = np.where(positive, s, 1.0)
    return np.where(positive, np.exp(-1.0 / safe) / safe ** 2, 0.0)


def smooth_step(s):
    """S(s) = f(s)/(f(s) + f(1 − s)): 0 for s ≤ 0, 1 for s ≥ 1, C^∞."""
    s = np.asarray(s, dtype=float)
    a, b = _flat(s), _flat(1.0 - s)
    return a / (a + b)


def smooth_step_prime(s):
    s = np.asarray(s, dtype=float)
    a, b = _flat(s), _flat(1.0 - s)
    da, db = _flat_prime(s), _flat_prime(1.0 - s)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class TimePartition:
    """Step τ on [0, T]."""
    tau: float
    horizon: float = 1.0

    @property
    def count(self) -> int:
        """N_q = sup{l : (J_l ∪ I_l) ∩ [0, T] ≠ ∅}."""
        return math.ceil(self.horizon / self.tau + 1.0 / 3.0 - 1e-12) - 1

    @property
    def straight_count(self) -> int:
        """N⁰_q = ⌊1/τ⌋ − 2."""
        return math.floor(1.0 / self.tau + 1e-12) - 2

    def t(self, l: int) -> float:
        return l * self.tau

    def I(self, l: int):
        return (self.t(l) + self.tau / 3.0, self.t(l) + 2.0 * self.tau / 3.0)

    def J(self, l: int):
        return (self.t(l) - self.tau / 3.0, self.t(l) + self.tau / 3.0)

    @property
    def times(self) -> List[float]:
        return [self.t(l) for l in range(self.count + 1)]

    def chi(self, l: int, t):
        """χ_l(t) for 1 ≤ l ≤ N_q."""
        t = np.asarray(t, dtype=float)
        third = self.tau / 3.0
        rise = (np.ones_like(t) if l == 1
                else smooth_step((t - self.I(l - 1)[0]) / third))
        fall = (np.ones_like(t) if l == self.count
                else 1.0 - smooth_step((t - self.I(l)[0]) / third))
        out = rise * fall
        return out if out.ndim else float(out)

    def chi_prime(self, l: int, t):
        """∂_t χ_l(t)."""
        t = np.asarray(t, dtype=float)
        third = self.tau / 3.0
        if l == 1:
            rise, drise = np.ones_like(t), np.zeros_like(t)
        else:
            u = (t - self.I(l - 1)[0]) / third
            rise, drise = smooth_step(u), smooth_step_prime(u) / third
        if l == self.count:
            fall, dfall = np.ones_like(t), np.zeros_like(t)
        else:
            u = (t - self.I(l)[0]) / third
            fall, dfall = 1.0 - smooth_step(u), -smooth_step_prime(u) / third
        out = drise * fall + rise * dfall
        return out if out.ndim else float(out)

    def interval_kind(self, t: float) -> str:
        """'I' when t lies in some I_l, else 'J'."""
        l = math.floor(t / self.tau + 1e-12)
        offset = t - self.t(l)
        if self.tau / 3.0 <= offset <= 2.0 * self.tau / 3.0:
            return "I"
        return "J"

    def to_dict(self) -> Dict:
        return {"tau": self.tau, "horizon": self.horizon, "count": self.count,
                "straight_count": self.straight_count}


def build_partition(horizon: float, tau: float) -> TimePartition:
    """Partition of [0, T] with step τ.

    Raises:
        PreconditionError: BadTau unless 0 < τ < T
    """
    require(0.0 < tau < horizon, ErrorCode.BAD_TAU, "τ must satisfy 0 < τ < T",
            tau=tau, horizon=horizon)
    partition = TimePartition(float(tau), float(horizon))
    logger.debug("Partition built", **partition.to_dict())
    return partition


def straight_chi(partition: TimePartition) -> Dict[int, callable]:
    """{l: χ_l} for 1 ≤ l ≤ N_q."""
    return {l: (lambda t, l=l: partition.chi(l, t)) for l in range(1, partition.count + 1)}


def derivative_constants(partition: TimePartition, order: int = 3,
                         samples: int = 20_001) -> Dict[int, float]:
    """max_l ‖∂_t^N χ_l‖_∞ τ^N for N ≤ order, by repeated differencing on a fine grid."""
    t = np.linspace(-partition.tau / 3.0, partition.horizon + partition.tau / 3.0, samples)
    constants = {}
    for l in range(1, partition.count + 1):
        values = partition.chi(l, t)
        for n in range(1, order + 1):
            values = np.gradient(values, t)
            constants[n] = max(constants.get(n, 0.0),
                               float(np.max(np.abs(values))) * partition.tau ** n)
    return constants

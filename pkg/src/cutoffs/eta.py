"""
Space-time cutoffs η_l, the handover cutoff η₋₁ and the helicity switch ℵ.

For 1 ≤ l < N⁰ the cutoffs are straight: η̄_l depends on t only, is 1 on
I_l and is supported in [t_l + τ/6, t_l + 5τ/6].  For N⁰ ≤ l ≤ N_q they
squiggle: η̃_l is the mollification of the indicator of the sheared slab

    lτ + ετ/3 + s(x₁) ≤ t ≤ lτ + (3 − ε)τ/3 + s(x₁),   s(x₁) = (2ετ/3) sin(2πx₁)

with a plateau kernel of radius ε₀ in x₁ and ε₀τ in t.  The slabs of
consecutive l are 2ετ/3 apart at every x₁, which keeps supports disjoint.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np
import structlog

from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, require
from .partition import TimePartition, smooth_step

logger = structlog.get_logger(__name__)

SPATIAL_NODES = 64
KERNEL_TABLE = 4097


def _plateau_kernel(s: np.ndarray) -> np.ndarray:
    """1 on |s| ≤ ½, smooth decay to 0 at |s| = 1."""
    return 1.0 - smooth_step((np.abs(s) - 0.5) / 0.5)


@lru_cache(maxsize=1)
def _kernel_tables():
    nodes, weights = np.polynomial.legendre.leggauss(256)
    mass = float(np.sum(weights * _plateau_kernel(nodes)))
    grid = np.linspace(-1.0, 1.0, KERNEL_TABLE)
    # cumulative ∫_{-1}^{s} k / mass, evaluated by Gauss–Legendre on each [−1, s]
    half = 0.5 * (grid + 1.0)
    points = -1.0 + half[:, None] * (nodes[None, :] + 1.0)
    cumulative = half * np.sum(weights[None, :] * _plateau_kernel(points), axis=1) / mass
    return grid, cumulative, mass


def kernel_cumulative(s) -> np.ndarray:
    """Kc(s) = ∫_{-∞}^{s} k / ∫k, 0 below −1, 1 above 1."""
    grid, table, _ = _kernel_tables()
    return np.interp(np.asarray(s, dtype=float), grid, table, left=0.0, right=1.0)


def shear(x1, epsilon: float, tau: float):
    return (2.0 * epsilon * tau / 3.0) * np.sin(2.0 * np.pi * np.asarray(x1, dtype=float))


def epsilon_margin(epsilon: float, epsilon0: float) -> float:
    """Spread of the mollified slab edge in units of τ."""
    return epsilon0 * (1.0 + 4.0 * np.pi * epsilon / 3.0)


@dataclass(frozen=True)
class CutoffFamily:
    """η_l for 1 ≤ l ≤ N_q together with η₋₁ and ℵ."""
    partition: TimePartition
    epsilon: float
    epsilon0: float
    tau_prev: float

    @property
    def indices(self) -> List[int]:
        return list(range(1, self.partition.count + 1))

    def is_straight(self, l: int) -> bool:
        return l < self.partition.straight_count

    # -- straight ------------------------------------------------------------

    def eta_straight(self, l: int, t):
        tau = self.partition.tau
        t_l = self.partition.t(l)
        t = np.asarray(t, dtype=float)
        width = tau / 6.0
        out = smooth_step((t - t_l - width) / width) * smooth_step((t_l + 5.0 * width - t) / width)
        return out if out.ndim else float(out)

    # -- squiggling ----------------------------------------------------------

    def eta_squiggle(self, l: int, x1, t: float) -> np.ndarray:
        """η̃_l(x₁, t) for an array of x₁."""
        tau = self.partition.tau
        lower = l * tau + self.epsilon * tau / 3.0
        upper = l * tau + (3.0 - self.epsilon) * tau / 3.0
        radius = self.epsilon0 * tau
        nodes, weights = np.polynomial.legendre.leggauss(SPATIAL_NODES)
        kernel = weights * _plateau_kernel(nodes)
        x1 = np.asarray(x1, dtype=float)
        shifted = shear(x1[..., None] - self.epsilon0 * nodes, self.epsilon, tau)
        u = t - shifted
        gate = kernel_cumulative((u - lower) / radius) - kernel_cumulative((u - upper) / radius)
        return np.clip(np.sum(kernel * gate, axis=-1) / np.sum(kernel), 0.0, 1.0)

    # -- dispatch -------------------------------------------------------------

    def eta(self, l: int, x1, t: float) -> np.ndarray:
        """η_l on the x₁ samples at time t."""
        x1 = np.asarray(x1, dtype=float)
        if self.is_straight(l):
            return np.full(x1.shape, self.eta_straight(l, t))
        return self.eta_squiggle(l, x1, t)

    def eta_grid(self, l: int, grid: Grid, t: float) -> np.ndarray:
        """η_l(·, t) on the 3-D grid (constant in x₂, x₃)."""
        x1 = np.arange(grid.n) / grid.n
        return np.broadcast_to(self.eta(l, x1, t)[:, None, None], grid.shape)

    def active(self, t: float) -> List[int]:
        """Indices l whose time support can contain t."""
        tau = self.partition.tau
        reach = tau * (self.epsilon / 3.0 + epsilon_margin(self.epsilon, self.epsilon0))
        out = []
        for l in self.indices:
            if self.is_straight(l):
                lo, hi = self.partition.t(l) + tau / 6.0, self.partition.t(l) + 5.0 * tau / 6.0
            else:
                lo, hi = self.partition.t(l) - reach, self.partition.t(l + 1) + reach
            if lo < t < hi:
                out.append(l)
        return out

    def squared_mass(self, t: float, samples: int = 512,
                     weight: Optional[np.ndarray] = None) -> float:
        """Σ_l ∫η_l²(·, t), optionally against a weight sampled on [0, 1)³ along x₁."""
        x1 = np.arange(samples) / samples
        total = 0.0
        for l in self.active(t):
            values = self.eta(l, x1, t) ** 2
            if weight is not None:
                values = values * weight
            total += float(np.mean(values))
        return total

    # -- handover -------------------------------------------------------------

    def eta_minus1(self, t):
        """1 on [0, t_{N⁰}], 0 from t_{N⁰+1} on."""
        start = self.partition.t(self.partition.straight_count)
        out = 1.0 - smooth_step((np.asarray(t, dtype=float) - start) / self.partition.tau)
        return out if out.ndim else float(out)

    def aleph(self, t):
        """1 for t < T − τ_{q−1}, 0 for t > T − τ_q."""
        start = self.partition.horizon - self.tau_prev
        out = 1.0 - smooth_step((np.asarray(t, dtype=float) - start)
                                / (self.tau_prev - self.partition.tau))
        return out if out.ndim else float(out)

    def to_dict(self) -> Dict:
        return {"epsilon": self.epsilon, "epsilon0": self.epsilon0, "tau_prev": self.tau_prev,
                **self.partition.to_dict()}


def squiggle_eta(partition: TimePartition, epsilon: float, epsilon0: float,
                 tau_prev: Optional[float] = None) -> CutoffFamily:
    """Cutoff family for the partition.

    Raises:
        PreconditionError: BadEpsilons unless ε ∈ (0, 1/3) and ε₀ leaves room for
            both the plateau on I_l and the gap between neighbouring slabs
    """
    margin = epsilon_margin(epsilon, epsilon0) if epsilon0 > 0 else math.inf
    require(0.0 < epsilon < 1.0 / 3.0 and epsilon0 > 0.0
            and margin < min(1.0 / 3.0 - epsilon, epsilon / 3.0),
            ErrorCode.BAD_EPSILONS, "cutoff parameters leave no plateau or no gap",
            epsilon=epsilon, epsilon0=epsilon0)
    tau_prev = 2.0 * partition.tau if tau_prev is None else tau_prev
    require(tau_prev > partition.tau, ErrorCode.BAD_TAU, "τ_{q−1} must exceed τ_q",
            tau=partition.tau, tau_prev=tau_prev)
    family = CutoffFamily(partition, float(epsilon), float(epsilon0), float(tau_prev))
    logger.debug("Cutoffs built", **family.to_dict())
    return family


def minimum_squared_mass(family: CutoffFamily, samples: int = 200,
                         x_samples: int = 512) -> float:
    """min over t ∈ [t_{N⁰}, T] of Σ_l ∫η_l²."""
    start = family.partition.t(family.partition.straight_count)
    times = np.linspace(start, family.partition.horizon, samples)
    return min(family.squared_mass(float(t), x_samples) for t in times)

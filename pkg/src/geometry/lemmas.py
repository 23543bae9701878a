"""
Positive decompositions of matrices near the origin (skew) and near the
identity (symmetric) along a direction set.

Skew case: M = Σ_k Γ_k(M) (k̄⊗k̄̄ − k̄̄⊗k̄) over Λ_b with the affine map
Γ(M) = c⁰ + G⁺ axial(M), where c⁰ is a strictly positive null combination
of the generators and G⁺ the pseudo-inverse of the generator matrix.

Symmetric case: R = Σ_k Γ_k(R) k̄⊗k̄ over Λ_v, the unique expansion in the
basis of six rank-one matrices.

Both radii are certified in closed form: on the ball of Frobenius radius ε
every coefficient stays above half of the smallest centre coefficient.
Amplitudes used by the perturbations are Γ^{1/2}.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import structlog
from scipy.optimize import linprog

from ..utils.error_handling import ErrorCode, PreconditionError, require
from .directions import DirectionSet

logger = structlog.get_logger(__name__)

BASE_LOWER_BOUND = 0.1
CONDITION_LIMIT = 1e12
SQRT2 = np.sqrt(2.0)


def axial(m: np.ndarray) -> np.ndarray:
    """Axial vector (M_32, M_13, M_21) of skew matrices, shape (3, 3, ...) -> (3, ...)."""
    return np.stack([m[2, 1], m[0, 2], m[1, 0]])


def skew_from_axial(a: np.ndarray) -> np.ndarray:
    zero = np.zeros_like(a[0])
    return np.stack([
        np.stack([zero, -a[2], a[1]]),
        np.stack([a[2], zero, -a[0]]),
        np.stack([-a[1], a[0], zero]),
    ])


def sym_vec(r: np.ndarray) -> np.ndarray:
    """Isometric coordinates of symmetric matrices, shape (3, 3, ...) -> (6, ...)."""
    return np.stack([r[0, 0], r[1, 1], r[2, 2], SQRT2 * r[0, 1], SQRT2 * r[0, 2], SQRT2 * r[1, 2]])


def skew_generator(triple) -> np.ndarray:
    kbar, kbarbar = triple.kbar_array, triple.kbarbar_array
    return np.outer(kbar, kbarbar) - np.outer(kbarbar, kbar)


def sym_generator(triple) -> np.ndarray:
    kbar = triple.kbar_array
    return np.outer(kbar, kbar)


def _frobenius(m: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(m ** 2, axis=(0, 1)))


@dataclass
class Decomposition:
    """Affine coefficient map Γ(X) = center + apply(X − X₀) with a certified radius."""
    directions: DirectionSet
    generators: np.ndarray
    center: np.ndarray
    inverse: np.ndarray
    epsilon: float
    kind: str

    def _coordinates(self, m: np.ndarray) -> np.ndarray:
        if self.kind == "skew":
            return axial(m)
        return sym_vec(m - np.eye(3).reshape((3, 3) + (1,) * (m.ndim - 2)))

    def distance(self, m: np.ndarray) -> np.ndarray:
        """Frobenius distance to the ball centre."""
        if self.kind == "skew":
            return _frobenius(m)
        return _frobenius(m - np.eye(3).reshape((3, 3) + (1,) * (m.ndim - 2)))

    def coefficients(self, m: np.ndarray, check: bool = True) -> np.ndarray:
        """Γ(M) for M of shape (3, 3) or (3, 3, ...); result shape (K, ...)."""
        m = np.asarray(m, dtype=float)
        if check:
            worst = float(np.max(self.distance(m)))
            if worst > self.epsilon:
                raise PreconditionError(
                    ErrorCode.OUTSIDE_BALL, f"matrix lies outside the {self.kind} ball",
                    details={"distance": worst, "epsilon": self.epsilon},
                )
        coords = self._coordinates(m)
        shift = np.tensordot(self.inverse, coords, axes=1)
        return self.center.reshape((-1,) + (1,) * (shift.ndim - 1)) + shift

    def amplitudes(self, m: np.ndarray, check: bool = True) -> np.ndarray:
        """Γ(M)^{1/2}, the coefficient whose square recomposes M."""
        return np.sqrt(self.coefficients(m, check))

    def recompose(self, coeffs: np.ndarray) -> np.ndarray:
        """Σ_k coeffs_k G_k with G_k the generator matrices."""
        return np.tensordot(self.generators, coeffs, axes=([0], [0]))

    def ray_search(self, directions: int = 10_000, seed: int = 0,
                   floor: float = 0.0) -> float:
        """Largest radius keeping all coefficients above ``floor`` along random rays."""
        rng = np.random.default_rng(seed)
        dim = 3 if self.kind == "skew" else 6
        rays = rng.standard_normal((dim, directions))
        rays /= np.linalg.norm(rays, axis=0)
        slopes = self.inverse @ rays
        if self.kind == "skew":
            slopes = slopes / SQRT2
        margin = (self.center - floor)[:, None]
        with np.errstate(divide="ignore"):
            limits = np.where(slopes < 0, margin / -slopes, np.inf)
        return float(np.min(limits))


def _certified_radius(center: np.ndarray, inverse: np.ndarray, scale: float) -> float:
    margin = center - center.min() / 2.0
    row_norms = np.linalg.norm(inverse, axis=1) / scale
    return float(np.min(margin / row_norms))


def skew_decomposition(directions: DirectionSet) -> Decomposition:
    """Coefficient map for skew matrices along Λ_b."""
    generators = np.stack([skew_generator(t) for t in directions])
    g = axial(np.moveaxis(generators, 0, -1))
    require(np.linalg.matrix_rank(g) == 3, ErrorCode.SINGULAR_BASIS,
            "skew generators do not span the skew space", size=len(directions))
    result = linprog(np.ones(len(directions)), A_eq=g, b_eq=np.zeros(3),
                     bounds=[(BASE_LOWER_BOUND, None)] * len(directions), method="highs")
    require(result.status == 0, ErrorCode.SINGULAR_BASIS,
            "no strictly positive null combination of the skew generators",
            reason=result.message)
    center = result.x
    inverse = np.linalg.pinv(g)
    # ‖M‖_F = √2 |axial(M)|
    epsilon = _certified_radius(center, inverse, SQRT2)
    directions.epsilon = epsilon
    logger.debug("Skew decomposition ready", center=center.tolist(), epsilon=epsilon)
    return Decomposition(directions, generators, center, inverse, epsilon, "skew")


def sym_decomposition(directions: DirectionSet) -> Decomposition:
    """Coefficient map for symmetric matrices near Id along Λ_v."""
    generators = np.stack([sym_generator(t) for t in directions])
    basis = sym_vec(np.moveaxis(generators, 0, -1))
    require(basis.shape == (6, 6), ErrorCode.SINGULAR_BASIS,
            "symmetric decomposition needs six directions", size=len(directions))
    condition = float(np.linalg.cond(basis))
    require(condition < CONDITION_LIMIT, ErrorCode.SINGULAR_BASIS,
            "rank-one matrices do not form a basis", cond=condition)
    inverse = np.linalg.inv(basis)
    center = inverse @ sym_vec(np.eye(3))
    require(bool(np.all(center > 0)), ErrorCode.SINGULAR_BASIS,
            "identity has a non-positive expansion", center=center.tolist())
    epsilon = _certified_radius(center, inverse, 1.0)
    directions.epsilon = epsilon
    logger.debug("Symmetric decomposition ready", condition=condition, epsilon=epsilon)
    return Decomposition(directions, generators, center, inverse, epsilon, "sym")


def decompose_skew(m: np.ndarray, decomposition: Decomposition) -> np.ndarray:
    """Positive coefficients a_{b,k} with M = Σ a_{b,k}(k̄⊗k̄̄ − k̄̄⊗k̄)."""
    m = np.asarray(m, dtype=float)
    require(np.allclose(m, -np.swapaxes(m, 0, 1), atol=1e-12), ErrorCode.UNSUPPORTED_SPEC,
            "matrix is not skew-symmetric")
    return decomposition.coefficients(m)


def decompose_sym(r: np.ndarray, decomposition: Decomposition) -> np.ndarray:
    """Positive coefficients a_{v,k} with R = Σ a_{v,k} k̄⊗k̄."""
    r = np.asarray(r, dtype=float)
    require(np.allclose(r, np.swapaxes(r, 0, 1), atol=1e-12), ErrorCode.UNSUPPORTED_SPEC,
            "matrix is not symmetric")
    return decomposition.coefficients(r)


def pointwise_coefficient_fields(
    stress: np.ndarray,
    gap: np.ndarray,
    decomposition: Decomposition,
    eta: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Amplitude fields a_{·,l,k} on the grid.

    Skew: a_{b,l,k} = η ρ^{1/2} Γ_k(M_b/ρ)^{1/2}.
    Symmetric: a_{v,l,k} = η ρ^{1/2} Γ_k(Id − R_v/ρ)^{1/2}.
    Squares recompose η²M_b and η²(ρ Id − R_v) respectively.

    Args:
        stress: samples of shape (3, 3, n, n, n)
        gap: positive samples of shape (n, n, n) (or broadcastable)
        decomposition: skew or symmetric coefficient map
        eta: cutoff samples, defaults to 1

    Returns:
        Array of shape (K, n, n, n)
    """
    gap = np.broadcast_to(np.asarray(gap, dtype=float), stress.shape[2:])
    eta = np.ones(stress.shape[2:]) if eta is None else np.broadcast_to(eta, stress.shape[2:])
    active = eta != 0
    if np.any(gap[active] <= 0):
        raise PreconditionError(ErrorCode.GAP_VANISHES, "gap vanishes on the cutoff support",
                                details={"min_gap": float(np.min(gap[active]))})
    safe_gap = np.where(active, gap, 1.0)
    scaled = stress / safe_gap
    if decomposition.kind == "sym":
        scaled = np.eye(3).reshape(3, 3, 1, 1, 1) - scaled
    scaled = np.where(active, scaled, (np.eye(3) if decomposition.kind == "sym"
                                      else np.zeros((3, 3))).reshape(3, 3, 1, 1, 1))
    amplitudes = decomposition.amplitudes(scaled)
    return eta * np.sqrt(safe_gap) * amplitudes

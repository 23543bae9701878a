"""
Greedy shifts making the box-flow supports pairwise disjoint at t = 0.

On a grid, candidates are gridpoints visited in a seeded random order; a
candidate is accepted when the rolled support does not meet the union of the
supports already placed.  The first triple keeps the zero shift.

Concentrated flows (r⁻¹ of order λ) have supports far below any 3-D grid
spacing.  For those the supports are compared exactly: the support of a flow
is the set where the fractional parts of its three phases lie in
[0, w r] × [0, w r̄] × [0, w r̄̄].  Every preimage box of one flow is pushed
through the phase map of the other, and the pair is certified disjoint when
each image misses the other flow's box in at least one phase, modulo 1.
"""
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog

from ..geometry.directions import DirectionTriple
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, ResolutionError
from .box import BoxFlow, FlowParams

logger = structlog.get_logger(__name__)

Shift = Tuple[float, float, float]


def compute_shifts(triples: Sequence[DirectionTriple], params: FlowParams, grid: Grid,
                   seed: int = 0, budget: int = 100_000) -> Dict[int, Shift]:
    """Shifts x_k (index in ``triples`` -> point of [0,1)³) with disjoint supports.

    Raises:
        ResolutionError: PlacementFailed when the candidate budget runs out
    """
    rng = np.random.default_rng(seed)
    occupied = np.zeros(grid.shape, dtype=bool)
    shifts: Dict[int, Shift] = {}
    tried = 0
    n = grid.n
    for index, triple in enumerate(triples):
        mask = BoxFlow(triple, params, grid).support(0.0)
        if index == 0:
            candidates: List[int] = [0]
        else:
            candidates = rng.permutation(n ** 3).tolist()
        placed = False
        for flat in candidates:
            tried += 1
            if tried > budget:
                break
            offset = np.unravel_index(flat, grid.shape)
            rolled = np.roll(mask, shift=offset, axis=(0, 1, 2))
            if not np.any(rolled & occupied):
                occupied |= rolled
                shifts[index] = tuple(float(o) / n for o in offset)
                placed = True
                break
        if not placed:
            raise ResolutionError(
                ErrorCode.PLACEMENT_FAILED, "no disjoint placement of the box-flow supports",
                details={"placed": len(shifts), "total": len(triples), "tried": tried,
                         "occupied_fraction": float(occupied.mean())},
            )
    logger.info("Shifts placed", triples=len(triples), tried=tried,
                occupied_fraction=float(occupied.mean()))
    return shifts


def support_overlaps(flows: Sequence[BoxFlow], t: float = 0.0) -> List[Tuple[int, int, float]]:
    """Pairs whose pointwise product does not vanish, with the max |product|."""
    values = [f.value(t) for f in flows]
    overlaps = []
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            worst = float(np.max(np.abs(values[i] * values[j])))
            if worst != 0.0:
                overlaps.append((i, j, worst))
    return overlaps


# -- exact certification ---------------------------------------------------

INTERVAL_PAD = 1e-9


def _phase_maps(triples: Sequence[DirectionTriple], params: FlowParams) -> List[np.ndarray]:
    scale = params.sigma * params.n_lambda
    return [scale * triple.vectors for triple in triples]


def _support_lengths(params: FlowParams) -> np.ndarray:
    w = params.support_width
    return np.array([w / params.r_inv, w / params.rbar_inv, w / params.rbarbar_inv])


def _travel(params: FlowParams, t: float) -> np.ndarray:
    scale = params.sigma * params.n_lambda
    return np.array([0.0, math.fmod(scale * params.mu * t, 1.0), 0.0])


def _may_meet(a_map: np.ndarray, b_map: np.ndarray, lengths: np.ndarray,
              offset: np.ndarray, travel: np.ndarray) -> bool:
    """Whether some preimage box of flow A lands in the box of flow B.

    ``offset`` is W_B(x_A − x_B).  Points of A's support are
    x = x_A + W_A⁻¹(u + m − o) with u in the box and m ∈ ℤ³, so B's phases
    are T(u + m − o) + offset + o with T = W_B W_A⁻¹.
    """
    transfer = b_map @ np.linalg.inv(a_map)
    radius = math.ceil(float(np.max(np.linalg.norm(a_map, axis=1))) * math.sqrt(3.0)) + 2
    span = np.arange(-radius, radius + 1, dtype=float)
    m = np.stack(np.meshgrid(span, span, span, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = (m - travel) @ transfer.T + offset + travel
    spread = transfer * lengths
    lo = centers + np.minimum(spread, 0.0).sum(axis=1) - INTERVAL_PAD
    hi = centers + np.maximum(spread, 0.0).sum(axis=1) + INTERVAL_PAD
    meets = np.floor(hi) >= np.ceil(lo - lengths)
    return bool(np.any(np.all(meets, axis=1)))


def certified_overlaps(triples: Sequence[DirectionTriple], params: FlowParams,
                       shifts: Dict[int, Shift], t: float = 0.0) -> List[Tuple[int, int]]:
    """Pairs whose supports are not certified disjoint at time t (no grid)."""
    maps, lengths = _phase_maps(triples, params), _support_lengths(params)
    travel = _travel(params, t)
    overlaps = []
    for i in range(len(triples)):
        for j in range(i + 1, len(triples)):
            offset = maps[j] @ (np.asarray(shifts[i]) - np.asarray(shifts[j]))
            if _may_meet(maps[i], maps[j], lengths, offset, travel):
                overlaps.append((i, j))
    return overlaps


def certified_shifts(triples: Sequence[DirectionTriple], params: FlowParams,
                     seed: int = 0, budget: int = 10_000) -> Dict[int, Shift]:
    """Shifts in [0,1)³ whose supports are certified disjoint at t = 0.

    Raises:
        ResolutionError: PlacementFailed when the candidate budget runs out
    """
    rng = np.random.default_rng(seed)
    maps, lengths = _phase_maps(triples, params), _support_lengths(params)
    travel = _travel(params, 0.0)
    shifts: Dict[int, Shift] = {}
    tried = 0
    for index in range(len(triples)):
        while index not in shifts:
            tried += 1
            if tried > budget:
                raise ResolutionError(
                    ErrorCode.PLACEMENT_FAILED, "no certified placement of the box-flow supports",
                    details={"placed": len(shifts), "total": len(triples), "tried": tried},
                )
            candidate = np.zeros(3) if index == 0 else rng.random(3)
            if not any(_may_meet(maps[j], maps[index], lengths,
                                 maps[index] @ (np.asarray(placed) - candidate), travel)
                       for j, placed in shifts.items()):
                shifts[index] = tuple(float(c) for c in candidate)
    logger.info("Certified shifts placed", triples=len(triples), tried=tried)
    return shifts

"""
Gluing exact local solutions with the straight partition of unity.

Local solution j lives on [t_j, t_{j+2}], starts from the mollified state at
t_j and carries the weight χ_{j+1}.  At any time at most two weights are
non-zero; writing χ for the weight of the earlier solution A and Δv, Δb for
the differences A − B,

    v̄  = χ v_A + (1 − χ) v_B
    p̄  = χ p_A + (1 − χ) p_B + ⅓ χ(1 − χ)(|Δv|² − |Δb|²)
    R̊̄ = ∂_tχ ℛΔv − χ(1 − χ)(Δv∘⊗Δv − Δb∘⊗Δb)
    M̊̄ = ∂_tχ ℛ_aΔb − χ(1 − χ)(Δv⊗Δb − Δb⊗Δv)

and ∂_t v̄ = ∂_tχ Δv + χ ∂_t v_A + (1 − χ) ∂_t v_B uses the exact right sides.
"""
import asyncio
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..cutoffs.partition import TimePartition
from ..operators.inverse_divergence import inv_div_anti, inv_div_sym
from ..torus.field import (SpectralField, dot, leray_project, mollify, remove_mean,
                           tracefree_outer, wedge)
from ..torus.tfld import write_field
from ..utils.error_handling import ErrorCode, PreconditionError, pipeline_stage
from .mhd import Integrator, LocalSolution, MHDState, evaluate_locals, mhd_rhs
from .stresses import StressPair, relaxed_residual

logger = structlog.get_logger(__name__)

MEAN_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class GluedState:
    t: float
    v: SpectralField
    b: SpectralField
    p: SpectralField
    R: SpectralField
    M: SpectralField
    dv_dt: SpectralField
    db_dt: SpectralField

    @property
    def stresses(self) -> StressPair:
        return StressPair(self.R, self.M)

    def defect(self) -> Dict[str, float]:
        return relaxed_residual(self.v, self.b, self.p, self.dv_dt, self.db_dt, self.stresses)


def active_weights(partition: TimePartition, t: float) -> List[Tuple[int, float, float]]:
    """(j, χ_{j+1}(t), ∂_tχ_{j+1}(t)) for the local solutions with non-zero weight."""
    out = []
    for j in range(partition.count):
        weight = partition.chi(j + 1, t)
        if weight != 0.0:
            out.append((j, weight, partition.chi_prime(j + 1, t)))
    return out


def _check_means(dv: SpectralField, db: SpectralField):
    worst = float(max(np.max(np.abs(dv.mean())), np.max(np.abs(db.mean()))))
    if worst > MEAN_TOLERANCE:
        raise PreconditionError(ErrorCode.MEAN_MISMATCH,
                                "consecutive local solutions have different means",
                                details={"mean_difference": worst})


def glue(states: Dict[int, MHDState], partition: TimePartition, t: float) -> GluedState:
    """Glued fields, pressure, stresses and time derivatives at t.

    Raises:
        PreconditionError: MeanMismatch when the two active solutions differ in mean
    """
    weights = active_weights(partition, t)
    rhs = {j: mhd_rhs(states[j].v, states[j].b) for j, _, _ in weights}
    if len(weights) == 1:
        j = weights[0][0]
        dv, db, p = rhs[j]
        zero = StressPair.zeros(states[j].grid)
        return GluedState(t, states[j].v, states[j].b, remove_mean(p), zero.R, zero.M, dv, db)

    (a, chi, chi_prime), (b_index, _, _) = weights
    A, B = states[a], states[b_index]
    (dva, dba, pa), (dvb, dbb, pb) = rhs[a], rhs[b_index]
    diff_v, diff_b = A.v - B.v, A.b - B.b
    _check_means(diff_v, diff_b)
    mix = chi * (1.0 - chi)

    v = A.v * chi + B.v * (1.0 - chi)
    b = A.b * chi + B.b * (1.0 - chi)
    p = remove_mean(pa * chi + pb * (1.0 - chi)
                    + (dot(diff_v, diff_v) - dot(diff_b, diff_b)) * (mix / 3.0))
    r = inv_div_sym(remove_mean(diff_v)) * chi_prime \
        - (tracefree_outer(diff_v, diff_v) - tracefree_outer(diff_b, diff_b)) * mix
    m = inv_div_anti(leray_project(remove_mean(diff_b))) * chi_prime - wedge(diff_v, diff_b) * mix
    dv_dt = diff_v * chi_prime + dva * chi + dvb * (1.0 - chi)
    db_dt = diff_b * chi_prime + dba * chi + dbb * (1.0 - chi)
    return GluedState(t, v, b, p, r, m, dv_dt, db_dt)


class GluedFlow:
    """Local solutions seeded from a source state and glued on demand."""

    def __init__(self, source: Callable[[float], MHDState], partition: TimePartition,
                 ell: float, integrator: Integrator, local_timeout: float = 900.0):
        self.source = source
        self.partition = partition
        self.ell = ell
        self.integrator = integrator
        self.local_timeout = local_timeout
        self._locals: Dict[int, LocalSolution] = {}

    def local(self, j: int) -> LocalSolution:
        if j not in self._locals:
            seed = self.source(self.partition.t(j))
            initial = MHDState(mollify(seed.v, self.ell), mollify(seed.b, self.ell),
                               self.partition.t(j))
            self._locals[j] = LocalSolution(j, initial, self.partition.t(j + 2), self.integrator)
        return self._locals[j]

    async def at_async(self, t: float) -> GluedState:
        indices = [j for j, _, _ in active_weights(self.partition, t)]
        solutions = [self.local(j) for j in indices]
        states = await evaluate_locals(solutions, t, self.local_timeout)
        return glue(dict(zip(indices, states)), self.partition, t)

    def at(self, t: float) -> GluedState:
        return asyncio.run(self.at_async(t))

    def fields(self, t: float) -> MHDState:
        glued = self.at(t)
        return MHDState(glued.v, glued.b, t)


@pipeline_stage("glue")
def glue_samples(flow: GluedFlow, times: Sequence[float]) -> List[GluedState]:
    """Glued states at increasing sample times."""
    return [flow.at(float(t)) for t in sorted(times)]


def write_checkpoints(states: Sequence[GluedState], directory, label: str = "glued") -> Path:
    """TFLD files for v̄, b̄, R̊̄, M̊̄ per sample plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for index, state in enumerate(states):
        entry = {"t": state.t, "files": {}}
        for name in ("v", "b", "R", "M"):
            path = write_field(directory / f"{label}_{name}_{index:04d}.tfld",
                               getattr(state, name), state.t, f"{label}.{name}")
            entry["files"][name] = path.name
        manifest.append(entry)
    manifest_path = directory / f"{label}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info("Checkpoints written", directory=str(directory), samples=len(states))
    return manifest_path


def interior_j_times(partition: TimePartition, per_interval: int = 3,
                     margin: Optional[float] = None) -> List[float]:
    """Sample times strictly inside the J_l within [0, T], away from the I_l."""
    margin = partition.tau / 12.0 if margin is None else margin
    times = []
    for l in range(partition.count + 1):
        lo, hi = partition.J(l)
        lo, hi = max(lo + margin, 0.0), min(hi - margin, partition.horizon)
        if hi > lo:
            times.extend(np.linspace(lo, hi, per_interval).tolist())
    return times

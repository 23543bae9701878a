"""
Amplitude fields of the perturbation flows at one time.

The order of construction follows the dependencies between the gaps:

1. the helicity gap h_{b,q} and the magnetic gap ρ_b,
2. the magnetic amplitudes a_{b,l,k} = η_l ρ_b^{1/2} Γ_k(M_b/ρ_b)^{1/2} and the
   helicity amplitudes η_l h_{b,q}^{1/2}, which fix the energy E(t) of
   w^{(p)}_b, d^{(p)}, w^{(h)} and d^{(h)},
3. R_v, the switch χ_v, the energy gaps ρ_q, ρ_{q,0}, ρ_{v,q} and finally
   a_{v,l,k} = η_l ρ_{v,q}^{1/2} Γ_k(Id − R_v/ρ_{v,q})^{1/2}.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from ..cutoffs.eta import CutoffFamily
from ..cutoffs.gaps import (EnergyGaps, GapScales, HelicityGaps, corrected_stress, energy_gaps,
                            helicity_gaps, magnetic_gap, velocity_switch)
from ..flows.box import BoxFlow, FlowParams
from ..flows.oscillation import FastOscillation, fast_oscillation
from ..flows.shifts import compute_shifts, support_overlaps
from ..geometry.directions import DirectionCatalog
from ..geometry.lemmas import (Decomposition, pointwise_coefficient_fields, skew_decomposition,
                               sym_decomposition)
from ..solver.gluing import GluedState
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, PreconditionError

logger = structlog.get_logger(__name__)

KINDS = ("b", "v", "s")


@dataclass(frozen=True, eq=False)
class FlowLibrary:
    """Box flows, fast oscillations and decompositions shared by every time sample."""
    catalog: DirectionCatalog
    params: FlowParams
    grid: Grid
    flows: Dict[str, List[BoxFlow]]
    oscillations: Dict[str, List[FastOscillation]]
    skew: Decomposition
    sym: Decomposition

    def all_flows(self) -> List[BoxFlow]:
        return [f for kind in KINDS for f in self.flows[kind]]

    def overlaps(self, t: float = 0.0):
        return support_overlaps(self.all_flows(), t)


def build_library(catalog: DirectionCatalog, params: FlowParams, grid: Grid,
                  seed: int = 0, budget: int = 100_000) -> FlowLibrary:
    """Place the box flows of Λ_b ∪ Λ_v ∪ Λ_s with disjoint supports.

    Raises:
        ResolutionError: PlacementFailed, UnderResolved
    """
    labelled = catalog.all_triples()
    shifts = compute_shifts([t for _, t in labelled], params, grid, seed, budget)
    params = params.with_shifts(shifts)
    flows: Dict[str, List[BoxFlow]] = {kind: [] for kind in KINDS}
    oscillations: Dict[str, List[FastOscillation]] = {kind: [] for kind in KINDS}
    for index, (label, triple) in enumerate(labelled):
        flows[label].append(BoxFlow(triple, params, grid, shifts[index]))
        oscillations[label].append(fast_oscillation(triple, params.lam, params.n_lambda, grid))
    library = FlowLibrary(catalog, params, grid, flows, oscillations,
                          skew_decomposition(catalog.b), sym_decomposition(catalog.v))
    logger.info("Flow library built", triples=len(labelled), lam=params.lam, mu=params.mu,
                skew_radius=library.skew.epsilon, sym_radius=library.sym.epsilon)
    return library


@dataclass(frozen=True, eq=False)
class Amplitude:
    """One coefficient a_{·,l,k} on the grid together with its flows.

    ``rate`` is ∂_t(a²) when the caller knows it; only the cancellation
    checks need it.
    """
    kind: str
    l: int
    index: int
    flow: BoxFlow
    oscillation: FastOscillation
    value: np.ndarray
    rate: Optional[np.ndarray] = None

    @property
    def square(self) -> np.ndarray:
        return self.value ** 2

    @property
    def kbar(self) -> np.ndarray:
        return self.flow.triple.kbar_array

    @property
    def kbarbar(self) -> np.ndarray:
        return self.flow.triple.kbarbar_array


def flow_samples(amplitudes: Sequence[Amplitude], t: float, direction: str,
                 kinds: Sequence[str] = KINDS) -> np.ndarray:
    """Σ a ψ_k φ_{k,k̄,k̄̄}(t) times k̄ or k̄̄ on the grid, shape (3, n, n, n)."""
    out = None
    for a in amplitudes:
        if a.kind not in kinds:
            continue
        vector = a.kbar if direction == "kbar" else a.kbarbar
        scalar = a.value * a.oscillation.psi * a.flow.value(t)
        term = vector[:, None, None, None] * scalar[None]
        out = term if out is None else out + term
    if out is None:
        raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, "no amplitudes of the requested kinds",
                                details={"kinds": list(kinds)})
    return out


@dataclass(eq=False)
class CoefficientSet:
    t: float
    amplitudes: List[Amplitude]
    energy: EnergyGaps
    helicity: HelicityGaps
    rho_b: np.ndarray
    chi_v: np.ndarray
    flow_energy: float
    eta_mass: float = 0.0
    meta: Dict = field(default_factory=dict)

    def of_kind(self, kind: str) -> List[Amplitude]:
        return [a for a in self.amplitudes if a.kind == kind]

    def to_dict(self) -> Dict:
        return {
            "t": self.t,
            "amplitudes": len(self.amplitudes),
            "energy": self.energy.to_dict(),
            "helicity": self.helicity.to_dict(),
            "rho_b_min": float(np.min(self.rho_b)),
            "rho_b_max": float(np.max(self.rho_b)),
            "chi_v_max": float(np.max(self.chi_v)),
            "flow_energy": self.flow_energy,
            "eta_mass": self.eta_mass,
        }


def _zero_vector(grid: Grid) -> np.ndarray:
    return np.zeros((3,) + grid.shape)


def compute_coefficients(glued: GluedState, library: FlowLibrary, cutoffs: CutoffFamily,
                         scales: GapScales, e_t: float, h_t: float) -> CoefficientSet:
    """All amplitude fields at the time of ``glued``.

    Raises:
        PreconditionError: GapNegative, GapVanishes, OutsideBall
    """
    t, grid = glued.t, library.grid
    active = cutoffs.active(t)
    etas = {l: cutoffs.eta_grid(l, grid, t) for l in active}

    helicity = helicity_gaps(h_t, glued.v, glued.b, t, cutoffs, scales)
    m_b, rho_b = magnetic_gap(glued.M.to_real(), scales)

    amplitudes: List[Amplitude] = []
    for l in active:
        fields = pointwise_coefficient_fields(m_b, rho_b, library.skew, etas[l])
        for index, (flow, osc) in enumerate(zip(library.flows["b"], library.oscillations["b"])):
            amplitudes.append(Amplitude("b", l, index, flow, osc, fields[index]))
        root = np.sqrt(max(helicity.h_b, 0.0))
        for index, (flow, osc) in enumerate(zip(library.flows["s"], library.oscillations["s"])):
            amplitudes.append(Amplitude("s", l, index, flow, osc, np.asarray(etas[l]) * root))

    if amplitudes:
        wp_b = flow_samples(amplitudes, t, "kbar", ("b",))
        dp = flow_samples(amplitudes, t, "kbarbar", ("b",))
        wh = flow_samples(amplitudes, t, "kbarbar", ("s",))
        flow_energy = float(np.mean(np.sum(wp_b ** 2 + dp ** 2 + 2.0 * wh ** 2, axis=0)))
    else:
        flow_energy = 0.0

    r_v = corrected_stress(glued.R.to_real(), m_b, rho_b, library.skew)
    chi_v = velocity_switch(r_v, scales)
    energy = energy_gaps(e_t, glued.v, glued.b, flow_energy, t, cutoffs, chi_v, scales)
    for l in active:
        fields = pointwise_coefficient_fields(r_v, energy.rho_v, library.sym, etas[l])
        for index, (flow, osc) in enumerate(zip(library.flows["v"], library.oscillations["v"])):
            amplitudes.append(Amplitude("v", l, index, flow, osc, fields[index]))

    eta_mass = float(sum(np.mean(np.asarray(etas[l]) ** 2) for l in active))
    logger.debug("Coefficients computed", t=t, active=active, flow_energy=flow_energy,
                 rho_q=energy.rho_q, h_b=helicity.h_b)
    return CoefficientSet(t, amplitudes, energy, helicity, rho_b, chi_v, flow_energy, eta_mass,
                          meta={"active": active})


def corrector_ratio(amplitudes: Sequence[Amplitude], t: float) -> float:
    """max_k ‖∇(a φ)‖_∞ / (λ N_Λ ‖a φ‖_∞), the size the corrector is expected to have."""
    ratios = []
    for a in amplitudes:
        values = a.value * a.flow.value(t)
        top = float(np.max(np.abs(values)))
        if top == 0.0:
            continue
        spacing = a.flow.grid.spacing
        slope = max(float(np.max(np.abs(np.gradient(values, spacing, axis=axis))))
                    for axis in range(3))
        ratios.append(slope / (2.0 * np.pi * a.oscillation.lam * a.flow.params.n_lambda * top))
    return max(ratios) if ratios else 0.0

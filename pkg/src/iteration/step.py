"""
One iteration step: level q → level q + 1.

The step mollifies and glues level q, places the flows, computes the
amplitudes, adds the seven perturbation families and builds the new
pressure and stresses so that the relaxed system holds exactly:

    R̊_{q+1} = ℛ[∂_t w − Δw] + (w∘⊗v̄ + v̄∘⊗w − d∘⊗b̄ − b̄∘⊗d)
              + ℛℙ_H div(w⊗w − d⊗d + R̊̄)
    M̊_{q+1} = ℛ_a[∂_t d − Δd] + (w⊗b̄ − b̄⊗w) + (v̄⊗d − d⊗v̄)
              + ℛ_aℙ_H div(w⊗d − d⊗w + M̊̄)
    p_{q+1} = p̄ − ⅔(w·v̄ − d·b̄) − Δ⁻¹div div(w⊗w − d⊗d + R̊̄)

Every estimate of the step lands in a ``Ledger``.
"""
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from ..cutoffs.eta import CutoffFamily, squiggle_eta
from ..cutoffs.partition import TimePartition, build_partition
from ..flows.box import FlowParams
from ..geometry.directions import load_direction_sets
from ..operators.inverse_divergence import (div_tensor, inv_div_anti, inv_div_sym,
                                            pressure_from_stress)
from ..perturbation.bundle import (FAMILIES, PerturbationBuilder, PerturbationBundle,
                                   family_norms)
from ..perturbation.coefficients import FlowLibrary, build_library, corrector_ratio
from ..solver.gluing import GluedFlow, GluedState
from ..solver.mhd import Integrator, MHDState
from ..solver.stresses import StressPair, time_derivative
from ..torus.field import (SpectralField, dot, gradient, laplacian, leray_project, mollify,
                           outer, remove_mean, tracefree_outer, wedge)
from ..torus.norms import l2_inner
from ..utils.config import WorkbenchSettings
from ..utils.error_handling import ErrorCode, PreconditionError, pipeline_stage
from ..utils.metrics import RESIDUAL_GAUGE
from .ledger import Ledger
from .parameters import Ladder
from .state import IterationState, LevelFields, bootstrap

logger = structlog.get_logger(__name__)

Profile = Callable[[float], float]


# -- profiles ---------------------------------------------------------------

def load_profile(path: str) -> Profile:
    """Piecewise-linear profile from a CSV with columns ``t`` and ``value``."""
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise PreconditionError(ErrorCode.BAD_FILE, f"cannot read profile {path}",
                                details={"reason": str(e)}) from e
    if not {"t", "value"} <= set(frame.columns) or len(frame) < 2:
        raise PreconditionError(ErrorCode.BAD_FILE, f"{path} needs columns t, value and two rows",
                                details={"columns": list(frame.columns)})
    frame = frame.sort_values("t")
    ts, values = frame["t"].to_numpy(float), frame["value"].to_numpy(float)
    return lambda t: float(np.interp(t, ts, values))


def default_profiles(state: IterationState,
                     settings: WorkbenchSettings) -> Tuple[Profile, Profile]:
    """e(t) and h(t): files when configured, otherwise constants above the initial data.

    The constants sit ``offset · δ_{q+1}`` above ∫(|v_in|² + |b_in|²) and
    ∫v_in·b_in; the heat flow only loses energy so the gaps stay positive.
    """
    profiles = settings.profiles
    delta = state.ladder.delta(state.q + 1)
    if profiles.energy_file:
        energy = load_profile(profiles.energy_file)
    else:
        e0 = l2_inner(state.v_in, state.v_in) + l2_inner(state.b_in, state.b_in)
        energy = partial(_constant, e0 + profiles.energy_offset * delta)
    if profiles.helicity_file:
        helicity = load_profile(profiles.helicity_file)
    else:
        h0 = l2_inner(state.v_in, state.b_in)
        helicity = partial(_constant, h0 + profiles.helicity_offset * delta)
    return energy, helicity


def _constant(value: float, t: float) -> float:
    return value


# -- the step pipeline ---------------------------------------------------------

@dataclass(eq=False)
class StepContext:
    """Everything built once per step."""
    state: IterationState
    settings: WorkbenchSettings
    partition: TimePartition
    cutoffs: CutoffFamily
    library: FlowLibrary
    glued: GluedFlow
    builder: PerturbationBuilder
    energy: Profile
    helicity: Profile

    @property
    def q(self) -> int:
        return self.state.q

    @property
    def ladder(self) -> Ladder:
        return self.state.ladder


@dataclass(eq=False)
class StepResult:
    state: IterationState
    ledger: Ledger
    context: StepContext


def flow_params(settings: WorkbenchSettings, n_lambda: int) -> FlowParams:
    flows = settings.flows
    return FlowParams(lam=flows.lam, sigma=flows.sigma, mu=flows.mu, r_inv=flows.r_inv,
                      rbar_inv=flows.rbar_inv, rbarbar_inv=flows.rbarbar_inv,
                      n_lambda=n_lambda, support_width=flows.support_width)


@pipeline_stage("prepare")
def prepare_step(state: IterationState, settings: WorkbenchSettings,
                 energy: Optional[Profile] = None,
                 helicity: Optional[Profile] = None) -> StepContext:
    """Partition, cutoffs, flow library, glued flow and perturbation builder."""
    ladder, q = state.ladder, state.q
    catalog = load_direction_sets(settings.flows.catalog)
    library = build_library(catalog, flow_params(settings, catalog.n_lambda), state.grid,
                            settings.flows.seed, settings.flows.shift_budget)
    partition = build_partition(ladder.horizon, ladder.tau)
    cutoffs = squiggle_eta(partition, settings.cutoffs.epsilon, settings.cutoffs.epsilon0,
                           ladder.tau_prev)
    solver = settings.solver
    glued = GluedFlow(state.source, partition, ladder.ell(q),
                      Integrator(solver.dt, solver.cfl, solver.blowup), solver.local_timeout)
    default_energy, default_helicity = default_profiles(state, settings)
    energy = energy or default_energy
    helicity = helicity or default_helicity
    builder = PerturbationBuilder(glued, library, cutoffs, ladder.scales(q), energy, helicity,
                                  state.v_in, state.b_in, ladder.ell(q), ladder.ell(q - 1))
    logger.info("Step prepared", q=q, count=partition.count, ell=ladder.ell(q),
                flows=len(library.all_flows()))
    return StepContext(state, settings, partition, cutoffs, library, glued, builder,
                       energy, helicity)


def new_stresses(glued: GluedState, w: SpectralField, d: SpectralField, dw_dt: SpectralField,
                 dd_dt: SpectralField) -> Tuple[SpectralField, StressPair]:
    """(p_{q+1}, (R̊_{q+1}, M̊_{q+1})) for v_{q+1} = v̄ + w, b_{q+1} = b̄ + d."""
    v, b = glued.v, glued.b
    flux = outer(w, w) - outer(d, d) + glued.R
    r = (inv_div_sym(dw_dt - laplacian(w))
         + tracefree_outer(w, v) + tracefree_outer(v, w)
         - tracefree_outer(d, b) - tracefree_outer(b, d)
         + inv_div_sym(leray_project(div_tensor(flux))))
    # d_t d − Δd is solenoidal only up to the stencil round-off
    m = (inv_div_anti(leray_project(dd_dt - laplacian(d))) + wedge(w, b) + wedge(v, d)
         + inv_div_anti(leray_project(div_tensor(wedge(w, d) + glued.M))))
    p = remove_mean(glued.p - (dot(w, v) - dot(d, b)) * (2.0 / 3.0) - pressure_from_stress(flux))
    return p, StressPair(r, m)


def evaluate_next(builder: PerturbationBuilder, h: float,
                  t: float) -> Tuple[GluedState, PerturbationBundle, LevelFields]:
    """Glued state, families and level-(q+1) tuple at t.

    Stencil points are requested in increasing time so the local solutions
    keep stepping forward.
    """
    if t >= 2.0 * h:
        builder.sample(t - 2.0 * h)
        builder.sample(t - h)
    glued, bundle = builder.at(t)
    dw_dt = time_derivative(lambda s: builder.sample(s).w, t, h)
    dd_dt = time_derivative(lambda s: builder.sample(s).d, t, h)
    current = builder.sample(t)
    p, stresses = new_stresses(glued, current.w, current.d, dw_dt, dd_dt)
    fields = LevelFields(t, current.v, current.b, p, stresses,
                         glued.dv_dt + dw_dt, glued.db_dt + dd_dt)
    return glued, bundle, fields


def next_level(context: StepContext) -> IterationState:
    builder, h = context.builder, context.settings.solver.fd_step

    def evaluate(t: float) -> LevelFields:
        return evaluate_next(builder, h, t)[2]

    def velocity(t: float) -> MHDState:
        sample = builder.sample(t)
        return MHDState(sample.v, sample.b, t)

    state = context.state
    return IterationState(state.q + 1, state.ladder, state.v_in, state.b_in, evaluate, velocity)


# -- sample times -------------------------------------------------------------

def residual_times(partition: TimePartition, count: int) -> List[float]:
    """Chebyshev points of (0, T) nudged off the ends of the I_l."""
    horizon, tau = partition.horizon, partition.tau
    nodes = 0.5 * horizon * (1.0 - np.cos(np.pi * (2.0 * np.arange(count) + 1.0) / (2.0 * count)))
    ends = [e for l in range(partition.count + 1) for e in partition.I(l)]
    guard = tau / 24.0
    out = []
    for t in nodes:
        for end in ends:
            if abs(t - end) < guard:
                t = end - guard if t < end else end + guard
        out.append(float(min(max(t, guard), horizon - guard)))
    return sorted(set(out))


def identity_times(partition: TimePartition, params: FlowParams, count: int) -> List[float]:
    """Times in [T − τ_q, T] where the flow pattern coincides with the one at t = 0."""
    start, horizon = partition.horizon - partition.tau, partition.horizon
    out = set()
    for t in np.linspace(start, horizon, count + 2)[1:-1]:
        snapped = params.snap_time(float(t))
        if snapped < start:
            snapped += params.period
        if snapped > horizon:
            snapped -= params.period
        out.add(float(snapped))
    return sorted(out)


# -- ledger -----------------------------------------------------------------------

def _l2(f: SpectralField) -> float:
    return float(np.sqrt(l2_inner(f, f)))


def _sup(f: SpectralField) -> float:
    return float(np.max(np.abs(f.to_real())))


def _level_rows(ledger: Ledger, context: StepContext, current: LevelFields):
    ladder, q, t = context.ladder, context.q, current.t
    lam = ladder.lam(q)
    r_l1, m_l1 = current.stresses.l1_norms()
    ledger.report("level.v_C0", "‖v_q‖_C⁰ ≤ 1 − δ_q^{1/2}", _sup(current.v), "level q", t,
                  bound=1.0 - ladder.delta(q) ** 0.5)
    ledger.report("level.b_C0", "‖b_q‖_C⁰ ≤ 1 − δ_q^{1/2}", _sup(current.b), "level q", t,
                  bound=1.0 - ladder.delta(q) ** 0.5)
    ledger.report("level.v_C1", "‖v_q‖_C¹ ≤ λ_q⁴", _sup(gradient(current.v)), "level q", t,
                  bound=lam ** 4)
    ledger.report("level.b_C1", "‖b_q‖_C¹ ≤ λ_q⁴", _sup(gradient(current.b)), "level q", t,
                  bound=lam ** 4)
    bound = ladder.delta(q + 1) * lam ** (-3.0 * ladder.alpha)
    ledger.report("stress.R_L1", "‖R̊_q‖_L¹ ≤ δ_{q+1} λ_q^{−3α}", r_l1, "level q", t, bound=bound)
    ledger.report("stress.M_L1", "‖M̊_q‖_L¹ ≤ δ_{q+1} λ_q^{−3α}", m_l1, "level q", t, bound=bound)


def _next_rows(ledger: Ledger, context: StepContext, glued: GluedState,
               bundle: PerturbationBundle, current: LevelFields, following: LevelFields):
    ladder, q, t = context.ladder, context.q, following.t
    tolerance = context.settings.step.residual_tolerance
    residual = following.residual()
    for equation in ("momentum", "induction"):
        relative = residual[equation] / max(residual[f"{equation}_scale"], 1e-300)
        RESIDUAL_GAUGE.labels(equation=equation).set(relative)
        ledger.check(f"residual.{equation}", "relaxed system holds at level q+1", relative,
                     tolerance, "level q+1", t)

    r_bar, m_bar = glued.stresses.l1_norms()
    ledger.report("mollified.R_L1", "‖R̊̄‖_L¹", r_bar, "glued", t)
    ledger.report("mollified.M_L1", "‖M̊̄‖_L¹", m_bar, "glued", t)

    r_l1, m_l1 = following.stresses.l1_norms()
    bound = ladder.delta(q + 2) * ladder.lam(q + 1) ** (-3.0 * ladder.alpha)
    ledger.report("stress.R_L1_next", "‖R̊_{q+1}‖_L¹ ≤ δ_{q+2} λ_{q+1}^{−3α}", r_l1,
                  "level q+1", t, bound=bound)
    ledger.report("stress.M_L1_next", "‖M̊_{q+1}‖_L¹ ≤ δ_{q+2} λ_{q+1}^{−3α}", m_l1,
                  "level q+1", t, bound=bound)

    half = ladder.delta(q + 1) ** 0.5
    ledger.report("difference.v_L2", "‖v_{q+1} − v_q‖_L² ≲ δ_{q+1}^{1/2}",
                  _l2(following.v - current.v), "levels q, q+1", t, bound=half)
    ledger.report("difference.b_L2", "‖b_{q+1} − b_q‖_L² ≲ δ_{q+1}^{1/2}",
                  _l2(following.b - current.b), "levels q, q+1", t, bound=half)

    norms = family_norms(bundle)
    for name in FAMILIES:
        for prefix in ("w", "d"):
            key = f"{prefix}{name}"
            ledger.report(f"family.{key}", f"‖{key}‖_L², ‖{key}‖_H³", norms[key]["L2"],
                          "families", t, H3=norms[key]["H3"])

    coefficients = bundle.coefficients
    if coefficients is not None:
        ledger.report("corrector.ratio", "‖∇(aφ)‖_∞ / (λN_Λ‖aφ‖_∞) ≪ 1",
                      corrector_ratio(coefficients.amplitudes, t), "amplitudes", t)
    for key, value in bundle.supports.items():
        ledger.report(f"support.{key}", "disjoint supports at pattern-aligned times", value,
                      "flows", t, snapped=abs(context.library.params.snap_time(t) - t) < 1e-12)


def _identity_rows(ledger: Ledger, context: StepContext, bundle: PerturbationBundle):
    t, coefficients = bundle.t, bundle.coefficients
    if coefficients is None:
        return
    low_w = bundle.wp + bundle.wh
    low_d = bundle.dp + bundle.dh
    measured = l2_inner(low_w, low_w) + l2_inner(low_d, low_d)
    target = 3.0 * coefficients.energy.rho_q + coefficients.flow_energy
    ledger.check("energy.identity", "∫|w_p + w_h|² + |d_p + d_h|² = 3ρ_q + E",
                 abs(measured - target) / max(abs(target), 1e-300),
                 context.settings.step.energy_tolerance, "families", t,
                 measured_energy=measured, expected_energy=target)
    cross = l2_inner(bundle.wh, bundle.dh)
    h_q = coefficients.helicity.h_q
    ledger.check("helicity.identity", "∫w_h·d_h = h_q", abs(cross - h_q) / max(abs(h_q), 1e-300),
                 context.settings.step.energy_tolerance, "families", t,
                 measured_helicity=cross, expected_helicity=h_q)
    ledger.report("gap.rho_q", "ρ_q > 0 on [T − τ_{q−1}, T]", coefficients.energy.rho_q,
                  "gaps", t)
    ledger.report("gap.h_q", "h_q > 0 on [T − τ_{q−1}, T]", h_q, "gaps", t)


def _pin_rows(ledger: Ledger, context: StepContext):
    """v_{q+1}(0) = v_in∗ψ_{ℓ_q}, b_{q+1}(0) = b_in∗ψ_{ℓ_q}."""
    state, ell = context.state, context.ladder.ell(context.q)
    sample = context.builder.sample(0.0)
    tolerance = context.settings.step.pin_tolerance
    for name, field, initial in (("v", sample.v, state.v_in), ("b", sample.b, state.b_in)):
        expected = mollify(initial, ell)
        defect = _l2(field - expected) / max(_l2(expected), 1.0)
        ledger.check(f"pin.{name}", f"{name}_{{q+1}}(0) = {name}_in∗ψ_ℓ", defect, tolerance,
                     "level q+1", 0.0)


@pipeline_stage("measure")
def measure(context: StepContext, following: IterationState) -> Ledger:
    """All ledger rows, visiting sample times in increasing order."""
    step = context.settings.step
    ledger = Ledger(context.q, meta={"ladder": context.ladder.level(context.q),
                                     "partition": context.partition.to_dict(),
                                     "flows": {"lam": context.library.params.lam,
                                               "mu": context.library.params.mu,
                                               "n_lambda": context.library.params.n_lambda}})
    _pin_rows(ledger, context)

    plan: Dict[float, set] = {}
    for t in residual_times(context.partition, step.residual_samples):
        plan.setdefault(t, set()).add("residual")
    for t in identity_times(context.partition, context.library.params, step.identity_samples):
        plan.setdefault(t, set()).add("identity")

    h = context.settings.solver.fd_step
    for t in sorted(plan):
        current = context.state.fields_at(t)
        glued, bundle, fields = evaluate_next(context.builder, h, t)
        following.remember(fields)
        _level_rows(ledger, context, current)
        _next_rows(ledger, context, glued, bundle, current, fields)
        if "identity" in plan[t]:
            _identity_rows(ledger, context, bundle)
    logger.info("Step measured", q=context.q, rows=len(ledger.rows),
                failures=len(ledger.failures()))
    return ledger


@pipeline_stage("step")
def one_step(state: IterationState, settings: WorkbenchSettings,
             energy: Optional[Profile] = None, helicity: Optional[Profile] = None,
             with_ledger: bool = True) -> StepResult:
    """Level q → level q + 1 with its ledger.

    Raises:
        PreconditionError: gaps, balls or inputs out of range
        ResolutionError: placement, CFL, blow-up or quadrature failures
    """
    context = prepare_step(state, settings, energy, helicity)
    following = next_level(context)
    ledger = measure(context, following) if with_ledger else Ledger(state.q)
    return StepResult(following, ledger, context)


def replay(v_in: SpectralField, b_in: SpectralField, ladder: Ladder,
           settings: WorkbenchSettings, q: int) -> IterationState:
    """Level q rebuilt from the initial data without ledgers."""
    state = bootstrap(v_in, b_in, ladder)
    while state.q < q:
        state = one_step(state, settings, with_ledger=False).state
    return state

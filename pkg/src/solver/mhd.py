"""
Pseudo-spectral viscous-resistive MHD on T³ (ν₁ = ν₂ = 1):

    ∂_t v = Δv − ℙ_H div(v⊗v − b⊗b)
    ∂_t b = Δb − div(v⊗b − b⊗v)

with 2/3-rule products and a fourth-order integrating-factor Runge–Kutta
step.  The pressure is p = −Δ⁻¹ div div(v⊗v − b⊗b).
"""
import asyncio
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..operators.inverse_divergence import div_tensor, pressure_from_stress
from ..torus.field import SpectralField, laplacian, leray_project, outer, wedge
from ..torus.norms import l2_inner
from ..utils.error_handling import ErrorCode, ResolutionError, timeout
from ..utils.metrics import LOCAL_SOLVES

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class MHDState:
    v: SpectralField
    b: SpectralField
    t: float = 0.0

    @property
    def grid(self):
        return self.v.grid

    def energy(self) -> float:
        """∫(|v|² + |b|²)."""
        return l2_inner(self.v, self.v) + l2_inner(self.b, self.b)

    def cross_helicity(self) -> float:
        return l2_inner(self.v, self.b)

    def sup_speed(self) -> float:
        return float(np.max(np.abs(self.v.to_real())) + np.max(np.abs(self.b.to_real())))


def momentum_flux(v: SpectralField, b: SpectralField) -> SpectralField:
    """v⊗v − b⊗b."""
    return outer(v, v) - outer(b, b)


def pressure(v: SpectralField, b: SpectralField) -> SpectralField:
    return -pressure_from_stress(momentum_flux(v, b))


def nonlinear_terms(v: SpectralField, b: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """(−ℙ_H div(v⊗v − b⊗b), −div(v⊗b − b⊗v))."""
    return -leray_project(div_tensor(momentum_flux(v, b))), -div_tensor(wedge(v, b))


def mhd_rhs(v: SpectralField, b: SpectralField) -> Tuple[SpectralField, SpectralField, SpectralField]:
    """(∂_t v, ∂_t b, p) of the exact system."""
    nv, nb = nonlinear_terms(v, b)
    return laplacian(v) + nv, laplacian(b) + nb, pressure(v, b)


def energy_balance(v: SpectralField, b: SpectralField) -> Tuple[float, float]:
    """(½ d/dt ∫(|v|² + |b|²) from the right side, −∫(|∇v|² + |∇b|²))."""
    dv, db, _ = mhd_rhs(v, b)
    rate = l2_inner(v, dv) + l2_inner(b, db)
    dissipation = l2_inner(v, laplacian(v)) + l2_inner(b, laplacian(b))
    return rate, dissipation


def cross_helicity_balance(v: SpectralField, b: SpectralField) -> Tuple[float, float]:
    """(d/dt ∫v·b from the right side, −2∫∇v:∇b)."""
    dv, db, _ = mhd_rhs(v, b)
    rate = l2_inner(dv, b) + l2_inner(v, db)
    return rate, 2.0 * l2_inner(v, laplacian(b))


FITTED_RATE_LIMIT = 4.0


def _dissipated(before: np.ndarray, after: np.ndarray, z: np.ndarray) -> np.ndarray:
    """∫ a·e over one interval per mode, from e at both ends and z = a·h.

    Modes with z ≤ FITTED_RATE_LIMIT take e = e^{−aτ}·(linear in τ); faster modes
    take e = αe^{−aτ} + β, which stays finite for slaved modes.
    """
    out = np.zeros_like(before)
    fitted = (z > 0.0) & (z <= FITTED_RATE_LIMIT)
    zf = z[fitted]
    decay = np.exp(-zf)
    w_after = (np.expm1(zf) - zf) / zf
    w_before = (-np.expm1(-zf) - (1.0 - decay * (1.0 + zf)) / zf)
    out[fitted] = before[fitted] * w_before + after[fitted] * w_after
    fast = z > FITTED_RATE_LIMIT
    zs = z[fast]
    steady = (after[fast] - before[fast] * np.exp(-zs)) / -np.expm1(-zs)
    out[fast] = before[fast] - after[fast] + steady * zs
    return out


def balance_drift(trajectory: Sequence[MHDState]) -> Tuple[float, float]:
    """Relative drift of the energy and cross-helicity balances along a trajectory.

    Energy: E(T) − E(0) + 2∫(‖∇v‖² + ‖∇b‖²); cross helicity: H(T) − H(0) + 2∫∇v:∇b.
    Both are divided by E(0).  The dissipation integrals are taken mode by mode
    with exponentially fitted weights, so samples may be as coarse as the step.
    """
    first = trajectory[0]
    rate = -2.0 * first.grid.laplacian_symbol

    def densities(state: MHDState) -> Tuple[np.ndarray, np.ndarray]:
        v, b = state.v.coeffs, state.b.coeffs
        energy = np.sum(np.abs(v) ** 2 + np.abs(b) ** 2, axis=0)
        helicity = np.sum((v * np.conj(b)).real, axis=0)
        return energy, helicity

    e_before, h_before = densities(first)
    e_dissipated = h_dissipated = 0.0
    for previous, state in zip(trajectory, trajectory[1:]):
        z = rate * (state.t - previous.t)
        e_after, h_after = densities(state)
        e_dissipated += float(np.sum(_dissipated(e_before, e_after, z)))
        h_dissipated += float(np.sum(_dissipated(h_before, h_after, z)))
        e_before, h_before = e_after, h_after

    last = trajectory[-1]
    scale = first.energy()
    if scale == 0.0:
        return 0.0, 0.0
    energy = (last.energy() - scale + e_dissipated) / scale
    helicity = (last.cross_helicity() - first.cross_helicity() + h_dissipated) / scale
    return abs(energy), abs(helicity)


class Integrator:
    """Integrating-factor RK4 with CFL and blow-up guards."""

    def __init__(self, dt: float, cfl: float = 0.5, blowup: float = 1.0e6):
        self.dt = dt
        self.cfl = cfl
        self.blowup = blowup

    def _guard(self, state: MHDState, h: float, reference: float):
        speed = state.sup_speed()
        if not math.isfinite(speed) or speed > self.blowup * max(reference, 1.0):
            raise ResolutionError(ErrorCode.BLOWUP_DETECTED, "solution norm exceeded the blow-up bound",
                                  details={"t": state.t, "sup": speed, "reference": reference})
        courant = h * speed * state.grid.n
        if courant > self.cfl:
            raise ResolutionError(ErrorCode.CFL_VIOLATION, "time step violates the CFL bound",
                                  details={"t": state.t, "courant": courant, "dt": h})

    def step(self, state: MHDState, h: float) -> MHDState:
        symbol = state.grid.laplacian_symbol
        half = np.exp(symbol * h / 2.0)
        full = half * half

        def scaled(f: SpectralField, factor) -> SpectralField:
            return f.with_coeffs(f.coeffs * factor)

        v, b = state.v, state.b
        av, ab = nonlinear_terms(v, b)
        v2, b2 = scaled(v + av * (h / 2.0), half), scaled(b + ab * (h / 2.0), half)
        bv, bb = nonlinear_terms(v2, b2)
        v3, b3 = scaled(v, half) + bv * (h / 2.0), scaled(b, half) + bb * (h / 2.0)
        cv, cb = nonlinear_terms(v3, b3)
        v4 = scaled(v, full) + scaled(cv, half) * h
        b4 = scaled(b, full) + scaled(cb, half) * h
        dv, db = nonlinear_terms(v4, b4)
        v_new = scaled(v, full) + (scaled(av, full) + scaled(bv + cv, half) * 2.0 + dv) * (h / 6.0)
        b_new = scaled(b, full) + (scaled(ab, full) + scaled(bb + cb, half) * 2.0 + db) * (h / 6.0)
        return MHDState(v_new, b_new, state.t + h)

    def advance(self, state: MHDState, t_end: float, reference: Optional[float] = None) -> MHDState:
        """Step from state.t to exactly t_end."""
        span = t_end - state.t
        if span <= 0.0:
            return state
        steps = max(1, math.ceil(span / self.dt - 1e-12))
        h = span / steps
        reference = state.sup_speed() if reference is None else reference
        for _ in range(steps):
            self._guard(state, h, reference)
            state = self.step(state, h)
        return MHDState(state.v, state.b, t_end)


def integrate(state: MHDState, t_end: float, dt: float, samples: Optional[Sequence[float]] = None,
              cfl: float = 0.5, blowup: float = 1.0e6) -> List[MHDState]:
    """Trajectory from state.t to t_end, recorded at ``samples`` (default: every step).

    Raises:
        ResolutionError: CFLViolation, BlowupDetected
    """
    integrator = Integrator(dt, cfl, blowup)
    if samples is None:
        count = max(1, math.ceil((t_end - state.t) / dt - 1e-12))
        samples = np.linspace(state.t, t_end, count + 1)[1:]
    reference = state.sup_speed()
    trajectory = [state]
    for t in samples:
        state = integrator.advance(state, float(t), reference)
        trajectory.append(state)
    logger.debug("Trajectory integrated", t_end=t_end, snapshots=len(trajectory))
    return trajectory


class LocalSolution:
    """Exact solution started at t_start, evaluated by a forward-only cursor.

    Requests earlier than the cursor restart from the initial state.
    """

    def __init__(self, index: int, initial: MHDState, t_end: float, integrator: Integrator):
        self.index = index
        self.initial = initial
        self.t_end = t_end
        self.integrator = integrator
        self._cursor = initial
        self._reference = initial.sup_speed()

    @property
    def t_start(self) -> float:
        return self.initial.t

    def covers(self, t: float) -> bool:
        return self.t_start - 1e-12 <= t <= self.t_end + 1e-12

    def at(self, t: float) -> MHDState:
        if t < self._cursor.t - 1e-14:
            self._cursor = self.initial
        if t > self._cursor.t:
            self._cursor = self.integrator.advance(self._cursor, t, self._reference)
            LOCAL_SOLVES.inc()
        return self._cursor


async def evaluate_locals(solutions: Iterable[LocalSolution], t: float,
                          seconds: float = 900.0) -> List[MHDState]:
    """Advance independent local solutions to t concurrently."""
    solutions = list(solutions)

    @timeout(seconds)
    async def run():
        return await asyncio.gather(*(asyncio.to_thread(s.at, t) for s in solutions))

    return list(await run())

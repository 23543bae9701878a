"""
The seven perturbation families.

    principal   w^{(p)} = Σ a ψ_k φ k̄ over Λ_v ∪ Λ_b,   d^{(p)} = Σ a ψ_k φ k̄̄ over Λ_b
    helicity    w^{(h)} = d^{(h)} = Σ η_l h_{b,q}^{1/2} ψ_k φ k̄̄ over Λ_s
    temporal    w^{(t)} = −ℙ_Hℙ_{>0} Σ μ⁻¹ a² φ² k̄,      d^{(t)} along k̄̄ over Λ_b
    inverse     w^{(v)} = (μσ)⁻¹ ℙ_Hℙ_{>0} Σ a² div(∂_t⁻¹ℙ_{>0}φ_k̄² φ_k²φ_k̄̄² k̄̄⊗k̄̄)
    heat        w^{(l)} = Duhamel integrals matching w^{(v)}
    corrector   w^{(c)} = Σ curl(a φ F/λ) − w^{(p)} − w^{(h)}
    initial     w^{(s)} = e^{tΔ}(v_in∗ψ_{ℓ_q} − v_in∗ψ_{ℓ_{q−1}}∗ψ_{ℓ_q})

φ = φ_{k,k̄,k̄̄} is the box flow and ψ_k the fast oscillation.  Time
derivatives of φ are analytic so the cancellation checks hold to round-off.
"""
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..operators.inverse_divergence import div_tensor
from ..torus.field import (SpectralField, curl, heat_semigroup, laplacian, leray_project,
                           mollify, remove_mean)
from ..torus.grid import Grid
from ..utils.error_handling import ErrorCode, PreconditionError, ResolutionError, require
from .coefficients import Amplitude, flow_samples

logger = structlog.get_logger(__name__)

FieldPair = Tuple[SpectralField, SpectralField]

ACTIVE_MODE_FLOOR = 1e-12


def _field(grid: Grid, samples: np.ndarray) -> SpectralField:
    return SpectralField.from_real(grid, samples)


def _solenoidal(f: SpectralField) -> SpectralField:
    """ℙ_H ℙ_{>0}."""
    return leray_project(remove_mean(f))


def _zeros(grid: Grid) -> SpectralField:
    return SpectralField.zeros(grid, 1)


def _grid(amplitudes: Sequence[Amplitude], grid: Optional[Grid]) -> Grid:
    if grid is not None:
        return grid
    require(len(amplitudes) > 0, ErrorCode.UNSUPPORTED_SPEC, "grid needed when no amplitudes")
    return amplitudes[0].flow.grid


def _relative(defect: SpectralField, scale: float) -> float:
    size = float(np.sqrt(np.sum(np.abs(defect.coeffs) ** 2)))
    return size / scale if scale > 0.0 else size


def _l2(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def _outer_samples(u: np.ndarray, v: np.ndarray, scalar: np.ndarray) -> np.ndarray:
    return np.einsum("i,j,...->ij...", u, v, scalar)


def _required_rate(a: Amplitude) -> np.ndarray:
    if a.rate is None:
        raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, "amplitude carries no time rate",
                                details={"kind": a.kind, "l": a.l, "index": a.index})
    return a.rate


# -- principal and helicity -----------------------------------------------

def principal_flows(amplitudes: Sequence[Amplitude], t: float,
                    grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(p)}, d^{(p)})."""
    grid = _grid(amplitudes, grid)
    if not any(a.kind in ("v", "b") for a in amplitudes):
        return _zeros(grid), _zeros(grid)
    w = flow_samples(amplitudes, t, "kbar", ("v", "b"))
    has_b = any(a.kind == "b" for a in amplitudes)
    d = flow_samples(amplitudes, t, "kbarbar", ("b",)) if has_b else np.zeros_like(w)
    return _field(grid, w), _field(grid, d)


def helicity_flows(amplitudes: Sequence[Amplitude], t: float,
                   grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(h)}, d^{(h)}); the two are the same field."""
    grid = _grid(amplitudes, grid)
    if not any(a.kind == "s" for a in amplitudes):
        zero = _zeros(grid)
        return zero, zero
    wh = _field(grid, flow_samples(amplitudes, t, "kbarbar", ("s",)))
    return wh, wh


def support_products(amplitudes: Sequence[Amplitude], t: float) -> Dict[str, float]:
    """max |w^{(p)}_v·w^{(p)}_b|, |w^{(h)}·w^{(p)}| and |d^{(h)}·d^{(p)}| on the grid."""
    def samples(direction, kinds):
        if any(a.kind in kinds for a in amplitudes):
            return flow_samples(amplitudes, t, direction, kinds)
        return None

    wp_v, wp_b = samples("kbar", ("v",)), samples("kbar", ("b",))
    dp, wh = samples("kbarbar", ("b",)), samples("kbarbar", ("s",))
    wp = None if wp_v is None and wp_b is None else sum(x for x in (wp_v, wp_b) if x is not None)

    def worst(u, v):
        if u is None or v is None:
            return 0.0
        return float(np.max(np.abs(np.sum(u * v, axis=0))))

    return {"wp_v.wp_b": worst(wp_v, wp_b), "wh.wp": worst(wh, wp), "dh.dp": worst(wh, dp)}


# -- temporal ---------------------------------------------------------------

def temporal_flows(amplitudes: Sequence[Amplitude], t: float, mu: float,
                   grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(t)}, d^{(t)})."""
    grid = _grid(amplitudes, grid)
    w = np.zeros((3,) + grid.shape)
    d = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind == "s":
            continue
        weight = a.square * a.flow.value(t) ** 2
        w += a.kbar[:, None, None, None] * weight
        if a.kind == "b":
            d += a.kbarbar[:, None, None, None] * weight
    return -_solenoidal(_field(grid, w)) / mu, -_solenoidal(_field(grid, d)) / mu


def temporal_rate(amplitudes: Sequence[Amplitude], t: float, mu: float,
                  grid: Optional[Grid] = None) -> SpectralField:
    """∂_t d^{(t)} from ∂_t(a²) and the analytic ∂_tφ."""
    grid = _grid(amplitudes, grid)
    d = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind != "b":
            continue
        phi = a.flow.value(t)
        weight = _required_rate(a) * phi ** 2 + a.square * 2.0 * phi * a.flow.time_derivative(t)
        d += a.kbarbar[:, None, None, None] * weight
    return -_solenoidal(_field(grid, d)) / mu


def temporal_identity(amplitudes: Sequence[Amplitude], t: float, mu: float,
                      grid: Optional[Grid] = None) -> float:
    """Relative defect of

        ∂_t d^{(t)} + ℙ_Hℙ_{>0} Σ a² div(φ² k̄⊗k̄̄) = −ℙ_Hℙ_{>0} Σ μ⁻¹ ∂_t(a²) φ² k̄̄

    with div(φ² k̄⊗k̄̄) = (k̄·∇φ²) k̄̄ from the analytic slope of the traveling factor.
    """
    grid = _grid(amplitudes, grid)
    transport = np.zeros((3,) + grid.shape)
    source = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind != "b":
            continue
        phi = a.flow.value(t)
        slope = a.flow.phi_k() * a.flow.kbar_slope(t) * a.flow.phi_kbarbar()
        transport += a.kbarbar[:, None, None, None] * (a.square * 2.0 * phi * slope)
        source += a.kbarbar[:, None, None, None] * (_required_rate(a) * phi ** 2)
    lhs = temporal_rate(amplitudes, t, mu, grid) + _solenoidal(_field(grid, transport))
    rhs = -_solenoidal(_field(grid, source)) / mu
    return _relative(lhs - rhs, max(_l2(lhs), _l2(rhs)))


# -- inverse traveling wave ---------------------------------------------------

def _wave_scalar(a: Amplitude, t: float) -> np.ndarray:
    """∂_t⁻¹ℙ_{>0}φ_k̄² · φ_k² φ_k̄̄²."""
    return a.flow.kbar_antiderivative(t) * a.flow.phi_k() ** 2 * a.flow.phi_kbarbar() ** 2


def _wave_rate_scalar(a: Amplitude, t: float) -> np.ndarray:
    """ℙ_{>0}φ_k̄² · φ_k² φ_k̄̄², i.e. (μσ)⁻¹ ∂_t of ``_wave_scalar``."""
    return (a.flow.phi_kbar(t) ** 2 - 1.0) * a.flow.phi_k() ** 2 * a.flow.phi_kbarbar() ** 2


def _weighted_divergence(grid: Grid, weight: np.ndarray, u: np.ndarray, v: np.ndarray,
                         scalar: np.ndarray) -> np.ndarray:
    """weight · div(scalar u⊗v) sampled on the grid."""
    tensor = _field(grid, _outer_samples(u, v, scalar))
    return div_tensor(tensor).to_real() * weight[None]


def inverse_wave_flows(amplitudes: Sequence[Amplitude], t: float, mu: float, sigma: float,
                       grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(v)}, d^{(v)}) over Λ_b."""
    grid = _grid(amplitudes, grid)
    w = np.zeros((3,) + grid.shape)
    d = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind != "b":
            continue
        scalar = _wave_scalar(a, t)
        w += _weighted_divergence(grid, a.square, a.kbarbar, a.kbarbar, scalar)
        d += _weighted_divergence(grid, a.square, a.kbarbar, a.kbar, scalar)
    scale = 1.0 / (mu * sigma)
    return _solenoidal(_field(grid, w)) * scale, _solenoidal(_field(grid, d)) * scale


def inverse_wave_rate(amplitudes: Sequence[Amplitude], t: float, mu: float, sigma: float,
                      grid: Optional[Grid] = None) -> SpectralField:
    """∂_t d^{(v)}; the antiderivative factor moves at rate σμ(φ_k̄² − 1)."""
    grid = _grid(amplitudes, grid)
    d = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind != "b":
            continue
        d += _weighted_divergence(grid, _required_rate(a), a.kbarbar, a.kbar,
                                  _wave_scalar(a, t)) / (mu * sigma)
        d += _weighted_divergence(grid, a.square, a.kbarbar, a.kbar, _wave_rate_scalar(a, t))
    return _solenoidal(_field(grid, d))


def inverse_wave_identity(amplitudes: Sequence[Amplitude], t: float, mu: float, sigma: float,
                          grid: Optional[Grid] = None) -> float:
    """Relative defect of

        ℙ_Hℙ_{>0}[−Σ a² div(ℙ_{>0}φ_k̄² φ_k²φ_k̄̄² k̄̄⊗k̄)] + ∂_t d^{(v)}
            = (μσ)⁻¹ ℙ_Hℙ_{>0}[Σ ∂_t(a²) div(∂_t⁻¹ℙ_{>0}φ_k̄² φ_k²φ_k̄̄² k̄̄⊗k̄)]
    """
    grid = _grid(amplitudes, grid)
    oscillation = np.zeros((3,) + grid.shape)
    source = np.zeros((3,) + grid.shape)
    for a in amplitudes:
        if a.kind != "b":
            continue
        oscillation += _weighted_divergence(grid, a.square, a.kbarbar, a.kbar,
                                            _wave_rate_scalar(a, t))
        source += _weighted_divergence(grid, _required_rate(a), a.kbarbar, a.kbar,
                                       _wave_scalar(a, t))
    lhs = inverse_wave_rate(amplitudes, t, mu, sigma, grid) - _solenoidal(_field(grid, oscillation))
    rhs = _solenoidal(_field(grid, source)) / (mu * sigma)
    return _relative(lhs - rhs, max(_l2(lhs), _l2(rhs), _l2(_solenoidal(_field(grid, oscillation)))))


# -- heat conduction ------------------------------------------------------------

def stationary_duhamel(source: SpectralField, t: float) -> SpectralField:
    """∫₀ᵗ e^{(t−s)Δ} g ds = (1 − e^{−κt})/κ ĝ modewise (t ĝ on κ = 0)."""
    require(t >= 0.0, ErrorCode.NEGATIVE_TIME, "Duhamel integral needs t >= 0", t=t)
    kappa = -source.grid.laplacian_symbol
    positive = kappa > 0
    factor = np.where(positive, -np.expm1(-kappa * t) / np.where(positive, kappa, 1.0), t)
    return source.with_coeffs(source.coeffs * factor)


def traveling_duhamel(source: SpectralField, direction: np.ndarray, mu: float,
                      t: float) -> SpectralField:
    """∫₀ᵗ e^{(t−s)Δ} g(· + μ s k̄) ds for a pattern g moving along k̄.

    Mode m picks up e^{iωs} with ω = 2πμ m·k̄, hence
    ĝ (e^{iωt} − e^{−κt}) / (κ + iω).
    """
    require(t >= 0.0, ErrorCode.NEGATIVE_TIME, "Duhamel integral needs t >= 0", t=t)
    grid = source.grid
    kappa = -grid.laplacian_symbol
    omega = 2.0 * np.pi * mu * np.tensordot(np.asarray(direction, dtype=float),
                                            grid.derivative_modes, axes=1)
    denominator = kappa + 1j * omega
    nonzero = denominator != 0
    safe = np.where(nonzero, denominator, 1.0)
    factor = np.where(nonzero, (np.exp(1j * omega * t) - np.exp(-kappa * t)) / safe, t)
    return source.with_coeffs(source.coeffs * factor)


def traveling_source(source: SpectralField, direction: np.ndarray, mu: float,
                     s: float) -> SpectralField:
    """g(· + μ s k̄) as a spectral translate."""
    grid = source.grid
    omega = 2.0 * np.pi * mu * np.tensordot(np.asarray(direction, dtype=float),
                                            grid.derivative_modes, axes=1)
    return source.with_coeffs(source.coeffs * np.exp(1j * omega * s))


def duhamel_quadrature(source: Callable[[float], SpectralField], t: float, nodes: int = 16,
                       frequency: float = 0.0) -> SpectralField:
    """∫₀ᵗ e^{(t−s)Δ} g(s) ds by Gauss–Legendre in s.

    ``frequency`` bounds the time frequency of g.

    Raises:
        ResolutionError: QuadratureUnderResolved when the heat rate or the
            source frequency is too large for the node count on [0, t]
    """
    require(t >= 0.0, ErrorCode.NEGATIVE_TIME, "Duhamel integral needs t >= 0", t=t)
    first = source(0.0)
    if t == 0.0:
        return first * 0.0
    grid = first.grid
    magnitude = np.abs(first.coeffs)
    if first.rank:
        magnitude = np.max(magnitude, axis=tuple(range(first.rank)))
    # transform round-off does not count as an active mode
    active = magnitude > ACTIVE_MODE_FLOOR * float(np.max(magnitude))
    kappa = float(np.max(-grid.laplacian_symbol[active])) if np.any(active) else 0.0
    resolution = (kappa + abs(frequency)) * t / 2.0
    if resolution > nodes:
        raise ResolutionError(ErrorCode.QUADRATURE_UNDER_RESOLVED,
                              "Duhamel quadrature cannot resolve the integrand",
                              details={"resolution": resolution, "nodes": nodes, "t": t})
    x, weights = np.polynomial.legendre.leggauss(nodes)
    s_nodes = 0.5 * t * (x + 1.0)
    total = None
    for s, weight in zip(s_nodes, weights):
        term = heat_semigroup(source(float(s)), t - float(s)) * (0.5 * t * weight)
        total = term if total is None else total + term
    return total


def _heat_sources(a: Amplitude, second: np.ndarray) -> Tuple[SpectralField, SpectralField]:
    """(Δ div(∂_t⁻¹ℙ_{>0}φ_k̄² φ_k²φ_k̄̄² k̄̄⊗·) at s = 0, div(φ_k²φ_k̄̄² k̄̄⊗·))."""
    grid = a.flow.grid
    wave = _outer_samples(a.kbarbar, second, _wave_scalar(a, 0.0))
    still = _outer_samples(a.kbarbar, second, a.flow.phi_k() ** 2 * a.flow.phi_kbarbar() ** 2)
    return laplacian(div_tensor(_field(grid, wave))), div_tensor(_field(grid, still))


def heat_flows(amplitudes: Sequence[Amplitude], t: float, mu: float, sigma: float,
               grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(l)}, d^{(l)}) over Λ_b, integrated modewise in closed form."""
    grid = _grid(amplitudes, grid)
    w = np.zeros((3,) + grid.shape)
    d = np.zeros((3,) + grid.shape)
    if t == 0.0:
        return _zeros(grid), _zeros(grid)
    for a in amplitudes:
        if a.kind != "b":
            continue
        for target, second in ((w, a.kbarbar), (d, a.kbar)):
            wave, still = _heat_sources(a, second)
            integral = (traveling_duhamel(wave, a.kbar, mu, t) / (mu * sigma)
                        + stationary_duhamel(still, t))
            target += integral.to_real() * a.square[None]
    return _solenoidal(_field(grid, w)), _solenoidal(_field(grid, d))


# -- correctors -------------------------------------------------------------

def _potential_curl(grid: Grid, scalar: np.ndarray, potential: SpectralField,
                    lam: int) -> np.ndarray:
    product = scalar[None] * potential.to_real()
    return curl(_field(grid, product)).coeffs / float(lam)


def corrector_flows(amplitudes: Sequence[Amplitude], t: float, principal: FieldPair,
                    helicity: FieldPair, grid: Optional[Grid] = None) -> FieldPair:
    """(w^{(c)}, d^{(c)}) so that w^{(p)} + w^{(h)} + w^{(c)} is an exact curl."""
    grid = _grid(amplitudes, grid)
    w = np.zeros((3,) + grid.shape, dtype=complex)
    d = np.zeros((3,) + grid.shape, dtype=complex)
    for a in amplitudes:
        scalar = a.value * a.flow.value(t)
        osc = a.oscillation
        if a.kind in ("v", "b"):
            w += _potential_curl(grid, scalar, osc.f_kbar, osc.lam)
        if a.kind == "s":
            w += _potential_curl(grid, scalar, osc.f_kbarbar, osc.lam)
        if a.kind in ("b", "s"):
            d += _potential_curl(grid, scalar, osc.f_kbarbar, osc.lam)
    wp, dp = principal
    wh, dh = helicity
    zero = _zeros(grid)
    return zero.with_coeffs(w) - wp - wh, zero.with_coeffs(d) - dp - dh


# -- initial ----------------------------------------------------------------

def initial_flows(v_in: SpectralField, b_in: SpectralField, ell: float, ell_prev: float,
                  t: float) -> FieldPair:
    """(w^{(s)}, d^{(s)}); w^{(s)}(0) + v_in∗ψ_{ℓ_{q−1}}∗ψ_{ℓ_q} = v_in∗ψ_{ℓ_q}.

    Raises:
        PreconditionError: BadEpsilon unless ℓ_q < ℓ_{q−1}
    """
    require(0.0 < ell < ell_prev, ErrorCode.BAD_EPSILON, "mollifier scales must decrease",
            ell=ell, ell_prev=ell_prev)

    def flow(f: SpectralField) -> SpectralField:
        return heat_semigroup(mollify(f, ell) - mollify(mollify(f, ell_prev), ell), t)

    return flow(v_in), flow(b_in)

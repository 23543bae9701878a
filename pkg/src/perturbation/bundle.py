"""
Perturbation bundles: the seven families at one time, their assembly into
(w_{q+1}, d_{q+1}) and the per-family norm ledger.
"""
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog

from ..cutoffs.eta import CutoffFamily
from ..cutoffs.gaps import GapScales
from ..solver.gluing import GluedFlow, GluedState
from ..torus.field import SpectralField
from ..torus.norms import sobolev
from ..torus.tfld import write_field
from ..utils.error_handling import ErrorCode, PreconditionError
from .coefficients import CoefficientSet, FlowLibrary, compute_coefficients
from .families import (corrector_flows, heat_flows, helicity_flows, initial_flows,
                       inverse_wave_flows, principal_flows, support_products, temporal_flows)

logger = structlog.get_logger(__name__)

FAMILIES = ("p", "h", "t", "v", "l", "c", "s")


@dataclass(eq=False)
class PerturbationBundle:
    t: float
    wp: SpectralField
    dp: SpectralField
    wh: SpectralField
    dh: SpectralField
    wt: SpectralField
    dt: SpectralField
    wv: SpectralField
    dv: SpectralField
    wl: SpectralField
    dl: SpectralField
    wc: SpectralField
    dc: SpectralField
    ws: SpectralField
    ds: SpectralField
    supports: Dict[str, float] = field(default_factory=dict)
    coefficients: Optional[CoefficientSet] = None

    def family(self, name: str) -> Tuple[SpectralField, SpectralField]:
        return getattr(self, f"w{name}"), getattr(self, f"d{name}")

    def fields(self) -> Dict[str, SpectralField]:
        out = {}
        for name in FAMILIES:
            out[f"w{name}"], out[f"d{name}"] = self.family(name)
        return out

    @property
    def w(self) -> SpectralField:
        return assemble(self)[0]

    @property
    def d(self) -> SpectralField:
        return assemble(self)[1]


def assemble(bundle: PerturbationBundle) -> Tuple[SpectralField, SpectralField]:
    """(w_{q+1}, d_{q+1}) as the sums of the seven families.

    Raises:
        PreconditionError: GridMismatch when the families live on different grids
    """
    fields = bundle.fields()
    grid = bundle.wp.grid
    for name, f in fields.items():
        if not grid.compatible(f.grid) or f.rank != 1:
            raise PreconditionError(ErrorCode.GRID_MISMATCH, "perturbation families disagree",
                                    details={"family": name, "n": f.grid.n, "expected": grid.n})
    w = bundle.wp
    d = bundle.dp
    for name in FAMILIES[1:]:
        wf, df = bundle.family(name)
        w, d = w + wf, d + df
    return w, d


def _l2(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def family_norms(bundle: PerturbationBundle) -> Dict[str, Dict[str, float]]:
    """L² and homogeneous H³ norms of every family and of the sums."""
    norms = {name: {"L2": _l2(f), "H3": sobolev(f, 3.0)} for name, f in bundle.fields().items()}
    w, d = assemble(bundle)
    norms["w"] = {"L2": _l2(w), "H3": sobolev(w, 3.0)}
    norms["d"] = {"L2": _l2(d), "H3": sobolev(d, 3.0)}
    return norms


def triangle_defects(bundle: PerturbationBundle) -> Dict[str, float]:
    """Σ family L² norms minus the L² norm of the sum (non-negative)."""
    norms = family_norms(bundle)
    return {
        target: sum(norms[f"{target}{name}"]["L2"] for name in FAMILIES) - norms[target]["L2"]
        for target in ("w", "d")
    }


def write_families(bundle: PerturbationBundle, directory, label: str = "family") -> Path:
    """One TFLD file per family plus a JSON index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, f in bundle.fields().items():
        path = write_field(directory / f"{label}_{name}.tfld", f, bundle.t, f"{label}.{name}")
        index[name] = path.name
    index_path = directory / f"{label}_index.json"
    index_path.write_text(json.dumps({"t": bundle.t, "files": index}, indent=2, sort_keys=True))
    logger.info("Families written", directory=str(directory), t=bundle.t)
    return index_path


def build_bundle(coefficients: CoefficientSet, library: FlowLibrary, v_in: SpectralField,
                 b_in: SpectralField, ell: float, ell_prev: float) -> PerturbationBundle:
    """All seven families from the amplitudes at ``coefficients.t``."""
    t, grid, params = coefficients.t, library.grid, library.params
    amplitudes = coefficients.amplitudes
    principal = principal_flows(amplitudes, t, grid)
    helicity = helicity_flows(amplitudes, t, grid)
    wt, dt = temporal_flows(amplitudes, t, params.mu, grid)
    wv, dv = inverse_wave_flows(amplitudes, t, params.mu, params.sigma, grid)
    wl, dl = heat_flows(amplitudes, t, params.mu, params.sigma, grid)
    wc, dc = corrector_flows(amplitudes, t, principal, helicity, grid)
    ws, ds = initial_flows(v_in, b_in, ell, ell_prev, t)
    return PerturbationBundle(
        t, principal[0], principal[1], helicity[0], helicity[1], wt, dt, wv, dv, wl, dl,
        wc, dc, ws, ds, supports=support_products(amplitudes, t), coefficients=coefficients,
    )


@dataclass(frozen=True, eq=False)
class Sample:
    """Next-level fields and the perturbation at one time."""
    t: float
    v: SpectralField
    b: SpectralField
    w: SpectralField
    d: SpectralField


class PerturbationBuilder:
    """Glued state, amplitudes and families at any time.

    Full bundles are not kept; the last ``capacity`` (v, b, w, d) samples are,
    which is what the time stencils need.
    """

    def __init__(self, glued: GluedFlow, library: FlowLibrary, cutoffs: CutoffFamily,
                 scales: GapScales, energy: Callable[[float], float],
                 helicity: Callable[[float], float], v_in: SpectralField, b_in: SpectralField,
                 ell: float, ell_prev: float, capacity: int = 8):
        self.glued = glued
        self.library = library
        self.cutoffs = cutoffs
        self.scales = scales
        self.energy = energy
        self.helicity = helicity
        self.v_in = v_in
        self.b_in = b_in
        self.ell = ell
        self.ell_prev = ell_prev
        self.capacity = capacity
        self._samples: "OrderedDict[float, Sample]" = OrderedDict()

    def at(self, t: float) -> Tuple[GluedState, PerturbationBundle]:
        key = float(t)
        glued = self.glued.at(key)
        coefficients = compute_coefficients(glued, self.library, self.cutoffs, self.scales,
                                            self.energy(key), self.helicity(key))
        bundle = build_bundle(coefficients, self.library, self.v_in, self.b_in,
                              self.ell, self.ell_prev)
        w, d = assemble(bundle)
        self._remember(Sample(key, glued.v + w, glued.b + d, w, d))
        return glued, bundle

    def sample(self, t: float) -> Sample:
        key = float(t)
        if key in self._samples:
            self._samples.move_to_end(key)
            return self._samples[key]
        self.at(key)
        return self._samples[key]

    def _remember(self, sample: Sample):
        self._samples[sample.t] = sample
        self._samples.move_to_end(sample.t)
        while len(self._samples) > self.capacity:
            self._samples.popitem(last=False)

    def prefetch(self, times: List[float]):
        """Evaluate in increasing time so the local solutions only step forward."""
        for t in sorted(set(float(t) for t in times)):
            self.sample(t)

    def clear(self):
        self._samples.clear()

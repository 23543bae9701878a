"""
Iteration levels: the tuple (v_q, b_q, p_q, R̊_q, M̊_q) as functions of time.

A level is never stored as a space-time array; it is a callable evaluating
the fields at any t ∈ [0, T].  Level 1 is the heat flow of the mollified
initial data with the start-up stresses, later levels are built by
``one_step``.
"""
import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import structlog

from ..operators.inverse_divergence import check_divergence_free
from ..solver.mhd import MHDState
from ..solver.stresses import StressPair, relaxed_residual, startup_tuple
from ..torus.field import SpectralField, check_mean_free, heat_semigroup, laplacian, mollify
from ..torus.tfld import read_field, write_field
from ..utils.error_handling import ErrorCode, PreconditionError, require
from .parameters import Ladder

logger = structlog.get_logger(__name__)

STATE_FILE = "state.json"


@dataclass(frozen=True, eq=False)
class LevelFields:
    t: float
    v: SpectralField
    b: SpectralField
    p: SpectralField
    stresses: StressPair
    dv_dt: SpectralField
    db_dt: SpectralField

    def mhd_state(self) -> MHDState:
        return MHDState(self.v, self.b, self.t)

    def residual(self) -> Dict[str, float]:
        return relaxed_residual(self.v, self.b, self.p, self.dv_dt, self.db_dt, self.stresses)


class IterationState:
    """Level q of the iteration.

    ``evaluate`` returns the full tuple at t; ``velocity`` (optional) returns
    just (v_q, b_q) when that is cheaper, which is all the gluing step needs.
    """

    def __init__(self, q: int, ladder: Ladder, v_in: SpectralField, b_in: SpectralField,
                 evaluate: Callable[[float], LevelFields],
                 velocity: Optional[Callable[[float], MHDState]] = None, capacity: int = 4):
        self.q = q
        self.ladder = ladder
        self.v_in = v_in
        self.b_in = b_in
        self._evaluate = evaluate
        self._velocity = velocity
        self.capacity = capacity
        self._cache: "OrderedDict[float, LevelFields]" = OrderedDict()

    @property
    def grid(self):
        return self.v_in.grid

    def fields_at(self, t: float) -> LevelFields:
        key = float(t)
        if key < 0.0:
            raise PreconditionError(ErrorCode.NEGATIVE_TIME, "levels live on [0, T]",
                                    details={"t": key})
        if key not in self._cache:
            self._cache[key] = self._evaluate(key)
            while len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
        return self._cache[key]

    def remember(self, fields: LevelFields):
        """Seed the cache with a tuple computed elsewhere."""
        self._cache[float(fields.t)] = fields
        while len(self._cache) > self.capacity:
            self._cache.popitem(last=False)

    def source(self, t: float) -> MHDState:
        if float(t) in self._cache or self._velocity is None:
            return self.fields_at(t).mhd_state()
        return self._velocity(float(t))

    def to_dict(self) -> Dict:
        return {"q": self.q, "ladder": self.ladder.to_dict(), "n": self.grid.n,
                "level": self.ladder.level(self.q)}


def check_initial_data(v_in: SpectralField, b_in: SpectralField):
    """Raises PreconditionError unless both fields are mean-free and divergence-free."""
    require(v_in.grid.compatible(b_in.grid), ErrorCode.GRID_MISMATCH,
            "initial fields live on different grids", n_v=v_in.grid.n, n_b=b_in.grid.n)
    for name, f in (("v_in", v_in), ("b_in", b_in)):
        require(f.rank == 1, ErrorCode.UNSUPPORTED_SPEC, f"{name} must be a vector field")
        check_mean_free(f, name)
        check_divergence_free(f, name)


def bootstrap(v_in: SpectralField, b_in: SpectralField, ladder: Ladder) -> IterationState:
    """Level 1: heat flow of (v_in, b_in)∗ψ_{ℓ₀} with p₁ and (R̊₁, M̊₁) from the start-up tuple."""
    check_initial_data(v_in, b_in)
    ell = ladder.ell(0)
    v0, b0 = mollify(v_in, ell), mollify(b_in, ell)

    def evaluate(t: float) -> LevelFields:
        v, b = heat_semigroup(v0, t), heat_semigroup(b0, t)
        p, stresses = startup_tuple(v, b)
        return LevelFields(t, v, b, p, stresses, laplacian(v), laplacian(b))

    def velocity(t: float) -> MHDState:
        return MHDState(heat_semigroup(v0, t), heat_semigroup(b0, t), t)

    logger.info("Level 1 bootstrapped", n=v_in.grid.n, ell=ell)
    return IterationState(1, ladder, v_in, b_in, evaluate, velocity)


def write_state(state: IterationState, directory, extra: Optional[Dict] = None) -> Path:
    """Initial data plus the level index; the level itself is rebuilt on load."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field(directory / "v_in.tfld", state.v_in, 0.0, "v_in")
    write_field(directory / "b_in.tfld", state.b_in, 0.0, "b_in")
    data = state.to_dict()
    data.update(extra or {})
    path = directory / STATE_FILE
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    logger.info("State written", directory=str(directory), q=state.q)
    return path


def read_state(directory) -> Tuple[SpectralField, SpectralField, Ladder, Dict]:
    """(v_in, b_in, ladder, metadata) of a saved state directory."""
    directory = Path(directory)
    path = directory / STATE_FILE
    if not path.exists():
        raise PreconditionError(ErrorCode.BAD_FILE, f"{directory} holds no {STATE_FILE}")
    data = json.loads(path.read_text())
    v_in, _ = read_field(directory / "v_in.tfld")
    b_in, _ = read_field(directory / "b_in.tfld", v_in.grid)
    return v_in, b_in, Ladder(**data["ladder"]), data

"""
Rational direction triples and the catalogs Λ_b, Λ_v, Λ_s.

Two catalogs are provided.  ``printed`` keeps the published k vectors and
their k̄̄ companions and completes each triple with k̄ = ±(k̄̄ × k); its
common denominator is 2665.  ``desk`` uses denominators of at most 5 so the
fast oscillation fits on a 64³ grid.
"""
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction as F
from functools import reduce
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog

from ..utils.error_handling import ErrorCode, require

logger = structlog.get_logger(__name__)

Vector = Tuple[F, F, F]

ORTHONORMAL_TOLERANCE = 1e-14


def _vec(*values) -> Vector:
    return tuple(F(v) for v in values)


def _cross(a: Vector, b: Vector) -> Vector:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot(a: Vector, b: Vector) -> F:
    return sum((x * y for x, y in zip(a, b)), F(0))


@dataclass(frozen=True)
class DirectionTriple:
    """Orthonormal rational triple (k, k̄, k̄̄)."""
    k: Vector
    kbar: Vector
    kbarbar: Vector

    @classmethod
    def complete(cls, k: Vector, kbar_hint: Vector, kbarbar: Vector) -> "DirectionTriple":
        """Keep k and k̄̄, set k̄ = ±(k̄̄ × k) with the sign closest to the hint."""
        kbar = _cross(kbarbar, k)
        if _dot(kbar, kbar_hint) < 0:
            kbar = tuple(-c for c in kbar)
        return cls(k, kbar, kbarbar)

    @property
    def vectors(self) -> np.ndarray:
        """Rows k, k̄, k̄̄ as floats."""
        return np.array([[float(c) for c in v] for v in (self.k, self.kbar, self.kbarbar)])

    @property
    def k_array(self) -> np.ndarray:
        return self.vectors[0]

    @property
    def kbar_array(self) -> np.ndarray:
        return self.vectors[1]

    @property
    def kbarbar_array(self) -> np.ndarray:
        return self.vectors[2]

    def denominators(self) -> List[int]:
        return [c.denominator for v in (self.k, self.kbar, self.kbarbar) for c in v]

    def orthonormality_defect(self) -> float:
        vectors = self.vectors
        return float(np.max(np.abs(vectors @ vectors.T - np.eye(3))))

    def to_dict(self) -> Dict[str, List[str]]:
        return {name: [str(c) for c in v]
                for name, v in (("k", self.k), ("kbar", self.kbar), ("kbarbar", self.kbarbar))}


@dataclass
class DirectionSet:
    label: str
    triples: List[DirectionTriple]
    epsilon: float = field(default=float("nan"))

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def to_dict(self) -> Dict:
        return {"label": self.label, "epsilon": self.epsilon,
                "triples": [t.to_dict() for t in self.triples]}


@dataclass
class DirectionCatalog:
    """The three direction sets and their common integerizer N_Λ."""
    name: str
    b: DirectionSet
    v: DirectionSet
    s: DirectionSet
    n_lambda: int

    def all_triples(self) -> List[Tuple[str, DirectionTriple]]:
        return [(d.label, t) for d in (self.b, self.v, self.s) for t in d]

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "n_lambda": self.n_lambda,
                           "sets": [self.b.to_dict(), self.v.to_dict(), self.s.to_dict()]},
                          indent=2)


E1, E2, E3 = _vec(1, 0, 0), _vec(0, 1, 0), _vec(0, 0, 1)

_SKEW_ROWS = [
    (E1, E2, E3),
    (E2, E3, E1),
    (E3, E1, E2),
    (_vec(0, F(-4, 5), F(-3, 5)), _vec(0, F(3, 5), F(-4, 5)), E1),
    (_vec(F(3, 5), F(4, 5), 0), _vec(F(4, 5), F(-3, 5), 0), E3),
]


def _printed_rows() -> Tuple[list, list]:
    sym = []
    for s in (1, -1):
        sym.append((_vec(F(12, 13), F(5 * s, 13), 0), _vec(F(5, 13), F(-12 * s, 13), 0), E3))
    for s in (1, -1):
        sym.append((_vec(F(5, 13), 0, F(12 * s, 13)), _vec(F(12, 13), 0, F(-5 * s, 13)), E2))
    for s in (1, -1):
        sym.append((_vec(0, F(12, 13), F(5 * s, 13)), _vec(0, F(5, 13), F(-12 * s, 13)), E1))
    helicity = [(_vec(F(9, 41), F(40, 41), 0), _vec(F(40, 41), F(-9, 41), 0), E3)]
    return sym, helicity


def _desk_rows() -> Tuple[list, list]:
    sym = [
        (_vec(F(4, 5), F(-3, 5), 0), _vec(F(3, 5), F(4, 5), 0), E3),
        (_vec(F(4, 5), F(3, 5), 0), _vec(F(3, 5), F(-4, 5), 0), E3),
        (_vec(0, F(4, 5), F(-3, 5)), _vec(0, F(3, 5), F(4, 5)), E1),
        (_vec(0, F(4, 5), F(3, 5)), _vec(0, F(3, 5), F(-4, 5)), E1),
        (_vec(F(3, 5), 0, F(-4, 5)), _vec(F(4, 5), 0, F(3, 5)), E2),
        (_vec(F(3, 5), 0, F(4, 5)), _vec(F(-4, 5), 0, F(3, 5)), E2),
    ]
    helicity = [(_vec(F(3, 5), F(-4, 5), 0), _vec(F(4, 5), F(3, 5), 0), E3)]
    return sym, helicity


def _lcm(values: Sequence[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def load_direction_sets(catalog: str = "printed") -> DirectionCatalog:
    """Build Λ_b, Λ_v, Λ_s and N_Λ for the named catalog."""
    require(catalog in ("printed", "desk"), ErrorCode.UNSUPPORTED_SPEC,
            f"unknown direction catalog '{catalog}'")
    sym, helicity = _printed_rows() if catalog == "printed" else _desk_rows()

    def build(label, rows):
        return DirectionSet(label, [DirectionTriple.complete(*row) for row in rows])

    b, v, s = build("b", _SKEW_ROWS), build("v", sym), build("s", helicity)
    n_lambda = _lcm([d for ds in (b, v, s) for t in ds for d in t.denominators()])
    for label, triple in DirectionCatalog(catalog, b, v, s, n_lambda).all_triples():
        defect = triple.orthonormality_defect()
        require(defect <= ORTHONORMAL_TOLERANCE, ErrorCode.SINGULAR_BASIS,
                "direction triple is not orthonormal", set=label, defect=defect)
    logger.debug("Direction catalog loaded", catalog=catalog, n_lambda=n_lambda)
    return DirectionCatalog(catalog, b, v, s, n_lambda)

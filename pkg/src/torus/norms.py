"""
Norms of spectral fields.

Lebesgue norms use gridpoint quadrature of the pointwise magnitude
(Euclidean for vectors, Frobenius for tensors).  Sobolev norms are weighted
mode sums.  ``W^{N,1}`` sums the L¹ norms of all spectral derivatives of
order at most N.
"""
import itertools
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..utils.error_handling import ErrorCode, PreconditionError
from .field import SpectralField


@dataclass(frozen=True)
class NormSpec:
    """Which norm to take.

    kind is "L" (with p in {1, 2, inf}), "H" (real s, ``homogeneous`` flag)
    or "W" (integer order, exponent 1).
    """
    kind: str
    order: float
    homogeneous: bool = True

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse "L1", "L2", "Linf", "H1.5", "H2full" or "W3,1"."""
        text = text.strip()
        match = re.fullmatch(r"L(1|2|inf)", text)
        if match:
            p = match.group(1)
            return cls("L", np.inf if p == "inf" else float(p))
        match = re.fullmatch(r"H(-?\d+(?:\.\d+)?)(full)?", text)
        if match:
            return cls("H", float(match.group(1)), homogeneous=match.group(2) is None)
        match = re.fullmatch(r"W(\d+),1", text)
        if match:
            return cls("W", float(match.group(1)))
        raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, f"unknown norm '{text}'")


def magnitude(samples: np.ndarray, rank: int) -> np.ndarray:
    """Pointwise |f| of real samples."""
    if rank == 0:
        return np.abs(samples)
    axes = tuple(range(rank))
    return np.sqrt(np.sum(samples ** 2, axis=axes))


def lebesgue(samples: np.ndarray, rank: int, p: float) -> float:
    values = magnitude(samples, rank)
    if p == 1:
        return float(np.mean(values))
    if p == 2:
        return float(np.sqrt(np.mean(values ** 2)))
    if p == np.inf:
        return float(np.max(values))
    raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, "p must be 1, 2 or inf", details={"p": p})


def sobolev(f: SpectralField, s: float, homogeneous: bool = True) -> float:
    grid = f.grid
    k2 = grid.k_squared
    if homogeneous:
        weight = np.zeros(grid.shape)
        nonzero = k2 > 0
        weight[nonzero] = (4.0 * np.pi ** 2 * k2[nonzero]) ** s
    else:
        weight = (1.0 + 4.0 * np.pi ** 2 * k2) ** s
    power = np.abs(f.coeffs) ** 2
    if f.rank:
        power = np.sum(power, axis=tuple(range(f.rank)))
    return float(np.sqrt(np.sum(weight * power)))


def sobolev_w1(f: SpectralField, order: int) -> float:
    grid = f.grid
    m = 2j * np.pi * grid.derivative_modes
    total = 0.0
    for alpha in itertools.product(range(order + 1), repeat=3):
        if sum(alpha) > order:
            continue
        symbol = m[0] ** alpha[0] * m[1] ** alpha[1] * m[2] ** alpha[2]
        total += lebesgue(grid.inverse(f.coeffs * symbol), f.rank, 1)
    return total


def norm(f: SpectralField, spec: Union[NormSpec, str]) -> float:
    """Norm of a field under ``spec``."""
    if isinstance(spec, str):
        spec = NormSpec.parse(spec)
    if spec.kind == "L":
        return lebesgue(f.to_real(), f.rank, spec.order)
    if spec.kind == "H":
        return sobolev(f, spec.order, spec.homogeneous)
    if spec.kind == "W":
        if spec.order != int(spec.order) or spec.order < 0:
            raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, "W order must be a natural number")
        return sobolev_w1(f, int(spec.order))
    raise PreconditionError(ErrorCode.UNSUPPORTED_SPEC, f"unknown norm kind '{spec.kind}'")


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """∫ f·g over T³ via Parseval."""
    return float(np.sum((f.coeffs * np.conj(g.coeffs)).real))


def energy_spectrum(f: SpectralField) -> np.ndarray:
    """Shell-summed ½|ĉ|², indexed by rounded |m|."""
    grid = f.grid
    power = np.abs(f.coeffs) ** 2
    if f.rank:
        power = np.sum(power, axis=tuple(range(f.rank)))
    shells = np.rint(grid.mode_magnitude).astype(np.int64)
    return 0.5 * np.bincount(shells.ravel(), weights=power.ravel())

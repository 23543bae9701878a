"""
TFLD v1 field files.

Layout (little-endian): magic ``TFLD``, u32 version, u32 n, u8 rank,
u8 symmetry tag, then float64 real-space samples, component-major with
x3 fastest.  A JSON sidecar ``<name>.json`` carries n, rank, time, label.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import structlog

from ..utils.error_handling import ErrorCode, PreconditionError
from .field import SpectralField, Symmetry
from .grid import Grid

logger = structlog.get_logger(__name__)

MAGIC = b"TFLD"
VERSION = 1
HEADER = struct.Struct("<4sIIBB")

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_field(path: PathLike, field: SpectralField, time: float = 0.0,
                label: str = "") -> Path:
    """Write ``field`` and its sidecar; returns the field path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.ascontiguousarray(field.to_real(), dtype="<f8")
    with path.open("wb") as handle:
        handle.write(HEADER.pack(MAGIC, VERSION, field.grid.n, field.rank, field.symmetry.value))
        handle.write(samples.tobytes(order="C"))
    meta = {"n": field.grid.n, "rank": field.rank, "time": float(time), "label": label}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    logger.debug("Field written", path=str(path), rank=field.rank, label=label)
    return path


def read_field(path: PathLike, grid: Optional[Grid] = None) -> Tuple[SpectralField, Dict[str, Any]]:
    """Read a field file and its sidecar (sidecar optional)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise PreconditionError(ErrorCode.BAD_FILE, f"{path} is too short for a TFLD header")
    magic, version, n, rank, tag = HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise PreconditionError(ErrorCode.BAD_FILE, f"{path} is not a TFLD v1 file",
                                details={"magic": magic.decode("latin-1"), "version": version})
    components = 3 ** rank
    expected = HEADER.size + 8 * components * n ** 3
    if len(raw) != expected:
        raise PreconditionError(ErrorCode.BAD_FILE, f"{path} has the wrong payload size",
                                details={"expected": expected, "got": len(raw)})
    shape = (3,) * rank + (n, n, n)
    samples = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(shape)
    if grid is None:
        grid = Grid(n)
    elif grid.n != n:
        raise PreconditionError(ErrorCode.GRID_MISMATCH, "file resolution differs from grid",
                                details={"file": n, "grid": grid.n})
    field = SpectralField.from_real(grid, samples.astype(float), Symmetry(tag))
    meta: Dict[str, Any] = {"n": n, "rank": rank, "time": 0.0, "label": ""}
    side = sidecar_path(path)
    if side.exists():
        meta.update(json.loads(side.read_text()))
    return field, meta

"""
Configuration for the workbench.

Settings are pydantic models grouped by section.  Values are layered:
defaults < key-value config file < environment (``WORKBENCH_<SECTION>__<KEY>``)
< ``--set section.key=value`` overrides from the command line.
"""
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Literal, Optional

import structlog
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .error_handling import ErrorCode, PreconditionError

logger = structlog.get_logger(__name__)

ENV_PREFIX = "WORKBENCH_"


def _parse_number(value: Any) -> Any:
    # accepts "1/64" style fractions in files and env vars
    if isinstance(value, str) and "/" in value:
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            return value
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    @field_validator("*", mode="before")
    @classmethod
    def _fractions(cls, value: Any) -> Any:
        return _parse_number(value)


class GridSettings(_Section):
    n: int = Field(64, ge=8)
    dealias_fraction: float = Field(2.0 / 3.0, gt=0.0, le=1.0)
    workers: int = Field(1, ge=1)

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError("n must be a power of two")
        return value


class LadderSettings(_Section):
    a: float = Field(2.0, gt=1.0)
    b: int = Field(2, ge=2)
    beta: float = Field(1.0 / 16.0, gt=0.0)
    alpha: float = Field(1.0 / 64.0, gt=0.0)
    q: int = Field(1, ge=1)
    tau: float = Field(1.0 / 8.0, gt=0.0)
    tau_prev: float = Field(1.0 / 4.0, gt=0.0)
    horizon: float = Field(1.0, gt=0.0)
    # the ladder lambda (a^(b^q)) is decoupled from the desk flow frequency
    ell_exponent: float = Field(6.0, gt=0.0)


class FlowSettings(_Section):
    catalog: Literal["desk", "printed"] = "desk"
    lam: int = Field(6, ge=1)
    sigma: int = Field(1, ge=1)
    mu: int = Field(8, ge=1)
    r_inv: int = Field(1, ge=1)
    rbar_inv: int = Field(1, ge=1)
    rbarbar_inv: int = Field(1, ge=1)
    support_width: float = Field(1.0 / 8.0, gt=0.0, lt=1.0)
    seed: int = 0
    shift_budget: int = Field(100_000, ge=1)


class CutoffSettings(_Section):
    epsilon: float = Field(0.25, gt=0.0, lt=1.0 / 3.0)
    epsilon0: float = Field(1.0 / 32.0, gt=0.0)
    # exponent alpha in the gap scales l^(alpha/2), l^(alpha/3), l^(alpha/4)
    gap_alpha: float = Field(3.0, gt=0.0)


class SolverSettings(_Section):
    dt: float = Field(1.0 / 64.0, gt=0.0)
    cfl: float = Field(0.5, gt=0.0)
    blowup: float = Field(1.0e6, gt=0.0)
    local_timeout: float = Field(900.0, gt=0.0)
    fd_step: float = Field(2.0e-4, gt=0.0)
    duhamel_nodes: int = Field(16, ge=16)


class StepSettings(_Section):
    residual_samples: int = Field(3, ge=1)
    identity_samples: int = Field(2, ge=1)
    residual_tolerance: float = Field(1.0e-6, gt=0.0)
    pin_tolerance: float = Field(1.0e-10, gt=0.0)
    energy_tolerance: float = Field(0.05, gt=0.0)


class ProfileSettings(_Section):
    # e(t) = initial energy + energy_offset * delta_{q+1}
    energy_offset: float = Field(3.0, gt=0.0)
    # h(t) = initial cross helicity + helicity_offset * delta_{q+1}
    helicity_offset: float = Field(0.01, gt=0.0)
    energy_file: Optional[str] = None
    helicity_file: Optional[str] = None


class WorkbenchSettings(BaseModel):
    """All settings of a run."""
    model_config = ConfigDict(extra="forbid")

    grid: GridSettings = GridSettings()
    ladder: LadderSettings = LadderSettings()
    flows: FlowSettings = FlowSettings()
    cutoffs: CutoffSettings = CutoffSettings()
    solver: SolverSettings = SolverSettings()
    step: StepSettings = StepSettings()
    profiles: ProfileSettings = ProfileSettings()

    @classmethod
    def desk(cls) -> "WorkbenchSettings":
        """Desk-scale preset: n=64, a=b=2, beta=1/16, alpha=1/64."""
        return cls()


def read_kv_file(path: str) -> Dict[str, str]:
    """Read a ``key = value`` file; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionError(
                ErrorCode.CONFIG_INVALID, f"{path}:{lineno}: expected key = value"
            )
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _env_overrides(environ: Dict[str, str]) -> Dict[str, str]:
    values = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        values[f"{section.lower()}.{key.lower()}"] = value
    return values


def _nest(flat: Dict[str, str]) -> Dict[str, Dict[str, str]]:
    nested: Dict[str, Dict[str, str]] = {}
    for dotted, value in flat.items():
        if "." not in dotted:
            raise PreconditionError(
                ErrorCode.CONFIG_INVALID, f"setting '{dotted}' must be section.key"
            )
        section, key = dotted.split(".", 1)
        nested.setdefault(section, {})[key] = value
    return nested


def load_settings(
    config_file: Optional[str] = None,
    overrides: Iterable[str] = (),
    environ: Optional[Dict[str, str]] = None,
) -> WorkbenchSettings:
    """Build settings from the layered sources.

    Args:
        config_file: optional key-value file
        overrides: ``section.key=value`` strings, highest precedence
        environ: environment mapping (defaults to ``os.environ`` after
            loading a ``.env`` file)

    Returns:
        Validated settings
    """
    if environ is None:
        load_dotenv()
        environ = dict(os.environ)

    flat: Dict[str, str] = {}
    if config_file:
        flat.update(read_kv_file(config_file))
    flat.update(_env_overrides(environ))
    for item in overrides:
        if "=" not in item:
            raise PreconditionError(
                ErrorCode.CONFIG_INVALID, f"override '{item}' must be section.key=value"
            )
        key, value = item.split("=", 1)
        flat[key.strip()] = value.strip()

    try:
        settings = WorkbenchSettings.model_validate(_nest(flat))
    except ValidationError as e:
        raise PreconditionError(
            ErrorCode.CONFIG_INVALID, "invalid configuration",
            details={"errors": e.errors(include_url=False, include_context=False, include_input=False)},
        ) from e
    logger.debug("Settings loaded", sources=len(flat))
    return settings

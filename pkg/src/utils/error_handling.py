"""
Error handling utilities for the workbench pipeline.

Every failure the numerical stages can signal is a ``WorkbenchError`` with an
``ErrorCode``.  The two families map onto process exit codes so the CLI can
tell a bad input (precondition) from a grid that is too coarse (resolution).
"""
import asyncio
import functools
import inspect
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, TypeVar

import structlog

from .metrics import STAGE_FAILURES, STAGE_SECONDS

logger = structlog.get_logger(__name__)

T = TypeVar('T')


class ExitCode(Enum):
    """Process exit codes of the CLI."""
    SUCCESS = 0
    PRECONDITION = 2
    RESOLUTION = 3


class ErrorCode(Enum):
    """Failure codes raised by the numerical stages."""
    # preconditions
    NON_ZERO_MEAN = "NonZeroMean"
    NOT_DIVERGENCE_FREE = "NotDivergenceFree"
    NEGATIVE_TIME = "NegativeTime"
    BAD_EPSILON = "BadEpsilon"
    UNSUPPORTED_SPEC = "UnsupportedSpec"
    OUTSIDE_BALL = "OutsideBall"
    SINGULAR_BASIS = "SingularBasis"
    NEGATIVE_INPUT = "NegativeInput"
    GAP_VANISHES = "GapVanishes"
    GAP_NEGATIVE = "GapNegative"
    NOT_INTEGER = "NotInteger"
    NON_INTEGER_WAVEVECTOR = "NonIntegerWavevector"
    TOO_FEW_SAMPLES = "TooFewSamples"
    BAD_TAU = "BadTau"
    BAD_EPSILONS = "BadEpsilons"
    MEAN_MISMATCH = "MeanMismatch"
    GRID_MISMATCH = "GridMismatch"
    NON_SOLENOIDAL_RESIDUAL = "NonSolenoidalResidual"
    CONFIG_INVALID = "ConfigInvalid"
    BAD_FILE = "BadFile"
    # resolution
    UNDER_RESOLVED = "UnderResolved"
    PLACEMENT_FAILED = "PlacementFailed"
    CFL_VIOLATION = "CFLViolation"
    BLOWUP_DETECTED = "BlowupDetected"
    QUADRATURE_UNDER_RESOLVED = "QuadratureUnderResolved"
    STAGE_TIMEOUT = "StageTimeout"


@dataclass(eq=False)
class WorkbenchError(Exception):
    """Base error carrying a code, the failing stage and details."""
    code: ErrorCode
    message: str
    stage: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    exit_code = ExitCode.PRECONDITION

    def __post_init__(self):
        super().__init__(self.message)

    def __str__(self) -> str:
        prefix = f"[{self.stage}] " if self.stage else ""
        return f"{prefix}{self.code.value}: {self.message}"

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to a JSON-ready dictionary."""
        return {
            "error": self.code.value,
            "message": self.message,
            "stage": self.stage,
            "exit_code": self.exit_code.value,
            "details": self.details,
        }


class PreconditionError(WorkbenchError):
    """Inputs violate an operation's precondition."""
    exit_code = ExitCode.PRECONDITION


class ResolutionError(WorkbenchError):
    """The discretization cannot represent what was asked."""
    exit_code = ExitCode.RESOLUTION


def pipeline_stage(name: str):
    """Log, time and label a pipeline stage.

    Works on plain and coroutine functions.  Any ``WorkbenchError`` raised
    inside without a stage gets ``name`` stamped on it.
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        def _failed(error: WorkbenchError):
            if error.stage is None:
                error.stage = name
            STAGE_FAILURES.labels(stage=name, code=error.code.value).inc()
            logger.error("Stage failed", stage=name, error=str(error))

        if inspect.iscoroutinefunction(func):
            @functools.wraps(func)
            async def async_wrapper(*args, **kwargs) -> T:
                started = time.perf_counter()
                logger.info("Stage started", stage=name)
                try:
                    result = await func(*args, **kwargs)
                except WorkbenchError as e:
                    _failed(e)
                    raise
                elapsed = time.perf_counter() - started
                STAGE_SECONDS.labels(stage=name).observe(elapsed)
                logger.info("Stage finished", stage=name, seconds=round(elapsed, 3))
                return result
            return async_wrapper

        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> T:
            started = time.perf_counter()
            logger.info("Stage started", stage=name)
            try:
                result = func(*args, **kwargs)
            except WorkbenchError as e:
                _failed(e)
                raise
            elapsed = time.perf_counter() - started
            STAGE_SECONDS.labels(stage=name).observe(elapsed)
            logger.info("Stage finished", stage=name, seconds=round(elapsed, 3))
            return result
        return wrapper
    return decorator


def timeout(seconds: float):
    """Bound a batch of local MHD solves by a wall-clock limit.

    Raises:
        ResolutionError: StageTimeout once ``seconds`` elapse
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @functools.wraps(func)
        async def wrapper(*args, **kwargs) -> T:
            try:
                return await asyncio.wait_for(func(*args, **kwargs), timeout=seconds)
            except asyncio.TimeoutError:
                logger.error("Local solves exceeded the wall-clock limit",
                             batch=func.__name__, limit=seconds)
                raise ResolutionError(
                    ErrorCode.STAGE_TIMEOUT,
                    f"local solves did not finish within {seconds} s",
                    details={"limit": seconds, "batch": func.__name__},
                )

        return wrapper
    return decorator


def require(condition: bool, code: ErrorCode, message: str, /, **details: Any) -> None:
    """Raise a ``PreconditionError`` unless ``condition`` holds."""
    if not condition:
        raise PreconditionError(code, message, details=details)

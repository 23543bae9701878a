"""
The regularizer χ: equal to 1 on [0, 2], to z on [4, ∞), and the quintic
Hermite bridge 1 + 22s³ − 31s⁴ + 12s⁵ (s = (z − 2)/2) in between.
"""
import numpy as np

from ..utils.error_handling import ErrorCode, require


def _check(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    require(bool(np.all(z >= 0)), ErrorCode.NEGATIVE_INPUT, "χ needs z >= 0",
            min=float(np.min(z)) if z.size else 0.0)
    return z


def chi(z):
    z = _check(z)
    s = np.clip((z - 2.0) / 2.0, 0.0, 1.0)
    bridge = 1.0 + s ** 3 * (22.0 - 31.0 * s + 12.0 * s ** 2)
    out = np.where(z >= 4.0, z, bridge)
    return out if out.ndim else float(out)


def chi_prime(z):
    z = _check(z)
    s = np.clip((z - 2.0) / 2.0, 0.0, 1.0)
    # d/dz = ½ d/ds
    bridge = 0.5 * s ** 2 * (66.0 - 124.0 * s + 60.0 * s ** 2)
    out = np.where(z >= 4.0, 1.0, bridge)
    return out if out.ndim else float(out)


def japanese_bracket(m: np.ndarray) -> np.ndarray:
    """⟨A⟩ = (1 + ‖A‖_F²)^{1/2} pointwise for samples of shape (3, 3, ...)."""
    return np.sqrt(1.0 + np.sum(np.asarray(m) ** 2, axis=(0, 1)))

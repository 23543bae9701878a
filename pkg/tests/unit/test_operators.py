"""
Unit tests for the tensor divergence and its right inverses
"""
import numpy as np
import pytest

from src.operators.inverse_divergence import (check_divergence_free, div_tensor, inv_div_anti,
                                              inv_div_sym, pressure_from_stress)
from src.torus.field import Symmetry, divergence, laplacian, leray_project, remove_mean
from src.utils.error_handling import ErrorCode, PreconditionError


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)) / np.sqrt(np.sum(np.abs(b) ** 2)))


class TestSymmetricInverse:
    """ℛ: vectors to symmetric trace-free tensors"""

    def test_divergence_of_inverse_is_identity(self, grid16, random_field):
        v = remove_mean(random_field(grid16, 1))
        assert _rel(div_tensor(inv_div_sym(v)).coeffs, v.coeffs) < 1e-12

    def test_output_is_symmetric_and_tracefree(self, grid16, random_field):
        m = inv_div_sym(remove_mean(random_field(grid16, 1)))
        samples = m.to_real()
        assert m.symmetry is Symmetry.SYMMETRIC_TRACEFREE
        assert np.max(np.abs(samples - np.swapaxes(samples, 0, 1))) < 1e-12
        assert np.max(np.abs(np.einsum("ii...->...", samples))) < 1e-12

    def test_rejects_non_zero_mean(self, grid16, random_field):
        v = random_field(grid16, 1)
        v = v.with_coeffs(v.coeffs.copy())
        v.coeffs[0, 0, 0, 0] = 1.0
        with pytest.raises(PreconditionError) as e:
            inv_div_sym(v)
        assert e.value.code is ErrorCode.NON_ZERO_MEAN


class TestAntisymmetricInverse:
    """ℛ_a: solenoidal vectors to antisymmetric tensors"""

    def test_divergence_of_inverse_is_identity(self, grid16, random_field):
        u = leray_project(remove_mean(random_field(grid16, 1)))
        m = inv_div_anti(u)
        assert m.symmetry is Symmetry.ANTISYMMETRIC
        assert _rel(div_tensor(m).coeffs, u.coeffs) < 1e-12

    def test_output_is_antisymmetric(self, grid16, random_field):
        samples = inv_div_anti(leray_project(remove_mean(random_field(grid16, 1)))).to_real()
        assert np.max(np.abs(samples + np.swapaxes(samples, 0, 1))) < 1e-12

    def test_rejects_compressible_input(self, grid16, random_field):
        with pytest.raises(PreconditionError) as e:
            inv_div_anti(remove_mean(random_field(grid16, 1)))
        assert e.value.code is ErrorCode.NOT_DIVERGENCE_FREE

    def test_check_divergence_free_accepts_projected(self, grid16, random_field):
        check_divergence_free(leray_project(random_field(grid16, 1)))


class TestPressure:
    """Δ⁻¹ div div"""

    def test_laplacian_of_pressure_is_double_divergence(self, grid16, random_field):
        m = random_field(grid16, 2)
        p = pressure_from_stress(m)
        expected = divergence(div_tensor(m))
        assert _rel(laplacian(p).coeffs, expected.coeffs) < 1e-12
        assert abs(p.mean()) < 1e-15

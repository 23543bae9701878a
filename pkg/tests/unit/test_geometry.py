"""
Unit tests for direction catalogs, positive decompositions and χ
"""
import numpy as np
import pytest

from src.geometry.directions import load_direction_sets
from src.geometry.lemmas import (decompose_skew, decompose_sym, pointwise_coefficient_fields,
                                 skew_decomposition, sym_decomposition)
from src.geometry.regularizer import chi, chi_prime, japanese_bracket
from src.utils.error_handling import ErrorCode, PreconditionError


def _scaled(m: np.ndarray, radius: float) -> np.ndarray:
    """Rescale ``m`` to Frobenius norm ``radius``."""
    return m * (radius / np.linalg.norm(m))


@pytest.fixture(scope="module")
def desk():
    return load_direction_sets("desk")


@pytest.fixture(scope="module")
def skew(desk):
    return skew_decomposition(desk.b)


@pytest.fixture(scope="module")
def sym(desk):
    return sym_decomposition(desk.v)


class TestDirectionCatalogs:
    """Rational orthonormal triples"""

    def test_integerizers(self, sample_data):
        flows = sample_data["flows"]
        assert load_direction_sets("desk").n_lambda == flows["desk_n_lambda"]
        assert load_direction_sets("printed").n_lambda == flows["printed_n_lambda"]

    @pytest.mark.parametrize("catalog", ["desk", "printed"])
    def test_triples_are_orthonormal(self, catalog):
        for _, triple in load_direction_sets(catalog).all_triples():
            assert triple.orthonormality_defect() <= 1e-14

    def test_set_sizes(self, desk):
        assert (len(desk.b), len(desk.v), len(desk.s)) == (5, 6, 1)

    def test_unknown_catalog(self):
        with pytest.raises(PreconditionError) as e:
            load_direction_sets("other")
        assert e.value.code is ErrorCode.UNSUPPORTED_SPEC

    @pytest.mark.parametrize("catalog", ["desk", "printed"])
    def test_skew_decomposition_builds(self, catalog):
        decomposition = skew_decomposition(load_direction_sets(catalog).b)
        assert decomposition.epsilon > 0.0
        assert np.all(decomposition.center > 0.0)

    def test_sym_decomposition_builds(self):
        decomposition = sym_decomposition(load_direction_sets("desk").v)
        assert decomposition.epsilon > 0.0
        assert np.all(decomposition.center > 0.0)


class TestSkewDecomposition:
    """Skew matrices near the origin along Λ_b"""

    def test_radius_is_positive_and_recorded(self, skew, desk):
        assert skew.epsilon > 0.0
        assert desk.b.epsilon == skew.epsilon

    def test_recomposes_with_positive_coefficients(self, skew, sample_data):
        m = _scaled(np.array(sample_data["matrices"]["skew_small"]), 0.5 * skew.epsilon)
        coeffs = decompose_skew(m, skew)
        assert np.all(coeffs > 0.0)
        assert np.allclose(skew.recompose(coeffs), m, atol=1e-13)

    def test_zero_has_central_coefficients(self, skew):
        assert np.allclose(decompose_skew(np.zeros((3, 3)), skew), skew.center)

    def test_outside_ball(self, skew, sample_data):
        m = _scaled(np.array(sample_data["matrices"]["skew_small"]), 2.0 * skew.epsilon)
        with pytest.raises(PreconditionError) as e:
            decompose_skew(m, skew)
        assert e.value.code is ErrorCode.OUTSIDE_BALL

    def test_rejects_symmetric_input(self, skew):
        with pytest.raises(PreconditionError) as e:
            decompose_skew(np.eye(3) * 1e-3, skew)
        assert e.value.code is ErrorCode.UNSUPPORTED_SPEC

    def test_ray_search_covers_certified_radius(self, skew):
        assert skew.ray_search(directions=2000) >= skew.epsilon * (1.0 - 1e-12)


class TestSymmetricDecomposition:
    """Symmetric matrices near the identity along Λ_v"""

    def test_identity_expansion(self, sym):
        assert np.all(sym.center > 0.0)
        assert np.allclose(sym.recompose(sym.center), np.eye(3), atol=1e-13)

    def test_recomposes_near_identity(self, sym, sample_data):
        offset = np.array(sample_data["matrices"]["sym_near_identity"]) - np.eye(3)
        r = np.eye(3) + _scaled(offset, 0.5 * sym.epsilon)
        coeffs = decompose_sym(r, sym)
        assert np.all(coeffs > 0.0)
        assert np.allclose(sym.recompose(coeffs), r, atol=1e-13)

    def test_far_matrix_is_outside(self, sym, sample_data):
        offset = np.array(sample_data["matrices"]["sym_far"]) - np.eye(3)
        r = np.eye(3) + _scaled(offset, 2.0 * sym.epsilon)
        with pytest.raises(PreconditionError) as e:
            decompose_sym(r, sym)
        assert e.value.code is ErrorCode.OUTSIDE_BALL

    def test_rejects_skew_input(self, sym, sample_data):
        with pytest.raises(PreconditionError) as e:
            decompose_sym(np.eye(3) + np.array(sample_data["matrices"]["skew_small"]), sym)
        assert e.value.code is ErrorCode.UNSUPPORTED_SPEC


class TestCoefficientFields:
    """Pointwise amplitudes on the grid"""

    def test_symmetric_amplitudes_recompose_gap_minus_stress(self, sym):
        shape = (4, 4, 4)
        rng = np.random.default_rng(7)
        offsets = rng.standard_normal((3, 3) + shape)
        offsets = 0.5 * (offsets + np.swapaxes(offsets, 0, 1))
        offsets *= 0.3 * sym.epsilon / np.max(np.sqrt(np.sum(offsets ** 2, axis=(0, 1))))
        gap = np.full(shape, 2.0)
        stress = gap * offsets
        amplitudes = pointwise_coefficient_fields(stress, gap, sym)
        recomposed = np.tensordot(sym.generators, amplitudes ** 2, axes=([0], [0]))
        expected = gap * np.eye(3).reshape(3, 3, 1, 1, 1) - stress
        assert np.allclose(recomposed, expected, atol=1e-12)

    def test_cutoff_zeroes_amplitudes(self, skew):
        shape = (2, 2, 2)
        eta = np.zeros(shape)
        amplitudes = pointwise_coefficient_fields(np.zeros((3, 3) + shape), np.zeros(shape),
                                                  skew, eta)
        assert np.all(amplitudes == 0.0)

    def test_vanishing_gap_on_support(self, skew):
        shape = (2, 2, 2)
        with pytest.raises(PreconditionError) as e:
            pointwise_coefficient_fields(np.zeros((3, 3) + shape), np.zeros(shape), skew)
        assert e.value.code is ErrorCode.GAP_VANISHES


class TestRegularizer:
    """χ and ⟨·⟩"""

    @pytest.mark.parametrize("z,expected", [(0.0, 1.0), (1.5, 1.0), (3.0, 2.1875), (4.0, 4.0),
                                            (7.5, 7.5)])
    def test_chi_values(self, z, expected):
        assert chi(z) == pytest.approx(expected)

    def test_chi_prime_matches_difference_quotient(self):
        z = np.linspace(0.0, 6.0, 61)[1:-1]
        h = 1e-6
        quotient = (chi(z + h) - chi(z - h)) / (2.0 * h)
        assert np.allclose(chi_prime(z), quotient, atol=1e-5)

    def test_negative_input(self):
        with pytest.raises(PreconditionError) as e:
            chi(-0.5)
        assert e.value.code is ErrorCode.NEGATIVE_INPUT

    def test_japanese_bracket(self):
        m = np.zeros((3, 3, 2))
        m[0, 1, 1] = np.sqrt(3.0)
        assert np.allclose(japanese_bracket(m), [1.0, 2.0])

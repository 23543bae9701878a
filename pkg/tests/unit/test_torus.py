"""
Unit tests for the spectral calculus on T³
"""
import numpy as np
import pytest

from src.torus.field import (SpectralField, Symmetry, curl, divergence, gradient, heat_semigroup,
                             inverse_laplacian, laplacian, leray_project, mollifier_multiplier,
                             mollify, outer, random_solenoidal, remove_mean, shear_field,
                             tracefree_outer, translate, wedge)
from src.torus.grid import Grid
from src.torus.norms import NormSpec, energy_spectrum, l2_inner, lebesgue, norm, sobolev
from src.torus.tfld import HEADER, read_field, write_field
from src.utils.error_handling import ErrorCode, PreconditionError


def _l2(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def _scalar_mode(grid: Grid, mode=(1, 0, 0)) -> SpectralField:
    x1, x2, x3 = grid.coordinates
    phase = 2.0 * np.pi * (mode[0] * x1 + mode[1] * x2 + mode[2] * x3)
    return SpectralField.from_real(grid, np.sin(phase) + 0.0 * x1 * x2 * x3)


class TestGrid:
    """Grid construction and symbols"""

    def test_grid_rejects_non_power_of_two(self):
        with pytest.raises(PreconditionError) as e:
            Grid(24)
        assert e.value.code is ErrorCode.UNSUPPORTED_SPEC

    def test_dealias_cutoff_desk(self, grid64):
        assert grid64.dealias_cutoff == 21

    def test_nyquist_modes_have_zero_derivative_symbol(self, grid16):
        m = grid16.derivative_modes
        assert np.all(m[0][8, :, :] == 0.0)


class TestSpectralField:
    """Construction, transforms and arithmetic"""

    def test_round_trip_band_limited(self, grid16, random_field):
        f = random_field(grid16, 1)
        back = SpectralField.from_real(grid16, f.to_real())
        assert np.allclose(back.coeffs, f.coeffs, atol=1e-14)

    def test_mismatched_grids_raise(self, grid16, grid32):
        with pytest.raises(PreconditionError) as e:
            SpectralField.zeros(grid16, 1) + SpectralField.zeros(grid32, 1)
        assert e.value.code is ErrorCode.GRID_MISMATCH

    def test_symmetry_kept_when_both_agree(self, grid16):
        a = SpectralField.zeros(grid16, 2, Symmetry.ANTISYMMETRIC)
        assert (a + a).symmetry is Symmetry.ANTISYMMETRIC
        s = SpectralField.zeros(grid16, 2, Symmetry.SYMMETRIC_TRACEFREE)
        assert (a + s).symmetry is Symmetry.NONE


class TestLinearOperators:
    """Derivatives, projections and semigroups"""

    def test_gradient_of_single_mode(self, grid16):
        f = _scalar_mode(grid16)
        x1 = grid16.coordinates[0]
        expected = 2.0 * np.pi * np.cos(2.0 * np.pi * x1) * np.ones(grid16.shape)
        assert np.allclose(gradient(f).to_real()[0], expected, atol=1e-12)
        assert np.allclose(gradient(f).to_real()[1], 0.0, atol=1e-12)

    def test_divergence_of_curl_vanishes(self, grid16, random_field):
        v = random_field(grid16, 1)
        assert _l2(divergence(curl(v))) < 1e-10 * max(_l2(v), 1.0)

    def test_leray_projection_is_divergence_free_and_idempotent(self, grid16, random_field):
        v = leray_project(random_field(grid16, 1))
        assert _l2(divergence(v)) < 1e-12 * _l2(gradient(v))
        assert np.allclose(leray_project(v).coeffs, v.coeffs, atol=1e-14)

    def test_laplacian_of_single_mode(self, grid16):
        f = _scalar_mode(grid16, (1, 2, 0))
        assert np.allclose(laplacian(f).coeffs, -4.0 * np.pi ** 2 * 5.0 * f.coeffs, atol=1e-10)

    def test_inverse_laplacian_requires_mean_free(self, grid16):
        f = SpectralField.from_real(grid16, np.ones(grid16.shape))
        with pytest.raises(PreconditionError) as e:
            inverse_laplacian(f)
        assert e.value.code is ErrorCode.NON_ZERO_MEAN

    def test_inverse_laplacian_inverts(self, grid16, random_field):
        f = remove_mean(random_field(grid16, 0))
        assert np.allclose(laplacian(inverse_laplacian(f)).coeffs, f.coeffs, atol=1e-12)

    def test_heat_semigroup_decay(self, grid16):
        f = _scalar_mode(grid16, (0, 1, 0))
        t = 0.01
        decayed = heat_semigroup(f, t)
        assert np.allclose(decayed.coeffs, f.coeffs * np.exp(-4.0 * np.pi ** 2 * t), atol=1e-14)

    def test_heat_semigroup_rejects_negative_time(self, grid16):
        with pytest.raises(PreconditionError) as e:
            heat_semigroup(SpectralField.zeros(grid16, 0), -1e-3)
        assert e.value.code is ErrorCode.NEGATIVE_TIME

    def test_translate_shifts_samples(self, grid16):
        f = _scalar_mode(grid16)
        shifted = translate(f, np.array([0.25, 0.0, 0.0]))
        x1 = grid16.coordinates[0]
        expected = np.sin(2.0 * np.pi * (x1 - 0.25)) * np.ones(grid16.shape)
        assert np.allclose(shifted.to_real(), expected, atol=1e-12)


class TestMollifier:
    """Radial bump mollifier"""

    def test_multiplier_is_one_at_zero_mode(self, grid16):
        assert mollifier_multiplier(grid16, 0.1)[0, 0, 0] == pytest.approx(1.0)

    def test_mollify_preserves_mean_and_shrinks_high_modes(self, grid16, random_field):
        f = random_field(grid16, 0) + SpectralField.from_real(grid16, np.full(grid16.shape, 2.0))
        smooth = mollify(f, 0.2)
        assert smooth.mean() == pytest.approx(f.mean())
        assert _l2(remove_mean(smooth)) < _l2(remove_mean(f))

    @pytest.mark.parametrize("epsilon", [0.0, -0.1, 0.5])
    def test_mollify_rejects_bad_epsilon(self, grid16, epsilon):
        with pytest.raises(PreconditionError) as e:
            mollify(SpectralField.zeros(grid16, 0), epsilon)
        assert e.value.code is ErrorCode.BAD_EPSILON


class TestProducts:
    """Dealiased bilinear products"""

    def test_tracefree_outer_has_zero_trace(self, grid16, random_field):
        u = random_field(grid16, 1, band=4.0)
        m = tracefree_outer(u, u)
        assert np.max(np.abs(np.einsum("ii...->...", m.to_real()))) < 1e-12
        assert m.symmetry is Symmetry.SYMMETRIC_TRACEFREE

    def test_wedge_is_antisymmetric(self, grid16, random_field):
        u, v = random_field(grid16, 1, band=4.0), random_field(grid16, 1, band=4.0)
        w = wedge(u, v).to_real()
        assert np.max(np.abs(w + np.swapaxes(w, 0, 1))) < 1e-12

    def test_outer_matches_pointwise_product_for_low_modes(self, grid16):
        v = shear_field(grid16, 1.0, 1)
        uu = outer(v, v).to_real()
        samples = v.to_real()
        assert np.allclose(uu[0, 0], samples[0] ** 2, atol=1e-12)


class TestNorms:
    """Lebesgue and Sobolev norms"""

    def test_lebesgue_of_constant(self, grid16):
        samples = np.full(grid16.shape, 3.0)
        assert lebesgue(samples, 0, 1) == pytest.approx(3.0)
        assert lebesgue(samples, 0, 2) == pytest.approx(3.0)
        assert lebesgue(samples, 0, np.inf) == pytest.approx(3.0)

    def test_sobolev_of_single_mode(self, grid16):
        f = _scalar_mode(grid16)
        assert sobolev(f, 2.0) == pytest.approx((2.0 * np.pi) ** 2 * np.sqrt(0.5), rel=1e-12)
        assert norm(f, "L2") == pytest.approx(np.sqrt(0.5), rel=1e-12)

    @pytest.mark.parametrize("text,kind,order", [
        ("L1", "L", 1.0), ("Linf", "L", np.inf), ("H1.5", "H", 1.5), ("W3,1", "W", 3.0),
    ])
    def test_norm_spec_parse(self, text, kind, order):
        spec = NormSpec.parse(text)
        assert spec.kind == kind and spec.order == order

    def test_norm_spec_rejects_unknown(self):
        with pytest.raises(PreconditionError):
            NormSpec.parse("Q2")

    def test_parseval(self, grid16, random_field):
        f, g = random_field(grid16, 1), random_field(grid16, 1)
        direct = float(np.mean(np.sum(f.to_real() * g.to_real(), axis=0)))
        assert l2_inner(f, g) == pytest.approx(direct, rel=1e-10, abs=1e-12)

    def test_energy_spectrum_single_shell(self, grid16):
        f = _scalar_mode(grid16, (0, 0, 2))
        spectrum = energy_spectrum(f)
        assert spectrum[2] == pytest.approx(0.25)
        assert np.sum(spectrum) == pytest.approx(0.25)


class TestSampleData:
    """Generated initial data"""

    def test_random_solenoidal_is_admissible(self, grid16):
        v = random_solenoidal(grid16, amplitude=0.3, band=3.0, seed=5)
        assert np.sqrt(l2_inner(v, v)) == pytest.approx(0.3)
        assert np.max(np.abs(v.mean())) < 1e-15
        assert _l2(divergence(v)) < 1e-12

    def test_shear_field_is_divergence_free(self, grid16):
        v = shear_field(grid16, 0.5, 2)
        assert _l2(divergence(v)) < 1e-12
        assert np.max(np.abs(v.to_real())) == pytest.approx(0.5, rel=1e-2)


class TestFieldFiles:
    """TFLD v1 read and write"""

    def test_write_read_round_trip(self, grid16, random_field, tmp_path):
        f = random_field(grid16, 2)
        path = write_field(tmp_path / "m.tfld", f, 0.5, "stress")
        back, meta = read_field(path)
        assert np.allclose(back.to_real(), f.to_real(), atol=1e-14)
        assert meta["time"] == 0.5 and meta["label"] == "stress" and meta["rank"] == 2

    def test_header_layout(self, grid16, tmp_path):
        path = write_field(tmp_path / "s.tfld", SpectralField.zeros(grid16, 0))
        raw = path.read_bytes()
        magic, version, n, rank, tag = HEADER.unpack_from(raw)
        assert (magic, version, n, rank, tag) == (b"TFLD", 1, 16, 0, 0)
        assert len(raw) == HEADER.size + 8 * 16 ** 3

    def test_bad_magic_raises(self, tmp_path):
        path = tmp_path / "bad.tfld"
        path.write_bytes(b"NOPE" + bytes(HEADER.size))
        with pytest.raises(PreconditionError) as e:
            read_field(path)
        assert e.value.code is ErrorCode.BAD_FILE

    def test_grid_mismatch_raises(self, grid16, grid32, tmp_path):
        path = write_field(tmp_path / "v.tfld", SpectralField.zeros(grid16, 1))
        with pytest.raises(PreconditionError) as e:
            read_field(path, grid32)
        assert e.value.code is ErrorCode.GRID_MISMATCH

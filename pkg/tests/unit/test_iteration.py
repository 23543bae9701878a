"""
Unit tests for the parameter ladder, the ledger and the level state
"""
import numpy as np
import pytest

from src.iteration.ledger import Ledger, RowStatus
from src.iteration.parameters import Ladder
from src.iteration.state import bootstrap, check_initial_data, read_state, write_state
from src.iteration.step import new_stresses
from src.operators.inverse_divergence import div_tensor
from src.solver.gluing import GluedState
from src.torus.field import SpectralField, gradient, mollify, random_solenoidal
from src.utils.error_handling import ErrorCode, PreconditionError


class TestLadder:
    """λ_q, δ_q and ℓ_q at desk scale"""

    def test_frequencies(self, desk_ladder, sample_data):
        for q, value in sample_data["ladder"]["lambda"].items():
            assert desk_ladder.lam(int(q)) == pytest.approx(value)

    def test_amplitudes(self, desk_ladder, sample_data):
        for q, value in sample_data["ladder"]["delta"].items():
            assert desk_ladder.delta(int(q)) == pytest.approx(value, rel=1e-12)

    def test_mollifier_scales(self, desk_ladder, sample_data):
        for q, value in sample_data["ladder"]["ell"].items():
            assert desk_ladder.ell(int(q)) == pytest.approx(value, rel=1e-12)

    def test_gap_scales_shift_by_one_level(self, desk_ladder):
        scales = desk_ladder.scales(1)
        assert scales.delta_next == pytest.approx(desk_ladder.delta(2))
        assert scales.delta_after == pytest.approx(desk_ladder.delta(3))
        assert scales.ell == pytest.approx(desk_ladder.ell(1))
        assert scales.alpha == 3.0

    def test_tau_must_shrink(self):
        with pytest.raises(PreconditionError) as e:
            Ladder(tau=0.5, tau_prev=0.25)
        assert e.value.code is ErrorCode.BAD_TAU

    def test_from_settings(self, desk_settings):
        assert Ladder.from_settings(desk_settings) == Ladder()


class TestLedger:
    """Rows, checks and their files"""

    @pytest.fixture
    def ledger(self):
        ledger = Ledger(1, meta={"n": 64})
        ledger.check("residual.momentum", "relaxed system", 1e-9, 1e-6, "level q+1", 0.5)
        ledger.check("energy.identity", "energy", 0.2, 0.05, "identity", 0.95)
        ledger.report("gap.rho_q", "ρ_q > 0", 0.7, "gaps", 0.95, bound=None)
        return ledger

    def test_statuses(self, ledger):
        statuses = [row.status for row in ledger.rows]
        assert statuses == [RowStatus.PASS, RowStatus.FAIL, RowStatus.REPORT]
        assert not ledger.passed
        assert [row.name for row in ledger.failures()] == ["energy.identity"]

    def test_named(self, ledger):
        assert len(ledger.named("gap.rho_q")) == 1
        assert ledger.named("missing") == []

    def test_frame_columns(self, ledger):
        frame = ledger.to_frame()
        assert list(frame.columns) == ["name", "target", "measured", "bound", "status", "t",
                                       "provenance"]
        assert frame["status"].tolist() == ["pass", "fail", "report"]

    def test_json_round_trip(self, ledger, tmp_path):
        back = Ledger.read_json(ledger.write_json(tmp_path / "ledger.json"))
        assert back.q == 1 and back.meta == {"n": 64}
        assert [r.to_dict() for r in back.rows] == [r.to_dict() for r in ledger.rows]


class TestInitialData:
    """Preconditions on (v_in, b_in)"""

    def test_accepts_solenoidal_pair(self, grid16, solenoidal_pair):
        check_initial_data(*solenoidal_pair(grid16))

    def test_non_zero_mean(self, grid16, solenoidal_pair):
        v, b = solenoidal_pair(grid16)
        coeffs = v.coeffs.copy()
        coeffs[0, 0, 0, 0] = 0.5
        with pytest.raises(PreconditionError) as e:
            check_initial_data(v.with_coeffs(coeffs), b)
        assert e.value.code is ErrorCode.NON_ZERO_MEAN

    def test_not_divergence_free(self, grid16, solenoidal_pair):
        v, b = solenoidal_pair(grid16)
        samples = np.zeros((3,) + grid16.shape)
        samples[0] = np.sin(2.0 * np.pi * grid16.coordinates[0]) * np.ones(grid16.shape)
        with pytest.raises(PreconditionError) as e:
            check_initial_data(SpectralField.from_real(grid16, samples), b)
        assert e.value.code is ErrorCode.NOT_DIVERGENCE_FREE

    def test_grid_mismatch(self, grid16, grid32):
        with pytest.raises(PreconditionError) as e:
            check_initial_data(SpectralField.zeros(grid16, 1), SpectralField.zeros(grid32, 1))
        assert e.value.code is ErrorCode.GRID_MISMATCH


class TestLevelState:
    """Level 1 and its files"""

    @pytest.fixture
    def level(self, grid16, solenoidal_pair, desk_ladder):
        return bootstrap(*solenoidal_pair(grid16, amplitude=0.1), desk_ladder)

    def test_level_one_starts_from_mollified_data(self, level, desk_ladder):
        fields = level.fields_at(0.0)
        assert level.q == 1
        assert np.allclose(fields.v.coeffs, mollify(level.v_in, desk_ladder.ell(0)).coeffs)
        assert np.allclose(fields.b.coeffs, mollify(level.b_in, desk_ladder.ell(0)).coeffs)

    def test_level_one_closes_the_relaxed_system(self, level):
        residual = level.fields_at(0.3).residual()
        assert residual["momentum"] <= 1e-12 * residual["momentum_scale"]
        assert residual["induction"] <= 1e-12 * residual["induction_scale"]

    def test_repeated_times_are_cached(self, level):
        assert level.fields_at(0.2) is level.fields_at(0.2)

    def test_source_matches_full_tuple(self, level):
        fast = level.source(0.4)
        full = level.fields_at(0.4).mhd_state()
        assert np.allclose(fast.v.coeffs, full.v.coeffs)

    def test_negative_time(self, level):
        with pytest.raises(PreconditionError) as e:
            level.fields_at(-0.1)
        assert e.value.code is ErrorCode.NEGATIVE_TIME

    def test_write_read_round_trip(self, level, tmp_path):
        write_state(level, tmp_path, {"note": "desk"})
        v_in, b_in, ladder, meta = read_state(tmp_path)
        assert np.allclose(v_in.to_real(), level.v_in.to_real(), atol=1e-14)
        assert np.allclose(b_in.to_real(), level.b_in.to_real(), atol=1e-14)
        assert ladder == level.ladder
        assert meta["q"] == 1 and meta["note"] == "desk" and meta["n"] == 16

    def test_missing_state(self, tmp_path):
        with pytest.raises(PreconditionError) as e:
            read_state(tmp_path)
        assert e.value.code is ErrorCode.BAD_FILE


class TestNewStresses:
    """Stresses of the next level from glued fields and perturbations"""

    @pytest.fixture
    def glued(self, grid16, solenoidal_pair):
        v, b = solenoidal_pair(grid16, amplitude=0.1, seed=11)
        zero_vector = SpectralField.zeros(grid16, 1)
        return GluedState(0.5, v, b, SpectralField.zeros(grid16, 0), SpectralField.zeros(grid16, 2),
                          SpectralField.zeros(grid16, 2), zero_vector, zero_vector)

    def test_round_off_gradient_in_the_time_derivative(self, glued, grid16, random_field):
        w = random_solenoidal(grid16, 1e-13, 3.0, 12)
        d = random_solenoidal(grid16, 1e-13, 3.0, 13)
        dd_dt = gradient(random_field(grid16, rank=0)) * 1e-20
        p, stresses = new_stresses(glued, w, d, SpectralField.zeros(grid16, 1), dd_dt)
        m = stresses.M.coeffs
        assert np.all(np.isfinite(m))
        assert np.allclose(m, -np.swapaxes(m, 0, 1), atol=1e-30)
        assert p.rank == 0

    def test_zero_perturbation_keeps_glued_stresses(self, glued, grid16):
        zero = SpectralField.zeros(grid16, 1)
        _, stresses = new_stresses(glued, zero, zero, zero, zero)
        assert np.max(np.abs(div_tensor(stresses.M).coeffs)) == 0.0
        assert np.max(np.abs(stresses.R.coeffs)) == 0.0

"""
Unit tests for the MHD solver, the residual stresses and the gluing formulas
"""
import numpy as np
import pytest

from src.cutoffs.partition import build_partition
from src.solver.gluing import GluedFlow, active_weights, glue, interior_j_times
from src.solver.mhd import (Integrator, LocalSolution, MHDState, balance_drift, energy_balance,
                            cross_helicity_balance, evaluate_locals, integrate, mhd_rhs)
from src.solver.stresses import (StressPair, centered_derivative, forward_derivative,
                                 relaxed_residual, residual_stresses, startup_tuple,
                                 time_derivative)
from src.torus.field import SpectralField, laplacian, remove_mean, shear_field
from src.utils.error_handling import ErrorCode, PreconditionError, ResolutionError


@pytest.fixture
def pair(grid16, solenoidal_pair):
    return solenoidal_pair(grid16, amplitude=0.5, band=3.0, seed=11)


@pytest.fixture
def partition():
    return build_partition(1.0, 0.125)


class TestMHD:
    """Right-hand side, balances and time stepping"""

    def test_energy_balance(self, pair):
        rate, dissipation = energy_balance(*pair)
        assert rate == pytest.approx(dissipation, rel=1e-10)
        assert dissipation < 0.0

    def test_cross_helicity_balance(self, pair):
        rate, dissipation = cross_helicity_balance(*pair)
        assert rate == pytest.approx(dissipation, rel=1e-9, abs=1e-14)

    def test_right_side_is_solenoidal_and_mean_free(self, pair):
        dv, db, p = mhd_rhs(*pair)
        for f in (dv, db):
            assert np.max(np.abs(f.mean())) < 1e-15
            assert np.max(np.abs(np.sum(f.grid.derivative_modes * f.coeffs, axis=0))) < 1e-12
        assert abs(p.mean()) < 1e-15

    def test_energy_decays(self, pair):
        start = MHDState(*pair)
        trajectory = integrate(start, 0.05, 1.0 / 256.0, samples=[0.025, 0.05])
        energies = [state.energy() for state in trajectory]
        assert len(trajectory) == 3
        assert trajectory[-1].t == pytest.approx(0.05)
        assert energies[0] > energies[1] > energies[2]

    def test_single_mode_heat_decay(self, grid16):
        samples = np.zeros((3,) + grid16.shape)
        _, x2, _ = grid16.coordinates
        samples[0] = 1e-3 * np.sin(2.0 * np.pi * x2)
        v = SpectralField.from_real(grid16, samples)
        state = Integrator(1.0 / 128.0).advance(MHDState(v, SpectralField.zeros(grid16, 1)), 0.1)
        expected = v.coeffs * np.exp(-4.0 * np.pi ** 2 * 0.1)
        assert np.allclose(state.v.coeffs, expected, atol=1e-12)

    def test_balance_drift_of_aligned_shears(self, grid16):
        v = shear_field(grid16, 0.3)
        trajectory = integrate(MHDState(v, v), 0.2, 1.0 / 64.0, samples=[0.05, 0.1, 0.2])
        energy, helicity = balance_drift(trajectory)
        assert trajectory[0].cross_helicity() == pytest.approx(0.5 * trajectory[0].energy())
        assert energy <= 1e-12
        assert helicity <= 1e-12

    def test_balance_drift_sees_injected_energy(self, pair):
        trajectory = integrate(MHDState(*pair), 0.02, 1.0 / 256.0)
        last = trajectory[-1]
        trajectory[-1] = MHDState(last.v * 1.01, last.b, last.t)
        energy, _ = balance_drift(trajectory)
        assert energy > 1e-6

    def test_cfl_violation(self, grid16, solenoidal_pair):
        v, b = solenoidal_pair(grid16, amplitude=50.0)
        with pytest.raises(ResolutionError) as e:
            Integrator(0.1).advance(MHDState(v, b), 0.1)
        assert e.value.code is ErrorCode.CFL_VIOLATION

    def test_local_solution_restarts_for_earlier_times(self, pair):
        local = LocalSolution(0, MHDState(*pair, 0.0), 0.25, Integrator(1.0 / 128.0))
        late = local.at(0.05)
        early = local.at(0.02)
        assert early.t == pytest.approx(0.02)
        assert late.energy() < early.energy()
        assert local.covers(0.25) and not local.covers(0.3)

    async def test_evaluate_locals_concurrently(self, pair):
        integrator = Integrator(1.0 / 128.0)
        locals_ = [LocalSolution(j, MHDState(*pair, 0.0), 0.25, integrator) for j in range(2)]
        states = await evaluate_locals(locals_, 0.03)
        assert [s.t for s in states] == pytest.approx([0.03, 0.03])
        assert np.allclose(states[0].v.coeffs, states[1].v.coeffs)


class TestStresses:
    """Residual stresses and the start-up tuple"""

    def test_recovered_stresses_close_the_relaxed_system(self, pair):
        v, b = pair
        p, _ = startup_tuple(v, b)
        dv, db = laplacian(v), laplacian(b)
        stresses = residual_stresses(v, b, p, dv, db)
        residual = relaxed_residual(v, b, p, dv, db, stresses)
        assert residual["momentum"] <= 1e-12 * residual["momentum_scale"]
        assert residual["induction"] <= 1e-12 * residual["induction_scale"]
        assert stresses.check_tags()

    def test_startup_tuple_closes_heat_flow(self, pair):
        v, b = pair
        p, stresses = startup_tuple(v, b)
        residual = relaxed_residual(v, b, p, laplacian(v), laplacian(b), stresses)
        assert residual["momentum"] <= 1e-12 * residual["momentum_scale"]
        assert residual["induction"] <= 1e-12 * residual["induction_scale"]
        assert stresses.check_tags()

    def test_non_solenoidal_induction_defect(self, grid16, random_field):
        zero = SpectralField.zeros(grid16, 1)
        scalar = SpectralField.zeros(grid16, 0)
        with pytest.raises(PreconditionError) as e:
            residual_stresses(zero, zero, scalar, zero, remove_mean(random_field(grid16, 1)))
        assert e.value.code is ErrorCode.NON_SOLENOIDAL_RESIDUAL

    def test_zero_pair(self, grid16):
        assert StressPair.zeros(grid16).l1_norms() == (0.0, 0.0)


class TestStencils:
    """Fourth-order time derivatives"""

    @pytest.fixture
    def cubic(self, grid16, random_field):
        base = random_field(grid16, 1)
        return base, (lambda t: base * (t ** 3 + 2.0 * t))

    def test_centered_is_exact_for_cubics(self, cubic):
        base, evaluate = cubic
        derivative = centered_derivative(evaluate, 0.5, 1e-3)
        assert np.allclose(derivative.coeffs, base.coeffs * (3.0 * 0.25 + 2.0), atol=1e-8)

    def test_forward_is_exact_for_cubics(self, cubic):
        base, evaluate = cubic
        derivative = forward_derivative(evaluate, 0.0, 1e-3)
        assert np.allclose(derivative.coeffs, base.coeffs * 2.0, atol=1e-8)

    def test_dispatch_never_samples_negative_times(self, cubic):
        base, evaluate = cubic
        seen = []

        def recording(t):
            seen.append(t)
            return evaluate(t)

        time_derivative(recording, 1e-4, 1e-3)
        assert min(seen) >= 0.0


class TestGluing:
    """Glued fields and their stresses"""

    def test_single_active_solution_has_zero_stress(self, pair, partition):
        t = partition.t(2)
        assert [j for j, _, _ in active_weights(partition, t)] == [1]
        glued = glue({1: MHDState(*pair, t)}, partition, t)
        assert np.all(glued.R.coeffs == 0.0) and np.all(glued.M.coeffs == 0.0)

    def test_two_solutions_close_the_relaxed_system(self, pair, partition, grid16,
                                                    solenoidal_pair):
        t = partition.I(2)[0] + 0.05 * partition.tau
        other = solenoidal_pair(grid16, amplitude=0.4, band=3.0, seed=21)
        weights = active_weights(partition, t)
        assert [j for j, _, _ in weights] == [1, 2]
        glued = glue({1: MHDState(*pair, t), 2: MHDState(*other, t)}, partition, t)
        defect = glued.defect()
        assert defect["momentum"] <= 1e-10 * defect["momentum_scale"]
        assert defect["induction"] <= 1e-10 * defect["induction_scale"]
        assert glued.stresses.check_tags()

    def test_mean_mismatch(self, pair, partition, grid16):
        t = partition.I(2)[0] + 0.05 * partition.tau
        v, b = pair
        shifted = v.with_coeffs(v.coeffs.copy())
        shifted.coeffs[0, 0, 0, 0] = 0.1
        with pytest.raises(PreconditionError) as e:
            glue({1: MHDState(v, b, t), 2: MHDState(shifted, b, t)}, partition, t)
        assert e.value.code is ErrorCode.MEAN_MISMATCH

    def test_interior_j_times_avoid_i(self, partition):
        times = interior_j_times(partition)
        assert times and all(0.0 <= t <= 1.0 for t in times)
        assert all(partition.interval_kind(t) == "J" for t in times)

    def test_glued_flow_of_zero_source(self, grid16, partition):
        zero = SpectralField.zeros(grid16, 1)
        flow = GluedFlow(lambda t: MHDState(zero, zero, t), partition, 1.0 / 64.0,
                         Integrator(1.0 / 64.0))
        state = flow.fields(partition.I(1)[0] + 0.01)
        assert np.all(state.v.coeffs == 0.0) and np.all(state.b.coeffs == 0.0)

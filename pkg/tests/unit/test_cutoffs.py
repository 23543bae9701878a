"""
Unit tests for the time partition, the cutoff family and the gap functions
"""
import numpy as np
import pytest

from src.cutoffs.eta import minimum_squared_mass, squiggle_eta
from src.cutoffs.gaps import (corrected_stress, energy_gap, energy_gaps, helicity_gaps,
                              magnetic_gap, velocity_switch)
from src.cutoffs.partition import build_partition, derivative_constants
from src.geometry.directions import load_direction_sets
from src.geometry.lemmas import skew_decomposition
from src.torus.field import SpectralField, random_solenoidal
from src.utils.error_handling import ErrorCode, PreconditionError


@pytest.fixture
def partition():
    return build_partition(1.0, 0.125)


@pytest.fixture
def cutoffs(partition):
    return squiggle_eta(partition, 0.25, 1.0 / 32.0, 0.25)


class TestTimePartition:
    """t_l, I_l, J_l and the straight partition of unity"""

    def test_counts(self, partition, sample_data):
        expected = sample_data["partition"]
        assert partition.count == expected["count"]
        assert partition.straight_count == expected["straight_count"]

    def test_intervals(self, partition):
        assert partition.I(2) == pytest.approx((0.25 + 0.125 / 3.0, 0.25 + 0.25 / 3.0))
        assert partition.J(2) == pytest.approx((0.25 - 0.125 / 3.0, 0.25 + 0.125 / 3.0))
        assert partition.interval_kind(0.25 + 0.0625) == "I"
        assert partition.interval_kind(0.25) == "J"

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
    def test_bad_tau(self, tau):
        with pytest.raises(PreconditionError) as e:
            build_partition(1.0, tau)
        assert e.value.code is ErrorCode.BAD_TAU

    def test_partition_of_unity(self, partition):
        t = np.linspace(-0.125 / 3.0, 1.0 + 0.125 / 3.0, 2001)
        total = sum(partition.chi(l, t) for l in range(1, partition.count + 1))
        assert np.allclose(total, 1.0, atol=1e-14)

    def test_chi_is_one_on_j(self, partition):
        assert partition.chi(3, partition.t(3)) == pytest.approx(1.0)
        assert partition.chi(3, partition.t(5)) == pytest.approx(0.0)

    def test_chi_prime_matches_difference(self, partition):
        t = np.linspace(0.05, 0.95, 181)
        h = 1e-7
        for l in (1, 4, partition.count):
            quotient = (partition.chi(l, t + h) - partition.chi(l, t - h)) / (2.0 * h)
            assert np.allclose(partition.chi_prime(l, t), quotient, atol=1e-4)

    def test_derivative_constants(self, partition):
        constants = derivative_constants(partition, order=2, samples=4001)
        assert set(constants) == {1, 2}
        assert all(value > 0.0 for value in constants.values())


class TestCutoffFamily:
    """η_l, η₋₁ and ℵ"""

    def test_bad_epsilons(self, partition):
        with pytest.raises(PreconditionError) as e:
            squiggle_eta(partition, 0.4, 1.0 / 32.0)
        assert e.value.code is ErrorCode.BAD_EPSILONS

    def test_tau_prev_must_exceed_tau(self, partition):
        with pytest.raises(PreconditionError) as e:
            squiggle_eta(partition, 0.25, 1.0 / 32.0, 0.1)
        assert e.value.code is ErrorCode.BAD_TAU

    def test_straight_cutoff_is_one_on_i(self, cutoffs, partition):
        lo, hi = partition.I(2)
        assert cutoffs.eta_straight(2, lo) == pytest.approx(1.0)
        assert cutoffs.eta_straight(2, hi) == pytest.approx(1.0)
        assert cutoffs.eta_straight(2, partition.t(2)) == 0.0

    def test_squiggling_cutoff_plateau(self, cutoffs, partition):
        x1 = np.linspace(0.0, 1.0, 64, endpoint=False)
        l = partition.straight_count
        assert not cutoffs.is_straight(l)
        values = cutoffs.eta(l, x1, partition.t(l) + 0.5 * partition.tau)
        assert np.allclose(values, 1.0)

    def test_neighbouring_supports_are_disjoint(self, cutoffs, partition):
        x1 = np.linspace(0.0, 1.0, 128, endpoint=False)
        for t in np.linspace(partition.t(partition.straight_count), 1.0, 41):
            for l in range(partition.straight_count, partition.count):
                product = cutoffs.eta(l, x1, t) * cutoffs.eta(l + 1, x1, t)
                assert np.max(product) < 1e-14

    def test_active_indices(self, cutoffs, partition):
        assert cutoffs.active(partition.t(2) + 0.5 * partition.tau) == [2]
        assert cutoffs.active(0.01) == []

    def test_handover_and_switch(self, cutoffs):
        assert cutoffs.eta_minus1(0.5) == pytest.approx(1.0)
        assert cutoffs.eta_minus1(0.875) == pytest.approx(0.0)
        assert cutoffs.aleph(0.5) == pytest.approx(1.0)
        assert cutoffs.aleph(0.875) == pytest.approx(0.0)

    def test_squared_mass_stays_positive(self, cutoffs):
        assert minimum_squared_mass(cutoffs, samples=25, x_samples=128) > 0.0


class TestGaps:
    """Energy, helicity and magnetic gaps"""

    def test_magnetic_gap_of_zero_stress(self, desk_ladder):
        scales = desk_ladder.scales(1)
        m_b, rho_b = magnetic_gap(np.zeros((3, 3, 2, 2, 2)), scales)
        assert np.all(m_b == 0.0)
        assert np.allclose(rho_b, scales.delta_next * scales.ell ** (scales.alpha / 3.0))

    def test_corrected_stress_is_symmetric_tracefree_shift(self, desk_ladder):
        scales = desk_ladder.scales(1)
        decomposition = skew_decomposition(load_direction_sets("desk").b)
        shape = (2, 2, 2)
        rng = np.random.default_rng(2)
        m_bar = rng.standard_normal((3, 3) + shape) * 1e-8
        m_bar = m_bar - np.swapaxes(m_bar, 0, 1)
        m_b, rho_b = magnetic_gap(m_bar, scales)
        r_v = corrected_stress(np.zeros((3, 3) + shape), m_b, rho_b, decomposition)
        assert np.allclose(r_v, np.swapaxes(r_v, 0, 1), atol=1e-15)
        assert np.allclose(np.einsum("ii...->...", r_v), 0.0, atol=1e-15)

    def test_correction_adds_the_magnetic_pair_stress(self, desk_ladder):
        scales = desk_ladder.scales(1)
        decomposition = skew_decomposition(load_direction_sets("desk").b)
        shape = (2, 2, 2)
        m_b, rho_b = magnetic_gap(np.zeros((3, 3) + shape), scales)
        r_v = corrected_stress(np.zeros((3, 3) + shape), m_b, rho_b, decomposition)
        # with w_k = (ρ_b Γ_k)^{1/2} k̄ and d_k = (ρ_b Γ_k)^{1/2} k̄̄ the correction is Σ w_k⊗w_k − d_k⊗d_k
        rho = float(rho_b.flat[0])
        pair = sum(rho * c * (np.outer(t.kbar_array, t.kbar_array)
                              - np.outer(t.kbarbar_array, t.kbarbar_array))
                   for c, t in zip(decomposition.center, decomposition.directions))
        assert np.allclose(r_v[..., 0, 0, 0], pair, rtol=1e-12, atol=1e-30)

    def test_velocity_switch_of_small_stress(self, desk_ladder):
        scales = desk_ladder.scales(1)
        assert np.allclose(velocity_switch(np.zeros((3, 3, 2, 2, 2)), scales), 1.0)

    def test_energy_gap_arithmetic(self, desk_ladder):
        scales = desk_ladder.scales(1)
        value = energy_gap(10.0, 1.0, 0.5, scales)
        assert value == pytest.approx((8.5 - scales.delta_after / 2.0) / 3.0)

    def test_energy_gaps_before_switch(self, cutoffs, grid16, desk_ladder):
        scales = desk_ladder.scales(1)
        v = random_solenoidal(grid16, 0.01, 3.0, 0)
        b = random_solenoidal(grid16, 0.01, 3.0, 1)
        chi_v = np.ones(grid16.shape)
        gaps = energy_gaps(5.0, v, b, 0.0, 0.5, cutoffs, chi_v, scales)
        assert gaps.rho_q0 == pytest.approx(scales.delta_next)
        assert np.allclose(gaps.rho_v, scales.delta_next)

    def test_energy_gaps_after_switch(self, cutoffs, grid16, desk_ladder):
        scales = desk_ladder.scales(1)
        v = random_solenoidal(grid16, 0.01, 3.0, 0)
        b = random_solenoidal(grid16, 0.01, 3.0, 1)
        gaps = energy_gaps(5.0, v, b, 0.0, 0.95, cutoffs, np.ones(grid16.shape), scales)
        assert gaps.denominator > 0.0
        assert gaps.rho_q0 == pytest.approx(gaps.rho_q / gaps.denominator)

    def test_negative_energy_gap_in_control_window(self, cutoffs, grid16, desk_ladder):
        scales = desk_ladder.scales(1)
        v = random_solenoidal(grid16, 1.0, 3.0, 0)
        zero = SpectralField.zeros(grid16, 1)
        with pytest.raises(PreconditionError) as e:
            energy_gaps(0.0, v, zero, 0.0, 0.9, cutoffs, np.ones(grid16.shape), scales)
        assert e.value.code is ErrorCode.GAP_NEGATIVE

    def test_helicity_gaps_before_switch(self, cutoffs, grid16, desk_ladder):
        scales = desk_ladder.scales(1)
        v = random_solenoidal(grid16, 0.01, 3.0, 0)
        gaps = helicity_gaps(1.0, v, v, 0.5, cutoffs, scales)
        assert gaps.h_b == pytest.approx(scales.delta_next / 400.0)
        assert gaps.h_q == pytest.approx((1.0 - 1e-4 - scales.delta_after / 200.0) / 3.0)

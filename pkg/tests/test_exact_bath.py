"""
Tests for the qubit plus discrete-mode bath in a truncated Fock space.

Run: pytest tests/test_exact_bath.py -v
"""

import math

import numpy as np
import pytest

from errors import DomainError, ScheduleError
from exact_bath import (
    EXCITED,
    GROUND,
    ExactBath,
    TotalState,
    TruncatedBasis,
    detector_profile,
    measure_impulsive,
    purity,
    require_zero_temperature,
    system_coherence,
)
from master_equation import MeasurementSchedule, QubitPopulations, evolve
from rates import sinc2_kernel
from spectrum import ZERO_TEMPERATURE, discretize


def coherent_superposition(bath: ExactBath) -> TotalState:
    """(|g, vac> + |e, vac>)/sqrt(2)."""
    psi = np.zeros(bath.basis.dimension, dtype=complex)
    psi[bath.basis.vacuum(GROUND)] = psi[bath.basis.vacuum(EXCITED)] = 1 / math.sqrt(2)
    return TotalState(np.outer(psi, psi.conj()), bath.basis)


def energy(bath: ExactBath, state: TotalState) -> float:
    return float(np.real(np.sum(bath.hamiltonian.toarray().T * state.rho)))


# ═══════════════════════════════════════════════════════════════════
# Basis and Hamiltonian
# ═══════════════════════════════════════════════════════════════════

class TestBasis:
    def test_even_sector_dimension(self):
        assert TruncatedBasis(40, 2, parity=0).dimension == 861
        assert TruncatedBasis.full_dimension(40, 2) == 1722

    def test_full_basis(self):
        assert TruncatedBasis(5, 2).dimension == TruncatedBasis.full_dimension(5, 2) == 42

    def test_excited_vacuum_outside_even_sector(self):
        with pytest.raises(DomainError):
            TruncatedBasis(3, 2, parity=0).vacuum(EXCITED)

    def test_bad_truncation(self):
        with pytest.raises(DomainError):
            TruncatedBasis(3, 0)

    def test_parity_from_initial_state(self, resonant_spec):
        assert ExactBath.from_spec(resonant_spec, 4).basis.parity == 0
        assert ExactBath.from_spec(resonant_spec, 4, initial_rho_ee=0.3).basis.parity is None


class TestHamiltonian:
    def test_coupling_is_symmetric(self, small_bath):
        h_sb = small_bath.parts.h_sb.toarray()
        np.testing.assert_array_equal(h_sb, h_sb.T)

    def test_sigma_z_flips_coupling(self, full_small_bath):
        z = np.diag(1.0 - 2.0 * full_small_bath.basis.spins)
        h_sb = full_small_bath.parts.h_sb.toarray()
        np.testing.assert_allclose(z @ h_sb @ z, -h_sb, atol=1e-15)

    def test_counter_rotating_terms_present(self, small_bath):
        """|g, vac> couples to every |e, 1_k>."""
        g0_index = small_bath.basis.vacuum(GROUND)
        row = small_bath.parts.h_sb.toarray()[g0_index]
        np.testing.assert_allclose(np.sort(row[row != 0]), np.sort(small_bath.model.etas))

    def test_two_quantum_amplitude(self, resonant_spec):
        bath = ExactBath.from_spec(resonant_spec, 3)
        index = bath.basis.index
        i = index[(EXCITED, (1,))]
        j = index[(GROUND, (1, 1))]
        assert bath.parts.h_sb[i, j] == pytest.approx(bath.model.etas[1] * math.sqrt(2))


# ═══════════════════════════════════════════════════════════════════
# States and measurements
# ═══════════════════════════════════════════════════════════════════

class TestUnitary:
    def test_product_state(self, small_bath):
        state = small_bath.product_state()
        assert state.trace == pytest.approx(1.0)
        assert purity(state) == pytest.approx(1.0)
        assert small_bath.observables(state).rho_ee == 0.0

    def test_evolution_preserves_trace_and_energy(self, small_bath):
        state = small_bath.product_state()
        later = small_bath.evolve_unitary(state, 7.3)
        assert later.trace == pytest.approx(1.0, abs=1e-12)
        assert later.hermiticity_error() < 1e-12
        assert energy(small_bath, later) == pytest.approx(energy(small_bath, state), abs=1e-12)

    def test_negative_time(self, small_bath):
        with pytest.raises(DomainError):
            small_bath.evolve_unitary(small_bath.product_state(), -1.0)

    def test_second_order_excitation(self, resonant_spec):
        """rho_ee(t) from |g, vac> matches sum_k eta_k^2 4 sin^2((1 + w_k) t/2)/(1 + w_k)^2."""
        bath = ExactBath.from_spec(resonant_spec, 20)
        t = 0.5
        expected = float(np.sum(bath.model.etas ** 2 * sinc2_kernel(1.0 + bath.model.omegas, t)))
        got = bath.populations_after(bath.product_state(), [t])[0]
        assert got == pytest.approx(expected, rel=3e-2)

    def test_fast_populations_match_direct(self, small_bath):
        state = small_bath.product_state()
        dts = np.array([0.0, 0.4, 2.5, 11.0])
        fast = small_bath.populations_after(state, dts)
        direct = [small_bath.observables(small_bath.evolve_unitary(state, dt)).rho_ee for dt in dts]
        np.testing.assert_allclose(fast, direct, atol=1e-12)


class TestMeasurement:
    def test_impulsive_erases_interaction_energy(self, small_bath):
        state = small_bath.evolve_unitary(small_bath.product_state(), 3.0)
        before = small_bath.observables(state)
        after = small_bath.observables(small_bath.measure_impulsive(state))
        assert before.h_sb < 0
        assert after.h_sb == 0.0
        assert after.rho_ee == pytest.approx(before.rho_ee, abs=1e-15)

    def test_impulsive_erases_coherence(self, full_small_bath):
        state = coherent_superposition(full_small_bath)
        assert abs(system_coherence(state)) == pytest.approx(0.5)
        assert system_coherence(measure_impulsive(state)) == 0

    def test_finite_measurement_is_a_valid_state(self, small_bath):
        state = small_bath.evolve_unitary(small_bath.product_state(), 2.0)
        after = small_bath.measure_finite(state, 0.11)
        assert after.trace == pytest.approx(1.0, abs=1e-12)
        assert after.hermiticity_error() < 1e-12
        assert after.min_eigenvalue() > -1e-10

    def test_uncoupled_finite_measurement_is_impulsive_then_free(self, resonant_spec):
        bath = ExactBath(discretize(resonant_spec.scaled(0.0), 4), parity=None)
        state = coherent_superposition(bath)
        tau = 0.2
        finite = bath.measure_finite(state, tau)
        expected = bath.evolve_unitary(measure_impulsive(state), tau)
        np.testing.assert_allclose(finite.rho, expected.rho, atol=1e-12)

    def test_detector_profile_area(self):
        h = detector_profile(0.11)
        assert np.sum(h) * 0.11 / h.size == pytest.approx(-math.pi / 2)
        assert np.argmin(h) in (h.size // 2 - 1, h.size // 2)

    def test_bad_duration(self, small_bath):
        with pytest.raises(DomainError):
            small_bath.measure_finite(small_bath.product_state(), 0.0)


# ═══════════════════════════════════════════════════════════════════
# Traces
# ═══════════════════════════════════════════════════════════════════

class TestSimulate:
    def test_free_evolution_conserves_energy(self, small_bath):
        trace = small_bath.simulate(MeasurementSchedule(), 10.0, sample_step=0.1)
        assert trace.rho_ee[0] == pytest.approx(0.0, abs=1e-12)
        assert np.ptp(trace.h_tot) < 1e-10
        np.testing.assert_allclose(trace.h_s + trace.h_b + trace.h_sb, trace.h_tot, atol=1e-10)

    def test_measured_trace(self, small_bath):
        schedule = MeasurementSchedule.uniform(1.0, 1.0, 3)
        trace = small_bath.simulate(schedule, 5.0, sample_step=0.1, mode_sample_step=1.0)
        assert np.all(np.diff(trace.times) > 0)
        assert np.all((trace.rho_ee > -1e-12) & (trace.rho_ee < 1 + 1e-12))
        np.testing.assert_allclose(trace.events, schedule.times)
        np.testing.assert_array_equal(trace.coherence, 0.0)
        assert trace.to_rows().shape == (trace.times.size, len(trace.COLUMNS))

    def test_mode_rows(self, small_bath):
        trace = small_bath.simulate(MeasurementSchedule(), 3.0, sample_step=0.1, mode_sample_step=1.0)
        assert trace.mode_times.size == 4
        rows = trace.mode_rows()
        assert rows.shape == (4 * small_bath.model.n_modes, len(trace.MODE_COLUMNS))
        np.testing.assert_allclose(trace.mode_occupations[0], 0.0, atol=1e-12)

    def test_event_after_horizon(self, small_bath):
        with pytest.raises(ScheduleError):
            small_bath.simulate(MeasurementSchedule.uniform(4.0, 1.0, 1), 3.0)


class TestTruncation:
    def test_third_quantum_is_negligible(self, resonant_spec):
        times = np.linspace(0.0, resonant_spec.t_c, 41)
        two = ExactBath.from_spec(resonant_spec, 10, max_quanta=2)
        three = ExactBath.from_spec(resonant_spec, 10, max_quanta=3)
        assert three.basis.dimension > two.basis.dimension
        rho_two = two.populations_after(two.product_state(), times)
        rho_three = three.populations_after(three.product_state(), times)
        assert np.max(np.abs(rho_two - rho_three)) < 1e-3


# ═══════════════════════════════════════════════════════════════════
# Forty-mode bath
# ═══════════════════════════════════════════════════════════════════

class TestHeatingMechanism:
    @pytest.fixture(scope="class")
    def around_event(self, forty_mode_bath):
        before = forty_mode_bath.evolve_unitary(forty_mode_bath.product_state(), 30.0)
        measured = forty_mode_bath.measure_impulsive(before)
        later = forty_mode_bath.evolve_unitary(measured, 1.0)
        return [forty_mode_bath.observables(s) for s in (before, measured, later)]

    def test_measurement_erases_interaction_energy(self, around_event):
        before, measured, _ = around_event
        assert before.h_sb < 0
        assert abs(measured.h_sb) < 1e-10
        assert measured.h_tot > before.h_tot

    def test_correlations_rebuild_and_heat(self, around_event):
        _, measured, later = around_event
        assert later.h_sb < 0
        assert later.h_s + later.h_b > measured.h_s + measured.h_b

    def test_energy_conserved_between_events(self, around_event):
        _, measured, later = around_event
        assert abs(later.h_tot - measured.h_tot) < 1e-8 * abs(measured.h_tot)


class TestAgainstRateEquation:
    @pytest.mark.parametrize(
        "schedule",
        [MeasurementSchedule.uniform(30.0, 2.0, 10), MeasurementSchedule.uniform(2.0, 2.0, 24)],
        ids=["after-relaxation", "from-the-start"],
    )
    def test_populations_agree(self, forty_mode_bath, forty_mode_spec, schedule):
        horizon = 5 * forty_mode_spec.t_c
        exact = forty_mode_bath.simulate(schedule, horizon, sample_step=0.1)
        me = evolve(QubitPopulations(0.0), schedule, horizon, forty_mode_spec, ZERO_TEMPERATURE, sample_step=0.1)
        assert np.max(np.abs(me.value_at(exact.times) - exact.rho_ee)) < 0.02

    def test_finite_duration_measurements(self, forty_mode_bath):
        """tau = 0.11 events heat like impulsive ones at their midpoints, and no less."""
        schedule = MeasurementSchedule.uniform(30.0, 2.0, 10, duration=0.11)
        impulsive = forty_mode_bath.simulate(schedule, 50.0, sample_step=0.1)
        finite = forty_mode_bath.simulate(schedule, 50.0, sample_step=0.1, finite=True)
        common = np.intersect1d(impulsive.times, finite.times)
        gap = np.interp(common, finite.times, finite.rho_ee) - np.interp(common, impulsive.times, impulsive.rho_ee)
        assert np.max(np.abs(gap)) < 1e-2
        assert finite.rho_ee[-1] >= impulsive.rho_ee[-1] - 1e-4
        assert finite.h_tot[-1] >= impulsive.h_tot[-1] - 1e-4


# ═══════════════════════════════════════════════════════════════════
# Solver paths
# ═══════════════════════════════════════════════════════════════════

class TestKrylovPath:
    @pytest.fixture(scope="class")
    def pair(self, resonant_spec):
        model = discretize(resonant_spec, 4)
        return ExactBath(model), ExactBath(model, dense_limit=5)

    def test_paths_selected(self, pair):
        dense, krylov = pair
        assert dense.propagator.dense
        assert not krylov.propagator.dense

    @pytest.mark.parametrize("finite", [False, True])
    def test_same_trace(self, pair, finite):
        dense, krylov = pair
        schedule = MeasurementSchedule.uniform(1.0, 1.0, 2, duration=0.1)
        a = dense.simulate(schedule, 3.0, sample_step=0.1, finite=finite)
        b = krylov.simulate(schedule, 3.0, sample_step=0.1, finite=finite)
        np.testing.assert_allclose(a.times, b.times)
        np.testing.assert_allclose(a.rho_ee, b.rho_ee, atol=1e-8)
        np.testing.assert_allclose(a.h_sb, b.h_sb, atol=1e-8)
        np.testing.assert_allclose(a.h_tot, b.h_tot, atol=1e-8)
        np.testing.assert_allclose(a.mode_occupations, b.mode_occupations, atol=1e-8)


class TestTemperatureGuard:
    def test_finite_bath_temperature_rejected(self):
        with pytest.raises(DomainError):
            require_zero_temperature(1.0)

    def test_zero_temperature_accepted(self):
        require_zero_temperature(math.inf)

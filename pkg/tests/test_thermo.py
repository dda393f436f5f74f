"""
Tests for the relative entropy, its rate and the cooling condition.

Run: pytest tests/test_thermo.py -v
"""

import math

import numpy as np
import pytest

from errors import DomainError
from master_equation import MeasurementSchedule, QubitPopulations, SimulationTrace, evolve
from spectrum import ZERO_TEMPERATURE, InverseTemperature
from thermo import (
    cooling_condition,
    cooling_scan,
    high_t_bound,
    reference_populations,
    relative_entropy,
    sigma,
)


def synthetic_trace(times, rho_ee, rho_dot) -> SimulationTrace:
    return SimulationTrace(
        times=times,
        rho_ee=rho_ee,
        rho_ee_dot=rho_dot,
        since_reset=times,
        events=np.empty(0),
        regime=("oze",) * times.size,
    )


# ═══════════════════════════════════════════════════════════════════
# Relative entropy
# ═══════════════════════════════════════════════════════════════════

class TestRelativeEntropy:
    def test_pure_against_maximally_mixed(self):
        assert relative_entropy(1.0, 0.5) == pytest.approx(math.log(2))

    def test_zero_at_reference(self):
        assert relative_entropy(QubitPopulations(0.3), QubitPopulations(0.3)) == pytest.approx(0.0, abs=1e-15)

    def test_nonnegative(self):
        rho = np.linspace(0.0, 1.0, 101)
        assert np.all(relative_entropy(rho, 0.2) >= 0)

    def test_boundary_reference_rejected(self):
        with pytest.raises(DomainError):
            relative_entropy(0.5, 0.0)


class TestEntropyRate:
    def test_matches_time_derivative(self):
        t = np.linspace(0.0, 3.0, 3001)
        rho = 0.3 + 0.2 * np.exp(-t)
        ent = sigma(synthetic_trace(t, rho, -0.2 * np.exp(-t)), 0.25)
        numeric = -np.gradient(ent.relative_entropy, t)
        np.testing.assert_allclose(ent.sigma[1:-1], numeric[1:-1], rtol=1e-4)

    def test_relaxation_toward_reference_is_positive(self):
        t = np.linspace(0.0, 2.0, 50)
        rho = 0.25 + 0.5 * np.exp(-t)
        ent = sigma(synthetic_trace(t, rho, -0.5 * np.exp(-t)), 0.25)
        assert np.all(ent.sigma > 0)

    def test_still_state(self):
        t = np.linspace(0.0, 1.0, 5)
        ent = sigma(synthetic_trace(t, np.zeros(5), np.zeros(5)), 0.25)
        np.testing.assert_array_equal(ent.sigma, 0.0)

    def test_moving_off_the_boundary(self):
        t = np.linspace(0.0, 1.0, 3)
        ent = sigma(synthetic_trace(t, np.zeros(3), np.ones(3)), 0.25)
        assert np.all(np.isfinite(ent.sigma))
        assert np.all(ent.sigma > 0)

    def test_out_of_range_populations(self):
        t = np.linspace(0.0, 1.0, 3)
        with pytest.raises(DomainError):
            sigma(synthetic_trace(t, np.full(3, -0.01), np.ones(3)), 0.25)

    def test_rows(self):
        t = np.linspace(0.0, 1.0, 4)
        ent = sigma(synthetic_trace(t, np.full(4, 0.4), np.zeros(4)), 0.25)
        assert ent.to_rows().shape == (4, len(ent.COLUMNS))
        assert ent.reference == 0.25


class TestEntropyOnTraces:
    def test_measurements_drive_entropy_production_negative(self, forty_mode_spec, zero_t):
        """Zeno heating after each event carries the qubit away from its dressed ground state."""
        schedule = MeasurementSchedule.uniform(30.0, 2.0, 10, duration=0.11)
        trace = evolve(QubitPopulations(0.0), schedule, 50.0, forty_mode_spec, zero_t, sample_step=0.1)
        ent = sigma(trace, reference_populations(forty_mode_spec, zero_t))
        assert np.all(np.isfinite(ent.sigma))
        after_events = np.zeros(trace.times.size, dtype=bool)
        for t in trace.events:
            after_events |= (trace.times > t) & (trace.times < t + 1.0)
        assert np.min(ent.sigma[after_events]) < 0

    def test_unmeasured_markov_tail_obeys_second_law(self, weak_spec, unit_alpha):
        trace = evolve(QubitPopulations(0.5), MeasurementSchedule(), 80.0, weak_spec, unit_alpha)
        ent = sigma(trace, reference_populations(weak_spec, unit_alpha))
        tail = trace.since_reset >= 20 * weak_spec.t_c
        assert np.any(tail)
        assert np.min(ent.sigma[tail]) >= -1e-12


class TestReference:
    def test_finite_temperature_is_gibbs(self, resonant_spec):
        assert reference_populations(resonant_spec, InverseTemperature(1.0)).rho_ee == pytest.approx(
            1 / (1 + math.e)
        )

    def test_zero_temperature_is_dressed(self, purity_spec):
        p0 = reference_populations(purity_spec, ZERO_TEMPERATURE)
        assert 0 < p0.rho_ee < 0.01


# ═══════════════════════════════════════════════════════════════════
# Cooling condition
# ═══════════════════════════════════════════════════════════════════

class TestCoolingCondition:
    def test_high_temperature_bound(self):
        assert high_t_bound(1.0) == pytest.approx(3.561553, abs=1e-6)
        assert high_t_bound(InverseTemperature(1.0)) == pytest.approx(3.561553, abs=1e-6)

    def test_high_temperature_bound_separates_long_time_cooling(self):
        """With n(w) ~ 1/(beta w) and sin^2 averaged to 1/2, cooling weight sits in (omega_a, Omega)."""
        beta = 0.05
        omega = high_t_bound(beta)

        def density(w):
            n_a, n_w = 1.0 / beta, 1.0 / (beta * w)
            return (n_a - n_w) / (w - 1) ** 2 - (n_a + n_w + 1) / (w + 1) ** 2

        assert np.all(density(np.linspace(1.05, 0.99 * omega, 200)) > 0)
        assert np.all(density(np.linspace(1.01 * omega, 50 * omega, 200)) < 0)

    def test_high_temperature_bound_needs_finite_beta(self):
        with pytest.raises(DomainError):
            high_t_bound(ZERO_TEMPERATURE)

    @pytest.mark.parametrize("t", [0.1, 1.0, 7.0, 30.0])
    def test_never_cools_at_zero_temperature(self, detuned_spec, t):
        margin, cools = cooling_condition(detuned_spec, ZERO_TEMPERATURE, t)
        assert margin < 0
        assert not cools

    def test_short_intervals_heat(self, detuned_spec):
        margin, _ = cooling_condition(detuned_spec, InverseTemperature(0.5), 0.05)
        assert margin < 0

    def test_detuned_bath_cools_when_hot(self, detuned_spec):
        scan = cooling_scan(detuned_spec, InverseTemperature(0.5), np.geomspace(0.1, 40.0, 200))
        assert scan.any_cooling
        assert scan.crossings.size >= 1
        for root in scan.crossings:
            assert abs(cooling_condition(detuned_spec, InverseTemperature(0.5), root)[0]) < 1e-6

    def test_detuned_bath_heats_when_cold(self, detuned_spec):
        scan = cooling_scan(detuned_spec, InverseTemperature(16.0), np.geomspace(0.1, 40.0, 200))
        assert not scan.any_cooling
        assert scan.crossings.size == 0

    def test_scan_rows(self, detuned_spec):
        scan = cooling_scan(detuned_spec, InverseTemperature(1.0), np.geomspace(0.1, 10.0, 20))
        rows = scan.to_rows()
        assert rows.shape == (20, len(scan.COLUMNS))
        np.testing.assert_array_equal(rows[:, 2], scan.cooling.astype(float))

    def test_bad_grid(self, detuned_spec):
        with pytest.raises(DomainError):
            cooling_scan(detuned_spec, InverseTemperature(1.0), np.array([1.0, 0.5]))

    def test_bad_time(self, detuned_spec):
        with pytest.raises(DomainError):
            cooling_condition(detuned_spec, InverseTemperature(1.0), 0.0)

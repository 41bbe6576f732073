"""Tests for coherent-state mathematics."""
import math

import numpy as np
import pytest

from app.errors import DomainError
from app.services.coherent_math import (
    LogScalar,
    PseudoPhotonSpec,
    analysis_report,
    avg_phase_pdf,
    bessel_i0,
    binary_entropy,
    log_factorial,
    min_error_probability,
    phase_pdf,
    phase_randomized_density,
    poisson_pmf,
    prob_excess_delta,
    pseudo_photon_prob,
    pseudo_photon_state,
    secrecy_epsilon,
    trace_distance_pseudo_fock,
    usd_probability,
)

LN10 = math.log(10)


def assert_log_magnitude(value: LogScalar, mantissa: float, exponent: int, rel: float = 0.05):
    """Exponent exact, mantissa within ``rel``."""
    got_mantissa, got_exponent = value.mantissa_exponent(digits=6)
    assert got_exponent == exponent
    assert got_mantissa == pytest.approx(mantissa, rel=rel)


class TestLogScalar:
    """Test log-space scalar arithmetic."""

    @pytest.mark.parametrize("p", [0.3, 1e-5, 1e-200, 2.5e-300])
    def test_round_trip(self, p):
        """Plain doubles survive a trip through log space."""
        assert LogScalar.from_float(p).to_float() == pytest.approx(p, rel=1e-12)

    def test_multiplication_adds_logs(self):
        a, b = LogScalar.from_float(3e-200), LogScalar.from_float(2e-150)
        assert (a * b).ln_value == pytest.approx(math.log(3e-200) + math.log(2e-150), rel=1e-14)

    def test_addition_uses_log_sum_exp(self):
        a, b = LogScalar.from_float(0.25), LogScalar.from_float(0.5)
        assert (a + b).to_float() == pytest.approx(0.75, rel=1e-14)

    def test_addition_far_below_double_range(self):
        """Summing two 1e-3000 magnitudes doubles them without underflow."""
        tiny = LogScalar.from_ln(-3000 * LN10)
        assert (tiny + tiny).ln_value == pytest.approx(tiny.ln_value + math.log(2), rel=1e-14)

    def test_zero_is_additive_identity(self):
        x = LogScalar.from_float(0.2)
        assert x + LogScalar.zero() == x
        assert (x * LogScalar.zero()).is_zero

    def test_division_subtracts_logs(self):
        a, b = LogScalar.from_ln(-4000.0), LogScalar.from_ln(-3990.0)
        assert (a / b).ln_value == pytest.approx(-10.0, rel=1e-14)
        assert (LogScalar.zero() / b).is_zero
        with pytest.raises(ZeroDivisionError):
            a / LogScalar.zero()

    def test_underflow_renders_zero_float(self):
        assert LogScalar.from_ln(-5000.0).to_float() == 0.0

    def test_render(self):
        value = LogScalar.from_ln(math.log(1.94) - 3657 * LN10)
        assert value.render() == "1.94e-3657"
        assert LogScalar.zero().render() == "0"

    def test_ordering(self):
        assert LogScalar.zero() < LogScalar.from_float(1e-300) < LogScalar.one()

    def test_rejects_negative(self):
        with pytest.raises(DomainError, match="nonnegative"):
            LogScalar.from_float(-1.0)


class TestFactorialsAndPoisson:
    """Test log-factorials and Poisson weights."""

    def test_small_factorials(self):
        assert log_factorial(0) == 0
        assert log_factorial(1) == 0

    def test_log_gamma_branch_matches_summation(self):
        exact = math.fsum(math.log(i) for i in range(1, 1025))
        assert log_factorial(1024) == pytest.approx(exact, rel=1e-12)

    def test_table_branch_matches_summation(self):
        exact = math.fsum(math.log(i) for i in range(1, 201))
        assert log_factorial(200) == pytest.approx(exact, rel=1e-12)

    def test_vacuum(self):
        assert poisson_pmf(0, 0) == LogScalar.one()

    def test_weak_pulse_vacuum(self):
        assert poisson_pmf(0.1, 0).to_float() == pytest.approx(math.exp(-0.1), rel=1e-14)

    def test_normalization(self):
        total = math.fsum(poisson_pmf(0.1, k).to_float() for k in range(201))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestPseudoPhotonNumber:
    """Test pseudo photon-number probabilities and their excess over Poisson."""

    def test_single_phase_holds_all_mass(self):
        assert pseudo_photon_prob(PseudoPhotonSpec(0.1, 1, 0)).to_float() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.05, 0.1, 0.5])
    @pytest.mark.parametrize("m", [4, 8, 16])
    def test_normalization(self, mu, m):
        total = math.fsum(pseudo_photon_prob(PseudoPhotonSpec(mu, m, k)).to_float() for k in range(m))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_reference_excess(self):
        """Delta(0.1, 1024, 0) = 1.85e-3664."""
        delta = prob_excess_delta(PseudoPhotonSpec(0.1, 1024, 0))
        assert delta.ln_value == pytest.approx(math.log(1.85) - 3664 * LN10, rel=0.01)
        assert_log_magnitude(delta, 1.85, -3664)

    def test_probability_is_poisson_times_excess(self):
        spec = PseudoPhotonSpec(0.1, 1024, 0)
        expected = poisson_pmf(0.1, 0).ln_value + prob_excess_delta(spec).log1p()
        assert pseudo_photon_prob(spec).ln_value == pytest.approx(expected, abs=1e-15)

    def test_no_excess_without_photons(self):
        assert prob_excess_delta(PseudoPhotonSpec(0, 8, 0)).is_zero

    def test_excess_largest_for_vacuum(self):
        first = prob_excess_delta(PseudoPhotonSpec(0.1, 8, 0))
        for k in range(8):
            assert prob_excess_delta(PseudoPhotonSpec(0.1, 8, k)) <= first

    def test_excess_against_direct_series(self):
        """Delta(0.1, 8, 1) = sum_l mu^{8l} 1! / (8l+1)!."""
        direct = math.fsum(0.1 ** (8 * l) / math.factorial(8 * l + 1) for l in range(1, 6))
        assert prob_excess_delta(PseudoPhotonSpec(0.1, 8, 1)).to_float() == pytest.approx(direct, rel=1e-12)

    def test_converges_to_poisson(self):
        """At m = 64 the relative gap is below 1e-80 for every k."""
        for k in range(64):
            delta = prob_excess_delta(PseudoPhotonSpec(0.1, 64, k))
            assert delta.ln_value < math.log(1e-80)

    def test_spec_validation(self):
        with pytest.raises(DomainError, match="0 <= k < m"):
            PseudoPhotonSpec(0.1, 4, 4)
        with pytest.raises(DomainError):
            PseudoPhotonSpec(-0.1, 4, 0)


class TestTraceDistanceAndSecrecy:
    """Test distances to Fock states and the discrete-randomization epsilon."""

    def test_reference_trace_distance(self):
        """D(0.1, 1024, 0) = 1.36e-1832."""
        assert_log_magnitude(trace_distance_pseudo_fock(PseudoPhotonSpec(0.1, 1024, 0)), 1.36, -1832)

    def test_identical_states_without_photons(self):
        assert trace_distance_pseudo_fock(PseudoPhotonSpec(0, 16, 0)).is_zero

    def test_squared_distance_identity(self):
        spec = PseudoPhotonSpec(0.1, 8, 1)
        delta = prob_excess_delta(spec)
        distance = trace_distance_pseudo_fock(spec)
        assert 2 * distance.ln_value == pytest.approx(delta.ln_value - math.log1p(delta.to_float()), rel=1e-12)

    def test_reference_epsilon(self):
        """epsilon(0.1, 1024) = 8.35e-3665."""
        assert_log_magnitude(secrecy_epsilon(0.1, 1024), 8.35, -3665)

    def test_epsilon_vacuum(self):
        assert secrecy_epsilon(0, 1024).is_zero

    def test_epsilon_identity(self):
        expected = -0.1 + 1024 * math.log(0.1) - log_factorial(1024) - math.log(2)
        assert secrecy_epsilon(0.1, 1024).ln_value == pytest.approx(expected, rel=1e-14)

    def test_epsilon_rejects_small_m(self):
        with pytest.raises(DomainError, match="large enough"):
            secrecy_epsilon(0.1, 50)


class TestPhaseDistributions:
    """Test the phase-probability density and its phase average."""

    grid = 2 * np.pi * np.arange(4096) / 4096

    def test_vacuum_is_uniform(self):
        assert np.allclose(phase_pdf(0.0, 0.0, self.grid), 1 / (2 * math.pi), rtol=0, atol=1e-15)

    def test_normalization(self):
        integral = np.mean(phase_pdf(0.1, 0.0, self.grid)) * 2 * math.pi
        assert integral == pytest.approx(1.0, abs=1e-9)

    def test_peak_at_signal_phase(self):
        density = phase_pdf(5.0, 1.0, self.grid)
        step = self.grid[1]
        assert abs(self.grid[np.argmax(density)] - 1.0) <= step

    def test_scalar_input_returns_float(self):
        assert isinstance(phase_pdf(0.1, 0.0, 0.5), float)

    def test_average_over_many_phases_is_uniform(self):
        xs = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        assert np.allclose(avg_phase_pdf(0.1, 1024, xs), 1 / (2 * math.pi), rtol=0, atol=1e-9)

    def test_average_vacuum(self):
        assert avg_phase_pdf(0.0, 4, 2.0) == pytest.approx(1 / (2 * math.pi), abs=1e-15)

    def test_average_strong_pulse(self):
        assert avg_phase_pdf(0.5, 2048, 1.3) == pytest.approx(1 / (2 * math.pi), abs=1e-9)

    @pytest.mark.parametrize("mu", [0.5, 1.0])
    @pytest.mark.parametrize("m", [256, 512])
    def test_average_uniform_grid(self, mu, m):
        xs = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        assert np.allclose(avg_phase_pdf(mu, m, xs), 1 / (2 * math.pi), rtol=0, atol=1e-9)


class TestStateDiscrimination:
    """Test unambiguous and minimum-error discrimination."""

    def test_usd_two_states(self):
        result = usd_probability(0.1, 2)
        assert result.exact == pytest.approx(1 - math.exp(-0.2), rel=1e-12)

    def test_usd_identical_states(self):
        assert usd_probability(0.0, 6).exact == pytest.approx(0.0, abs=1e-12)
        assert usd_probability(0.0, 6).approx.is_zero

    def test_usd_reference_magnitude(self):
        """P_USD(0.1, 1024) = 1.94e-3657; no exact value above the cancellation limit."""
        result = usd_probability(0.1, 1024)
        assert_log_magnitude(result.approx, 1.94, -3657)
        assert result.exact is None

    @pytest.mark.parametrize("m", [6, 8])
    def test_usd_exact_matches_asymptotic(self, m):
        result = usd_probability(0.1, m)
        approx = result.approx.to_float()
        assert abs(result.exact - approx) / approx < 0.1

    def test_usd_needs_two_states(self):
        with pytest.raises(DomainError):
            usd_probability(0.1, 1)

    def test_min_error_reference(self):
        assert min_error_probability(0.1, 1024) == pytest.approx(0.9983, abs=0.0005)

    @pytest.mark.parametrize("m", [2, 8, 1024])
    def test_min_error_identical_states(self, m):
        assert min_error_probability(0.0, m) == pytest.approx(1 - 1 / m, abs=1e-12)

    def test_min_error_single_state(self):
        assert min_error_probability(0.7, 1) == pytest.approx(0.0, abs=1e-12)

    def test_min_error_decreases_with_intensity(self):
        values = [min_error_probability(mu, 8) for mu in (0, 0.1, 0.5, 1.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_min_error_bounded(self):
        for mu in (0.05, 0.3, 2.0):
            assert 0.0 <= min_error_probability(mu, 16) <= 1.0


class TestSpecialFunctions:
    """Test Bessel I0 and binary entropy."""

    def test_bessel_origin(self):
        assert bessel_i0(0.0) == 1.0

    def test_bessel_small_argument(self):
        expected = sum((0.04 ** (2 * k)) / math.factorial(k) ** 2 for k in range(10))
        assert bessel_i0(0.08) == pytest.approx(expected, rel=1e-15)
        assert bessel_i0(0.08) == pytest.approx(1.0016, abs=1e-4)

    def test_bessel_against_quadrature(self):
        t = 2 * np.pi * np.arange(4096) / 4096
        assert bessel_i0(0.5) == pytest.approx(float(np.mean(np.exp(0.5 * np.cos(t)))), abs=1e-10)

    def test_entropy_values(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.25) == pytest.approx(0.8113, abs=1e-4)

    def test_entropy_domain(self):
        with pytest.raises(DomainError, match="probability"):
            binary_entropy(1.5)


class TestStatesAndReport:
    """Test explicit pseudo photon-number states and the bundled report."""

    def test_state_is_normalised(self):
        state = pseudo_photon_state(PseudoPhotonSpec(0.1, 4, 1), cutoff=40)
        assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)
        assert np.count_nonzero(state) == len(range(1, 40, 4))

    def test_density_decomposes_into_pseudo_states(self):
        mu, m, cutoff = 0.5, 4, 30
        rho = phase_randomized_density(mu, m, cutoff)
        rebuilt = np.zeros((cutoff, cutoff))
        for k in range(m):
            spec = PseudoPhotonSpec(mu, m, k)
            state = pseudo_photon_state(spec, cutoff)
            rebuilt += pseudo_photon_prob(spec).to_float() * np.outer(state, state)
        assert np.allclose(rho, rebuilt, rtol=0, atol=1e-12)

    def test_density_diagonal_when_m_exceeds_cutoff(self):
        rho = phase_randomized_density(0.3, 64, 20)
        assert np.allclose(rho - np.diag(np.diag(rho)), 0, atol=1e-12)

    def test_reference_report(self):
        report = analysis_report(0.1, 1024)
        assert report.p_min == pytest.approx(0.9983, abs=0.0005)
        assert report.random_guess_error == pytest.approx(1 - 1 / 1024, abs=1e-12)
        assert report.random_guess_error == pytest.approx(0.9990, abs=5e-5)
        assert_log_magnitude(report.p_usd, 1.94, -3657)
        assert_log_magnitude(report.trace_distance_k0, 1.36, -1832)
        assert_log_magnitude(report.delta_k0, 1.85, -3664)
        assert_log_magnitude(report.secrecy_epsilon, 8.35, -3665)

    def test_small_m_report(self):
        report = analysis_report(0.1, 8)
        assert report.p_usd_exact is not None
        assert report.secrecy_epsilon is None

"""Characteristic-equation layer: coefficient formulas, the frequency
branch, the phase identities, the crossing scan, and the stability
profile assembled from it."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gauselab.errors import DomainError, InvalidParams
from gauselab.model import Params, coexistence_prey, equilibria
from gauselab.spectral import (
    Crossing,
    EPlusStability,
    char_coeffs,
    char_eval,
    crossing_curves,
    crossing_frequency,
    hopf_candidates,
    omega_squared_branches,
    phase_angle,
    phase_cos,
    phase_sin,
    stability_profile,
    write_crossing_curves_csv,
)

P_REF = Params(s=0.02, Y=0.6, tau=0.0)
TAU_STAR = 50.0 * math.log(10.0)


def tau_grid(n=500):
    return np.linspace(0.0, TAU_STAR, n + 2)[1:-1]


class TestCoefficients:
    def test_zero_delay_values(self):
        cc = char_coeffs(P_REF, 0.0)
        assert cc.p == pytest.approx(0.02 + 1.0 / 30.0, rel=1e-14)
        assert cc.q == -0.02
        assert cc.c == pytest.approx(0.02 * 14.0 / 15.0, rel=1e-14)
        assert cc.alpha == pytest.approx(0.02 / 30.0, rel=1e-14)

    def test_closed_forms_in_terms_of_prey_level(self):
        for tau in tau_grid(40):
            cc = char_coeffs(P_REF, float(tau))
            xp = coexistence_prey(P_REF, float(tau))
            assert cc.p == pytest.approx(P_REF.s + xp, rel=1e-13)
            assert cc.q == -P_REF.s
            assert cc.c == pytest.approx(P_REF.s * (1.0 - 2.0 * xp), rel=1e-12, abs=1e-15)
            assert cc.alpha == pytest.approx(P_REF.s * xp, rel=1e-13)

    def test_constant_term_changes_sign_at_half_capacity_prey(self):
        tau_half = 50.0 * math.log(15.0)  # where the prey level reaches 1/2
        assert char_coeffs(P_REF, tau_half - 1.0).c > 0.0
        assert char_coeffs(P_REF, tau_half + 1.0).c < 0.0

    def test_constant_term_at_oscillation_cutoff(self):
        assert char_coeffs(P_REF, TAU_STAR).c == pytest.approx(P_REF.s / 3.0, rel=1e-10)

    def test_rejects_negative_delay(self):
        with pytest.raises(InvalidParams):
            char_coeffs(P_REF, -1.0)


class TestFrequencyBranch:
    def test_quadratic_residual_on_grid(self):
        for tau in tau_grid():
            cc = char_coeffs(P_REF, float(tau))
            plus, minus = omega_squared_branches(P_REF, float(tau))
            b = cc.p ** 2 - cc.q ** 2 - 2.0 * cc.alpha
            c0 = cc.alpha ** 2 - cc.c ** 2
            scale = max(plus * plus, abs(b) * plus, abs(c0), 1e-300)
            assert abs(plus * plus + b * plus + c0) / scale < 1e-10
            assert minus <= 0.0

    def test_frequency_positive_below_cutoff_absent_above(self):
        assert crossing_frequency(P_REF, 50.0) > 0.0
        assert crossing_frequency(P_REF, TAU_STAR) is None
        assert crossing_frequency(P_REF, TAU_STAR + 5.0) is None
        assert crossing_frequency(P_REF, TAU_STAR * (1.0 - 1e-6)) < 1e-2

    def test_no_frequency_when_death_rate_large(self):
        p = Params(s=0.25, Y=0.6, tau=0.0)  # prey level >= 1/3 for every delay
        for tau in (0.0, 1.0, 10.0):
            assert crossing_frequency(p, tau) is None

    def test_rejects_negative_delay(self):
        with pytest.raises(InvalidParams):
            crossing_frequency(P_REF, -2.0)


class TestPhaseIdentities:
    def test_pythagorean_identity_on_grid(self):
        for tau in tau_grid():
            w = crossing_frequency(P_REF, float(tau))
            h1 = phase_sin(P_REF, w, float(tau))
            h2 = phase_cos(P_REF, w, float(tau))
            assert abs(h1 * h1 + h2 * h2 - 1.0) < 1e-12
            assert h1 > 0.0

    def test_angle_matches_sine_branch(self):
        for tau in tau_grid(100):
            w = crossing_frequency(P_REF, float(tau))
            theta = phase_angle(P_REF, float(tau))
            assert math.sin(theta) == pytest.approx(phase_sin(P_REF, w, float(tau)), abs=1e-9)

    def test_angle_endpoint_is_pi(self):
        assert phase_angle(P_REF, TAU_STAR) == pytest.approx(math.pi, abs=1e-9)

    def test_angle_interior_range_and_continuity(self):
        prev = None
        for tau in np.linspace(0.5, TAU_STAR - 0.5, 200):
            theta = phase_angle(P_REF, float(tau))
            assert 0.0 < theta < math.pi
            if prev is not None:
                assert abs(theta - prev) < 0.2  # no branch jumps
            prev = theta

    def test_angle_domain_guard(self):
        with pytest.raises(DomainError):
            phase_angle(P_REF, -1.0)
        with pytest.raises(DomainError):
            phase_angle(P_REF, TAU_STAR + 1.0)

    @given(s=st.floats(min_value=0.005, max_value=0.2),
           ratio=st.floats(min_value=0.31, max_value=0.95),
           frac=st.floats(min_value=1e-3, max_value=0.999))
    @settings(max_examples=100)
    def test_identities_hold_across_parameters(self, s, ratio, frac):
        """For any parameters with an oscillatory window, the frequency
        solves its quadratic and the two phase values stay on the unit
        circle at every admissible delay."""
        p = Params(s=s, Y=s / (ratio / 3.0), tau=0.0)  # prey level at 0 = ratio/3 < 1/3
        tau_star = equilibria(p).tau_star
        assert tau_star > 0.0
        tau = frac * tau_star
        w = crossing_frequency(p, tau)
        assert w is not None and w > 0.0
        h1 = phase_sin(p, w, tau)
        h2 = phase_cos(p, w, tau)
        assert abs(h1 * h1 + h2 * h2 - 1.0) < 1e-10


class TestCharEval:
    def test_value_at_zero_is_scaled_predator_level(self):
        for tau in (0.0, 50.0, 100.0):
            eq = equilibria(Params(P_REF.s, P_REF.Y, tau))
            val = char_eval(P_REF, tau, 0.0)
            assert val.imag == 0.0
            assert val.real == pytest.approx(P_REF.s * eq.e_plus[1], rel=1e-10)

    def test_zero_delay_quadratic_roots(self):
        cc = char_coeffs(P_REF, 0.0)
        b, c0 = cc.p + cc.q, cc.alpha + cc.c
        disc = complex(b * b - 4.0 * c0) ** 0.5
        for lam in ((-b + disc) / 2.0, (-b - disc) / 2.0):
            assert abs(char_eval(P_REF, 0.0, lam)) < 1e-14

    def test_absent_state_is_a_domain_error(self):
        with pytest.raises(DomainError):
            char_eval(P_REF, 180.0, 0.0)


class TestCrossingScan:
    def test_reference_parameters_two_crossings(self):
        cands = hopf_candidates(P_REF)
        assert len(cands) == 2
        first, second = cands
        assert first.tau == pytest.approx(1.917, abs=0.01)
        assert second.tau == pytest.approx(108.365, abs=0.01)
        assert first.crossing is Crossing.LEFT_TO_RIGHT
        assert second.crossing is Crossing.RIGHT_TO_LEFT
        assert first.n == 0 and second.n == 0
        assert (first.j, second.j) == (1, 2)

    def test_small_death_rate_six_crossings(self):
        cands = hopf_candidates(Params(s=0.007, Y=0.6, tau=0.0))
        assert len(cands) == 6
        per_branch = {}
        for c in cands:
            per_branch[c.n] = per_branch.get(c.n, 0) + 1
        assert per_branch == {0: 2, 1: 2, 2: 2}

    def test_large_death_rate_no_crossings(self):
        assert hopf_candidates(Params(s=0.25, Y=0.6, tau=0.0)) == []

    def test_candidates_satisfy_root_conditions(self):
        for c in hopf_candidates(P_REF):
            assert abs(math.sin(c.tau * c.omega) - phase_sin(P_REF, c.omega, c.tau)) < 1e-8
            assert abs(math.cos(c.tau * c.omega) - phase_cos(P_REF, c.omega, c.tau)) < 1e-8
            assert abs(char_eval(P_REF, c.tau, 1j * c.omega)) < 1e-6
            assert c.tau * c.omega - phase_angle(P_REF, c.tau) - 2.0 * math.pi * c.n == (
                pytest.approx(0.0, abs=1e-7)
            )

    def test_grid_too_coarse_rejected(self):
        with pytest.raises(InvalidParams):
            hopf_candidates(P_REF, grid_points=8)


class TestStabilityProfile:
    def test_reference_interval_structure(self):
        prof = stability_profile(P_REF)
        labels = [lab for _, _, lab in prof.intervals]
        assert labels == [
            EPlusStability.STABLE,
            EPlusStability.UNSTABLE,
            EPlusStability.STABLE,
            EPlusStability.ABSENT,
        ]
        (a0, b0, _), (a1, b1, _), (a2, b2, _), (a3, b3, _) = prof.intervals
        assert a0 == 0.0
        assert b0 == pytest.approx(1.917, abs=0.01)
        assert b1 == pytest.approx(108.365, abs=0.01)
        assert b2 == pytest.approx(50.0 * math.log(30.0), rel=1e-9)
        assert math.isinf(b3)
        # contiguous partition
        assert (a1, a2, a3) == (b0, b1, b2)

    def test_profile_without_crossings(self):
        prof = stability_profile(Params(s=0.25, Y=0.6, tau=0.0))
        labels = [lab for _, _, lab in prof.intervals]
        assert labels == [EPlusStability.STABLE, EPlusStability.ABSENT]
        assert prof.candidates == ()

    def test_profile_when_state_never_exists(self):
        prof = stability_profile(Params(s=0.5, Y=0.1, tau=0.0))
        assert [lab for _, _, lab in prof.intervals] == [EPlusStability.ABSENT]


class TestCurveOutput:
    def test_curves_shapes_and_branch_count(self):
        taus, tw, theta, n_max = crossing_curves(P_REF, n_points=300)
        assert taus.shape == tw.shape == theta.shape == (300,)
        assert n_max == 0
        assert float(np.nanmax(theta)) <= math.pi + 1e-12

    def test_no_window_is_a_domain_error(self):
        with pytest.raises(DomainError):
            crossing_curves(Params(s=0.25, Y=0.6, tau=0.0))

    def test_csv_writer(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_crossing_curves_csv(str(path), P_REF, n_points=50, comment="probe")
        lines = path.read_text().splitlines()
        assert lines[0] == "# probe"
        assert lines[1].split(",")[:2] == ["tau", "tau_omega"]
        assert len(lines) == 52

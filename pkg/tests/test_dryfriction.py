"""Tests for the dry-friction oscillator, its switching family and the exclusion check."""

import math
import os
import sys
import unittest

import numpy as np

# Add the src and tests directories to path to allow imports
src_path = os.path.abspath(os.path.join(os.path.dirname(__file__), '../src'))
tests_path = os.path.abspath(os.path.dirname(__file__))
for path in (src_path, tests_path):
    if path not in sys.path:
        sys.path.insert(0, path)

from lipimpl.dryfriction import (
    TrajectoryCache,
    analytic_zeros,
    count_sign_changes,
    family_F,
    integrate_system,
    proposition_one_check,
    rotate,
    unrotate,
    verify_assumption_F,
)
from lipimpl.errors import (
    DeltaBallUnknown,
    MaxEventsExceeded,
    MultipleZerosInBracket,
    NoZeroInBracket,
    OutsideBall,
    StickDetected,
)
from lipimpl.models import DeltaScan, OscillatorSpec, SampleSpec
from lipimpl.perturbation import (
    empirical_lipschitz_quotient,
    estimate_assumption_constants,
    scan_delta_ladder,
    solve_theta,
)
from oracles import RelayOracle, theta_unperturbed

TWO_PI = 2.0 * math.pi


def first_switch(v1: float, eps: float) -> float:
    """First zero of u for x(0) = (v1, 0), v1 > 0, and g = 0."""
    return math.acos(eps / (v1 + eps))


class TestRotation(unittest.TestCase):

    def test_identity_at_zero(self):
        self.assertEqual(rotate(0.0, 0.3, -0.7), (0.3, -0.7))
        self.assertEqual(unrotate(0.0, 0.3, -0.7), (0.3, -0.7))

    def test_quarter_turn(self):
        u, u_dot = unrotate(math.pi / 2.0, 1.0, 0.0)
        self.assertAlmostEqual(u, 0.0, places=15)
        self.assertAlmostEqual(u_dot, -1.0, places=15)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(0.0, TWO_PI, 100)
        u, u_dot = rng.uniform(-1.0, 1.0, (2, 100))
        back = unrotate(t, *rotate(t, u, u_dot))
        np.testing.assert_allclose(back[0], u, rtol=0, atol=1e-14)
        np.testing.assert_allclose(back[1], u_dot, rtol=0, atol=1e-14)


class TestIntegrateSystem(unittest.TestCase):
    """Tests for the event-driven integrator."""

    def test_unperturbed_is_exact(self):
        v = np.array([0.3, -0.7])
        trajectory = integrate_system(OscillatorSpec(), v)
        np.testing.assert_array_equal(trajectory.states, np.tile(v, (trajectory.times.size, 1)))
        np.testing.assert_array_equal(trajectory.state_at(np.linspace(0.0, TWO_PI, 17)), np.tile(v, (17, 1)))
        self.assertIsNone(trajectory.y_field)
        self.assertEqual(trajectory.events, analytic_zeros(v, TWO_PI))

    def test_matches_closed_form(self):
        grid = np.linspace(0.0, TWO_PI, 2001)
        for eps in (1e-3, 1e-2, 1e-1):
            with self.subTest(eps=eps):
                spec = OscillatorSpec(eps=eps, rtol=1e-12, atol=1e-14)
                trajectory = integrate_system(spec, [1.0, 0.0])
                oracle = RelayOracle([1.0, 0.0], eps, TWO_PI)
                self.assertEqual(len(trajectory.events), len(oracle.events))
                for event, expected in zip(trajectory.events, oracle.events):
                    self.assertAlmostEqual(event, expected, delta=1e-10)
                self.assertAlmostEqual(trajectory.events[0], first_switch(1.0, eps), delta=1e-10)
                error = np.max(np.abs(trajectory.state_at(grid) - oracle.states(grid)))
                self.assertLessEqual(error, 1e-8)

    def test_default_tolerances_locate_first_switch(self):
        trajectory = integrate_system(OscillatorSpec(eps=0.01), [1.0, 0.0])
        self.assertAlmostEqual(trajectory.events[0], first_switch(1.0, 0.01), delta=1e-9)

    def test_rotation_consistency(self):
        trajectory = integrate_system(OscillatorSpec(eps=0.05), [1.0, 0.2])
        ts = np.linspace(0.0, TWO_PI, 501)
        states = trajectory.state_at(ts)
        u, u_dot = unrotate(ts, states[:, 0], states[:, 1])
        np.testing.assert_allclose(trajectory.switching_function(ts), u, rtol=0, atol=1e-14)
        np.testing.assert_allclose(trajectory.velocity(ts), u_dot, rtol=0, atol=1e-14)
        x1, x2 = rotate(ts, u, u_dot)
        np.testing.assert_allclose(np.column_stack([x1, x2]), states, rtol=0, atol=1e-14)

    def test_deviation_field_starts_at_zero(self):
        trajectory = integrate_system(OscillatorSpec(eps=0.1), [1.0, 0.0])
        np.testing.assert_array_equal(trajectory.y_field[0], [0.0, 0.0])

    def test_energy_is_conserved(self):
        # u^2/2 + u'^2/2 + eps |u| is a first integral when g = 0
        eps = 0.05
        trajectory = integrate_system(OscillatorSpec(eps=eps, rtol=1e-12, atol=1e-14), [1.0, 0.0])
        ts = np.linspace(0.0, TWO_PI, 1001)
        u, u_dot = trajectory.switching_function(ts), trajectory.velocity(ts)
        energy = 0.5 * u ** 2 + 0.5 * u_dot ** 2 + eps * np.abs(u)
        np.testing.assert_allclose(energy, 0.5 + eps, rtol=0, atol=1e-9)

    def test_stick_at_rest(self):
        with self.assertRaises(StickDetected):
            integrate_system(OscillatorSpec(eps=0.01), [0.0, 0.0])

    def test_max_events(self):
        spec = OscillatorSpec(eps=0.01, horizon=4.0 * math.pi, max_events=2)
        with self.assertRaises(MaxEventsExceeded):
            integrate_system(spec, [1.0, 0.0])

    def test_invalid_state(self):
        with self.assertRaises(ValueError):
            integrate_system(OscillatorSpec(), [1.0, 0.0, 0.0])

    def test_state_outside_horizon(self):
        trajectory = integrate_system(OscillatorSpec(eps=0.01), [1.0, 0.0])
        with self.assertRaises(ValueError):
            trajectory.state_at(TWO_PI + 0.1)

    def test_forcing_runs(self):
        trajectory = integrate_system(OscillatorSpec(eps=0.01, forcing="cos"), [1.0, 0.0])
        self.assertGreater(len(trajectory.events), 0)
        bound = math.sqrt(2.0) * TWO_PI * 2.0
        self.assertTrue(np.all(np.linalg.norm(trajectory.y_field, axis=1) <= bound))


class TestSwitchingFamily(unittest.TestCase):
    """Tests for family_F and the base switching time."""

    def test_base_switching_times(self):
        cases = [
            ((1.0, 0.0), 1.0, 2.0, math.pi / 2.0),
            ((1.0, 1.0), 2.0, 3.0, 3.0 * math.pi / 4.0),
            ((0.0, 1.0), 3.0, 3.5, math.pi),
        ]
        for v0, a, b, expected in cases:
            with self.subTest(v0=v0):
                family = family_F(OscillatorSpec(v0=v0, a=a, b=b))
                self.assertAlmostEqual(family.t0[0], expected, places=12)
                self.assertTrue(family.has_analytic_jacobians)

    def test_no_zero_in_bracket(self):
        with self.assertRaises(NoZeroInBracket):
            family_F(OscillatorSpec(v0=(1.0, 0.0), a=2.0, b=3.0))

    def test_two_zeros_in_bracket(self):
        spec = OscillatorSpec(v0=(1.0, 0.0), a=1.0, b=5.0)
        self.assertEqual(count_sign_changes(spec, spec.v0, 0.0), 2)
        with self.assertRaises(MultipleZerosInBracket):
            family_F(spec)

    def test_theta_matches_closed_form(self):
        family = family_F(OscillatorSpec())
        theta = solve_theta(family, [1.0, 0.0], [0.01])
        self.assertAlmostEqual(theta[0], first_switch(1.0, 0.01), delta=1e-8)

    def test_unique_zero_in_delta_ball(self):
        spec = OscillatorSpec()
        cache = TrajectoryCache(spec, spec.b)
        for v in ([1.0, 0.0], [1.007, 0.007], [0.993, -0.005], [1.0, 0.01]):
            for eps in (0.0, 1e-3, 1e-2):
                self.assertEqual(count_sign_changes(spec, v, eps, cache=cache), 1)

    def test_cache_reuses_trajectories(self):
        cache = TrajectoryCache(OscillatorSpec())
        first = cache.get([1.0, 0.0], 0.01)
        self.assertIs(cache.get([1.0, 0.0], 0.01), first)
        self.assertEqual(len(cache), 1)

    def test_modulus_bound_on_small_ball(self):
        family = family_F(OscillatorSpec())
        for eps in (0.0, 1e-3, 1e-2):
            with self.subTest(eps=eps):
                result = empirical_lipschitz_quotient(family, [eps], 1e-2, n_pairs=64, margin=0.1)
                self.assertAlmostEqual(result.R, 1.0, places=12)
                self.assertLessEqual(result.quotient_sup, 1.1)
                self.assertTrue(result.ine_ok)


class TestAssumptionF(unittest.TestCase):
    """Tests for the uniform bound and Lipschitz check on y = (x - v) / eps."""

    def test_ladder_is_uniform(self):
        report = verify_assumption_F(
            OscillatorSpec(), [1e-1, 1e-2, 1e-3], [(1.0, 0.0)], np.linspace(0.0, TWO_PI, 401)
        )
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.bound, math.sqrt(2.0) * TWO_PI, places=12)
        for rung in report.rungs:
            self.assertLessEqual(rung.sup_y, math.sqrt(2.0) * TWO_PI)
        self.assertLessEqual(report.lipschitz_spread, 0.2)

    def test_nonpositive_eps(self):
        with self.assertRaises(ValueError):
            verify_assumption_F(OscillatorSpec(), [0.1, 0.0], [(1.0, 0.0)], [0.0, 1.0])

    def test_several_v_samples(self):
        ts = np.linspace(0.0, TWO_PI, 201)
        single = verify_assumption_F(OscillatorSpec(), [1e-1, 1e-2], [(1.0, 0.0)], ts)
        several = verify_assumption_F(
            OscillatorSpec(), [1e-1, 1e-2], [(1.0, 0.0), (1.01, 0.0), (1.0, 0.01), (0.995, -0.005)], ts
        )
        for lone, joint in zip(single.rungs, several.rungs):
            self.assertTrue(math.isfinite(joint.lipschitz_y))
            self.assertGreaterEqual(joint.lipschitz_y, lone.lipschitz_y)
            self.assertGreaterEqual(joint.sup_y, lone.sup_y)

    def test_mixed_difference_constant_scales_with_eps(self):
        family = family_F(OscillatorSpec())
        spec = SampleSpec(n_t_pairs=16, v_radius=0.0, eps_values=[[0.1], [0.01], [0.001]])
        estimates = estimate_assumption_constants(family, spec, seed=1)
        values = [sample.value for sample in estimates.L_eps_v]
        for sample in estimates.L_eps_v:
            self.assertEqual(sample.v, [1.0, 0.0])
        self.assertGreater(values[-1], 0.0)
        for larger, smaller in zip(values, values[1:]):
            self.assertTrue(5.0 <= larger / smaller <= 20.0)
        self.assertTrue(estimates.shrinking_ok)


class TestExclusionCheck(unittest.TestCase):
    """Tests for proposition_one_check."""

    def test_unperturbed_degenerate_interval(self):
        spec = OscillatorSpec()
        family = family_F(spec)
        scan = scan_delta_ladder(family, [0.0], (1e-1, 1e-2), n_pairs=16)
        self.assertIsNotNone(scan.delta)
        report = proposition_one_check(spec, [1.0, 0.0], [1.0, 0.0], 0.0, 0.1, (40, 8), scan)
        self.assertAlmostEqual(report.theta, math.pi / 2.0, places=12)
        self.assertAlmostEqual(report.R, 1.0, places=12)
        self.assertEqual(report.exclusion_interval[0], report.exclusion_interval[1])
        self.assertGreater(report.min_abs_F, 0.0)
        self.assertTrue(report.nv_ok)

    def test_unperturbed_segment(self):
        spec = OscillatorSpec()
        family = family_F(spec)
        scan = scan_delta_ladder(family, [0.0], (1e-1, 1e-2), n_pairs=16)
        report = proposition_one_check(spec, [1.0, 0.0], [1.0, 0.01], 0.0, 0.1, (40, 8), scan)
        self.assertTrue(report.nv_ok)
        low, high = report.exclusion_interval
        self.assertAlmostEqual(high - low, 2.0 * 1.1 * 0.01, places=12)
        for zero, s in zip(report.zeros, np.linspace(0.0, 1.0, 8)):
            self.assertAlmostEqual(zero, theta_unperturbed([1.0, 0.01 * s]), delta=1e-10)
            self.assertTrue(low <= zero <= high)

    def test_perturbed_segment(self):
        spec = OscillatorSpec(eps=0.01)
        cache = TrajectoryCache(spec, spec.b + 0.5)
        family = family_F(spec, cache)
        scan = scan_delta_ladder(family, [0.01], (0.01,), n_pairs=16)
        self.assertEqual(scan.delta, 0.01)
        report = proposition_one_check(
            spec, [1.0, 0.0], [1.01, 0.0], 0.01, 0.1, (40, 8), scan, cache=cache
        )
        self.assertTrue(report.nv_ok)
        self.assertAlmostEqual(report.theta, first_switch(1.0, 0.01), delta=1e-8)
        for zero, s in zip(report.zeros, np.linspace(0.0, 1.0, 8)):
            self.assertAlmostEqual(zero, first_switch(1.0 + 0.01 * s, 0.01), delta=1e-8)

    def test_requires_certified_delta(self):
        spec = OscillatorSpec()
        with self.assertRaises(DeltaBallUnknown):
            proposition_one_check(spec, [1.0, 0.0], [1.0, 0.0], 0.0)
        uncertified = DeltaScan(eps=[0.0], margin=0.1, results=[], delta=None)
        with self.assertRaises(DeltaBallUnknown):
            proposition_one_check(spec, [1.0, 0.0], [1.0, 0.0], 0.0, delta_scan=uncertified)

    def test_outside_delta_ball(self):
        spec = OscillatorSpec()
        scan = DeltaScan(eps=[0.0], margin=0.1, results=[], delta=0.01)
        with self.assertRaises(OutsideBall):
            proposition_one_check(spec, [1.0, 0.0], [1.5, 0.0], 0.0, delta_scan=scan)
        with self.assertRaises(OutsideBall):
            proposition_one_check(spec, [1.0, 0.0], [1.0, 0.0], 0.05, delta_scan=scan)

    def test_perturbed_segment_on_full_grid(self):
        spec = OscillatorSpec(eps=0.01)
        cache = TrajectoryCache(spec, spec.b + 0.5)
        scan = scan_delta_ladder(family_F(spec, cache), [0.01], (0.01,), n_pairs=16)
        report = proposition_one_check(
            spec, [1.0, 0.0], [1.01, 0.0], 0.01, 0.1, (400, 40), scan, cache=cache
        )
        self.assertTrue(report.nv_ok)
        self.assertGreater(report.min_abs_F, 0.0)
        self.assertEqual(len(report.zeros), 40)
        low, high = report.exclusion_interval
        for zero in report.zeros:
            self.assertTrue(low - 1e-10 <= zero <= high + 1e-10)


if __name__ == '__main__':
    unittest.main()

"""Tests for the chord solver and its sampled certificates."""

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

from lipimpl.errors import (
    EmptySamples,
    LeftBall,
    MaxIterExceeded,
    NoContraction,
    OutsideBall,
    SingularJacobian,
)
from lipimpl.implicit import (
    ball_samples,
    contraction_scan,
    cross_lipschitz_scan,
    factorize,
    frozen_jacobian,
    implicit_derivative,
    search_alpha,
    solve_implicit,
)
from lipimpl.models import ImplicitProblem, SolverConfig
from lipimpl.perturbation import as_implicit_problem
from lipimpl.problems import get_problem
from oracles import cubic_root, theta_unperturbed


def build(name, **params):
    return get_problem(name)().build(**params)


class TestFrozenJacobian(unittest.TestCase):
    """Tests for the LU-factored Jacobian at the base point."""

    def test_affine_identity(self):
        jacobian = frozen_jacobian(build("affine"))
        np.testing.assert_array_equal(jacobian.matrix, [[1.0]])
        np.testing.assert_allclose(jacobian.inverse, [[1.0]])

    def test_cubic_at_origin(self):
        jacobian = frozen_jacobian(build("cubic"))
        self.assertEqual(jacobian.matrix[0, 0], 1.0)

    def test_cosine_form_at_quarter_turn(self):
        family = get_problem("trig_family")().build()
        jacobian = frozen_jacobian(as_implicit_problem(family))
        self.assertAlmostEqual(jacobian.matrix[0, 0], -1.0, places=14)

    def test_finite_difference_fallback(self):
        problem = ImplicitProblem(F=lambda x, y: y ** 3 + 2.0 * y - x, x0=[0.0], y0=[0.0], r=1.0)
        jacobian = frozen_jacobian(problem)
        self.assertAlmostEqual(jacobian.matrix[0, 0], 2.0, places=8)

    def test_singular_jacobian(self):
        with self.assertRaises(SingularJacobian):
            factorize(np.ones((2, 2)))
        with self.assertRaises(SingularJacobian):
            factorize(np.zeros((1, 1)))

    def test_singular_away_from_base_point(self):
        # F'_y = 1 - y^2 vanishes at the solution (2/3, 1)
        problem = ImplicitProblem(
            F=lambda x, y: y - y ** 3 / 3.0 - x,
            x0=[0.0],
            y0=[0.0],
            r=2.0,
            jac_y=lambda x, y: np.array([[1.0 - y[0] ** 2]]),
        )
        self.assertEqual(frozen_jacobian(problem).matrix[0, 0], 1.0)
        with self.assertRaises(SingularJacobian):
            implicit_derivative(problem, [2.0 / 3.0], [1.0])


class TestSolveImplicit(unittest.TestCase):
    """Tests for the chord iteration."""

    def test_affine_converges_in_one_update(self):
        y, certificate = solve_implicit(build("affine"), x=[0.3])
        self.assertEqual(y[0], 0.3)
        self.assertEqual(certificate.iterations, 1)
        self.assertTrue(certificate.ball_ok)

    def test_base_point_needs_no_update(self):
        y, certificate = solve_implicit(build("cubic"))
        self.assertEqual(y[0], 0.0)
        self.assertEqual(certificate.iterations, 0)

    def test_cubic_matches_bisection(self):
        problem = build("cubic")
        config = SolverConfig(alpha=0.5, beta=1.0)
        for x in np.linspace(-0.5, 0.5, 11):
            y, certificate = solve_implicit(problem, config, [x])
            self.assertAlmostEqual(y[0], cubic_root(x), delta=1e-10)
            self.assertLess(certificate.q_measured, 1.0)
            self.assertLessEqual(certificate.residual, 1e-10)

    def test_cubic_small_parameter(self):
        y, _ = solve_implicit(build("cubic"), x=[0.1])
        self.assertAlmostEqual(y[0], cubic_root(0.1), delta=1e-10)

    def test_cosine_form_at_diagonal(self):
        y, _ = solve_implicit(build("trig", v0=(1.0, 1.0)))
        self.assertAlmostEqual(y[0], 3.0 * math.pi / 4.0, places=12)

    def test_solution_is_read_only(self):
        y, _ = solve_implicit(build("affine"), x=[0.2])
        with self.assertRaises(ValueError):
            y[0] = 1.0

    def test_shared_jacobian(self):
        problem = build("cubic")
        jacobian = frozen_jacobian(problem)
        first, _ = solve_implicit(problem, x=[0.2], jacobian=jacobian)
        second, _ = solve_implicit(problem, x=[0.2])
        self.assertEqual(first[0], second[0])

    def test_outside_ball(self):
        with self.assertRaises(OutsideBall):
            solve_implicit(build("affine"), SolverConfig(alpha=0.5), [0.6])

    def test_radius_larger_than_r(self):
        with self.assertRaises(ValueError):
            solve_implicit(build("affine"), SolverConfig(alpha=2.0))

    def test_wrong_parameter_dimension(self):
        with self.assertRaises(ValueError):
            solve_implicit(build("affine"), x=[0.1, 0.2])

    def test_left_ball(self):
        with self.assertRaises(LeftBall):
            solve_implicit(build("cubic"), SolverConfig(alpha=1.0, beta=0.1), [0.5])

    def test_no_contraction(self):
        problem = ImplicitProblem(F=lambda x, y: 10.0 * y ** 3 + y - x, x0=[0.0], y0=[0.0], r=1e12)
        config = SolverConfig(alpha=2.0, beta=1e12)
        with self.assertRaises(NoContraction):
            solve_implicit(problem, config, [1.5])

    def test_steep_cubic_leaves_default_ball(self):
        problem = ImplicitProblem(F=lambda x, y: 10.0 * y ** 3 + y - x, x0=[0.0], y0=[0.0], r=2.0)
        with self.assertRaises(LeftBall):
            solve_implicit(problem, SolverConfig(alpha=2.0), [1.5])

    def test_max_iter(self):
        config = SolverConfig(alpha=1.0, beta=2.0, max_iter=2)
        with self.assertRaises(MaxIterExceeded):
            solve_implicit(build("cubic"), config, [0.5])

    def test_quadratic_solution_is_current(self):
        problem = ImplicitProblem(F=lambda x, y: y + 0.5 * y ** 2 - x, x0=[0.0], y0=[0.0], r=1.0)
        x = np.array([0.2])
        y, certificate = solve_implicit(problem, SolverConfig(alpha=0.5, beta=0.5), x)
        self.assertAlmostEqual(y[0], math.sqrt(1.4) - 1.0, places=12)
        self.assertEqual(certificate.residual, float(np.linalg.norm(problem.evaluate(x, y))))
        self.assertLessEqual(certificate.residual, 1e-12)

    def test_steps_decay_geometrically(self):
        config = SolverConfig(alpha=1.0, beta=2.0)
        _, certificate = solve_implicit(build("cubic"), config, [0.5])
        steps = certificate.step_norms
        self.assertEqual(len(steps), certificate.iterations)
        self.assertGreater(certificate.iterations, 5)
        self.assertLess(certificate.q_measured, 1.0)
        for previous, current in zip(steps, steps[1:]):
            if previous > config.step_tol:
                self.assertLessEqual(current, (certificate.q_measured + 0.05) * previous)

    def test_unique_root_in_ball(self):
        cases = [
            (build("affine"), SolverConfig(alpha=0.5, beta=1.0), [[-0.4321], [0.1234], [0.4567]]),
            (build("cubic"), SolverConfig(alpha=0.5, beta=1.0), [[-0.4321], [0.1234], [0.4567]]),
            (build("trig"), SolverConfig(alpha=0.5, beta=0.5), [[1.0, 0.1234], [0.9, -0.2345]]),
        ]
        for problem, config, xs in cases:
            ys = problem.y0[0] + np.linspace(-config.beta, config.beta, 1000)
            for x in xs:
                x = np.array(x)
                values = np.array([problem.evaluate(x, np.array([y]))[0] for y in ys])
                changes = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
                self.assertEqual(len(changes), 1)
                root, _ = solve_implicit(problem, config, x)
                self.assertLessEqual(ys[changes[0]], root[0])
                self.assertLessEqual(root[0], ys[changes[0] + 1])


class TestImplicitDerivative(unittest.TestCase):
    """Tests for -[F'_y]^-1 F'_x at a solution."""

    def test_affine(self):
        derivative = implicit_derivative(build("affine"), [0.3], [0.3])
        np.testing.assert_allclose(derivative, [[1.0]])

    def test_cubic_closed_form(self):
        y = cubic_root(0.1)
        derivative = implicit_derivative(build("cubic"), [0.1], [y])
        self.assertAlmostEqual(derivative[0, 0], 1.0 / (3.0 * y ** 2 + 1.0), places=10)

    def test_cosine_form_at_quarter_turn(self):
        derivative = implicit_derivative(build("trig"), [1.0, 0.0], [math.pi / 2.0])
        np.testing.assert_allclose(derivative, [[0.0, 1.0]], atol=1e-12)

    def test_not_a_solution(self):
        with self.assertRaises(ValueError):
            implicit_derivative(build("affine"), [0.3], [0.2])

    def test_cubic_against_finite_differences(self):
        problem = build("cubic")
        config = SolverConfig(alpha=1.0, beta=1.0)
        h = 1e-5
        for x in np.linspace(-0.45, 0.45, 10):
            y, _ = solve_implicit(problem, config, [x])
            forward, _ = solve_implicit(problem, config, [x + h])
            backward, _ = solve_implicit(problem, config, [x - h])
            expected = (forward[0] - backward[0]) / (2.0 * h)
            self.assertAlmostEqual(implicit_derivative(problem, [x], y)[0, 0], expected, delta=1e-6)

    def test_cosine_form_against_finite_differences(self):
        problem = build("trig")
        h = 1e-5
        for phase in np.linspace(0.0, 2.0 * math.pi, 10, endpoint=False):
            v = np.array([1.0 + 0.2 * math.cos(phase), 0.2 * math.sin(phase)])
            t, _ = solve_implicit(problem, x=v)
            self.assertAlmostEqual(t[0], theta_unperturbed(v), places=10)
            derivative = implicit_derivative(problem, v, t)
            for j in range(2):
                offset = np.zeros(2)
                offset[j] = h
                forward, _ = solve_implicit(problem, x=v + offset)
                backward, _ = solve_implicit(problem, x=v - offset)
                expected = (forward[0] - backward[0]) / (2.0 * h)
                self.assertAlmostEqual(derivative[0, j], expected, delta=1e-6)


class TestSampledCertificates(unittest.TestCase):
    """Tests for contraction_scan, cross_lipschitz_scan and search_alpha."""

    def test_affine_has_zero_contraction(self):
        q_hat = contraction_scan(build("affine"), None, [[0.0], [0.2], [-0.4]], np.linspace(-0.5, 0.5, 11))
        self.assertAlmostEqual(q_hat, 0.0, places=15)

    def test_scaled_affine_has_zero_contraction(self):
        problem = ImplicitProblem(
            F=lambda x, y: 2.0 * y - x, x0=[0.0], y0=[0.0], r=1.0, jac_y=lambda x, y: np.array([[2.0]])
        )
        q_hat = contraction_scan(problem, None, [[0.1], [-0.3]], np.linspace(-0.5, 0.5, 11))
        self.assertAlmostEqual(q_hat, 0.0, places=12)

    def test_cubic_contraction_within_analytic_bound(self):
        config = SolverConfig(alpha=0.1, beta=0.1)
        ys = np.linspace(-0.1, 0.1, 21)
        q_hat = contraction_scan(build("cubic"), config, [[0.0], [0.05], [-0.1]], ys)
        self.assertLessEqual(q_hat, 3 * 0.1 ** 2 + 1e-3)
        self.assertAlmostEqual(q_hat, 0.01, places=12)

    def test_samples_outside_ball(self):
        config = SolverConfig(alpha=0.1, beta=0.1)
        with self.assertRaises(OutsideBall):
            contraction_scan(build("cubic"), config, [[0.0]], [[0.2]])

    def test_only_base_samples(self):
        with self.assertRaises(EmptySamples):
            contraction_scan(build("cubic"), None, [[0.0]], [[0.0]])
        with self.assertRaises(EmptySamples):
            contraction_scan(build("cubic"), None, [], [[0.1]])

    def test_alpha_search_certifies_displacement(self):
        problem = build("cubic")
        config = SolverConfig(beta=0.1)
        result = search_alpha(problem, config, seed=0)
        self.assertTrue(result.certified)
        self.assertAlmostEqual(result.alpha, 0.0625)
        self.assertEqual(result.halvings, 5)
        self.assertLessEqual(result.q_hat, 3 * 0.1 ** 2 + 1e-3)
        for x in np.linspace(-result.alpha, result.alpha, 11):
            displacement = abs(x)  # A_x(y0) - y0 = x for the cubic with J = 1
            self.assertLessEqual(displacement, config.beta * (1.0 - result.q_hat))

    def test_alpha_search_reproducible(self):
        problem = build("trig")
        first = search_alpha(problem, SolverConfig(beta=0.3), seed=7)
        second = search_alpha(problem, SolverConfig(beta=0.3), seed=7)
        self.assertEqual(first, second)

    def test_cross_lipschitz_shrinks_with_x(self):
        problem = ImplicitProblem(F=lambda x, y: y + x * y, x0=[0.0], y0=[0.0], r=1.0)
        xs = [[0.4], [0.2], [0.1], [0.05]]
        values = cross_lipschitz_scan(problem, None, xs, np.linspace(-0.5, 0.5, 11))
        np.testing.assert_allclose(values, [0.4, 0.2, 0.1, 0.05], rtol=1e-12)

    def test_cross_lipschitz_vanishes_when_separable(self):
        values = cross_lipschitz_scan(build("cubic"), None, [[0.3], [-0.3]], np.linspace(-0.5, 0.5, 11))
        np.testing.assert_allclose(values, [0.0, 0.0], atol=1e-14)


class TestBallSamples(unittest.TestCase):

    def test_one_dimensional_grid(self):
        points = ball_samples([1.0], 0.5, 5, np.random.default_rng(0))
        np.testing.assert_allclose(points[:, 0], [0.5, 0.75, 1.0, 1.25, 1.5])

    def test_axis_points_first(self):
        points = ball_samples([0.0, 0.0], 0.2, 10, np.random.default_rng(0))
        self.assertEqual(points.shape, (10, 2))
        np.testing.assert_allclose(points[:4], [[0.2, 0.0], [0.0, 0.2], [-0.2, 0.0], [0.0, -0.2]])
        self.assertTrue(np.all(np.linalg.norm(points, axis=1) <= 0.2 + 1e-15))

    def test_seeded(self):
        first = ball_samples([0.0, 0.0, 0.0], 1.0, 20, np.random.default_rng(3))
        second = ball_samples([0.0, 0.0, 0.0], 1.0, 20, np.random.default_rng(3))
        np.testing.assert_array_equal(first, second)


if __name__ == '__main__':
    unittest.main()

"""Frozen-Jacobian (chord) solver for F(x, y) = 0 with contraction certificates."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import config as settings
from .errors import (
    EmptySamples,
    LeftBall,
    MaxIterExceeded,
    NoContraction,
    OutsideBall,
    SingularJacobian,
)
from .models import AlphaSearchResult, ContractionCertificate, ImplicitProblem, SolverConfig, as_vector

logger = logging.getLogger(__name__)

# Relative slack for membership tests on closed balls
BALL_SLACK = 1e-9


def finite_difference_jacobian(fun: Callable[[np.ndarray], np.ndarray], z: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` at ``z``."""
    z = np.asarray(z, dtype=float)
    columns = []
    for j in range(z.size):
        offset = np.zeros_like(z)
        offset[j] = step
        forward = np.atleast_1d(np.asarray(fun(z + offset), dtype=float))
        backward = np.atleast_1d(np.asarray(fun(z - offset), dtype=float))
        columns.append((forward - backward) / (2.0 * step))
    return np.column_stack(columns)


def ball_samples(center, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Deterministic sample points of the closed ball B_radius(center).

    Dimension 1 gets a uniform grid including both endpoints. Higher
    dimensions get the 2d axis points first, then uniform interior points.
    Returns an array of shape (n, d).
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    d = center.size
    if n <= 0:
        return np.empty((0, d))
    if d == 1:
        if n == 1:
            return center.reshape(1, 1).copy()
        return (center[0] + np.linspace(-radius, radius, n)).reshape(n, 1)

    axis = np.vstack([np.eye(d), -np.eye(d)]) * radius
    points = [center + axis[:n]]
    extra = n - axis.shape[0]
    if extra > 0:
        points.append(center + uniform_ball(d, radius, extra, rng))
    return np.vstack(points)


def uniform_ball(d: int, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points distributed uniformly in the d-dimensional ball around 0."""
    directions = rng.standard_normal((n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    scale = radius * rng.random(n) ** (1.0 / d)
    return directions * scale[:, None]


def inside_ball(point: np.ndarray, center: np.ndarray, radius: float) -> bool:
    return float(np.linalg.norm(point - center)) <= radius * (1.0 + BALL_SLACK)


@dataclass(frozen=True)
class FrozenJacobian:
    """F'_y at the base point with its LU factorization."""
    matrix: np.ndarray
    lu: Tuple[np.ndarray, np.ndarray]
    condition: float

    @property
    def inverse(self) -> np.ndarray:
        return lu_solve(self.lu, np.eye(self.matrix.shape[0]))

    def apply_inverse(self, b) -> np.ndarray:
        return lu_solve(self.lu, np.asarray(b, dtype=float))


def factorize(matrix: np.ndarray) -> FrozenJacobian:
    """LU-factor a square Jacobian, rejecting singular or ill-conditioned ones."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise SingularJacobian(f"Jacobian is not square: shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise SingularJacobian("Jacobian has non-finite entries")
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > settings.SINGULAR_CONDITION:
        raise SingularJacobian(f"Jacobian condition estimate {condition:.3e} exceeds {settings.SINGULAR_CONDITION:.0e}")
    return FrozenJacobian(matrix=matrix, lu=lu_factor(matrix), condition=condition)


def _fd_step(config: SolverConfig, *parts: np.ndarray) -> float:
    return config.fd_step * max(1.0, float(np.linalg.norm(np.concatenate(parts))))


def jacobian_y(problem: ImplicitProblem, x: np.ndarray, y: np.ndarray, config: SolverConfig) -> np.ndarray:
    """F'_y(x, y), analytic when the problem provides it."""
    if problem.jac_y is not None:
        return np.atleast_2d(np.asarray(problem.jac_y(x, y), dtype=float))
    return finite_difference_jacobian(lambda w: problem.evaluate(x, w), y, _fd_step(config, x, y))


def jacobian_x(problem: ImplicitProblem, x: np.ndarray, y: np.ndarray, config: SolverConfig) -> np.ndarray:
    """F'_x(x, y), analytic when the problem provides it."""
    if problem.jac_x is not None:
        return np.asarray(problem.jac_x(x, y), dtype=float).reshape(problem.m, problem.n)
    return finite_difference_jacobian(lambda w: problem.evaluate(w, y), x, _fd_step(config, x, y))


def frozen_jacobian(problem: ImplicitProblem, config: Optional[SolverConfig] = None) -> FrozenJacobian:
    """Factor J = F'_y(x0, y0)."""
    config = config or SolverConfig()
    jacobian = factorize(jacobian_y(problem, problem.x0, problem.y0, config))
    logger.debug("Frozen Jacobian for %s: condition %.3e", problem.name, jacobian.condition)
    return jacobian


def _check_radii(problem: ImplicitProblem, config: SolverConfig) -> None:
    if config.alpha > problem.r or config.beta > problem.r:
        raise ValueError(
            f"alpha={config.alpha} and beta={config.beta} must not exceed r={problem.r} for {problem.name}"
        )


def _parameter(problem: ImplicitProblem, x) -> np.ndarray:
    x = problem.x0 if x is None else as_vector(x)
    if x.size != problem.n:
        raise ValueError(f"x has dimension {x.size}, expected {problem.n}")
    return x


def solve_implicit(
    problem: ImplicitProblem,
    config: Optional[SolverConfig] = None,
    x=None,
    jacobian: Optional[FrozenJacobian] = None,
) -> Tuple[np.ndarray, ContractionCertificate]:
    """Solve F(x, y) = 0 for y by the chord iteration started at y0.

    Args:
        problem: Equation and base point
        config: Solver settings; defaults to ``SolverConfig()``
        x: Parameter in the alpha-ball around x0; defaults to x0
        jacobian: Precomputed frozen Jacobian, reused across calls

    Returns:
        Tuple of the solution y and its contraction certificate

    Raises:
        OutsideBall: If |x - x0| > alpha
        NoContraction: If three consecutive step ratios are at least 1
        MaxIterExceeded: If max_iter updates did not converge
        LeftBall: If an iterate leaves the beta-ball around y0
    """
    config = config or SolverConfig()
    _check_radii(problem, config)
    x = _parameter(problem, x)
    if not inside_ball(x, problem.x0, config.alpha):
        raise OutsideBall(
            f"|x - x0| = {np.linalg.norm(x - problem.x0):.3e} exceeds alpha = {config.alpha}"
        )
    jacobian = jacobian or frozen_jacobian(problem, config)

    y = problem.y0.copy()
    step_norms = []
    q_measured = 0.0
    growing = 0
    initial_displacement = 0.0
    iterations = 0
    while True:
        value = problem.evaluate(x, y)
        if not np.all(np.isfinite(value)):
            raise NoContraction(f"Non-finite residual after {iterations} iterations")
        residual = float(np.linalg.norm(value))
        correction = jacobian.apply_inverse(value)
        step = float(np.linalg.norm(correction))
        if iterations == 0:
            initial_displacement = step
        if residual <= config.residual_tol and step <= config.step_tol:
            # The last correction is below step_tol; apply it without counting an update
            y = y - correction
            residual = float(np.linalg.norm(problem.evaluate(x, y)))
            break
        if iterations >= config.max_iter:
            raise MaxIterExceeded(
                f"No convergence in {config.max_iter} iterations (residual {residual:.3e})"
            )

        # Ratios between noise-level steps carry no information
        if step_norms and step_norms[-1] > config.step_tol:
            ratio = step / step_norms[-1]
            q_measured = max(q_measured, ratio)
            growing = growing + 1 if ratio >= 1.0 else 0
            if growing >= settings.NO_CONTRACTION_RUN:
                raise NoContraction(
                    f"Step ratio >= 1 for {growing} consecutive steps (last {ratio:.3f})"
                )

        y = y - correction
        step_norms.append(step)
        iterations += 1
        if not inside_ball(y, problem.y0, config.beta):
            raise LeftBall(
                f"Iterate {iterations} left the beta-ball: |y - y0| = {np.linalg.norm(y - problem.y0):.3e} > {config.beta}"
            )

    certificate = ContractionCertificate(
        q_measured=q_measured,
        initial_displacement=initial_displacement,
        ball_ok=initial_displacement <= config.beta * (1.0 - q_measured),
        iterations=iterations,
        residual=residual,
        step_norms=step_norms,
    )
    logger.debug(
        "Solved %s in %d iterations: q=%.3e residual=%.3e", problem.name, iterations, q_measured, residual
    )
    y.flags.writeable = False
    return y, certificate


def implicit_derivative(
    problem: ImplicitProblem, x, y, config: Optional[SolverConfig] = None
) -> np.ndarray:
    """-[F'_y(x, y)]^-1 F'_x(x, y), an m x n matrix.

    Jacobians are evaluated at (x, y) itself, not at the base point.
    """
    config = config or SolverConfig()
    x = _parameter(problem, x)
    y = as_vector(y)
    residual = float(np.linalg.norm(problem.evaluate(x, y)))
    if residual > max(config.residual_tol, problem.residual_tol):
        raise ValueError(f"(x, y) is not a solution: |F(x, y)| = {residual:.3e}")
    factor = factorize(jacobian_y(problem, x, y, config))
    return -lu_solve(factor.lu, jacobian_x(problem, x, y, config))


def _as_samples(samples, dim: int, label: str) -> np.ndarray:
    array = np.asarray(samples, dtype=float)
    if array.size == 0:
        raise EmptySamples(f"No {label} samples given")
    if array.ndim <= 1:
        array = array.reshape(-1, dim)
    if array.shape[1] != dim:
        raise ValueError(f"{label} samples have dimension {array.shape[1]}, expected {dim}")
    return array


def _checked_samples(problem: ImplicitProblem, config: SolverConfig, x_samples, y_samples):
    xs = _as_samples(x_samples, problem.n, "x")
    ys = _as_samples(y_samples, problem.m, "y")
    for x in xs:
        if not inside_ball(x, problem.x0, config.alpha):
            raise OutsideBall(f"x sample {x} lies outside the alpha-ball of radius {config.alpha}")
    for y in ys:
        if not inside_ball(y, problem.y0, config.beta):
            raise OutsideBall(f"y sample {y} lies outside the beta-ball of radius {config.beta}")
    return xs, ys


def _contraction_ratio(problem: ImplicitProblem, jacobian: FrozenJacobian, xs: np.ndarray, ys: np.ndarray) -> float:
    q_hat = None
    for x in xs:
        anchor = problem.y0 - jacobian.apply_inverse(problem.evaluate(x, problem.y0))
        for y in ys:
            distance = float(np.linalg.norm(y - problem.y0))
            if distance <= settings.DEGENERATE_PAIR_DISTANCE:
                continue
            image = y - jacobian.apply_inverse(problem.evaluate(x, y))
            ratio = float(np.linalg.norm(image - anchor)) / distance
            q_hat = ratio if q_hat is None else max(q_hat, ratio)
    if q_hat is None:
        raise EmptySamples("Every y sample coincides with y0")
    return q_hat


def contraction_scan(
    problem: ImplicitProblem, config: Optional[SolverConfig], x_samples, y_samples
) -> float:
    """Sampled estimate of the contraction factor of y -> y - J^-1 F(x, y).

    Returns max |A_x(y) - A_x(y0)| / |y - y0| over the sample product,
    skipping y = y0.
    """
    config = config or SolverConfig()
    xs, ys = _checked_samples(problem, config, x_samples, y_samples)
    return _contraction_ratio(problem, frozen_jacobian(problem, config), xs, ys)


def cross_lipschitz_scan(
    problem: ImplicitProblem, config: Optional[SolverConfig], x_samples, y_samples
) -> np.ndarray:
    """Per-x constant of |F(x,y) - F(x,y0) - F(x0,y) + F(x0,y0)| <= L_x |y - y0|.

    Returns one value per x sample, in sample order.
    """
    config = config or SolverConfig()
    xs, ys = _checked_samples(problem, config, x_samples, y_samples)
    x0, y0 = problem.x0, problem.y0
    base = problem.evaluate(x0, y0)
    values = []
    for x in xs:
        shifted = problem.evaluate(x, y0)
        worst = 0.0
        for y in ys:
            distance = float(np.linalg.norm(y - y0))
            if distance <= settings.DEGENERATE_PAIR_DISTANCE:
                continue
            mixed = problem.evaluate(x, y) - shifted - problem.evaluate(x0, y) + base
            worst = max(worst, float(np.linalg.norm(mixed)) / distance)
        values.append(worst)
    return np.array(values)


def search_alpha(
    problem: ImplicitProblem,
    config: Optional[SolverConfig] = None,
    n_samples: int = 32,
    seed: int = 0,
    max_halvings: int = settings.MAX_ALPHA_HALVINGS,
) -> AlphaSearchResult:
    """Halve alpha from r until the sampled contraction certificate holds.

    Certified means q_hat <= q_target and every sampled x has
    |A_x(y0) - y0| <= beta (1 - q_hat).
    """
    config = config or SolverConfig()
    if config.beta > problem.r:
        raise ValueError(f"beta={config.beta} must not exceed r={problem.r}")
    rng = np.random.default_rng(seed)
    jacobian = frozen_jacobian(problem, config)
    ys = ball_samples(problem.y0, config.beta, n_samples, rng)

    alpha = problem.r
    q_hat = displacement = float("nan")
    for halvings in range(max_halvings + 1):
        xs = ball_samples(problem.x0, alpha, n_samples, rng)
        q_hat = _contraction_ratio(problem, jacobian, xs, ys)
        displacement = max(
            float(np.linalg.norm(jacobian.apply_inverse(problem.evaluate(x, problem.y0)))) for x in xs
        )
        logger.debug("alpha=%.3e q_hat=%.3e displacement=%.3e", alpha, q_hat, displacement)
        if q_hat <= config.q_target and displacement <= config.beta * (1.0 - q_hat):
            return AlphaSearchResult(
                alpha=alpha, q_hat=q_hat, max_displacement=displacement, halvings=halvings, certified=True
            )
        if halvings < max_halvings:
            alpha *= settings.ALPHA_SHRINK

    logger.info("No certified alpha for %s after %d halvings", problem.name, max_halvings)
    return AlphaSearchResult(
        alpha=alpha, q_hat=q_hat, max_displacement=displacement, halvings=max_halvings, certified=False
    )

"""Switching-time tracking theta(v, eps) for Lipschitz-perturbed families.

The family F(t, v, eps) = 0 is handed to the chord solver with the
parameter x = (v, eps) and the unknown y = t.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import config as settings
from .errors import AllPairsDegenerate, EmptySamples, NoRootInBall, OutsideBall
from .implicit import frozen_jacobian, solve_implicit, uniform_ball
from .models import (
    AssumptionEstimates,
    ConstantSample,
    DeltaScan,
    EpsConstant,
    ImplicitProblem,
    PerturbedFamily,
    SampleSpec,
    SolverConfig,
    ThetaResult,
    as_vector,
)

logger = logging.getLogger(__name__)


def as_implicit_problem(family: PerturbedFamily) -> ImplicitProblem:
    """View F(t, v, eps) as F(x, y) with x = (v, eps) and y = t."""
    k = family.v0.size

    def F(x, y):
        return family.F(y, x[:k], x[k:])

    jac_y = None
    if family.jac_t is not None:
        def jac_y(x, y):
            return family.jac_t(y, x[:k], x[k:])

    return ImplicitProblem(
        F=F,
        x0=np.concatenate([family.v0, family.eps0]),
        y0=family.t0,
        r=family.r,
        jac_y=jac_y,
        residual_tol=family.residual_tol,
        name=family.name,
    )


class ThetaTracker:
    """Solves for theta(v, eps) with one frozen Jacobian shared across calls.

    Safe to use from several threads once constructed.
    """

    def __init__(self, family: PerturbedFamily, config: Optional[SolverConfig] = None):
        self.family = family
        self.config = config or SolverConfig()
        self.problem = as_implicit_problem(family)
        self.jacobian = frozen_jacobian(self.problem, self.config)

    def parameter(self, v, eps) -> np.ndarray:
        v, eps = as_vector(v), as_vector(eps)
        if v.size != self.family.v0.size or eps.size != self.family.eps0.size:
            raise ValueError(
                f"Expected v in R^{self.family.v0.size} and eps in R^{self.family.eps0.size}"
            )
        return np.concatenate([v, eps])

    def solve(self, v, eps) -> np.ndarray:
        t, certificate = solve_implicit(self.problem, self.config, self.parameter(v, eps), self.jacobian)
        if not certificate.ball_ok:
            raise NoRootInBall(
                f"Ball certificate failed at v={np.asarray(v).tolist()}, eps={np.asarray(eps).tolist()}: "
                f"displacement {certificate.initial_displacement:.3e}, q {certificate.q_measured:.3f}"
            )
        return t


def solve_theta(family: PerturbedFamily, v, eps, config: Optional[SolverConfig] = None) -> np.ndarray:
    """theta(v, eps), the root t of F(t, v, eps) = 0 near t0."""
    return ThetaTracker(family, config).solve(v, eps)


def theoretical_modulus(family: PerturbedFamily, config: Optional[SolverConfig] = None) -> float:
    """R = |[F'_t]^-1 F'_v| at the base point, in the induced 2-norm."""
    config = config or SolverConfig()
    args = (family.t0, family.v0, family.eps0, config.fd_step)
    jac_t = family.derivative_t(*args)
    jac_v = family.derivative_v(*args)
    return float(np.linalg.norm(np.linalg.solve(jac_t, jac_v), 2))


def _draw_pairs(v0: np.ndarray, delta: float, n_pairs: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(seed)
    firsts = v0 + uniform_ball(v0.size, delta, n_pairs, rng)
    seconds = v0 + uniform_ball(v0.size, delta, n_pairs, rng)
    pairs = [
        (v1, v2) for v1, v2 in zip(firsts, seconds)
        if np.linalg.norm(v1 - v2) >= settings.DEGENERATE_PAIR_DISTANCE
    ]
    if not pairs:
        raise AllPairsDegenerate(f"All {n_pairs} sampled pairs are closer than {settings.DEGENERATE_PAIR_DISTANCE}")
    return pairs


def empirical_lipschitz_quotient(
    family: PerturbedFamily,
    eps,
    delta: float,
    n_pairs: int = settings.DEFAULT_N_PAIRS,
    seed: int = 0,
    config: Optional[SolverConfig] = None,
    margin: float = settings.DEFAULT_MARGIN,
    workers: int = 1,
) -> ThetaResult:
    """Sampled sup of |theta(v1, eps) - theta(v2, eps)| / |v1 - v2| over the delta-ball.

    Args:
        family: The perturbed family
        eps: Perturbation parameter held fixed for every pair
        delta: Radius of the ball around v0 the pairs are drawn from
        n_pairs: Number of uniform pairs to draw
        seed: Seed of the pair generator
        config: Solver settings
        margin: The Delta added to R in the verdict
        workers: Thread pool size for pair evaluations

    Returns:
        ThetaResult whose ine_ok is quotient_sup <= R + margin
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    tracker = ThetaTracker(family, config)
    eps = as_vector(eps)
    pairs = _draw_pairs(family.v0, delta, n_pairs, seed)

    def measure(pair):
        v1, v2 = pair
        distance = float(np.linalg.norm(v1 - v2))
        gap = tracker.solve(v1, eps) - tracker.solve(v2, eps)
        base_gap = tracker.solve(v1, family.eps0) - tracker.solve(v2, family.eps0)
        return float(np.linalg.norm(gap)) / distance, float(np.linalg.norm(gap - base_gap)) / distance

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            measured = list(executor.map(measure, pairs))
    else:
        measured = [measure(pair) for pair in pairs]

    quotient_sup = max(q for q, _ in measured)
    deviation_sup = max(d for _, d in measured)
    R = theoretical_modulus(family, tracker.config)
    logger.info(
        "%s eps=%s delta=%.1e: quotient %.6f vs R + margin = %.6f (%d pairs)",
        family.name, eps.tolist(), delta, quotient_sup, R + margin, len(pairs),
    )
    return ThetaResult(
        theta=tracker.solve(family.v0, eps).tolist(),
        eps=eps.tolist(),
        R=R,
        quotient_sup=quotient_sup,
        deviation_sup=deviation_sup,
        delta_used=delta,
        margin=margin,
        n_pairs_used=len(pairs),
        ine_ok=quotient_sup <= R + margin,
    )


def scan_delta_ladder(
    family: PerturbedFamily,
    eps,
    ladder: Sequence[float] = settings.DEFAULT_DELTA_LADDER,
    n_pairs: int = settings.DEFAULT_N_PAIRS,
    seed: int = 0,
    config: Optional[SolverConfig] = None,
    margin: float = settings.DEFAULT_MARGIN,
    workers: int = 1,
) -> DeltaScan:
    """Run the quotient check down a decreasing delta ladder.

    Each delta is clipped so that (v, eps) stays inside the solver's
    alpha-ball. The scan stops at the first passing delta, which is the
    largest one.
    """
    config = config or SolverConfig()
    eps = as_vector(eps)
    offset = float(np.linalg.norm(eps - family.eps0))
    room = config.alpha ** 2 - offset ** 2
    if room <= 0:
        raise OutsideBall(f"|eps - eps0| = {offset:.3e} leaves no room inside alpha = {config.alpha}")
    cap = float(np.sqrt(room))

    results = []
    passing = None
    for delta in sorted(ladder, reverse=True):
        used = min(delta, cap)
        result = empirical_lipschitz_quotient(family, eps, used, n_pairs, seed, config, margin, workers)
        results.append(result)
        if result.ine_ok:
            passing = used
            break
    if passing is None:
        logger.info("No delta in %s certifies the bound for %s", list(ladder), family.name)
    return DeltaScan(eps=eps.tolist(), margin=margin, results=results, delta=passing)


def _eps_v_samples(family: PerturbedFamily, spec: SampleSpec, rng: np.random.Generator):
    """(eps, v) points approaching the base point along one ray at geometric scales."""
    eps_direction = np.abs(rng.standard_normal(family.eps0.size))
    eps_direction /= np.linalg.norm(eps_direction)
    v_direction = rng.standard_normal(family.v0.size)
    v_direction /= np.linalg.norm(v_direction)
    if spec.eps_values is not None:
        eps_points = [as_vector(e) for e in spec.eps_values]
    else:
        eps_points = [
            family.eps0 + spec.eps_radius * spec.shrink ** i * eps_direction for i in range(spec.n_points)
        ]
    return [
        (eps, family.v0 + spec.v_radius * spec.shrink ** i * v_direction)
        for i, eps in enumerate(eps_points)
    ]


def _fit_line(distances: List[float], quotients: List[float]) -> Tuple[float, float]:
    """Least-squares (intercept, slope) of quotient against distance, clipped at 0."""
    if len(distances) < 2 or np.ptp(distances) == 0.0:
        return max(quotients), 0.0
    slope, intercept = np.polyfit(distances, quotients, 1)
    return max(float(intercept), 0.0), max(float(slope), 0.0)


def estimate_assumption_constants(
    family: PerturbedFamily,
    sample_spec: Optional[SampleSpec] = None,
    seed: int = 0,
) -> AssumptionEstimates:
    """Sampled estimates of the constants in the perturbation hypotheses.

    L_eps_v bounds how much the t-increments of F at (eps, v) differ from
    those at the base point. L_eps and K come from a linear fit of the corrected
    mixed difference quotient against |t1 - t2|. lipschitz_F is the largest
    difference quotient of F seen along the way, over t, v and eps increments.
    """
    spec = sample_spec or SampleSpec()
    rng = np.random.default_rng(seed)
    t0, v0, eps0 = family.t0, family.v0, family.eps0

    t_pairs = [
        (t0 + a, t0 + b)
        for a, b in zip(
            uniform_ball(t0.size, spec.t_radius, spec.n_t_pairs, rng),
            uniform_ball(t0.size, spec.t_radius, spec.n_t_pairs, rng),
        )
        if np.linalg.norm(a - b) >= settings.DEGENERATE_PAIR_DISTANCE
    ]
    eps_v = _eps_v_samples(family, spec, rng)
    if not t_pairs or not eps_v:
        raise EmptySamples("Sample spec yields no (t, t) pairs or no (eps, v) points")

    base_differences = [family.evaluate(t1, v0, eps0) - family.evaluate(t2, v0, eps0) for t1, t2 in t_pairs]
    lipschitz_F = 0.0

    L_eps_v = []
    for eps, v in eps_v:
        worst = 0.0
        for (t1, t2), base in zip(t_pairs, base_differences):
            difference = family.evaluate(t1, v, eps) - family.evaluate(t2, v, eps)
            distance = float(np.linalg.norm(t1 - t2))
            worst = max(worst, float(np.linalg.norm(difference - base)) / distance)
            lipschitz_F = max(lipschitz_F, float(np.linalg.norm(difference)) / distance)
        eps_distance = float(np.linalg.norm(eps - eps0))
        if eps_distance >= settings.DEGENERATE_PAIR_DISTANCE:
            for t1, _ in t_pairs:
                increment = family.evaluate(t1, v0, eps) - family.evaluate(t1, v0, eps0)
                lipschitz_F = max(lipschitz_F, float(np.linalg.norm(increment)) / eps_distance)
        L_eps_v.append(ConstantSample(eps=eps.tolist(), v=v.tolist(), value=worst))

    pool = max(1, spec.n_t_pairs // 8)
    v_pairs = [
        (v0 + a, v0 + b)
        for a, b in zip(
            uniform_ball(v0.size, spec.pair_radius, pool, rng),
            uniform_ball(v0.size, spec.pair_radius, pool, rng),
        )
        if np.linalg.norm(a - b) >= settings.DEGENERATE_PAIR_DISTANCE
    ]
    if not v_pairs:
        raise EmptySamples("Sample spec yields no (v, v) pairs")

    L_eps = []
    K = 0.0
    for eps, _ in eps_v:
        distances, quotients = [], []
        for t1, t2 in t_pairs:
            for v1, v2 in v_pairs:
                v_distance = float(np.linalg.norm(v2 - v1))
                upper = family.evaluate(t1, v2, eps) - family.evaluate(t1, v1, eps)
                lower = family.evaluate(t2, v2, eps0) - family.evaluate(t2, v1, eps0)
                distances.append(float(np.linalg.norm(t1 - t2)))
                quotients.append(float(np.linalg.norm(upper - lower)) / v_distance)
                lipschitz_F = max(lipschitz_F, float(np.linalg.norm(upper)) / v_distance)
        intercept, slope = _fit_line(distances, quotients)
        L_eps.append(EpsConstant(eps=eps.tolist(), value=intercept))
        K = max(K, slope)

    values = [sample.value for sample in L_eps_v]
    shrinking_ok = all(
        later <= earlier * (1.0 + settings.MONOTONE_NOISE) + settings.DEGENERATE_PAIR_DISTANCE
        for earlier, later in zip(values, values[1:])
    )
    logger.info("%s: K=%.3e lipschitz_F=%.3e shrinking_ok=%s", family.name, K, lipschitz_F, shrinking_ok)
    return AssumptionEstimates(L_eps_v=L_eps_v, L_eps=L_eps, K=K, lipschitz_F=lipschitz_F, shrinking_ok=shrinking_ok)

"""Dry-friction oscillator u'' + u = -eps sign(u) + eps g(t, u, u') in rotating coordinates.

With u = x1 cos t + x2 sin t and u' = -x1 sin t + x2 cos t the state
(x1, x2) is constant when eps = 0, and the switching function of the
family is F(t, v, eps) = u(t) along the solution started at x(0) = v.
"""
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45, OdeSolution
from scipy.optimize import bisect

from . import config as settings
from .errors import (
    DeltaBallUnknown,
    IntegrationFailed,
    MaxEventsExceeded,
    MultipleZerosInBracket,
    NoZeroInBracket,
    OutsideBall,
    StickDetected,
)
from .implicit import finite_difference_jacobian, inside_ball
from .models import (
    AssumptionFReport,
    AssumptionFRung,
    DeltaScan,
    OscillatorSpec,
    PerturbedFamily,
    SolverConfig,
    SwitchReport,
)
from .perturbation import solve_theta, theoretical_modulus

logger = logging.getLogger(__name__)

# Radius r of the switching-time family around (t0, v0, 0)
FAMILY_RADIUS = 1.0


def rotate(t, u, u_dot):
    """(u, u') at time t to rotating coordinates (x1, x2)."""
    c, s = np.cos(t), np.sin(t)
    return c * u - s * u_dot, s * u + c * u_dot


def unrotate(t, x1, x2):
    """Rotating coordinates (x1, x2) at time t back to (u, u')."""
    c, s = np.cos(t), np.sin(t)
    return c * x1 + s * x2, -s * x1 + c * x2


def _forcing(spec: OscillatorSpec, t, u, u_dot) -> np.ndarray:
    g = spec.forcing_function
    return np.broadcast_to(np.asarray(g(t, u, u_dot), dtype=float), np.shape(t))


@dataclass
class Trajectory:
    """Solution x(t) on [0, t_end] with a piecewise dense evaluator."""
    v: np.ndarray
    eps: float
    t_end: float
    times: np.ndarray
    states: np.ndarray
    events: List[float]
    segments: List[Tuple[float, OdeSolution]] = field(default_factory=list)

    @property
    def y_field(self) -> Optional[np.ndarray]:
        """(x - v) / eps at the stored times; None for the unperturbed system."""
        if self.eps == 0.0:
            return None
        return (self.states - self.v) / self.eps

    def state_at(self, t) -> np.ndarray:
        """x(t) for a scalar t (shape (2,)) or an array of times (shape (n, 2))."""
        t = np.asarray(t, dtype=float)
        times = np.atleast_1d(t).reshape(-1)
        tolerance = settings.EVENT_TIME_TOL * max(1.0, self.t_end)
        if times.size and (times.min() < -tolerance or times.max() > self.t_end + tolerance):
            raise ValueError(f"Times must lie in [0, {self.t_end}]")

        if not self.segments:
            out = np.tile(self.v, (times.size, 1))
        else:
            starts = np.array([start for start, _ in self.segments])
            index = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
            out = np.empty((times.size, 2))
            for i in np.unique(index):
                mask = index == i
                out[mask] = np.asarray(self.segments[i][1](times[mask])).T
        return out[0] if t.ndim == 0 else out

    def switching_function(self, t) -> np.ndarray:
        """u(t) = x1 cos t + x2 sin t."""
        t = np.asarray(t, dtype=float)
        states = np.atleast_2d(self.state_at(t))
        u = states[:, 0] * np.cos(np.atleast_1d(t)) + states[:, 1] * np.sin(np.atleast_1d(t))
        return u[0] if t.ndim == 0 else u

    def velocity(self, t) -> np.ndarray:
        """u'(t) = -x1 sin t + x2 cos t."""
        t = np.asarray(t, dtype=float)
        states = np.atleast_2d(self.state_at(t))
        u_dot = -states[:, 0] * np.sin(np.atleast_1d(t)) + states[:, 1] * np.cos(np.atleast_1d(t))
        return u_dot[0] if t.ndim == 0 else u_dot


def analytic_zeros(v, t_end: float) -> List[float]:
    """Zeros in (0, t_end] of v1 cos t + v2 sin t = |v| sin(t + phase)."""
    phase = math.atan2(float(v[0]), float(v[1]))
    k = math.floor(phase / math.pi) + 1
    zeros = []
    while k * math.pi - phase <= t_end:
        zeros.append(k * math.pi - phase)
        k += 1
    return zeros


def _check_transversal(spec: OscillatorSpec, t: float, u_dot: float) -> None:
    if abs(u_dot) <= spec.stick_tol and abs(float(_forcing(spec, t, 0.0, u_dot))) < 1.0:
        raise StickDetected(
            f"Sticking at t={t:.12f}: |u'|={abs(u_dot):.3e} and both one-sided fields point to u = 0"
        )


def _initial_mode(spec: OscillatorSpec, v: np.ndarray) -> float:
    if v[0] != 0.0:
        return math.copysign(1.0, v[0])
    _check_transversal(spec, 0.0, float(v[1]))
    if v[1] != 0.0:
        return math.copysign(1.0, v[1])
    return math.copysign(1.0, float(_forcing(spec, 0.0, 0.0, 0.0)))


def _advance(field, t_start: float, x_start: np.ndarray, t_stop: float, options: Dict[str, float]):
    """Integrate exactly from t_start to t_stop; returns step times, interpolants and the end state."""
    solver = RK45(field, t_start, x_start, t_stop, first_step=min(t_stop - t_start, options["max_step"]), **options)
    ts, interpolants = [], []
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationFailed(f"RK45 failed approaching t={t_stop:.12f}: {message}")
        ts.append(solver.t)
        interpolants.append(solver.dense_output())
    return ts, interpolants, solver.y.copy()


def integrate_system(spec: OscillatorSpec, v, t_end: Optional[float] = None) -> Trajectory:
    """Integrate the rotated oscillator from x(0) = v up to t_end (default: horizon).

    Each smooth piece is advanced by a Dormand-Prince RK45 stepper. A
    sign change of u on a step's dense output is refined by bisection,
    the step is redone exactly up to the event and integration restarts
    with the opposite sign of the friction term.

    Raises:
        StickDetected: On non-transversal contact with u = 0
        MaxEventsExceeded: When more than max_events switches occur
        IntegrationFailed: When the stepper fails
    """
    v = np.array(v, dtype=float).reshape(-1)
    if v.size != 2:
        raise ValueError(f"v must have two components, got {v.size}")
    t_end = spec.horizon if t_end is None else float(t_end)
    eps = float(spec.eps)

    if eps == 0.0:
        events = analytic_zeros(v, t_end)
        times = np.array(sorted({0.0, t_end, *events}))
        states = np.tile(v, (times.size, 1))
        return Trajectory(v=v, eps=0.0, t_end=t_end, times=times, states=states, events=events)

    mode = _initial_mode(spec, v)
    g = spec.forcing_function

    def field(t, x):
        u = x[0] * math.cos(t) + x[1] * math.sin(t)
        u_dot = -x[0] * math.sin(t) + x[1] * math.cos(t)
        f = eps * (-mode + g(t, u, u_dot))
        return np.array([-f * math.sin(t), f * math.cos(t)])

    def signed_u(t, x):
        return mode * (x[0] * np.cos(t) + x[1] * np.sin(t))

    stepper_options = dict(rtol=spec.rtol, atol=spec.atol, max_step=spec.max_step)
    times, states = [0.0], [v.copy()]
    events: List[float] = []
    segments: List[Tuple[float, OdeSolution]] = []
    t, x = 0.0, v.copy()

    while t < t_end:
        segment_start = t
        ts, interpolants = [t], []
        solver = RK45(field, t, x, t_end, **stepper_options)
        event = None
        while solver.status == "running":
            t_prev, x_prev = solver.t, solver.y.copy()
            message = solver.step()
            if solver.status == "failed":
                raise IntegrationFailed(f"RK45 failed at t={t_prev:.6f}: {message}")
            dense = solver.dense_output()
            probes = np.linspace(t_prev, solver.t, settings.EVENT_PROBES + 1)[1:]
            crossed = np.nonzero(signed_u(probes, dense(probes)) <= 0.0)[0]
            if crossed.size == 0:
                ts.append(solver.t)
                interpolants.append(dense)
                times.append(solver.t)
                states.append(solver.y.copy())
                continue

            first = crossed[0]
            left = probes[first - 1] if first > 0 else t_prev
            event = bisect(
                lambda s: signed_u(s, dense(s)),
                left,
                probes[first],
                xtol=settings.EVENT_TIME_TOL,
                maxiter=settings.EVENT_BISECTION_MAX_ITER,
                disp=False,
            )
            # Redo the partial step exactly up to the event, then correct the
            # event time once by Newton on the integrated state (du/dt = u')
            tail_ts, tail, x_event = _advance(field, t_prev, x_prev, event, stepper_options)
            u_event, u_dot_event = unrotate(event, x_event[0], x_event[1])
            if u_dot_event != 0.0:
                polished = event - u_event / u_dot_event
                if polished > t_prev and abs(polished - event) > settings.EVENT_TIME_TOL:
                    event = polished
                    tail_ts, tail, x_event = _advance(field, t_prev, x_prev, event, stepper_options)
            ts.extend(tail_ts)
            interpolants.extend(tail)
            times.append(event)
            states.append(x_event)
            break

        segments.append((segment_start, OdeSolution(ts, interpolants)))
        if event is None:
            break

        t, x = event, states[-1].copy()
        if segment_start > 0.0 and t - segment_start <= 1e3 * settings.EVENT_TIME_TOL:
            raise StickDetected(f"Immediate re-crossing of u = 0 at t={t:.12f}")
        _check_transversal(spec, t, float(unrotate(t, x[0], x[1])[1]))
        events.append(t)
        if len(events) > spec.max_events:
            raise MaxEventsExceeded(f"More than {spec.max_events} switches before t={t_end}")
        mode = -mode
        logger.debug("Switch %d at t=%.12f, mode now %+d", len(events), t, mode)

    return Trajectory(
        v=v,
        eps=eps,
        t_end=t_end,
        times=np.array(times),
        states=np.vstack(states),
        events=events,
        segments=segments,
    )


class TrajectoryCache:
    """Trajectories keyed by (v, eps), shared by the family F and its scans."""

    def __init__(self, spec: OscillatorSpec, t_end: Optional[float] = None):
        self.spec = spec
        self.t_end = spec.horizon if t_end is None else t_end
        self._items: Dict[Tuple[float, float, float], Trajectory] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._items)

    def get(self, v, eps: float) -> Trajectory:
        v = np.asarray(v, dtype=float).reshape(-1)
        key = (float(v[0]), float(v[1]), float(eps))
        with self._lock:
            cached = self._items.get(key)
        if cached is not None:
            return cached
        trajectory = integrate_system(self.spec.model_copy(update={"eps": float(eps)}), v, self.t_end)
        with self._lock:
            return self._items.setdefault(key, trajectory)


def _scan(spec: OscillatorSpec, cache: TrajectoryCache, v, eps: float, resolution: int):
    grid = np.linspace(spec.a, spec.b, resolution + 1)
    trajectory = cache.get(v, eps)
    return grid, trajectory, trajectory.switching_function(grid)


def _sign_brackets(grid: np.ndarray, values: np.ndarray) -> List[Tuple[float, float]]:
    nonzero = np.nonzero(values)[0]
    signs = np.sign(values[nonzero])
    flips = np.nonzero(signs[1:] != signs[:-1])[0]
    return [(grid[nonzero[i]], grid[nonzero[i + 1]]) for i in flips]


def count_sign_changes(
    spec: OscillatorSpec,
    v,
    eps: float,
    resolution: int = settings.SIGN_SCAN_RESOLUTION,
    cache: Optional[TrajectoryCache] = None,
) -> int:
    """Number of sign changes of F(., v, eps) on the grid over [a, b]."""
    cache = cache or TrajectoryCache(spec, spec.b)
    grid, _, values = _scan(spec, cache, v, eps, resolution)
    return len(_sign_brackets(grid, values))


def bracket_zeros(
    spec: OscillatorSpec,
    v,
    eps: float,
    resolution: int = settings.SIGN_SCAN_RESOLUTION,
    cache: Optional[TrajectoryCache] = None,
) -> List[float]:
    """Zeros of F(., v, eps) on [a, b], one per grid sign change, refined by bisection."""
    cache = cache or TrajectoryCache(spec, spec.b)
    grid, trajectory, values = _scan(spec, cache, v, eps, resolution)
    return [
        bisect(trajectory.switching_function, left, right, xtol=settings.EVENT_TIME_TOL)
        for left, right in _sign_brackets(grid, values)
    ]


def base_switching_time(spec: OscillatorSpec) -> float:
    """Analytic t0: the unique zero of v0 cos t + v0' sin t on [a, b]."""
    zeros = [t for t in analytic_zeros(spec.v0, spec.b) if t >= spec.a]
    count = count_sign_changes(spec, spec.v0, 0.0, cache=TrajectoryCache(spec, spec.b))
    if count == 0 or not zeros:
        raise NoZeroInBracket(f"F(., {list(spec.v0)}, 0) has no zero on [{spec.a}, {spec.b}]")
    if count > 1 or len(zeros) > 1:
        raise MultipleZerosInBracket(f"F(., {list(spec.v0)}, 0) has {max(count, len(zeros))} zeros on [{spec.a}, {spec.b}]")
    return zeros[0]


def family_F(spec: OscillatorSpec, cache: Optional[TrajectoryCache] = None) -> PerturbedFamily:
    """The switching family F(t, v, eps) = u(t; v, eps) around (t0, v0, 0).

    F'_t is u' along the solution, exact for every eps. F'_v is analytic
    at eps = 0 and a central difference otherwise.
    """
    t0 = base_switching_time(spec)
    if cache is None:
        cache = TrajectoryCache(spec, max(spec.b, t0 + FAMILY_RADIUS))

    def F(t, v, eps):
        return np.atleast_1d(cache.get(v, eps[0]).switching_function(t[0]))

    def jac_t(t, v, eps):
        return np.array([[cache.get(v, eps[0]).velocity(t[0])]])

    def jac_v(t, v, eps):
        if eps[0] == 0.0:
            return np.array([[math.cos(t[0]), math.sin(t[0])]])
        step = settings.DEFAULT_FD_STEP * max(1.0, float(np.linalg.norm(v)))
        return finite_difference_jacobian(lambda w: F(t, w, eps), v, step)

    logger.debug("Switching family for v0=%s: t0=%.12f", list(spec.v0), t0)
    return PerturbedFamily(
        F=F,
        t0=[t0],
        v0=list(spec.v0),
        eps0=[0.0],
        r=FAMILY_RADIUS,
        jac_t=jac_t,
        jac_v=jac_v,
        name=f"dryfriction[{spec.forcing}]",
    )


def verify_assumption_F(
    spec: OscillatorSpec,
    eps_ladder: Sequence[float],
    v_samples: Sequence[Sequence[float]],
    t_samples: Sequence[float],
) -> AssumptionFReport:
    """Check x(t, v, eps) = v + eps y(t, v, eps) with y bounded and Lipschitz uniformly in eps.

    For each eps the sup of |y| and the largest difference quotient of y in
    (t, v) over the grid are recorded. The check passes when both vary by at
    most 20% across the ladder and every sup respects the a priori bound.
    """
    if not eps_ladder or any(eps <= 0 for eps in eps_ladder):
        raise ValueError("Assumption (F) needs a nonempty ladder of positive eps")
    ts = np.sort(np.asarray(t_samples, dtype=float))
    vs = [np.asarray(v, dtype=float).reshape(-1) for v in v_samples]
    if ts.size < 2 or not vs:
        raise ValueError("Need at least two t samples and one v sample")
    t_end = float(ts[-1])

    rungs = []
    forcing_sup = 0.0
    for eps in eps_ladder:
        cache = TrajectoryCache(spec, t_end)
        fields = []
        for v in vs:
            trajectory = cache.get(v, eps)
            states = trajectory.state_at(ts)
            u, u_dot = unrotate(ts, states[:, 0], states[:, 1])
            forcing_sup = max(forcing_sup, float(np.max(np.abs(_forcing(spec, ts, u, u_dot)))))
            fields.append((states - v) / eps)

        sup_y = max(float(np.max(np.linalg.norm(y, axis=1))) for y in fields)
        steps = np.diff(ts)
        lipschitz = max(float(np.max(np.linalg.norm(np.diff(y, axis=0), axis=1) / steps)) for y in fields)
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                distance = float(np.linalg.norm(vs[i] - vs[j]))
                if distance > settings.DEGENERATE_PAIR_DISTANCE:
                    gap = np.linalg.norm(fields[i] - fields[j], axis=1)
                    lipschitz = max(lipschitz, float(np.max(gap)) / distance)
        rungs.append(AssumptionFRung(eps=eps, sup_y=sup_y, lipschitz_y=lipschitz))
        logger.info("eps=%.1e: sup|y|=%.6f Lip(y)=%.6f", eps, sup_y, lipschitz)

    def spread(values: List[float]) -> float:
        top = max(values)
        return (top - min(values)) / top if top > 0 else 0.0

    bound = math.sqrt(2.0) * t_end * (1.0 + forcing_sup)
    sup_spread = spread([rung.sup_y for rung in rungs])
    lipschitz_spread = spread([rung.lipschitz_y for rung in rungs])
    return AssumptionFReport(
        rungs=rungs,
        bound=bound,
        sup_spread=sup_spread,
        lipschitz_spread=lipschitz_spread,
        passed=(
            sup_spread <= settings.ASSUMPTION_F_SPREAD
            and lipschitz_spread <= settings.ASSUMPTION_F_SPREAD
            and all(rung.sup_y <= bound for rung in rungs)
        ),
    )


def proposition_one_check(
    spec: OscillatorSpec,
    v1,
    v2,
    eps: float,
    margin: float = settings.DEFAULT_MARGIN,
    grid: Tuple[int, int] = settings.DEFAULT_NV_GRID,
    delta_scan: Optional[DeltaScan] = None,
    config: Optional[SolverConfig] = None,
    cache: Optional[TrajectoryCache] = None,
) -> SwitchReport:
    """Certify that F(., v, eps) vanishes on [a, b] only near theta(v1, eps).

    The exclusion interval is theta(v1, eps) +- (R + margin) |v1 - v2|.
    On a grid of [a, b] times the segment [v1, v2], |F| must stay positive
    outside the interval, and each slice must have exactly one zero inside
    it.

    Raises:
        DeltaBallUnknown: Without a delta scan that certified some delta
        OutsideBall: If v1, v2 or eps leave the certified delta-ball
    """
    if delta_scan is None or delta_scan.delta is None:
        raise DeltaBallUnknown("No certified delta: run the delta ladder scan first")
    delta = delta_scan.delta
    v0 = np.asarray(spec.v0, dtype=float)
    v1 = np.asarray(v1, dtype=float).reshape(-1)
    v2 = np.asarray(v2, dtype=float).reshape(-1)
    for label, point in (("v1", v1), ("v2", v2)):
        if not inside_ball(point, v0, delta):
            raise OutsideBall(f"{label}={point.tolist()} lies outside the delta-ball of radius {delta}")
    if abs(eps) > delta * (1.0 + 1e-9):
        raise OutsideBall(f"eps={eps} lies outside the delta-ball of radius {delta}")

    config = config or SolverConfig()
    if cache is None:
        cache = TrajectoryCache(spec, max(spec.b, base_switching_time(spec) + FAMILY_RADIUS))
    family = family_F(spec, cache)
    theta = float(solve_theta(family, v1, [eps], config)[0])
    R = theoretical_modulus(family, config)
    half_width = (R + margin) * float(np.linalg.norm(v1 - v2))
    low, high = theta - half_width, theta + half_width

    n_t, n_v = grid
    ts = np.linspace(spec.a, spec.b, n_t)
    outside = (ts < low) | (ts > high)
    min_abs_F = math.inf
    zeros: List[Optional[float]] = []
    nv_ok = True
    for s in np.linspace(0.0, 1.0, n_v):
        v = v1 + s * (v2 - v1)
        values = cache.get(v, eps).switching_function(ts)
        if outside.any():
            min_abs_F = min(min_abs_F, float(np.min(np.abs(values[outside]))))
        found = bracket_zeros(spec, v, eps, cache=cache)
        if len(found) == 1 and low - settings.ZERO_LOCATION_SLACK <= found[0] <= high + settings.ZERO_LOCATION_SLACK:
            zeros.append(found[0])
        else:
            logger.info("Slice v=%s has zeros %s outside [%.12f, %.12f]", v.tolist(), found, low, high)
            zeros.append(found[0] if len(found) == 1 else None)
            nv_ok = False

    if not math.isfinite(min_abs_F):
        min_abs_F = 0.0
        nv_ok = False
    nv_ok = nv_ok and min_abs_F > 0.0
    return SwitchReport(
        theta=theta,
        R=R,
        margin=margin,
        delta=delta,
        eps=eps,
        v1=v1.tolist(),
        v2=v2.tolist(),
        exclusion_interval=(low, high),
        min_abs_F=min_abs_F,
        zeros=zeros,
        nv_ok=nv_ok,
    )
